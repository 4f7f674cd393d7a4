#include <gwb/gwb.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum Exit { ok = 0, config_error = 2, inequality_failure = 3, verdict_failure = 4 };

gwb::PipelineConfig load(const std::string& path, const std::optional<std::string>& out,
                         const std::optional<long>& seed) {
  gwb::ConfigFile f = gwb::ConfigFile::load(path);
  gwb::PipelineConfig c = gwb::config_from(f);
  if (out) c.out_dir = *out;
  if (seed) {
    if (*seed < 0) throw gwb::Error(gwb::ErrorKind::config, "--seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(*seed);
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exponentially localized generalized Wannier bases on finite lattices"};
  app.require_subcommand(1);
  std::string config;
  std::optional<std::string> out;
  std::optional<long> seed;
  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config, "config file")->required();
    sub->add_option("--out", out, "output directory (overrides [output] dir)");
    sub->add_option("--seed", seed, "model seed (overrides [model] seed)");
    return sub;
  };
  auto* pipeline = add("pipeline", "run the full construction and write its reports");
  auto* verify = add("verify", "run the inequality suites and sweeps");
  auto* chern = add("chern", "Chern marker windows plus the k-space oracle");
  auto* model = add("model", "dump H as WDMX");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? Exit::ok : Exit::config_error;
  }

  gwb::PipelineConfig cfg;
  try {
    cfg = load(config, out, seed);
  } catch (const gwb::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return Exit::config_error;
  }

  try {
    if (pipeline->parsed()) {
      auto r = gwb::run_pipeline(cfg);
      for (const auto& s : r.stages) std::cout << (s.ok ? "ok   " : "FAIL ") << s.stage << "  " << s.detail << '\n';
      std::cout << "verdict: " << gwb::to_string(r.verdict) << '\n';
      return r.ok() ? Exit::ok : Exit::verdict_failure;
    }
    if (verify->parsed()) {
      auto r = gwb::run_verify(cfg);
      for (const auto& s : r.suites)
        std::cout << (s.pass ? "pass " : "FAIL ") << s.suite << (s.proven ? " [proven]" : "") << "  " << s.metric_name
                  << "=" << gwb::fmt(s.metric) << "  failures=" << s.failures << "/" << s.instances << '\n';
      return r.proven_ok() ? Exit::ok : Exit::inequality_failure;
    }
    if (chern->parsed()) {
      auto r = gwb::run_chern(cfg);
      for (const auto& m : r.markers)
        std::cout << "window " << m.Lw << "  C = " << gwb::fmt(m.value) << "  imag = " << gwb::fmt(m.imag_residual) << '\n';
      if (r.kspace) std::cout << "k-space Chern number " << *r.kspace << '\n';
      return Exit::ok;
    }
    if (model->parsed()) {
      auto m = gwb::run_model(cfg);
      std::cout << "wrote H (" << m.H.rows() << " x " << m.H.cols() << ")\n";
      return Exit::ok;
    }
  } catch (const gwb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Exit::config_error;
  }
  return Exit::ok;
}
