// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include "fixtures.hpp"

#include <gwb/gwb.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace gwb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(GWB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string cfg(const std::string& name) { return std::string(GWB_CONFIG_DIR) + "/" + name; }

// Shared expensive runs.
const VerifyReport& disordered_verify() {
  static const VerifyReport r = run_verify(fixtures::disordered(12));
  return r;
}

const RunReport& pipeline_of(const std::string& which) {
  static std::map<std::string, RunReport> cache;
  auto it = cache.find(which);
  if (it != cache.end()) return it->second;
  PipelineConfig c;
  if (which == "disordered") c = fixtures::disordered(12);
  if (which == "trivial") c = fixtures::haldane(4.0, 12);
  if (which == "topological") c = fixtures::haldane(0.0, 12);
  if (which == "ssh") c = fixtures::ssh(32);
  if (which == "atomic") c = fixtures::atomic(8);
  return cache.emplace(which, run_pipeline(c)).first->second;
}

std::string num(double v) { return fmt(v); }

}  // namespace

int main() {
  criterion(1, "projector-validity", [] {
    double idem = 0, herm = 0;
    int n = 0;
    auto check = [&](const TightBindingModel& m) {
      auto p = fermi_projector(m, 0.0);
      idem = std::max(idem, p.idempotency_defect());
      herm = std::max(herm, p.hermiticity());
      ++n;
    };
    for (int L : {8, 12}) {
      check(build_haldane(L, 1.0, 1.0 / 3, std::numbers::pi / 2, 0.0));
      check(build_haldane(L, 1.0, 1.0 / 3, std::numbers::pi / 2, 4.0));
      check(build_haldane(L, 0.0, 0.0, 0.0, 1.0));
      for (std::uint64_t seed : {1u, 7u, 13u}) check(build_disordered_insulator(L, 2.0, 0.5, seed));
    }
    for (int L : {16, 32}) check(build_ssh_chain(L, 1.0, 0.5));
    return Outcome{idem <= 1e-10 && herm <= 1e-12,
                   std::to_string(n) + " models, max ||P^2-P||=" + num(idem) + " max ||P-P*||=" + num(herm)};
  });

  criterion(2, "kernel-decay", [] {
    bool ok = true;
    std::string d;
    for (auto [name, make] : std::vector<std::pair<std::string, std::function<PipelineConfig(int)>>>{
             {"trivial", [](int L) { return fixtures::haldane(4.0, L); }},
             {"disordered", [](int L) { return fixtures::disordered(L); }}}) {
      DecayProfile k[3];
      const int Ls[3] = {8, 12, 16};
      for (int i = 0; i < 3; ++i) k[i] = kernel_decay_fit(fermi_projector(build_model(make(Ls[i])), 0.0));
      double shrink = 1.0 - k[2].gamma / k[0].gamma;
      ok = ok && k[1].gamma > 0 && k[1].r_squared >= 0.9 && shrink <= 0.2;
      d += name + ": gamma(12)=" + num(k[1].gamma) + " R2=" + num(k[1].r_squared) + " shrink8->16=" + num(shrink) + "; ";
    }
    return Outcome{ok, d};
  });

  criterion(3, "ssh-pxp-exponential", [] {
    auto m = build_ssh_chain(32, 1.0, 0.5);
    auto p = fermi_projector(m, 0.0);
    auto b = initial_basis(p, {BasisMode::pxp_eigen, 0.0, 4.0, {1.0}});
    double min_g = 1e300, min_r2 = 1e300;
    int bad = 0;
    for (int a = 0; a < b.size(); ++a) {
      auto f = fit_exponential(b.functions.col(a), m.grid, b.centers[a]);
      min_g = std::min(min_g, f.gamma);
      if (f.flag != DecayFlag::compact_support) min_r2 = std::min(min_r2, f.r_squared);
      if (!f.exponential()) ++bad;
    }
    return Outcome{bad == 0, std::to_string(b.size()) + " functions, min gamma=" + num(min_g) + " min R2=" + num(min_r2)};
  });

  criterion(4, "integer-spectrum", [] {
    double worst = 0;
    std::string d;
    for (const char* w : {"disordered", "trivial", "topological", "ssh", "atomic"}) {
      const auto& r = pipeline_of(w);
      if (!r.xtilde) return Outcome{false, std::string(w) + " produced no X-tilde"};
      worst = std::max(worst, r.xtilde->integer_defect);
    }
    return Outcome{worst <= 1e-8, "5 pipeline runs, max integer distance=" + num(worst)};
  });

  criterion(5, "xhat-structure", [] {
    auto pb = prepare_basis(fixtures::disordered(12), 12);
    auto xt = build_xtilde(pb.basis, pb.P, pb.X);
    double herm = 0;
    bool banded = true;
    for (double D : {4.0, 8.0, 16.0}) {
      auto xh = build_xhat(xt, FilterSpec(D), pb.X, pb.Y);
      herm = std::max(herm, hermiticity_defect(xh.matrix));
      for (Eigen::Index j = 0; j < xh.matrix.cols(); ++j)
        for (Eigen::Index i = 0; i < xh.matrix.rows(); ++i)
          if (std::abs(pb.X(i) - pb.X(j)) >= D || std::abs(pb.Y(i) - pb.Y(j)) >= D)
            banded = banded && xh.matrix(i, j) == cplx(0.0);
    }
    auto pa = prepare_basis(fixtures::atomic(8), 8);
    auto xa = build_xtilde(pa.basis, pa.P, pa.X);
    bool diag = (xa.matrix - Mat(xa.matrix.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    double same = (build_xhat(xa, FilterSpec(4.0), pa.X, pa.Y).matrix - xa.matrix).cwiseAbs().maxCoeff();
    return Outcome{herm <= 1e-12 && banded && diag && same == 0.0,
                   "hermiticity=" + num(herm) + " zero beyond Delta=" + fmt(banded) + " atomic Xhat-Xtilde=" + num(same)};
  });

  criterion(6, "closeness", [] {
    auto* s = disordered_verify().find("closeness");
    return Outcome{s && s->pass, s ? "relative spread over L=8,12,16: " + num(s->metric) : "missing"};
  });

  criterion(7, "tilt-lipschitz", [] {
    auto* s = disordered_verify().find("tilt-lipschitz");
    return Outcome{s && s->pass, s ? "max/min over gamma of sup ratio: " + num(s->metric) : "missing"};
  });

  criterion(8, "gap-certificate", [] {
    auto* s = disordered_verify().find("certificate-sweep");
    const auto& r = pipeline_of("disordered");
    bool ok = s && s->pass && r.chosen_delta && r.gap_clearance >= 0.05;
    return Outcome{ok, s ? "log-log slope=" + num(s->metric) + " passing Delta=" +
                               (r.chosen_delta ? num(*r.chosen_delta) : "none") + " clearance=" + num(r.gap_clearance)
                         : "missing"};
  });

  criterion(9, "end-to-end-witness", [] {
    const auto& r = pipeline_of("disordered");
    double min_g = 1e300, min_r2 = 1e300;
    bool fits = !r.finals.empty();
    for (const auto& f : r.finals) {
      fits = fits && f.fit.gamma > 0 && (f.fit.flag == DecayFlag::compact_support || f.fit.r_squared >= 0.9);
      min_g = std::min(min_g, f.fit.gamma);
      min_r2 = std::min(min_r2, f.fit.r_squared);
    }
    bool ok = r.verdict == Verdict::exponential_basis_constructed && r.final_orthonormality <= 1e-8 &&
              r.final_completeness <= 1e-8 && fits && r.prepared && r.prepared->P.rank == static_cast<int>(r.finals.size());
    return Outcome{ok, std::string(to_string(r.verdict)) + ", " + std::to_string(r.finals.size()) +
                           " functions, ortho=" + num(r.final_orthonormality) + " compl=" + num(r.final_completeness) +
                           " min gamma=" + num(min_g) + " min R2=" + num(min_r2)};
  });

  criterion(10, "topological-contrast", [] {
    const auto& topo = pipeline_of("topological");
    const auto& triv = pipeline_of("trivial");
    bool topo_fails = topo.verdict == Verdict::certificate_failed || topo.verdict == Verdict::gap_detection_failed;
    // Every Delta in the sweep must fail at some lambda (or the pipeline stopped at gap detection).
    std::map<double, bool> all_pass;
    for (const auto& c : topo.certificates) {
      auto it = all_pass.emplace(c.Delta, true).first;
      it->second = it->second && c.pass;
    }
    bool every_delta_fails = all_pass.size() == 3;
    for (const auto& [D, p] : all_pass) every_delta_fails = every_delta_fails && !p;
    if (topo.verdict == Verdict::gap_detection_failed) every_delta_fails = true;
    bool ok = topo_fails && every_delta_fails && triv.verdict == Verdict::exponential_basis_constructed;
    return Outcome{ok, std::string("topological: ") + to_string(topo.verdict) + ", trivial: " + to_string(triv.verdict)};
  });

  criterion(11, "chern-marker", [] {
    auto run = [](double m) {
      auto model = build_haldane(16, 1.0, 1.0 / 3, std::numbers::pi / 2, m);
      return chern_marker(fermi_projector(model, 0.0).P, model.grid, 4).value;
    };
    double topo = run(0.0), triv = run(4.0);
    int n = chern_number_kspace(1.0, 1.0 / 3, std::numbers::pi / 2, 0.0);
    auto g = SiteGrid::make(16, 2, 2);
    double z = chern_marker(Mat::Zero(g.size(), g.size()), g, 4).value;
    double i = chern_marker(Mat::Identity(g.size(), g.size()), g, 4).value;
    bool ok = std::abs(triv) <= 0.05 && std::abs(topo - n) <= 0.1 && z == 0.0 && i == 0.0;
    return Outcome{ok, "topological C=" + num(topo) + " (k-space " + std::to_string(n) + "), trivial C=" + num(triv) +
                           ", P=0 -> " + num(z) + ", P=I -> " + num(i)};
  });

  criterion(12, "proven-inequality-suites", [] {
    const auto& v = disordered_verify();
    bool ok = true;
    std::string d;
    for (const char* name : {"decay-lemma", "prod-sum-lemma", "schur-test", "schur-model"}) {
      auto* s = v.find(name);
      ok = ok && s && s->pass && s->failures == 0;
      if (s) d += std::string(name) + " " + std::to_string(s->failures) + "/" + std::to_string(s->instances) + "; ";
    }
    for (const char* name : {"sqrt-bound-survey", "sqrt-bound-lambda-spread", "tilted-comm-survey"}) {
      auto* s = v.find(name);
      ok = ok && s && s->pass;
      if (s) d += std::string(name) + " " + num(s->metric) + "; ";
    }
    return Outcome{ok, d};
  });

  criterion(13, "determinism", [] {
    fs::path root = fs::temp_directory_path() / ("gwb_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::string>> runs{{"pipeline", "disordered.conf"},
                                                                {"verify", "disordered.conf"},
                                                                {"chern", "haldane_trivial.conf"},
                                                                {"model", "disordered.conf"}};
    int files = 0;
    for (const auto& [sub, conf] : runs) {
      for (const char* tag : {"a", "b"}) {
        int rc = run_cli(sub + " " + cfg(conf) + " --out " + (root / sub / tag).string());
        if (rc != 0) return Outcome{false, sub + " exited " + std::to_string(rc)};
      }
      for (const auto& e : fs::directory_iterator(root / sub / "a")) {
        if (slurp(e.path()) != slurp(root / sub / "b" / e.path().filename()))
          return Outcome{false, sub + ": " + e.path().filename().string() + " differs"};
        ++files;
      }
    }
    fs::remove_all(root);
    return Outcome{files > 0, std::to_string(files) + " output files byte-identical across 4 subcommands"};
  });

  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
