#pragma once

#include "config.hpp"
#include "core.hpp"
#include "diagnostics.hpp"
#include "dichotomy.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "localization.hpp"
#include "spectral.hpp"
#include "xhat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace gwb {

struct PipelineConfig {
  std::string model_type;
  int L = 0;
  double t1 = 1.0, t2 = 0.0, phi = 0.0, m = 0.0;
  double gap = 2.0, w = 0.0, hop = -1.0;
  std::uint64_t seed = 0;

  double fermi_energy = 0.0;
  BasisMode basis_mode = BasisMode::columns;
  double tail_eps = 0.0;
  double tail_power = 4.0;
  std::vector<double> s_grid{1.0, 2.0, 3.0};
  std::vector<double> deltas{4.0, 8.0, 16.0};
  double delta_default = 8.0;
  std::vector<double> gammas{0.025, 0.05, 0.1, 0.2};
  double d_min = 0.25;
  double D_max = 0.5;
  std::string lambda_rule = "midpoints";
  double strip_gamma = 0.1;
  double min_r2 = 0.9;

  std::vector<int> chern_windows{2, 3, 4};

  int trials = 1000;
  std::uint64_t verify_seed = 20240611;
  std::vector<int> l_sweep;
  double pointwise_s = 3.0;
  double pointwise_ceiling = 1e3;

  std::string out_dir = "out";
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> k{
      "model.type",          "model.L",           "model.t1",           "model.t2",         "model.phi",
      "model.m",             "model.gap",         "model.w",            "model.hop",        "model.seed",
      "pipeline.fermi_energy", "pipeline.basis_mode", "pipeline.tail_eps", "pipeline.tail_power",
      "pipeline.s_grid",     "pipeline.delta",    "pipeline.delta_default", "pipeline.gamma", "pipeline.d_min",
      "pipeline.D_max",      "pipeline.lambda",   "pipeline.strip_gamma", "pipeline.min_r2", "chern.windows",
      "verify.trials",       "verify.seed",       "verify.l_sweep",     "verify.pointwise_s",
      "verify.pointwise_ceiling", "output.dir"};
  return k;
}

inline std::vector<int> to_ints(const std::vector<double>& v, const std::string& key) {
  std::vector<int> out;
  for (double d : v) {
    if (d != std::round(d)) throw Error(ErrorKind::config, key + " must hold integers");
    out.push_back(static_cast<int>(d));
  }
  return out;
}

}  // namespace detail

inline void validate(const PipelineConfig& c) {
  static const std::set<std::string> types{"haldane", "disordered", "ssh", "atomic"};
  if (!types.count(c.model_type)) throw Error(ErrorKind::config, "model.type must be haldane, disordered, ssh or atomic");
  if (c.L < 4) throw Error(ErrorKind::config, "model.L must be >= 4");
  if (c.s_grid.empty() || c.deltas.empty() || c.gammas.empty() || c.chern_windows.empty() || c.l_sweep.empty())
    throw Error(ErrorKind::config, "list settings must be nonempty");
  for (double d : c.deltas)
    if (!(d >= 2.0)) throw Error(ErrorKind::config, "every Delta must be >= 2");
  if (!(c.delta_default >= 2.0)) throw Error(ErrorKind::config, "delta_default must be >= 2");
  for (double g : c.gammas)
    if (!(g > 0)) throw Error(ErrorKind::config, "gammas must be positive");
  for (double s : c.s_grid)
    if (!(s > 0)) throw Error(ErrorKind::config, "s values must be positive");
  for (int l : c.l_sweep)
    if (l < 4) throw Error(ErrorKind::config, "l_sweep sizes must be >= 4");
  if (!(c.d_min > 0) || !(c.D_max > 0)) throw Error(ErrorKind::config, "d_min and D_max must be positive");
  if (c.lambda_rule != "midpoints") throw Error(ErrorKind::config, "pipeline.lambda supports only 'midpoints'");
  if (c.trials < 1) throw Error(ErrorKind::config, "verify.trials must be positive");
  if (c.model_type == "disordered" && !(c.w < c.gap)) throw Error(ErrorKind::config, "disorder w must be below gap");
}

inline PipelineConfig config_from(const ConfigFile& f) {
  if (!f.has_section("model")) throw Error(ErrorKind::config, "config has no [model] section or it is empty");
  for (const auto& k : f.keys())
    if (!detail::known_keys().count(k)) throw Error(ErrorKind::config, "unknown key " + k);
  PipelineConfig c;
  c.model_type = f.str("model.type");
  c.L = static_cast<int>(f.integer("model.L", 0));
  c.t1 = f.num("model.t1", c.t1);
  c.t2 = f.num("model.t2", c.t2);
  c.phi = f.num("model.phi", c.phi);
  c.m = f.num("model.m", c.model_type == "atomic" ? 1.0 : c.m);
  c.gap = f.num("model.gap", c.gap);
  c.w = f.num("model.w", c.w);
  c.hop = f.num("model.hop", c.hop);
  long seed = f.integer("model.seed", 0);
  if (seed < 0) throw Error(ErrorKind::config, "model.seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.fermi_energy = f.num("pipeline.fermi_energy", c.fermi_energy);
  std::string mode = f.str("pipeline.basis_mode", "columns");
  if (mode == "columns") c.basis_mode = BasisMode::columns;
  else if (mode == "pxp-eigen") c.basis_mode = BasisMode::pxp_eigen;
  else throw Error(ErrorKind::config, "pipeline.basis_mode must be columns or pxp-eigen");
  c.tail_eps = f.num("pipeline.tail_eps", c.tail_eps);
  c.tail_power = f.num("pipeline.tail_power", c.tail_power);
  c.s_grid = f.list("pipeline.s_grid", c.s_grid);
  c.deltas = f.list("pipeline.delta", c.deltas);
  c.delta_default = f.num("pipeline.delta_default", c.delta_default);
  c.gammas = f.list("pipeline.gamma", c.gammas);
  c.d_min = f.num("pipeline.d_min", c.d_min);
  c.D_max = f.num("pipeline.D_max", c.D_max);
  c.lambda_rule = f.str("pipeline.lambda", c.lambda_rule);
  c.strip_gamma = f.num("pipeline.strip_gamma", c.strip_gamma);
  c.min_r2 = f.num("pipeline.min_r2", c.min_r2);
  c.chern_windows = detail::to_ints(f.list("chern.windows", {2, 3, 4}), "chern.windows");
  c.trials = static_cast<int>(f.integer("verify.trials", c.trials));
  long vseed = f.integer("verify.seed", static_cast<long>(c.verify_seed));
  if (vseed < 0) throw Error(ErrorKind::config, "verify.seed must be non-negative");
  c.verify_seed = static_cast<std::uint64_t>(vseed);
  c.l_sweep = detail::to_ints(f.list("verify.l_sweep", {static_cast<double>(c.L)}), "verify.l_sweep");
  c.pointwise_s = f.num("verify.pointwise_s", c.pointwise_s);
  c.pointwise_ceiling = f.num("verify.pointwise_ceiling", c.pointwise_ceiling);
  c.out_dir = f.str("output.dir", c.out_dir);
  validate(c);
  return c;
}

inline PipelineConfig load_config(const std::string& path) { return config_from(ConfigFile::load(path)); }

inline TightBindingModel build_model(const PipelineConfig& c, int L) {
  if (c.model_type == "haldane") return build_haldane(L, c.t1, c.t2, c.phi, c.m);
  if (c.model_type == "atomic") return build_haldane(L, 0.0, 0.0, 0.0, c.m);
  if (c.model_type == "disordered") return build_disordered_insulator(L, c.gap, c.w, c.seed, c.hop);
  if (c.model_type == "ssh") return build_ssh_chain(L, c.t1, c.t2);
  throw Error(ErrorKind::config, "unknown model type " + c.model_type);
}

inline TightBindingModel build_model(const PipelineConfig& c) { return build_model(c, c.L); }

inline std::string model_id(const PipelineConfig& c, int L) {
  std::string id = c.model_type + "-L" + std::to_string(L);
  if (c.model_type == "disordered") id += "-seed" + std::to_string(c.seed);
  return id;
}

inline Metadata metadata(const PipelineConfig& c, int L, const std::string& delta) {
  return {{"model", c.model_type}, {"seed", fmt(c.seed)}, {"L", fmt(L)}, {"Delta", delta}};
}

/// Default tilt anchors: the sample center and two corners.
inline std::vector<Point> default_anchors(const SiteGrid& g) {
  double c = g.center();
  double top = g.dim == 2 ? g.L - 1.0 : 0.0;
  return {{c, g.dim == 2 ? c : 0.0}, {0.0, 0.0}, {g.L - 1.0, top}};
}

inline std::vector<double> lambda_grid(const SiteGrid& g) { return gap_midpoints(0.0, g.L - 1.0); }

/// A basis relabelled onto the lattice, with the projector and coordinates it came from.
struct PreparedBasis {
  TightBindingModel model;
  Projector P;
  RVec X, Y;
  GeneralizedWannierBasis raw;
  GeneralizedWannierBasis basis;
  int density_M = 0;
};

inline PreparedBasis prepare_basis(const PipelineConfig& c, int L) {
  PreparedBasis pb;
  pb.model = build_model(c, L);
  std::tie(pb.X, pb.Y) = position_operators(pb.model);
  pb.P = fermi_projector(pb.model, c.fermi_energy);
  pb.raw = initial_basis(pb.P, {c.basis_mode, c.tail_eps, c.tail_power, c.s_grid});
  pb.density_M = check_bounded_density(pb.raw.centers);
  pb.basis = relabel_to_lattice(pb.raw);
  return pb;
}

enum class Verdict { exponential_basis_constructed, certificate_failed, gap_detection_failed, basis_check_failed, stage_error };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::exponential_basis_constructed: return "exponential-basis-constructed";
    case Verdict::certificate_failed: return "certificate-failed";
    case Verdict::gap_detection_failed: return "gap-detection-failed";
    case Verdict::basis_check_failed: return "basis-check-failed";
    case Verdict::stage_error: return "stage-error";
  }
  return "?";
}

struct StageOutcome {
  std::string stage;
  bool ok = false;
  std::string detail;
};

struct FinalFunction {
  int band = 0;
  Point center;
  DecayProfile fit;
  std::vector<double> moments;
};

struct RunReport {
  std::vector<StageOutcome> stages;
  Verdict verdict = Verdict::stage_error;

  std::optional<PreparedBasis> prepared;
  std::optional<DecayProfile> kernel;
  double projector_idempotency = 0.0, projector_hermiticity = 0.0;
  std::optional<XtildeOperator> xtilde;
  std::vector<Certificate> certificates;
  std::optional<double> chosen_delta;
  std::optional<XhatOperator> xhat;
  RVec xhat_spectrum;
  double gap_clearance = 0.0;
  std::optional<GapReport> gaps;
  std::optional<BandDecomposition> bands;
  std::vector<StripNorms> strips;
  Mat final_functions;
  std::vector<FinalFunction> finals;
  double final_orthonormality = 0.0, final_completeness = 0.0;
  int failed_fits = 0;
  std::vector<ChernReport> chern;

  bool ok() const { return verdict == Verdict::exponential_basis_constructed; }
  void note(const std::string& stage, bool ok, const std::string& detail = "") { stages.push_back({stage, ok, detail}); }
};

namespace detail {

inline void write_pipeline_outputs(const PipelineConfig& c, const RunReport& r) {
  namespace fs = std::filesystem;
  const fs::path out = c.out_dir;
  const std::string delta = r.chosen_delta ? fmt(*r.chosen_delta) : "none";
  const Metadata meta = metadata(c, c.L, delta);

  CsvTable summary(meta, {"stage", "ok", "detail"});
  for (const auto& s : r.stages) summary.row(s.stage, s.ok, s.detail);
  summary.row("verdict", r.ok(), std::string(to_string(r.verdict)));
  summary.save(out / "summary.csv");

  if (r.kernel) {
    CsvTable k(meta, {"model_id", "C", "gamma", "r_squared", "samples", "flag"});
    k.row(model_id(c, c.L), r.kernel->C, r.kernel->gamma, r.kernel->r_squared, r.kernel->samples,
          std::string(to_string(r.kernel->flag)));
    k.save(out / "kernel_decay.csv");
  }

  if (r.prepared) {
    const auto& pb = *r.prepared;
    std::vector<std::string> h{"index", "cx", "cy", "m1", "m2", "j"};
    for (double s : pb.raw.s_grid) h.push_back("moment_s" + fmt(s));
    CsvTable t(meta, h);
    for (int a = 0; a < pb.raw.size(); ++a) {
      std::vector<std::string> row{fmt(a), fmt(pb.raw.centers[a][0]), fmt(pb.raw.centers[a][1]),
                                   fmt(pb.basis.lattice_index[a].m1), fmt(pb.basis.lattice_index[a].m2),
                                   fmt(pb.basis.lattice_index[a].j)};
      for (const auto& mk : pb.raw.moments) row.push_back(fmt(mk[a]));
      t.row_strings(row);
    }
    t.save(out / "initial_basis.csv");
  }

  if (!r.certificates.empty()) {
    CsvTable t(meta, {"lambda", "delta", "snorm", "min_gap_distance", "pass"});
    for (const auto& cert : r.certificates) t.row(cert.lambda, cert.Delta, cert.snorm, cert.min_gap_distance, cert.pass);
    t.save(out / "certificates.csv");
  }

  if (r.gaps && r.bands) {
    CsvTable t(meta, {"band_id", "sigma_lo", "sigma_hi", "xi", "rank", "decay_gamma", "r2", "strip_left", "strip_right"});
    for (int j = 0; j < r.bands->bands(); ++j) {
      const auto& cl = r.gaps->gaps.clusters[j];
      double g = std::numeric_limits<double>::infinity(), r2 = 1.0;
      for (const auto& f : r.finals)
        if (f.band == j) {
          g = std::min(g, f.fit.gamma);
          r2 = std::min(r2, f.fit.r_squared);
        }
      t.row(j, cl.lo, cl.hi, r.bands->xi[j], cl.size(), g, r2, r.strips[j].left, r.strips[j].right);
    }
    t.save(out / "bands.csv");
  }

  if (!r.finals.empty()) {
    std::vector<std::string> h{"index", "band", "xi", "eta", "C", "gamma", "r_squared", "samples", "flag"};
    for (double s : c.s_grid) h.push_back("moment_s" + fmt(s));
    CsvTable t(meta, h);
    for (size_t a = 0; a < r.finals.size(); ++a) {
      const auto& f = r.finals[a];
      std::vector<std::string> row{fmt(static_cast<int>(a)), fmt(f.band), fmt(f.center[0]), fmt(f.center[1]),
                                   fmt(f.fit.C), fmt(f.fit.gamma), fmt(f.fit.r_squared), fmt(f.fit.samples),
                                   to_string(f.fit.flag)};
      for (double mv : f.moments) row.push_back(fmt(mv));
      t.row_strings(row);
    }
    t.save(out / "final_basis.csv");
    save_wdmx(out / "basis.wdmx", r.final_functions);
  }

  if (r.xhat) save_wdmx(out / "xhat.wdmx", r.xhat->matrix);

  if (!r.chern.empty()) {
    CsvTable t(meta, {"window", "value", "imag_residual", "terms"});
    for (const auto& ch : r.chern) t.row(ch.Lw, ch.value, ch.imag_residual, ch.terms);
    t.save(out / "pipeline_chern.csv");
  }
}

}  // namespace detail

/// model -> P -> initial basis -> relabel -> Xt -> Xh over the Delta sweep -> gaps of P Xh P ->
/// band projectors -> P_j Y P_j eigenfunctions -> localization checks.
inline RunReport run_pipeline(const PipelineConfig& c) {
  RunReport r;
  try {
    r.prepared = prepare_basis(c, c.L);
  } catch (const Error& e) {
    r.note("initial-basis", false, e.what());
    r.verdict = Verdict::stage_error;
    if (!c.out_dir.empty()) detail::write_pipeline_outputs(c, r);
    return r;
  }
  auto& pb = *r.prepared;
  r.projector_idempotency = pb.P.idempotency_defect();
  r.projector_hermiticity = pb.P.hermiticity();
  r.note("projector", r.projector_idempotency <= 1e-10 && r.projector_hermiticity <= 1e-12,
         "rank=" + fmt(pb.P.rank) + " gap=" + fmt(pb.P.gap));
  try {
    r.kernel = kernel_decay_fit(pb.P);
    r.note("kernel-decay", r.kernel->exponential(c.min_r2),
           "gamma=" + fmt(r.kernel->gamma) + " r2=" + fmt(r.kernel->r_squared));
  } catch (const Error& e) {
    r.note("kernel-decay", false, e.what());
  }
  r.note("initial-basis", true,
         "functions=" + fmt(pb.raw.size()) + " orthonormality=" + fmt(pb.raw.orthonormality_defect()));
  r.note("bounded-density", true, "M=" + fmt(pb.density_M) + " square_M=" + fmt(pb.basis.M));

  try {
    r.xtilde = build_xtilde(pb.basis, pb.P, pb.X);
  } catch (const Error& e) {
    r.note("xtilde", false, e.what());
    r.verdict = Verdict::stage_error;
    if (!c.out_dir.empty()) detail::write_pipeline_outputs(c, r);
    return r;
  }
  r.note("xtilde", r.xtilde->integer_defect <= 1e-8, "integer_defect=" + fmt(r.xtilde->integer_defect));

  const auto lambdas = lambda_grid(pb.model.grid);
  std::vector<double> deltas = c.deltas;
  std::sort(deltas.begin(), deltas.end());
  for (double D : deltas) {
    XhatOperator xh = build_xhat(*r.xtilde, FilterSpec(D), pb.X, pb.Y);
    CertificateContext ctx(pb.basis, *r.xtilde, xh);
    bool all = true;
    for (double lam : lambdas) {
      r.certificates.push_back(ctx.at(lam));
      all = all && r.certificates.back().pass;
    }
    if (all && !r.chosen_delta) {
      r.chosen_delta = D;
      r.xhat = std::move(xh);
      r.xhat_spectrum = ctx.spectrum;
    }
  }
  if (!r.chosen_delta) {
    r.note("certificate", false, "no Delta in the sweep passes every lambda");
    r.verdict = Verdict::certificate_failed;
    if (!c.out_dir.empty()) detail::write_pipeline_outputs(c, r);
    return r;
  }
  r.gap_clearance = gap_interval_clearance(r.xhat_spectrum, lambdas);
  r.note("certificate", true, "Delta=" + fmt(*r.chosen_delta) + " clearance=" + fmt(r.gap_clearance));

  ProjectedSpectrum spec = projected_spectrum(pb.P, r.xhat->matrix);
  r.gaps = detect_uniform_gaps(spec.eigenvalues, c.d_min, c.D_max);
  if (!r.gaps->ok) {
    r.note("gap-detection", false, r.gaps->reason);
    r.verdict = Verdict::gap_detection_failed;
    if (!c.out_dir.empty()) detail::write_pipeline_outputs(c, r);
    return r;
  }
  r.note("gap-detection", true,
         "clusters=" + fmt(static_cast<int>(r.gaps->gaps.clusters.size())) + " d=" + fmt(r.gaps->gaps.d) +
             " D=" + fmt(r.gaps->gaps.D));

  try {
    r.bands = band_projectors(pb.P, spec, r.gaps->gaps);
  } catch (const Error& e) {
    r.note("band-projectors", false, e.what());
    r.verdict = Verdict::gap_detection_failed;
    if (!c.out_dir.empty()) detail::write_pipeline_outputs(c, r);
    return r;
  }
  r.note("band-projectors", true, "bands=" + fmt(r.bands->bands()));

  const auto anchors = default_anchors(pb.model.grid);
  std::vector<Vec> cols;
  for (int j = 0; j < r.bands->bands(); ++j) {
    r.strips.push_back(strip_localization_check(r.bands->bases[j], r.bands->xi[j], c.strip_gamma, anchors, pb.X, pb.Y));
    for (auto& wf : wannierize_band(r.bands->bases[j], r.bands->xi[j], pb.Y)) {
      FinalFunction f;
      f.band = j;
      f.center = wf.center;
      try {
        f.fit = fit_exponential(wf.psi, pb.model.grid, wf.center);
      } catch (const Error&) {
        f.fit.flag = DecayFlag::no_decay;
      }
      for (double s : c.s_grid) f.moments.push_back(s_moment(wf.psi, pb.model.grid, wf.center, s));
      if (!f.fit.exponential(c.min_r2)) ++r.failed_fits;
      r.finals.push_back(std::move(f));
      cols.push_back(std::move(wf.psi));
    }
  }
  r.final_functions.resize(pb.P.dim(), static_cast<Eigen::Index>(cols.size()));
  for (size_t a = 0; a < cols.size(); ++a) r.final_functions.col(static_cast<Eigen::Index>(a)) = cols[a];
  GeneralizedWannierBasis fin;
  fin.functions = r.final_functions;
  r.final_orthonormality = fin.orthonormality_defect();
  r.final_completeness = fin.completeness_defect(pb.P.P);
  bool ok = r.final_orthonormality <= 1e-8 && r.final_completeness <= 1e-8 && r.failed_fits == 0 &&
            static_cast<int>(cols.size()) == pb.P.rank;
  r.note("final-basis", ok,
         "functions=" + fmt(static_cast<int>(cols.size())) + " failed_fits=" + fmt(r.failed_fits) +
             " orthonormality=" + fmt(r.final_orthonormality) + " completeness=" + fmt(r.final_completeness));
  r.verdict = ok ? Verdict::exponential_basis_constructed : Verdict::basis_check_failed;

  if (pb.model.grid.dim == 2) {
    for (int lw : c.chern_windows) {
      try {
        r.chern.push_back(chern_marker(pb.P.P, pb.model.grid, lw));
      } catch (const Error&) {
      }
    }
  }
  if (!c.out_dir.empty()) detail::write_pipeline_outputs(c, r);
  return r;
}

struct SuiteResult {
  std::string suite;
  bool proven = false;  // a proven inequality: any failure is a bug
  int instances = 0;
  int failures = 0;
  double metric = 0.0;
  std::string metric_name;
  bool pass = false;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;
  bool proven_ok() const {
    for (const auto& s : suites)
      if (s.proven && !s.pass) return false;
    return true;
  }
  bool all_ok() const {
    for (const auto& s : suites)
      if (!s.pass) return false;
    return true;
  }
  const SuiteResult* find(const std::string& name) const {
    for (const auto& s : suites)
      if (s.suite == name) return &s;
    return nullptr;
  }
};

namespace detail {

/// Deterministic standard normal pair from a 64-bit engine (Box-Muller on 53-bit uniforms).
struct Normal {
  std::mt19937_64& rng;
  double uniform() { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }
  cplx complex() {
    double u = uniform(), v = uniform();
    double rad = std::sqrt(-2.0 * std::log(u));
    return {rad * std::cos(2 * std::numbers::pi * v), rad * std::sin(2 * std::numbers::pi * v)};
  }
  int integer(int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); }
};

inline double relative_spread(const std::vector<double>& v) {
  double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  return lo > 0 ? hi / lo - 1.0 : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Seeded randomized checks of the two lattice lemmas on a 17 x 17 grid covering [-8, 8]^2.
inline std::pair<SuiteResult, SuiteResult> lemma_suites(int trials, std::uint64_t seed, CsvTable* decay_rows = nullptr,
                                                        CsvTable* prod_rows = nullptr) {
  std::mt19937_64 rng(seed);
  detail::Normal nd{rng};
  const int side = 17;
  RVec X(side * side), Y(side * side);
  for (int i = 0; i < side * side; ++i) {
    X(i) = i % side - 8;
    Y(i) = i / side - 8;
  }
  const double svals[3] = {0.5, 1.0, 2.5};
  SuiteResult dec{"decay-lemma", true, trials, 0, std::numeric_limits<double>::infinity(), "min_rhs_minus_lhs", false};
  SuiteResult prod{"prod-sum-lemma", true, trials, 0, std::numeric_limits<double>::infinity(), "min_rhs_minus_lhs", false};
  for (int t = 0; t < trials; ++t) {
    Vec v(side * side);
    for (int i = 0; i < v.size(); ++i) v(i) = nd.complex();
    v.normalize();
    std::array<int, 2> m{nd.integer(-8, 8), nd.integer(-8, 8)}, k{nd.integer(-8, 8), nd.integer(-8, 8)};
    double s1 = svals[nd.integer(0, 2)], s2 = svals[nd.integer(0, 2)];
    auto a = lemma_decay_check(v, X, Y, m, k, s1, s2);
    if (!a.pass) ++dec.failures;
    dec.metric = std::min(dec.metric, a.rhs - a.lhs);
    if (decay_rows) decay_rows->row(t, m[0], m[1], k[0], k[1], s1, s2, a.lhs, a.rhs, a.pass);
    Point mp{16.0 * nd.uniform() - 8.0, 16.0 * nd.uniform() - 8.0};
    auto b = lemma_prod_sum_check(v, X, Y, mp, s1, s2);
    if (!b.pass) ++prod.failures;
    prod.metric = std::min(prod.metric, b.rhs - b.lhs);
    if (prod_rows) prod_rows->row(t, mp[0], mp[1], s1, s2, b.lhs, b.rhs, b.pass);
  }
  dec.pass = dec.failures == 0;
  prod.pass = prod.failures == 0;
  return {dec, prod};
}

/// Schur bound against the direct norm on random orthonormal bases of a 6 x 6 lattice.
inline SuiteResult schur_suite(int trials, std::uint64_t seed, CsvTable* rows = nullptr) {
  std::mt19937_64 rng(seed ^ 0x5c4e11ULL);
  detail::Normal nd{rng};
  SiteGrid g = SiteGrid::make(6, 1, 2);
  RVec X(g.size());
  for (int i = 0; i < g.size(); ++i) X(i) = g.xs[i];
  SuiteResult s{"schur-test", true, trials, 0, std::numeric_limits<double>::infinity(), "min_bound_minus_direct", false};
  for (int t = 0; t < trials; ++t) {
    int r = nd.integer(1, g.size());
    Mat A(g.size(), r);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = nd.complex();
    Eigen::HouseholderQR<Mat> qr(A);
    GeneralizedWannierBasis b;
    b.functions = qr.householderQ() * Mat::Identity(g.size(), r);
    b.centers = density_centroids(b.functions, g);
    b = relabel_to_lattice(b);
    auto res = schur_row_sums(b, X);
    if (!res.pass) ++s.failures;
    s.metric = std::min(s.metric, res.bound - res.direct);
    if (rows) rows->row(t, r, res.sup_row, res.sup_col, res.bound, res.direct, res.pass);
  }
  s.pass = s.failures == 0;
  return s;
}

/// Drives the property suites and the L / Delta / gamma sweeps; one CSV per suite.
inline VerifyReport run_verify(const PipelineConfig& c) {
  namespace fs = std::filesystem;
  VerifyReport rep;
  const fs::path out = c.out_dir;
  const bool write = !c.out_dir.empty();
  const Metadata meta = metadata(c, c.L, fmt(c.delta_default));

  CsvTable decay_rows(meta, {"trial", "m1", "m2", "k1", "k2", "s1", "s2", "lhs", "rhs", "pass"});
  CsvTable prod_rows(meta, {"trial", "m1", "m2", "s1", "s2", "lhs", "rhs", "pass"});
  auto [dec, prod] = lemma_suites(c.trials, c.verify_seed, &decay_rows, &prod_rows);
  rep.suites.push_back(dec);
  rep.suites.push_back(prod);
  CsvTable schur_rows(meta, {"trial", "rank", "sup_row", "sup_col", "bound", "direct", "pass"});
  rep.suites.push_back(schur_suite(c.trials, c.verify_seed, &schur_rows));

  std::vector<int> Ls = c.l_sweep;
  std::sort(Ls.begin(), Ls.end());
  CsvTable model_schur(meta, {"L", "sup_row", "sup_col", "bound", "direct", "pass"});
  CsvTable sqrt_rows(meta, {"L", "lambda", "n_SPX", "n_XPS", "n_SinvPX", "n_XPSinv", "sqrt_diff"});
  CsvTable comm_rows(meta, {"L", "lambda", "comm_x", "comm_y", "schur_sum"});
  CsvTable close_rows(meta, {"L", "delta", "xhat_minus_x", "xtilde_minus_x"});
  CsvTable kern_rows(meta, {"model_id", "C", "gamma", "r_squared", "samples", "flag"});
  std::vector<double> sqrt_max, comm_max, schur_max, close_vals, sqrt_lambda_var, kern_gamma;
  SuiteResult model_schur_suite{"schur-model", true, 0, 0, std::numeric_limits<double>::infinity(), "min_bound_minus_direct", false};
  for (int L : Ls) {
    PreparedBasis pb = prepare_basis(c, L);
    XtildeOperator xt = build_xtilde(pb.basis, pb.P, pb.X);
    auto ss = schur_row_sums(pb.basis, pb.X);
    ++model_schur_suite.instances;
    if (!ss.pass) ++model_schur_suite.failures;
    model_schur_suite.metric = std::min(model_schur_suite.metric, ss.bound - ss.direct);
    model_schur.row(L, ss.sup_row, ss.sup_col, ss.bound, ss.direct, ss.pass);
    schur_max.push_back(ss.sup_row);

    auto lambdas = lambda_grid(pb.model.grid);
    double smax = 0, smin = std::numeric_limits<double>::infinity();
    for (const auto& row : sqrt_bound_survey(pb.basis, pb.X, lambdas)) {
      sqrt_rows.row(L, row.lambda, row.norms[0], row.norms[1], row.norms[2], row.norms[3], row.sqrt_diff);
      smax = std::max(smax, row.max());
      smin = std::min(smin, row.max());
    }
    sqrt_max.push_back(smax);
    sqrt_lambda_var.push_back(smin > 0 ? smax / smin : std::numeric_limits<double>::infinity());
    double cmax = 0;
    for (const auto& row : tilted_comm_survey(pb.basis, xt, pb.X, pb.Y, lambdas)) {
      comm_rows.row(L, row.lambda, row.comm_x, row.comm_y, row.schur_sum);
      cmax = std::max({cmax, row.comm_x, row.comm_y});
    }
    comm_max.push_back(cmax);
    XhatOperator xh = build_xhat(xt, FilterSpec(c.delta_default), pb.X, pb.Y);
    double cl = closeness_norm(xh, pb.X);
    close_rows.row(L, c.delta_default, cl, operator_norm(xt.matrix - diag_op(pb.X)));
    close_vals.push_back(cl);
    try {
      auto kp = kernel_decay_fit(pb.P);
      kern_rows.row(model_id(c, L), kp.C, kp.gamma, kp.r_squared, kp.samples, std::string(to_string(kp.flag)));
      kern_gamma.push_back(kp.gamma);
    } catch (const Error& e) {
      kern_rows.row(model_id(c, L), 0.0, 0.0, 0.0, 0, std::string("insufficient-range"));
    }
  }
  model_schur_suite.pass = model_schur_suite.failures == 0;
  rep.suites.push_back(model_schur_suite);
  auto growth = [](const std::vector<double>& v) { return v.size() > 1 ? v.back() / v.front() - 1.0 : 0.0; };
  double lam_var = *std::max_element(sqrt_lambda_var.begin(), sqrt_lambda_var.end());
  rep.suites.push_back({"sqrt-bound-survey", false, static_cast<int>(Ls.size()), 0, growth(sqrt_max), "growth_first_to_last_L",
                        growth(sqrt_max) < 0.2 && lam_var < 2.0});
  rep.suites.push_back({"sqrt-bound-lambda-spread", false, static_cast<int>(Ls.size()), 0, lam_var, "max_over_min_lambda",
                        lam_var < 2.0});
  rep.suites.push_back({"tilted-comm-survey", false, static_cast<int>(Ls.size()), 0, growth(comm_max), "growth_first_to_last_L",
                        growth(comm_max) < 0.2});
  rep.suites.push_back({"schur-growth", false, static_cast<int>(Ls.size()), 0, growth(schur_max), "growth_first_to_last_L",
                        growth(schur_max) < 0.2});
  double cspread = detail::relative_spread(close_vals);
  rep.suites.push_back({"closeness", false, static_cast<int>(Ls.size()), 0, cspread, "max_over_min_minus_1", cspread < 0.2});
  if (kern_gamma.size() == Ls.size() && !kern_gamma.empty()) {
    double shrink = 1.0 - kern_gamma.back() / kern_gamma.front();
    rep.suites.push_back({"kernel-decay", false, static_cast<int>(Ls.size()), 0, shrink, "gamma_shrink_first_to_last_L",
                          kern_gamma.front() > 0 && shrink <= 0.2});
  }

  // Tilt Lipschitz and the certificate Delta sweep at the configured size.
  PreparedBasis pb = prepare_basis(c, c.L);
  XtildeOperator xt = build_xtilde(pb.basis, pb.P, pb.X);
  XhatOperator xh = build_xhat(xt, FilterSpec(c.delta_default), pb.X, pb.Y);
  auto tl = tilt_lipschitz(xh.matrix, c.gammas, default_anchors(pb.model.grid), pb.X, pb.Y);
  CsvTable tilt_rows(meta, {"gamma", "a1", "a2", "norm", "ratio"});
  for (const auto& row : tl.rows) tilt_rows.row(row.gamma, row.a1, row.a2, row.norm, row.ratio);
  rep.suites.push_back({"tilt-lipschitz", false, static_cast<int>(tl.rows.size()), 0, tl.variation, "max_over_min_gamma",
                        std::isfinite(tl.sup_ratio) && tl.variation < 2.0});

  std::vector<double> deltas = c.deltas;
  std::sort(deltas.begin(), deltas.end());
  auto lambdas = lambda_grid(pb.model.grid);
  CsvTable cert_rows(meta, {"lambda", "delta", "snorm", "min_gap_distance", "pass"});
  CsvTable sweep_rows(meta, {"delta", "max_snorm", "all_pass", "clearance"});
  std::vector<double> smax;
  double clearance_at_pass = -1.0;
  bool any_pass = false;
  for (double D : deltas) {
    XhatOperator x = build_xhat(xt, FilterSpec(D), pb.X, pb.Y);
    CertificateContext ctx(pb.basis, xt, x);
    double m = 0;
    bool all = true;
    for (double lam : lambdas) {
      auto cert = ctx.at(lam);
      cert_rows.row(cert.lambda, cert.Delta, cert.snorm, cert.min_gap_distance, cert.pass);
      m = std::max(m, cert.snorm);
      all = all && cert.pass;
    }
    double clear = gap_interval_clearance(ctx.spectrum, lambdas);
    if (all && !any_pass) {
      any_pass = true;
      clearance_at_pass = clear;
    }
    smax.push_back(m);
    sweep_rows.row(D, m, all, clear);
  }
  bool mono = true;
  for (size_t i = 1; i < smax.size(); ++i) mono = mono && smax[i] <= smax[i - 1];
  double slope = 0.0;
  if (smax.size() > 1 && smax.front() > 0 && smax.back() > 0) {
    double mx = 0, my = 0;
    for (size_t i = 0; i < smax.size(); ++i) {
      mx += std::log(deltas[i]);
      my += std::log(smax[i]);
    }
    mx /= smax.size();
    my /= smax.size();
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < smax.size(); ++i) {
      sxx += (std::log(deltas[i]) - mx) * (std::log(deltas[i]) - mx);
      sxy += (std::log(deltas[i]) - mx) * (std::log(smax[i]) - my);
    }
    slope = sxy / sxx;
  }
  rep.suites.push_back({"certificate-sweep", false, static_cast<int>(deltas.size()), 0, slope, "loglog_slope",
                        mono && slope >= -1.6 && slope <= -0.5 && any_pass && clearance_at_pass >= 0.05});

  if (write) {
    decay_rows.save(out / "lemma_decay.csv");
    prod_rows.save(out / "lemma_prod_sum.csv");
    schur_rows.save(out / "schur_random.csv");
    model_schur.save(out / "schur_model.csv");
    sqrt_rows.save(out / "sqrt_survey.csv");
    comm_rows.save(out / "tilted_comm.csv");
    close_rows.save(out / "closeness.csv");
    kern_rows.save(out / "kernel_decay_sweep.csv");
    tilt_rows.save(out / "tilt_lipschitz.csv");
    cert_rows.save(out / "certificates.csv");
    sweep_rows.save(out / "certificate_sweep.csv");
    CsvTable summary(meta, {"suite", "proven", "instances", "failures", "metric_name", "metric", "pass"});
    for (const auto& s : rep.suites) summary.row(s.suite, s.proven, s.instances, s.failures, s.metric_name, s.metric, s.pass);
    summary.save(out / "verify_summary.csv");
  }
  return rep;
}

struct ChernRun {
  std::vector<ChernReport> markers;
  std::optional<int> kspace;
  int rank = 0;
};

inline ChernRun run_chern(const PipelineConfig& c) {
  if (c.model_type == "ssh") throw Error(ErrorKind::unsupported, "Chern marker needs a 2D model");
  TightBindingModel model = build_model(c);
  Projector P = fermi_projector(model, c.fermi_energy);
  ChernRun run;
  run.rank = P.rank;
  for (int lw : c.chern_windows) run.markers.push_back(chern_marker(P.P, model.grid, lw));
  if (c.model_type == "haldane") run.kspace = chern_number_kspace(c.t1, c.t2, c.phi, c.m);
  if (c.model_type == "atomic") run.kspace = chern_number_kspace(0.0, 0.0, 0.0, c.m);
  if (!c.out_dir.empty()) {
    CsvTable t(metadata(c, c.L, "none"), {"window", "value", "imag_residual", "terms", "kspace"});
    for (const auto& m : run.markers)
      t.row(m.Lw, m.value, m.imag_residual, m.terms, run.kspace ? fmt(*run.kspace) : std::string("none"));
    t.save(std::filesystem::path(c.out_dir) / "chern.csv");
  }
  return run;
}

/// Dumps H as WDMX plus the site table.
inline TightBindingModel run_model(const PipelineConfig& c) {
  TightBindingModel model = build_model(c);
  if (!c.out_dir.empty()) {
    namespace fs = std::filesystem;
    save_wdmx(fs::path(c.out_dir) / "H.wdmx", model.H);
    CsvTable t(metadata(c, c.L, "none"), {"index", "x", "y", "orbital", "onsite"});
    for (int i = 0; i < model.grid.size(); ++i)
      t.row(i, model.grid.xs[i], model.grid.ys[i], i % model.grid.orbitals_per_site, model.H(i, i).real());
    t.save(fs::path(c.out_dir) / "model.csv");
  }
  return model;
}

}  // namespace gwb
