#pragma once

#include "core.hpp"
#include "lattice.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace gwb {

/// Fermi projection P = sum over E_n < E_F of v_n v_n^dagger. The occupied and empty
/// eigenvectors are kept so that range(P) and range(Q) have explicit orthonormal bases.
struct Projector {
  Mat P;
  Mat occupied;
  Mat empty;
  int rank = 0;
  double fermi_energy = 0.0;
  double gap = 0.0;
  SiteGrid grid;

  int dim() const { return static_cast<int>(P.rows()); }
  Mat Q() const { return Mat::Identity(P.rows(), P.cols()) - P; }
  double idempotency_defect() const { return operator_norm(P * P - P); }
  double hermiticity() const { return operator_norm(P - P.adjoint()); }
};

inline Projector fermi_projector(const Mat& H, double fermi_energy, const SiteGrid& grid = {}) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  const RVec& e = es.eigenvalues();
  const Eigen::Index n = e.size();
  Eigen::Index r = 0;
  while (r < n && e(r) < fermi_energy) ++r;
  double below = r > 0 ? e(r - 1) : -std::numeric_limits<double>::infinity();
  double above = r < n ? e(r) : std::numeric_limits<double>::infinity();
  if (fermi_energy - below < 1e-6 || above - fermi_energy < 1e-6) {
    std::ostringstream os;
    os.precision(12);
    os << "E_F = " << fermi_energy << " is within 1e-6 of the spectrum; bracketing eigenvalues " << below
       << " and " << above;
    throw Error(ErrorKind::no_gap, os.str());
  }
  Projector p;
  p.occupied = es.eigenvectors().leftCols(r);
  p.empty = es.eigenvectors().rightCols(n - r);
  fix_phases(p.occupied);
  fix_phases(p.empty);
  p.P = p.occupied * p.occupied.adjoint();
  p.rank = static_cast<int>(r);
  p.fermi_energy = fermi_energy;
  p.gap = 2.0 * std::min(fermi_energy - below, above - fermi_energy);
  p.grid = grid;
  return p;
}

inline Projector fermi_projector(const TightBindingModel& model, double fermi_energy) {
  return fermi_projector(model.H, fermi_energy, model.grid);
}

struct TiltSpec {
  double gamma = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
};

inline constexpr double kMaxTiltWeight = 1e12;

/// Diagonal of B = exp(gamma <(X - a1, Y - a2)>), as exponents.
inline RVec tilt_exponents(const TiltSpec& spec, const RVec& X, const RVec& Y) {
  if (spec.gamma < 0) throw Error(ErrorKind::config, "tilt gamma must be non-negative");
  RVec w(X.size());
  for (Eigen::Index i = 0; i < X.size(); ++i) w(i) = spec.gamma * jbracket(X(i) - spec.a1, Y(i) - spec.a2);
  double top = w.size() ? w.maxCoeff() : 0.0;
  if (top > std::log(kMaxTiltWeight)) {
    std::ostringstream os;
    os << "max exponent " << top << " exceeds log(1e12) = " << std::log(kMaxTiltWeight);
    throw Error(ErrorKind::tilt_too_large, os.str());
  }
  return w;
}

/// B A B^{-1} by diagonal scaling: entry (i,j) picks up exp(w_i - w_j).
inline Mat tilt_operator(const Mat& A, const TiltSpec& spec, const RVec& X, const RVec& Y) {
  if (A.rows() != X.size() || A.cols() != X.size()) throw Error(ErrorKind::shape_mismatch, "tilt operand size");
  if (spec.gamma == 0.0) return A;
  RVec w = tilt_exponents(spec, X, Y);
  Mat out(A.rows(), A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) out(i, j) = A(i, j) * std::exp(w(i) - w(j));
  return out;
}

/// B^{-1} A B, the inverse conjugation.
inline Mat untilt_operator(const Mat& A, const TiltSpec& spec, const RVec& X, const RVec& Y) {
  if (A.rows() != X.size() || A.cols() != X.size()) throw Error(ErrorKind::shape_mismatch, "tilt operand size");
  if (spec.gamma == 0.0) return A;
  RVec w = tilt_exponents(spec, X, Y);
  Mat out(A.rows(), A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) out(i, j) = A(i, j) * std::exp(w(j) - w(i));
  return out;
}

enum class DecayFlag { fitted, compact_support, no_decay };

inline const char* to_string(DecayFlag f) {
  switch (f) {
    case DecayFlag::fitted: return "fitted";
    case DecayFlag::compact_support: return "compact-support";
    case DecayFlag::no_decay: return "no-decay";
  }
  return "?";
}

/// |A(x,x')| <= C exp(-gamma |x - x'|) as fitted on binned maxima.
struct DecayProfile {
  double C = 0.0;
  double gamma = 0.0;
  double r_squared = 0.0;
  int samples = 0;
  DecayFlag flag = DecayFlag::fitted;

  bool exponential(double min_r2 = 0.9) const {
    if (flag == DecayFlag::compact_support) return true;
    return flag == DecayFlag::fitted && gamma > 0 && r_squared >= min_r2;
  }
};

struct DecaySample {
  double distance;
  double magnitude;
};

struct FitOptions {
  double bin_width = 0.5;
  double floor = 1e-14;
  int min_bins = 10;
  /// Drop a bin holding fewer than this fraction of the sites a full shell would hold.
  /// Zero disables the check. `expected` maps a bin [lo, hi) to that full-shell count.
  double coverage = 0.0;
  std::function<double(double, double)> expected;
};

/// Log-linear least squares over per-bin maxima. Each bin contributes the largest magnitude it
/// holds, placed at that sample's own distance. Samples at or below `floor` are ignored.
inline DecayProfile fit_binned_decay(const std::vector<DecaySample>& samples, const FitOptions& opt = {}) {
  struct Bin {
    double d = 0, mag = -1;
    int count = 0;
  };
  std::map<long, Bin> bins;
  for (const auto& s : samples) {
    auto& b = bins[static_cast<long>(std::floor(s.distance / opt.bin_width))];
    ++b.count;
    if (s.magnitude > b.mag) {
      b.mag = s.magnitude;
      b.d = s.distance;
    }
  }
  std::vector<double> xs, ys;
  for (const auto& [k, b] : bins) {
    if (b.mag <= opt.floor) continue;
    if (opt.coverage > 0 && opt.expected) {
      double full = opt.expected(k * opt.bin_width, (k + 1) * opt.bin_width);
      if (b.count < opt.coverage * full) continue;
    }
    xs.push_back(b.d);
    ys.push_back(std::log(b.mag));
  }
  DecayProfile out;
  out.samples = static_cast<int>(xs.size());
  if (static_cast<int>(xs.size()) < opt.min_bins) {
    std::ostringstream os;
    os << "only " << xs.size() << " distance bins above the " << opt.floor << " floor (need " << opt.min_bins << ")";
    throw Error(ErrorKind::insufficient_range, os.str());
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  double slope = sxx > 0 ? sxy / sxx : 0.0;
  double intercept = my - slope * mx;
  double ss_res = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    double r = ys[i] - intercept - slope * xs[i];
    ss_res += r * r;
  }
  out.C = std::exp(intercept);
  out.gamma = -slope;
  out.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  if (std::abs(out.gamma) < 1e-6) out.flag = DecayFlag::no_decay;
  return out;
}

/// Site-pair kernel magnitudes, maximized over orbitals.
inline RMat site_kernel(const Mat& A, const SiteGrid& grid) {
  const int ns = grid.sites();
  RMat M = RMat::Zero(ns, ns);
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    int sj = grid.site_of(static_cast<int>(j));
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      int si = grid.site_of(static_cast<int>(i));
      M(si, sj) = std::max(M(si, sj), std::abs(A(i, j)));
    }
  }
  return M;
}

inline DecayProfile kernel_decay_fit(const Mat& A, const SiteGrid& grid, const FitOptions& opt = {}) {
  if (A.rows() != grid.size()) throw Error(ErrorKind::shape_mismatch, "kernel size does not match grid");
  RMat M = site_kernel(A, grid);
  const int ns = grid.sites(), o = grid.orbitals_per_site;
  std::vector<DecaySample> samples;
  samples.reserve(static_cast<size_t>(ns) * ns);
  bool off_diagonal = false;
  for (int a = 0; a < ns; ++a)
    for (int b = 0; b < ns; ++b) {
      double dx = grid.xs[a * o] - grid.xs[b * o], dy = grid.ys[a * o] - grid.ys[b * o];
      double d = std::sqrt(dx * dx + dy * dy);
      if (d > 0 && M(a, b) > opt.floor) off_diagonal = true;
      samples.push_back({d, M(a, b)});
    }
  if (!off_diagonal) {
    DecayProfile p;
    p.C = M.maxCoeff();
    p.gamma = std::numeric_limits<double>::infinity();
    p.r_squared = 1.0;
    p.flag = DecayFlag::compact_support;
    return p;
  }
  return fit_binned_decay(samples, opt);
}

inline DecayProfile kernel_decay_fit(const Projector& P, const FitOptions& opt = {}) {
  if (P.rank < 1) throw Error(ErrorKind::insufficient_range, "projector has rank 0");
  return kernel_decay_fit(P.P, P.grid, opt);
}

}  // namespace gwb
