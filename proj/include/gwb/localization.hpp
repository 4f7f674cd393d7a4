#pragma once

#include "core.hpp"
#include "lattice.hpp"
#include "spectral.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace gwb {

using Point = std::array<double, 2>;

/// Sum_i <(x_i, y_i) - mu>^{2s} |psi(i)|^2.
inline double s_moment(const Vec& psi, const SiteGrid& grid, const Point& mu, double s) {
  double acc = 0.0;
  for (int i = 0; i < grid.size(); ++i)
    acc += std::pow(jbracket(grid.xs[i] - mu[0], grid.ys[i] - mu[1]), 2.0 * s) * std::norm(psi(i));
  return acc;
}

/// Sum_i exp(2 gamma <(x_i, y_i) - mu>) |psi(i)|^2.
inline double exp_moment(const Vec& psi, const SiteGrid& grid, const Point& mu, double gamma) {
  double acc = 0.0;
  for (int i = 0; i < grid.size(); ++i)
    acc += std::exp(2.0 * gamma * jbracket(grid.xs[i] - mu[0], grid.ys[i] - mu[1])) * std::norm(psi(i));
  return acc;
}

/// Share of a full shell that a bin must hold before it enters a wavefunction fit.
inline constexpr double kShellCoverage = 0.125;

/// Lattice sites a full shell lo <= <r> < hi would contain, by area (2D) or length (1D).
inline double full_shell_sites(int dim, double lo, double hi) {
  double rl = std::sqrt(std::max(lo * lo - 1.0, 0.0)), rh = std::sqrt(std::max(hi * hi - 1.0, 0.0));
  return dim == 2 ? std::numbers::pi * (rh * rh - rl * rl) : 2.0 * (rh - rl);
}

/// Exponential tail fit of log|psi| against <x - mu>, per-site maxima over orbitals.
/// Shells cut short by the sample boundary are dropped (see kShellCoverage).
inline DecayProfile fit_exponential(const Vec& psi, const SiteGrid& grid, const Point& mu,
                                    double coverage = kShellCoverage) {
  const int o = grid.orbitals_per_site;
  FitOptions opt;
  opt.coverage = coverage;
  const int dim = grid.dim;
  opt.expected = [dim](double lo, double hi) { return full_shell_sites(dim, lo, hi); };
  std::vector<DecaySample> samples;
  int above = 0;
  double top = 0.0;
  for (int s = 0; s < grid.sites(); ++s) {
    double mag = 0.0;
    for (int k = 0; k < o; ++k) mag = std::max(mag, std::abs(psi(s * o + k)));
    if (mag > opt.floor) ++above;
    top = std::max(top, mag);
    samples.push_back({jbracket(grid.xs[s * o] - mu[0], grid.ys[s * o] - mu[1]), mag});
  }
  if (above == 1) {
    DecayProfile p;
    p.C = top;
    p.gamma = std::numeric_limits<double>::infinity();
    p.r_squared = 1.0;
    p.flag = DecayFlag::compact_support;
    return p;
  }
  return fit_binned_decay(samples, opt);
}

struct PointwiseBound {
  double C_pt = 0.0;
  bool pass = false;
};

/// C_pt = max_i |psi(i)| <x_i - mu>^s, checked against `ceiling`.
inline PointwiseBound pointwise_bound_fit(const Vec& psi, const SiteGrid& grid, const Point& mu, double s,
                                          double ceiling = 1e3) {
  PointwiseBound b;
  for (int i = 0; i < grid.size(); ++i)
    b.C_pt = std::max(b.C_pt, std::abs(psi(i)) * std::pow(jbracket(grid.xs[i] - mu[0], grid.ys[i] - mu[1]), s));
  b.pass = b.C_pt <= ceiling;
  return b;
}

}  // namespace gwb
