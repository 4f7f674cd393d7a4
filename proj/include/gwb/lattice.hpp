#pragma once

#include "core.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace gwb {

/// Integer lattice of L sites per side (L in 1D), each carrying the same number of orbitals.
/// Matrix index i = orbitals * site + orbital with site = y * L + x.
struct SiteGrid {
  int L = 0;
  int orbitals_per_site = 1;
  int dim = 2;
  std::vector<int> xs;
  std::vector<int> ys;

  static SiteGrid make(int L, int orbitals, int dim) {
    SiteGrid g;
    g.L = L;
    g.orbitals_per_site = orbitals;
    g.dim = dim;
    int sites = dim == 2 ? L * L : L;
    for (int s = 0; s < sites; ++s)
      for (int o = 0; o < orbitals; ++o) {
        g.xs.push_back(s % L);
        g.ys.push_back(dim == 2 ? s / L : 0);
      }
    return g;
  }

  int size() const { return static_cast<int>(xs.size()); }
  int sites() const { return size() / orbitals_per_site; }
  int site_of(int i) const { return i / orbitals_per_site; }
  int index(int x, int y, int orbital) const { return orbitals_per_site * (y * L + x) + orbital; }
  /// Center point used for default tilt anchors and Chern windows.
  int center() const { return (L - 1) / 2; }
};

enum class ModelKind { haldane, disordered, ssh };

struct ModelParams {
  ModelKind kind = ModelKind::haldane;
  int L = 0;
  double t1 = 0, t2 = 0, phi = 0, m_stagger = 0;
  double gap = 0, w = 0, hop = 0;
  std::uint64_t seed = 0;
  bool topological = false;
};

struct TightBindingModel {
  SiteGrid grid;
  Mat H;
  ModelParams params;
  int hop_radius = 1;
  double spectral_gap_estimate = 0.0;
};

namespace detail {

inline void add_hopping(Mat& H, int to, int from, cplx v) {
  H(to, from) += v;
  H(from, to) += std::conj(v);
}

}  // namespace detail

inline bool haldane_is_topological(double t2, double phi, double m) {
  return std::abs(m) < 3.0 * std::sqrt(3.0) * std::abs(t2 * std::sin(phi));
}

/// Haldane model with both honeycomb sublattices sharing one integer site (orbital 0 = A, 1 = B).
/// Bravais vectors a1 = (1,0), a2 = (0,1); A(r) bonds to B(r), B(r - a1), B(r - a2).
/// Second-neighbour vectors b in {(1,0), (-1,1), (0,-1)} carry phase +phi on A and -phi on B.
inline TightBindingModel build_haldane(int L, double t1, double t2, double phi, double m) {
  if (L < 4) throw Error(ErrorKind::model_too_small, "Haldane model needs L >= 4, got " + std::to_string(L));
  TightBindingModel model;
  model.grid = SiteGrid::make(L, 2, 2);
  const auto& g = model.grid;
  model.H = Mat::Zero(g.size(), g.size());
  Mat& H = model.H;
  const cplx ep = std::polar(t2, phi), em = std::polar(t2, -phi);
  const int nnn[3][2] = {{1, 0}, {-1, 1}, {0, -1}};
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < L; ++x) {
      int a = g.index(x, y, 0), b = g.index(x, y, 1);
      H(a, a) += m;
      H(b, b) -= m;
      detail::add_hopping(H, a, b, t1);
      if (x > 0) detail::add_hopping(H, a, g.index(x - 1, y, 1), t1);
      if (y > 0) detail::add_hopping(H, a, g.index(x, y - 1, 1), t1);
      for (const auto& d : nnn) {
        int x2 = x + d[0], y2 = y + d[1];
        if (x2 < 0 || y2 < 0 || x2 >= L || y2 >= L) continue;
        detail::add_hopping(H, g.index(x2, y2, 0), a, ep);
        detail::add_hopping(H, g.index(x2, y2, 1), b, em);
      }
    }
  model.params = {ModelKind::haldane, L, t1, t2, phi, m, 0, 0, 0, 0, haldane_is_topological(t2, phi, m)};
  model.hop_radius = 1;
  return model;
}

/// Default nearest-neighbour hopping of the disordered insulator.
/// The bound 4h <= gap/3 keeps the clean bands within 0.2 * gap/2 of +-gap/2.
inline double default_disorder_hop(double gap) { return gap / 12.0; }

/// Two orbitals per site at -gap/2 and +gap/2 with uniform onsite noise in [-w/2, w/2] and
/// inter-orbital nearest-neighbour hopping h.
inline TightBindingModel build_disordered_insulator(int L, double gap, double w, std::uint64_t seed,
                                                    double hop = -1.0) {
  if (L < 1) throw Error(ErrorKind::model_too_small, "L must be positive");
  if (!(gap > 0)) throw Error(ErrorKind::config, "gap must be positive");
  if (w < 0) throw Error(ErrorKind::config, "disorder strength must be non-negative");
  if (w >= gap) throw Error(ErrorKind::gap_closure_risk, "disorder w must stay below gap");
  if (hop < 0) hop = default_disorder_hop(gap);
  if (hop > gap / 8.0) throw Error(ErrorKind::gap_closure_risk, "hopping must not exceed gap/8");
  TightBindingModel model;
  model.grid = SiteGrid::make(L, 2, 2);
  const auto& g = model.grid;
  model.H = Mat::Zero(g.size(), g.size());
  Mat& H = model.H;
  std::mt19937_64 rng(seed);
  // Manual affine map: std::uniform_real_distribution is not portable bit-for-bit.
  auto noise = [&] { return w * (std::ldexp(static_cast<double>(rng() >> 11), -53) - 0.5); };
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < L; ++x) {
      int a = g.index(x, y, 0), b = g.index(x, y, 1);
      H(a, a) = -gap / 2 + noise();
      H(b, b) = gap / 2 + noise();
      if (x + 1 < L) {
        detail::add_hopping(H, a, g.index(x + 1, y, 1), hop);
        detail::add_hopping(H, b, g.index(x + 1, y, 0), hop);
      }
      if (y + 1 < L) {
        detail::add_hopping(H, a, g.index(x, y + 1, 1), hop);
        detail::add_hopping(H, b, g.index(x, y + 1, 0), hop);
      }
    }
  model.params.kind = ModelKind::disordered;
  model.params.L = L;
  model.params.gap = gap;
  model.params.w = w;
  model.params.hop = hop;
  model.params.seed = seed;
  // Clean bands are +-sqrt(gap^2/4 + h^2 a^2) with a in the grid adjacency spectrum, so the clean
  // gap is exactly gap; bounded noise can close it by at most w.
  model.spectral_gap_estimate = gap - w;
  return model;
}

/// Dimerized chain: t1 inside cell c (orbitals 0,1), t2 from orbital 1 of c to orbital 0 of c+1.
inline TightBindingModel build_ssh_chain(int L, double t1, double t2) {
  if (L < 1) throw Error(ErrorKind::model_too_small, "L must be positive");
  if (std::abs(std::abs(t1) - std::abs(t2)) < 1e-12)
    throw Error(ErrorKind::gapless_model, "SSH chain with |t1| = |t2| is gapless");
  TightBindingModel model;
  model.grid = SiteGrid::make(L, 2, 1);
  const auto& g = model.grid;
  model.H = Mat::Zero(g.size(), g.size());
  for (int c = 0; c < L; ++c) {
    detail::add_hopping(model.H, 2 * c, 2 * c + 1, t1);
    if (c + 1 < L) detail::add_hopping(model.H, 2 * c + 1, 2 * c + 2, t2);
  }
  model.params.kind = ModelKind::ssh;
  model.params.L = L;
  model.params.t1 = t1;
  model.params.t2 = t2;
  model.params.topological = std::abs(t2) > std::abs(t1);
  model.spectral_gap_estimate = 2.0 * std::abs(std::abs(t1) - std::abs(t2));
  return model;
}

/// Diagonal coordinate operators. 1D grids have Y = 0.
inline std::pair<RVec, RVec> position_operators(const TightBindingModel& model) {
  const auto& g = model.grid;
  RVec X(g.size()), Y(g.size());
  for (int i = 0; i < g.size(); ++i) {
    X(i) = g.xs[i];
    Y(i) = g.ys[i];
  }
  return {X, Y};
}

inline Mat diag_op(const RVec& d) { return d.cast<cplx>().asDiagonal(); }

}  // namespace gwb
