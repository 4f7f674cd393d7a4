#pragma once

#include "core.hpp"
#include "lattice.hpp"
#include "localization.hpp"
#include "spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gwb {

struct LatticeIndex {
  int m1 = 0;
  int m2 = 0;
  int j = 1;
};

/// Orthonormal functions (columns) with center points and optional localization stats.
struct GeneralizedWannierBasis {
  Mat functions;
  std::vector<Point> centers;
  std::vector<LatticeIndex> lattice_index;  // empty until relabelled
  std::vector<double> s_grid;
  std::vector<std::vector<double>> moments;  // moments[k][alpha] for s_grid[k]
  std::vector<DecayProfile> fits;
  int M = 0;

  int size() const { return static_cast<int>(functions.cols()); }
  bool indexed() const { return !lattice_index.empty(); }

  double orthonormality_defect() const {
    if (size() == 0) return 0.0;
    return (functions.adjoint() * functions - Mat::Identity(size(), size())).cwiseAbs().maxCoeff();
  }
  double completeness_defect(const Mat& P) const { return operator_norm(functions * functions.adjoint() - P); }

  RVec m1() const {
    RVec v(size());
    for (int a = 0; a < size(); ++a) v(a) = lattice_index.at(a).m1;
    return v;
  }
};

inline std::vector<Point> density_centroids(const Mat& F, const SiteGrid& grid) {
  std::vector<Point> c(F.cols(), Point{0.0, 0.0});
  for (Eigen::Index a = 0; a < F.cols(); ++a) {
    double w = 0, cx = 0, cy = 0;
    for (int i = 0; i < grid.size(); ++i) {
      double p = std::norm(F(i, a));
      w += p;
      cx += p * grid.xs[i];
      cy += p * grid.ys[i];
    }
    c[a] = {cx / w, cy / w};
  }
  return c;
}

inline void attach_moments(GeneralizedWannierBasis& b, const SiteGrid& grid, const std::vector<double>& s_grid) {
  b.s_grid = s_grid;
  b.moments.assign(s_grid.size(), std::vector<double>(b.size()));
  for (size_t k = 0; k < s_grid.size(); ++k)
    for (int a = 0; a < b.size(); ++a) b.moments[k][a] = s_moment(b.functions.col(a), grid, b.centers[a], s_grid[k]);
}

struct ProjectedSpectrum {
  RVec eigenvalues;
  Mat vectors;  // N x r, columns in range(P)
};

/// Spectrum of A compressed to range(W), W with orthonormal columns; eigenvectors lifted back.
inline ProjectedSpectrum projected_spectrum(const Mat& W, const Mat& A) {
  ProjectedSpectrum out;
  if (W.cols() == 0) {
    out.vectors = Mat::Zero(W.rows(), 0);
    return out;
  }
  Mat C = W.adjoint() * A * W;
  C = 0.5 * (C + C.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(C);
  out.eigenvalues = es.eigenvalues();
  out.vectors = W * es.eigenvectors();
  fix_phases(out.vectors);
  return out;
}

inline ProjectedSpectrum projected_spectrum(const Projector& P, const Mat& A) {
  return projected_spectrum(P.occupied, A);
}

struct Cluster {
  double lo = 0, hi = 0;
  int begin = 0, end = 0;  // eigenvalue index range [begin, end)
  int size() const { return end - begin; }
};

struct GapStructure {
  std::vector<Cluster> clusters;
  double d = 0.0;
  double D = 0.0;
  std::vector<double> xi;
};

struct GapReport {
  bool ok = false;
  std::string reason;
  GapStructure gaps;
};

/// Greedy split of a sorted list at every consecutive gap >= d_min.
inline GapReport detect_uniform_gaps(const RVec& sorted, double d_min, double D_max = 0.5) {
  GapReport rep;
  if (sorted.size() == 0) {
    rep.reason = "empty spectrum";
    return rep;
  }
  auto& g = rep.gaps;
  Cluster cur{sorted(0), sorted(0), 0, 1};
  for (Eigen::Index i = 1; i < sorted.size(); ++i) {
    if (sorted(i) - sorted(i - 1) >= d_min) {
      g.clusters.push_back(cur);
      cur = {sorted(i), sorted(i), static_cast<int>(i), static_cast<int>(i) + 1};
    } else {
      cur.hi = sorted(i);
      cur.end = static_cast<int>(i) + 1;
    }
  }
  g.clusters.push_back(cur);
  g.d = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < g.clusters.size(); ++k) {
    const auto& c = g.clusters[k];
    g.D = std::max(g.D, c.hi - c.lo);
    if (k > 0) g.d = std::min(g.d, c.lo - g.clusters[k - 1].hi);
    double s = 0;
    for (int i = c.begin; i < c.end; ++i) s += sorted(i);
    g.xi.push_back(s / c.size());
  }
  double range = sorted(sorted.size() - 1) - sorted(0);
  if (g.clusters.size() == 1 && range > 0) {
    rep.reason = "no uniform gaps: one cluster spans the whole spectrum";
  } else if (g.D > D_max) {
    std::ostringstream os;
    os << "cluster diameter " << g.D << " exceeds D_max = " << D_max;
    rep.reason = os.str();
  } else {
    rep.ok = true;
  }
  return rep;
}

/// Band projectors P_j = V_j V_j^dagger, stored through their column bases V_j.
struct BandDecomposition {
  std::vector<Mat> bases;
  std::vector<double> xi;
  std::vector<DecayProfile> decay;

  int bands() const { return static_cast<int>(bases.size()); }
  Mat projector(int j) const { return bases[j] * bases[j].adjoint(); }
};

inline BandDecomposition band_projectors(const Projector& P, const ProjectedSpectrum& spec, const GapStructure& gaps,
                                         double tol = 1e-8) {
  BandDecomposition bd;
  for (size_t j = 0; j < gaps.clusters.size(); ++j) {
    const auto& c = gaps.clusters[j];
    bd.bases.push_back(spec.vectors.middleCols(c.begin, c.size()));
    bd.xi.push_back(gaps.xi[j]);
  }
  for (int j = 0; j < bd.bands(); ++j)
    for (int k = j; k < bd.bands(); ++k) {
      Mat g = bd.bases[j].adjoint() * bd.bases[k];
      if (j == k) g -= Mat::Identity(g.rows(), g.cols());
      if (g.size() && g.cwiseAbs().maxCoeff() > tol) {
        std::ostringstream os;
        os << "band projectors (" << j << ", " << k << ") violate P_j P_k = delta_jk P_j";
        throw Error(ErrorKind::numerical_degeneracy, os.str());
      }
    }
  Mat sum = Mat::Zero(P.dim(), P.dim());
  for (const auto& b : bd.bases) sum += b * b.adjoint();
  if ((sum - P.P).cwiseAbs().maxCoeff() > tol)
    throw Error(ErrorKind::numerical_degeneracy, "band projectors do not sum to P");
  return bd;
}

/// ||U V^dagger|| through the triangular factors of U and V.
inline double lowrank_norm(const Mat& U, const Mat& V) {
  if (U.cols() == 0) return 0.0;
  Eigen::HouseholderQR<Mat> qu(U), qv(V);
  const Eigen::Index k = U.cols();
  Mat ru = qu.matrixQR().topRows(std::min<Eigen::Index>(k, U.rows())).template triangularView<Eigen::Upper>();
  Mat rv = qv.matrixQR().topRows(std::min<Eigen::Index>(k, V.rows())).template triangularView<Eigen::Upper>();
  return operator_norm(ru * rv.adjoint());
}

struct StripNorms {
  double left = 0.0;   // ||(X - xi) P_{j,gamma}||
  double right = 0.0;  // ||P_{j,gamma} (X - xi)||
};

/// Strip concentration of a band around x = xi, maximized over tilt anchors.
inline StripNorms strip_localization_check(const Mat& Vj, double xi, double gamma, const std::vector<Point>& anchors,
                                           const RVec& X, const RVec& Y) {
  StripNorms out;
  RVec shift = X.array() - xi;
  for (const auto& a : anchors) {
    RVec w = tilt_exponents({gamma, a[0], a[1]}, X, Y);
    // P_{j,gamma} = (B V_j)(B^{-1} V_j)^dagger
    Mat bv = w.array().exp().cast<cplx>().matrix().asDiagonal() * Vj;
    Mat binv = (-w.array()).exp().cast<cplx>().matrix().asDiagonal() * Vj;
    out.left = std::max(out.left, lowrank_norm(shift.cast<cplx>().asDiagonal() * bv, binv));
    out.right = std::max(out.right, lowrank_norm(bv, shift.cast<cplx>().asDiagonal() * binv));
  }
  return out;
}

struct WannierFunction {
  Vec psi;
  Point center;
};

/// Eigenfunctions of P_j Y P_j on range(P_j), centered at (xi_j, eta).
inline std::vector<WannierFunction> wannierize_band(const Mat& Vj, double xi, const RVec& Y) {
  std::vector<WannierFunction> out;
  if (Vj.cols() == 0) return out;
  ProjectedSpectrum ps = projected_spectrum(Vj, diag_op(Y));
  for (Eigen::Index k = 0; k < ps.vectors.cols(); ++k) out.push_back({ps.vectors.col(k), {xi, ps.eigenvalues(k)}});
  return out;
}

/// Largest number of centers in a closed unit disk, probing every center and every integer point
/// of the bounding box.
inline int check_bounded_density(const std::vector<Point>& centers, double radius = 1.0) {
  if (centers.empty()) return 0;
  std::vector<Point> probes = centers;
  double x0 = centers[0][0], x1 = x0, y0 = centers[0][1], y1 = y0;
  for (const auto& c : centers) {
    x0 = std::min(x0, c[0]);
    x1 = std::max(x1, c[0]);
    y0 = std::min(y0, c[1]);
    y1 = std::max(y1, c[1]);
  }
  for (long x = static_cast<long>(std::floor(x0)); x <= static_cast<long>(std::ceil(x1)); ++x)
    for (long y = static_cast<long>(std::floor(y0)); y <= static_cast<long>(std::ceil(y1)); ++y)
      probes.push_back({static_cast<double>(x), static_cast<double>(y)});
  const double r2 = radius * radius * (1.0 + 1e-12);
  int best = 0;
  for (const auto& p : probes) {
    int n = 0;
    for (const auto& c : centers) {
      double dx = c[0] - p[0], dy = c[1] - p[1];
      if (dx * dx + dy * dy <= r2) ++n;
    }
    best = std::max(best, n);
  }
  return best;
}

/// Nearest integer point in the half-open square convention [m - 1/2, m + 1/2).
inline int square_index(double c) { return static_cast<int>(std::floor(c + 0.5)); }

/// Assigns each function the integer point m whose unit square holds its center; j counts
/// functions in one square by original order. Centers are replaced by m.
inline GeneralizedWannierBasis relabel_to_lattice(GeneralizedWannierBasis basis) {
  std::map<std::pair<int, int>, int> occupancy;
  basis.lattice_index.clear();
  for (int a = 0; a < basis.size(); ++a) {
    int m1 = square_index(basis.centers[a][0]), m2 = square_index(basis.centers[a][1]);
    int j = ++occupancy[{m1, m2}];
    basis.lattice_index.push_back({m1, m2, j});
  }
  basis.M = 0;
  for (const auto& [k, n] : occupancy) basis.M = std::max(basis.M, n);
  for (int a = 0; a < basis.size(); ++a)
    basis.centers[a] = {static_cast<double>(basis.lattice_index[a].m1), static_cast<double>(basis.lattice_index[a].m2)};
  return basis;
}

enum class BasisMode { columns, pxp_eigen };

struct InitialBasisOptions {
  BasisMode mode = BasisMode::columns;
  /// Optional algebraic tail: W <- W exp(i eps K), K_ab = <mu_a - mu_b>^{-p} off the diagonal.
  double tail_eps = 0.0;
  double tail_power = 4.0;
  std::vector<double> s_grid{1.0, 2.0, 3.0};
};

inline constexpr double kMaxSelectionCondition = 1e8;

inline GeneralizedWannierBasis initial_basis(const Projector& P, const InitialBasisOptions& opt = {}) {
  if (P.rank < 1) throw Error(ErrorKind::insufficient_range, "initial basis needs rank >= 1");
  const SiteGrid& grid = P.grid;
  GeneralizedWannierBasis b;
  if (opt.mode == BasisMode::columns) {
    Eigen::ColPivHouseholderQR<Mat> qr(P.P);
    const auto& perm = qr.colsPermutation().indices();
    Mat C(P.dim(), P.rank);
    for (int k = 0; k < P.rank; ++k) C.col(k) = P.P.col(perm(k));
    Mat S = C.adjoint() * C;
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    double cond = lo > 0 ? std::sqrt(hi / lo) : std::numeric_limits<double>::infinity();
    if (cond > kMaxSelectionCondition) {
      std::ostringstream os;
      os << "selected columns have condition number " << cond << "; try more pivots";
      throw Error(ErrorKind::ill_conditioned_selection, os.str());
    }
    RVec isq = es.eigenvalues().array().rsqrt();
    b.functions = C * es.eigenvectors() * isq.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  } else {
    RVec X(grid.size());
    for (int i = 0; i < grid.size(); ++i) X(i) = grid.xs[i];
    b.functions = projected_spectrum(P, diag_op(X)).vectors;
  }
  fix_phases(b.functions);
  b.centers = density_centroids(b.functions, grid);
  if (opt.tail_eps != 0.0 && b.size() > 1) {
    const int r = b.size();
    RMat K = RMat::Zero(r, r);
    for (int a = 0; a < r; ++a)
      for (int c = 0; c < r; ++c)
        if (a != c)
          K(a, c) = std::pow(jbracket(b.centers[a][0] - b.centers[c][0], b.centers[a][1] - b.centers[c][1]),
                             -opt.tail_power);
    Eigen::SelfAdjointEigenSolver<RMat> ek(K);
    Vec ph(r);
    for (int a = 0; a < r; ++a) ph(a) = std::polar(1.0, opt.tail_eps * ek.eigenvalues()(a));
    Mat U = ek.eigenvectors().cast<cplx>() * ph.asDiagonal() * ek.eigenvectors().transpose().cast<cplx>();
    b.functions = (b.functions * U).eval();
    fix_phases(b.functions);
    b.centers = density_centroids(b.functions, grid);
  }
  attach_moments(b, grid, opt.s_grid);
  return b;
}

}  // namespace gwb
