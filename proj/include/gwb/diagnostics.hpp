#pragma once

#include "core.hpp"
#include "dichotomy.hpp"
#include "lattice.hpp"
#include "localization.hpp"
#include "spectral.hpp"
#include "xhat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace gwb {

struct MomentReport {
  double s = 0.0;
  std::vector<double> values;
  double max = 0.0;
};

inline MomentReport moment_report(const GeneralizedWannierBasis& b, const SiteGrid& grid, double s) {
  MomentReport r;
  r.s = s;
  for (int a = 0; a < b.size(); ++a) {
    r.values.push_back(s_moment(b.functions.col(a), grid, b.centers[a], s));
    r.max = std::max(r.max, r.values.back());
  }
  return r;
}

struct ChernReport {
  int Lw = 0;
  double value = 0.0;
  double imag_residual = 0.0;
  int terms = 0;
};

/// Window (c - Lw, c + Lw] in both directions, c = (L-1)/2 rounded down; it holds (2 Lw)^2 sites.
inline void chern_window_check(const SiteGrid& grid, int Lw) {
  if (grid.dim != 2) throw Error(ErrorKind::unsupported, "Chern marker needs a 2D lattice");
  const int c = grid.center(), margin = std::min(c - Lw + 1, grid.L - 1 - (c + Lw));
  if (Lw < 1 || margin < grid.L / 4) {
    std::ostringstream os;
    os << "window half-width " << Lw << " leaves margin " << margin << " < L/4 = " << grid.L / 4;
    throw Error(ErrorKind::window_too_large, os.str());
  }
}

/// Re[(2 pi i / (2 Lw)^2) tr(chi P [[X,P],[Y,P]] P chi)].
inline ChernReport chern_marker(const Mat& P, const SiteGrid& grid, int Lw) {
  chern_window_check(grid, Lw);
  const int n = grid.size(), c = grid.center();
  Mat A(n, n), B(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      A(i, j) = static_cast<double>(grid.xs[i] - grid.xs[j]) * P(i, j);
      B(i, j) = static_cast<double>(grid.ys[i] - grid.ys[j]) * P(i, j);
    }
  Mat K = A * B - B * A;
  Mat PK = P * K;
  ChernReport r;
  r.Lw = Lw;
  cplx tr = 0.0;
  for (int i = 0; i < n; ++i) {
    if (grid.xs[i] <= c - Lw || grid.xs[i] > c + Lw || grid.ys[i] <= c - Lw || grid.ys[i] > c + Lw) continue;
    tr += PK.row(i).transpose().cwiseProduct(P.col(i)).sum();  // (P K P)_ii
    ++r.terms;
  }
  cplx v = cplx(0.0, 2.0 * std::numbers::pi) / static_cast<double>(4 * Lw * Lw) * tr;
  r.value = v.real();
  r.imag_residual = std::abs(v.imag());
  return r;
}

/// Bloch Hamiltonian of build_haldane in the (a1, a2) basis, k = (k1, k2) reduced coordinates.
inline Eigen::Matrix2cd haldane_bloch(double k1, double k2, double t1, double t2, double phi, double m) {
  const cplx I(0.0, 1.0);
  cplx f = t1 * (1.0 + std::exp(-I * k1) + std::exp(-I * k2));
  const int b[3][2] = {{1, 0}, {-1, 1}, {0, -1}};
  cplx haa = 0, hbb = 0;
  for (const auto& v : b) {
    double kb = k1 * v[0] + k2 * v[1];
    haa += t2 * (std::exp(I * (phi - kb)) + std::exp(-I * (phi - kb)));
    hbb += t2 * (std::exp(-I * (phi + kb)) + std::exp(I * (phi + kb)));
  }
  Eigen::Matrix2cd h;
  h << m + haa, f, std::conj(f), -m + hbb;
  return h;
}

/// Lower-band Chern number by plaquette link variables on an n x n Brillouin-zone mesh.
/// Orientation: plaquettes traversed k1 then k2, F summed as arg of the link product, divided by 2 pi.
/// With this orientation the sign agrees with chern_marker on build_haldane.
inline int chern_number_kspace(double t1, double t2, double phi, double m, int n = 48) {
  std::vector<Eigen::Vector2cd> u(static_cast<size_t>(n) * n);
  double min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(
          haldane_bloch(2 * std::numbers::pi * i / n, 2 * std::numbers::pi * j / n, t1, t2, phi, m));
      min_gap = std::min(min_gap, es.eigenvalues()(1) - es.eigenvalues()(0));
      u[i * n + j] = es.eigenvectors().col(0);
    }
  if (min_gap < 1e-6) throw Error(ErrorKind::no_invariant, "band gap closes on the k mesh");
  auto at = [&](int i, int j) -> const Eigen::Vector2cd& { return u[((i + n) % n) * n + (j + n) % n]; };
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cplx w = at(i, j).dot(at(i + 1, j)) * at(i + 1, j).dot(at(i + 1, j + 1)) *
               at(i + 1, j + 1).dot(at(i, j + 1)) * at(i, j + 1).dot(at(i, j));
      total += std::arg(w);
    }
  return static_cast<int>(std::lround(total / (2 * std::numbers::pi)));
}

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// Indicator of the half-open unit box [k - 1/2, k + 1/2) in both coordinates.
inline bool in_unit_box(double x, double y, const std::array<int, 2>& k) {
  return x >= k[0] - 0.5 && x < k[0] + 0.5 && y >= k[1] - 0.5 && y < k[1] + 0.5;
}

/// ||chi_k v|| <= 2^{s1+s2} ||chi_k (|X-m1|+1)^{s1} (|Y-m2|+1)^{s2} v|| / (<m1-k1>^{s1} <m2-k2>^{s2}).
inline InequalityCheck lemma_decay_check(const Vec& v, const RVec& X, const RVec& Y, const std::array<int, 2>& m,
                                         const std::array<int, 2>& k, double s1, double s2) {
  double l2 = 0.0, r2 = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!in_unit_box(X(i), Y(i), k)) continue;
    double a = std::norm(v(i));
    l2 += a;
    double wt = std::pow(std::abs(X(i) - m[0]) + 1.0, s1) * std::pow(std::abs(Y(i) - m[1]) + 1.0, s2);
    r2 += wt * wt * a;
  }
  InequalityCheck c;
  c.lhs = std::sqrt(l2);
  c.rhs = std::pow(2.0, s1 + s2) * std::sqrt(r2) /
          (std::pow(jbracket(m[0] - k[0]), s1) * std::pow(jbracket(m[1] - k[1]), s2));
  c.pass = c.lhs <= c.rhs + 1e-12;
  return c;
}

/// ||(1+|X-m1|)^{s1}(1+|Y-m2|)^{s2} v|| <= ||(1+|X-m1|)^{s1+s2} v|| + ||(1+|Y-m2|)^{s1+s2} v||.
inline InequalityCheck lemma_prod_sum_check(const Vec& v, const RVec& X, const RVec& Y, const Point& m, double s1,
                                            double s2) {
  double l = 0.0, rx = 0.0, ry = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double a = std::norm(v(i));
    double ax = std::abs(X(i) - m[0]) + 1.0, ay = std::abs(Y(i) - m[1]) + 1.0;
    l += std::pow(ax, 2 * s1) * std::pow(ay, 2 * s2) * a;
    rx += std::pow(ax, 2 * (s1 + s2)) * a;
    ry += std::pow(ay, 2 * (s1 + s2)) * a;
  }
  InequalityCheck c;
  c.lhs = std::sqrt(l);
  c.rhs = std::sqrt(rx) + std::sqrt(ry);
  c.pass = c.lhs <= c.rhs + 1e-12;
  return c;
}

struct SchurSums {
  double sup_row = 0.0;
  double sup_col = 0.0;
  double bound = 0.0;
  double direct = 0.0;
  bool pass = false;
};

/// Schur test on the coefficient kernel <psi_a, (X - m1_a) psi_b> of P X P - sum m1 psi psi^dagger.
inline SchurSums schur_row_sums(const GeneralizedWannierBasis& basis, const RVec& X) {
  SchurSums s;
  const int r = basis.size();
  if (r == 0) {
    s.pass = true;
    return s;
  }
  Mat K = basis.functions.adjoint() * X.cast<cplx>().asDiagonal() * basis.functions;
  RVec m1 = basis.m1();
  for (int a = 0; a < r; ++a) K(a, a) -= m1(a);
  RMat A = K.cwiseAbs();
  s.sup_row = A.rowwise().sum().maxCoeff();
  s.sup_col = A.colwise().sum().maxCoeff();
  s.bound = std::sqrt(s.sup_row * s.sup_col);
  s.direct = operator_norm(K);
  s.pass = s.direct <= s.bound + 1e-9;
  return s;
}

struct SqrtBoundRow {
  double lambda = 0.0;
  std::array<double, 4> norms{};  // S P <X-l>^{1/2}, <X-l>^{1/2} P S, S^{-1} P <X-l>^{-1/2}, <X-l>^{-1/2} P S^{-1}
  double sqrt_diff = 0.0;          // ||P S^{-1} P - P <X-l>^{1/2} P||
  double max() const { return std::max({norms[0], norms[1], norms[2], norms[3], sqrt_diff}); }
};

/// On range(P), S acts as F diag(w) F^dagger, so every sandwich reduces to an r x r Gram matrix.
inline std::vector<SqrtBoundRow> sqrt_bound_survey(const GeneralizedWannierBasis& basis, const RVec& X,
                                                   const std::vector<double>& lambdas) {
  std::vector<SqrtBoundRow> out;
  const Mat& F = basis.functions;
  const int r = basis.size();
  RVec m1 = r ? basis.m1() : RVec();
  for (double lam : lambdas) {
    require_gap_set(lam);
    SqrtBoundRow row;
    row.lambda = lam;
    if (r == 0) {
      out.push_back(row);
      continue;
    }
    RVec w = sqrt_resolvent_weights(lam, m1);
    RVec br(X.size());
    for (Eigen::Index i = 0; i < X.size(); ++i) br(i) = std::sqrt(jbracket(X(i) - lam));
    auto gram_norm = [&](const RVec& dw, const RVec& site) {
      // ||F diag(dw) F^dagger diag(site)|| = sqrt(||diag(dw) F^dagger diag(site)^2 F diag(dw)||)
      Mat G = dw.cast<cplx>().asDiagonal() * (F.adjoint() * site.array().square().matrix().cast<cplx>().asDiagonal() * F) *
              dw.cast<cplx>().asDiagonal();
      return std::sqrt(operator_norm(0.5 * (G + G.adjoint())));
    };
    RVec winv = w.cwiseInverse();
    RVec brinv = br.cwiseInverse();
    row.norms[0] = gram_norm(w, br);
    row.norms[1] = gram_norm(w, br);  // adjoint of the first sandwich
    row.norms[2] = gram_norm(winv, brinv);
    row.norms[3] = gram_norm(winv, brinv);
    Mat D = -(F.adjoint() * br.cast<cplx>().asDiagonal() * F);
    for (int a = 0; a < r; ++a) D(a, a) += winv(a);
    row.sqrt_diff = operator_norm(0.5 * (D + D.adjoint()));
    out.push_back(row);
  }
  return out;
}

struct TiltedCommRow {
  double lambda = 0.0;
  double comm_x = 0.0;  // ||<X-l>^{-1/2} [X, Xt] <X-l>^{-1/2}||
  double comm_y = 0.0;
  double schur_sum = 0.0;  // sup_a sum_b |m1_a - m1_b| / |l - m1_b| |<psi_a, X psi_b>|
};

inline std::vector<TiltedCommRow> tilted_comm_survey(const GeneralizedWannierBasis& basis, const XtildeOperator& xt,
                                                     const RVec& X, const RVec& Y,
                                                     const std::vector<double>& lambdas) {
  std::vector<TiltedCommRow> out;
  const Eigen::Index n = X.size();
  const int r = basis.size();
  Mat Kx = r ? Mat(basis.functions.adjoint() * X.cast<cplx>().asDiagonal() * basis.functions) : Mat();
  RVec m1 = r ? basis.m1() : RVec();
  for (double lam : lambdas) {
    require_gap_set(lam);
    TiltedCommRow row;
    row.lambda = lam;
    RVec b(n);
    for (Eigen::Index i = 0; i < n; ++i) b(i) = 1.0 / std::sqrt(jbracket(X(i) - lam));
    // i [A, Xt] is Hermitian for diagonal real A; entries i (a_i - a_j) Xt_ij.
    Mat cx(n, n), cy(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        cplx base = cplx(0.0, 1.0) * b(i) * b(j) * xt.matrix(i, j);
        cx(i, j) = (X(i) - X(j)) * base;
        cy(i, j) = (Y(i) - Y(j)) * base;
      }
    row.comm_x = operator_norm(0.5 * (cx + cx.adjoint()));
    row.comm_y = operator_norm(0.5 * (cy + cy.adjoint()));
    for (int a = 0; a < r; ++a) {
      double acc = 0.0;
      for (int c = 0; c < r; ++c) acc += std::abs(m1(a) - m1(c)) / std::abs(lam - m1(c)) * std::abs(Kx(a, c));
      row.schur_sum = std::max(row.schur_sum, acc);
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace gwb
