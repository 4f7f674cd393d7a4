#pragma once

#include "core.hpp"
#include "dichotomy.hpp"
#include "lattice.hpp"
#include "spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace gwb {

/// fhat(xi) = (1 - xi^2)^3 on [-1, 1], zero outside.
inline double filter_fourier(double xi) {
  double a = std::abs(xi);
  if (a >= 1.0) return 0.0;
  double t = 1.0 - a * a;
  return t * t * t;
}

struct FilterSpec {
  double Delta = 8.0;

  explicit FilterSpec(double delta = 8.0) : Delta(delta) {
    if (!(delta >= 2.0)) throw Error(ErrorKind::config, "Delta must be >= 2");
  }
};

struct XtildeOperator {
  Mat matrix;
  double integer_defect = 0.0;  // max distance of sigma(P Xt P) on range(P) to the integers
};

inline double max_integer_distance(const RVec& v) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) d = std::max(d, std::abs(v(i) - std::round(v(i))));
  return d;
}

/// Xt = sum m1 psi psi^dagger + Q X Q.
inline XtildeOperator build_xtilde(const GeneralizedWannierBasis& basis, const Projector& P, const RVec& X) {
  if (!basis.indexed()) throw Error(ErrorKind::config, "X-tilde needs a lattice-indexed basis");
  const Mat& F = basis.functions;
  double defect = basis.size() == P.rank ? (F * F.adjoint() - P.P).cwiseAbs().maxCoeff() : 1.0;
  if (defect > 1e-8) {
    std::ostringstream os;
    os << "basis does not span range(P); defect " << defect;
    throw Error(ErrorKind::completeness, os.str());
  }
  XtildeOperator xt;
  Mat QXQ = P.empty * (P.empty.adjoint() * X.cast<cplx>().asDiagonal() * P.empty) * P.empty.adjoint();
  xt.matrix = F * basis.m1().cast<cplx>().asDiagonal() * F.adjoint() + QXQ;
  xt.matrix = 0.5 * (xt.matrix + xt.matrix.adjoint()).eval();
  if (basis.size() > 0) {
    Mat C = F.adjoint() * xt.matrix * F;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (C + C.adjoint()), Eigen::EigenvaluesOnly);
    xt.integer_defect = max_integer_distance(es.eigenvalues());
  }
  return xt;
}

struct XhatOperator {
  Mat matrix;
  double Delta = 0.0;
  int band_x = 0;  // largest |x - x'| carrying a nonzero entry
  int band_y = 0;
};

/// Xh_{ij} = Xt_{ij} fhat((x_i - x_j)/Delta) fhat((y_i - y_j)/Delta), exact on integer coordinates.
inline XhatOperator build_xhat(const XtildeOperator& xt, const FilterSpec& spec, const RVec& X, const RVec& Y) {
  for (Eigen::Index i = 0; i < X.size(); ++i)
    if (X(i) != std::round(X(i)) || Y(i) != std::round(Y(i)))
      throw Error(ErrorKind::unsupported_geometry, "X-hat formula needs integer coordinates");
  const Eigen::Index n = X.size();
  XhatOperator xh;
  xh.Delta = spec.Delta;
  xh.matrix.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      double f = filter_fourier((X(i) - X(j)) / spec.Delta) * filter_fourier((Y(i) - Y(j)) / spec.Delta);
      cplx v = xt.matrix(i, j) * f;
      xh.matrix(i, j) = v;
      if (v != cplx(0.0)) {
        xh.band_x = std::max(xh.band_x, static_cast<int>(std::abs(X(i) - X(j))));
        xh.band_y = std::max(xh.band_y, static_cast<int>(std::abs(Y(i) - Y(j))));
      }
    }
  return xh;
}

inline double closeness_norm(const XhatOperator& xh, const RVec& X) {
  return operator_norm(xh.matrix - diag_op(X));
}

struct TiltRow {
  double gamma, a1, a2, norm, ratio;
};

struct TiltLipschitz {
  std::vector<TiltRow> rows;
  double sup_ratio = 0.0;
  /// max over gamma of (max over anchors of ratio) divided by the min over gamma of the same.
  double variation = 1.0;
};

/// ||B Xh B^{-1} - Xh|| / gamma over a grid of tilts and anchors.
inline TiltLipschitz tilt_lipschitz(const Mat& xhat, const std::vector<double>& gammas,
                                    const std::vector<Point>& anchors, const RVec& X, const RVec& Y) {
  TiltLipschitz t;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double g : gammas) {
    if (!(g > 0)) throw Error(ErrorKind::config, "tilt sweep needs positive gammas");
    double best = 0.0;
    for (const auto& a : anchors) {
      double nrm = operator_norm(tilt_operator(xhat, {g, a[0], a[1]}, X, Y) - xhat);
      t.rows.push_back({g, a[0], a[1], nrm, nrm / g});
      best = std::max(best, nrm / g);
    }
    t.sup_ratio = std::max(t.sup_ratio, best);
    lo = std::min(lo, best);
    hi = std::max(hi, best);
  }
  t.variation = lo > 0 ? hi / lo : (hi > 0 ? std::numeric_limits<double>::infinity() : 1.0);
  return t;
}

/// G = union over integers m of (m + 1/4, m + 3/4).
inline bool in_gap_set(double lambda) {
  double f = lambda - std::floor(lambda);
  return f > 0.25 && f < 0.75;
}

/// Midpoints m + 1/2 of the G intervals meeting [lo, hi].
inline std::vector<double> gap_midpoints(double lo, double hi) {
  std::vector<double> out;
  for (long m = static_cast<long>(std::floor(lo - 0.75)); m + 0.25 < hi; ++m)
    if (m + 0.75 > lo) out.push_back(m + 0.5);
  return out;
}

struct SqrtResolvent {
  double lambda = 0.0;
  Mat matrix;
  double sign_defect = 0.0;  // distance of sigma(S (lambda - P Xt P) S) from {-1, +1}
};

/// Diagonal weights |lambda - m1|^{-1/2} of S_lambda on the basis.
inline RVec sqrt_resolvent_weights(double lambda, const RVec& m1) {
  return (lambda - m1.array()).abs().rsqrt().matrix();
}

inline void require_gap_set(double lambda) {
  if (!in_gap_set(lambda)) {
    std::ostringstream os;
    os << "lambda = " << lambda << " is not in G";
    throw Error(ErrorKind::outside_gap_set, os.str());
  }
}

/// S = |lambda|^{-1/2} Q + sum |lambda - m1|^{-1/2} psi psi^dagger.
inline SqrtResolvent sqrt_resolvent(double lambda, const GeneralizedWannierBasis& basis, const Projector& P) {
  require_gap_set(lambda);
  SqrtResolvent s;
  s.lambda = lambda;
  const Mat& F = basis.functions;
  RVec w = basis.size() ? sqrt_resolvent_weights(lambda, basis.m1()) : RVec();
  s.matrix = F * w.cast<cplx>().asDiagonal() * F.adjoint() +
             (1.0 / std::sqrt(std::abs(lambda))) * (P.empty * P.empty.adjoint());
  Mat PXtP = F * basis.m1().cast<cplx>().asDiagonal() * F.adjoint();
  Mat T = s.matrix * (lambda * Mat::Identity(P.dim(), P.dim()) - PXtP) * s.matrix;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (T + T.adjoint()), Eigen::EigenvaluesOnly);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    s.sign_defect = std::max(s.sign_defect, std::abs(std::abs(es.eigenvalues()(i)) - 1.0));
  return s;
}

struct Certificate {
  double lambda = 0.0;
  double Delta = 0.0;
  double snorm = 0.0;
  double min_gap_distance = 0.0;
  bool pass = false;
};

/// Per-Delta data shared by all lambdas: the compressed difference F^dagger (Xh - Xt) F
/// and sigma(P Xh P) on range(P). S_lambda acts on range(P) as F diag(w) F^dagger.
struct CertificateContext {
  Mat diff;
  RVec spectrum;
  RVec m1;
  double Delta = 0.0;

  CertificateContext(const GeneralizedWannierBasis& basis, const XtildeOperator& xt, const XhatOperator& xh)
      : Delta(xh.Delta) {
    const Mat& F = basis.functions;
    diff = F.adjoint() * (xh.matrix - xt.matrix) * F;
    diff = 0.5 * (diff + diff.adjoint()).eval();
    Mat C = F.adjoint() * xh.matrix * F;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (C + C.adjoint()), Eigen::EigenvaluesOnly);
    spectrum = es.eigenvalues();
    m1 = basis.m1();
  }

  Certificate at(double lambda) const {
    require_gap_set(lambda);
    Certificate c;
    c.lambda = lambda;
    c.Delta = Delta;
    RVec w = sqrt_resolvent_weights(lambda, m1);
    c.snorm = operator_norm(w.cast<cplx>().asDiagonal() * diff * w.cast<cplx>().asDiagonal());
    c.min_gap_distance = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < spectrum.size(); ++i)
      c.min_gap_distance = std::min(c.min_gap_distance, std::abs(spectrum(i) - lambda));
    c.pass = c.snorm < 0.5;
    return c;
  }
};

/// ||S (P Xh P - P Xt P) S|| < 1/2 at lambda, plus the direct distance from sigma(P Xh P) to lambda.
inline Certificate gap_certificate(const GeneralizedWannierBasis& basis, const XtildeOperator& xt,
                                   const XhatOperator& xh, double lambda) {
  return CertificateContext(basis, xt, xh).at(lambda);
}

/// Smallest distance from sigma(P Xh P) to any G interval listed by its midpoint.
inline double gap_interval_clearance(const RVec& spectrum, const std::vector<double>& midpoints) {
  double best = std::numeric_limits<double>::infinity();
  for (double mid : midpoints)
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
      double e = spectrum(i);
      double d = e < mid - 0.25 ? mid - 0.25 - e : (e > mid + 0.25 ? e - mid - 0.25 : -1.0);
      best = std::min(best, d);
    }
  return best;
}

}  // namespace gwb
