#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gwb {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

enum class ErrorKind {
  model_too_small,
  gap_closure_risk,
  gapless_model,
  no_gap,
  tilt_too_large,
  insufficient_range,
  shape_mismatch,
  numerical_degeneracy,
  ill_conditioned_selection,
  completeness,
  unsupported_geometry,
  outside_gap_set,
  window_too_large,
  no_invariant,
  unsupported,
  config,
  io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::model_too_small: return "model-too-small";
    case ErrorKind::gap_closure_risk: return "gap-closure-risk";
    case ErrorKind::gapless_model: return "gapless-model";
    case ErrorKind::no_gap: return "no-gap";
    case ErrorKind::tilt_too_large: return "tilt-too-large";
    case ErrorKind::insufficient_range: return "insufficient-range";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::numerical_degeneracy: return "numerical-degeneracy";
    case ErrorKind::ill_conditioned_selection: return "ill-conditioned-selection";
    case ErrorKind::completeness: return "completeness";
    case ErrorKind::unsupported_geometry: return "unsupported-geometry";
    case ErrorKind::outside_gap_set: return "outside-gap-set";
    case ErrorKind::window_too_large: return "window-too-large";
    case ErrorKind::no_invariant: return "no-invariant";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Japanese bracket <x> = sqrt(1 + |x|^2).
inline double jbracket(double x) { return std::sqrt(1.0 + x * x); }
inline double jbracket(double x, double y) { return std::sqrt(1.0 + x * x + y * y); }

inline Mat commutator(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows() || b.cols() != a.rows() || a.rows() != a.cols())
    throw Error(ErrorKind::shape_mismatch, "commutator needs square conformable operands");
  return a * b - b * a;
}

inline double hermiticity_defect(const Mat& a) { return (a - a.adjoint()).cwiseAbs().maxCoeff(); }

/// Spectral norm (largest singular value).
inline double operator_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  if (a.rows() == a.cols() && hermiticity_defect(a) <= 1e-14 * scale) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::BDCSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

/// Multiply so that the largest-magnitude entry is real and positive.
inline void fix_phase(Eigen::Ref<Vec> v) {
  if (v.size() == 0) return;
  Eigen::Index k = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double a = std::abs(v(i));
    if (a > best * (1.0 + 1e-12)) {
      best = a;
      k = i;
    }
  }
  if (best > 0.0) v *= std::conj(v(k)) / best;
}

inline void fix_phases(Mat& cols) {
  for (Eigen::Index j = 0; j < cols.cols(); ++j) fix_phase(cols.col(j));
}

}  // namespace gwb
