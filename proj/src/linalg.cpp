#include "calib96/linalg.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "calib96/errors.hpp"

namespace calib96 {

CholResult cholesky_with_jitter(const Mat& A, double scale, double jitter0,
                                double jitter_max) {
  if (A.rows() != A.cols()) throw ConfigError("cholesky: matrix not square");
  Eigen::LLT<Mat> llt(A);
  if (llt.info() == Eigen::Success) return {Mat(llt.matrixL()), 0.0};
  for (double j = jitter0; j <= jitter_max * 1.0000001; j *= 10.0) {
    const double add = j * scale;
    Mat Aj = A;
    Aj.diagonal().array() += add;
    llt.compute(Aj);
    if (llt.info() == Eigen::Success) return {Mat(llt.matrixL()), add};
  }
  throw IllConditionedError("cholesky failed after jitter ladder");
}

double logdet_from_factor(const Mat& L) {
  return 2.0 * L.diagonal().array().log().sum();
}

bool cholesky_append(Mat& L, const Vec& b, double c) {
  const Eigen::Index m = L.rows();
  Vec w = L.triangularView<Eigen::Lower>().solve(b);
  const double s = c - w.squaredNorm();
  if (!(s > 0.0) || !std::isfinite(s)) return false;
  L.conservativeResize(m + 1, m + 1);
  L.row(m).head(m) = w.transpose();
  L.col(m).setZero();
  L(m, m) = std::sqrt(s);
  return true;
}

Mat symmetric_sqrt(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double asymmetry(const Mat& A) {
  const double denom = A.cwiseAbs().maxCoeff();
  if (denom == 0.0) return 0.0;
  return (A - A.transpose()).cwiseAbs().maxCoeff() / denom;
}

double min_eigenvalue(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace calib96
