#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace calib96 {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Lower-triangular Cholesky factor together with the diagonal jitter that was
// needed to make the matrix factor. Jitter escalates from jitter0 by factors
// of 10 up to jitter_max (both relative to `scale`, typically tau^2);
// IllConditionedError if even the largest jitter fails.
struct CholResult {
  Mat L;
  double applied_jitter = 0.0;  // absolute value added to the diagonal
};

CholResult cholesky_with_jitter(const Mat& A, double scale, double jitter0 = 1e-10,
                                double jitter_max = 1e-4);

// 2 * sum(log diag(L)) for a lower-triangular factor.
double logdet_from_factor(const Mat& L);

// Extends the factor of A to the factor of [[A, b], [b^T, c]] in O(m^2).
// Returns false when the Schur complement is not positive.
bool cholesky_append(Mat& L, const Vec& b, double c);

// Symmetric PSD square root via eigendecomposition; negative eigenvalues are
// clamped to zero (pseudo-root for rank-deficient inputs).
Mat symmetric_sqrt(const Mat& A);

// max |A - A^T| over entries, as a fraction of max |A|.
double asymmetry(const Mat& A);

double min_eigenvalue(const Mat& A);

}  // namespace calib96
