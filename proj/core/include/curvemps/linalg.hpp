#pragma once

#include <Eigen/Dense>

namespace curvemps::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thin SVD a = u * diag(s) * vt with s descending. Uses divide-and-conquer
// and falls back to the QR-iteration driver if it fails to converge.
void svd(const Matrix& a, Matrix& u, Vector& s, Matrix& vt);

// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
void eigh(const Matrix& a, Vector& values, Matrix& vectors);

// Thin QR with non-negative diagonal in r.
void qr(const Matrix& a, Matrix& q, Matrix& r);

}  // namespace curvemps::linalg
