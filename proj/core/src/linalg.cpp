#include "curvemps/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <string>
#include <vector>

#include "curvemps/errors.hpp"

namespace curvemps::linalg {

void svd(const Matrix& a, Matrix& u, Vector& s, Matrix& vt) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  u.resize(m, k);
  s.resize(k);
  vt.resize(k, n);
  if (k == 0) return;
  Matrix work = a;
  lapack_int info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'S', m, n, work.data(), m, s.data(), u.data(),
                                   m, vt.data(), k);
  if (info > 0) {
    work = a;
    std::vector<double> superb(static_cast<std::size_t>(std::max<lapack_int>(k - 1, 1)));
    info = LAPACKE_dgesvd(LAPACK_COL_MAJOR, 'S', 'S', m, n, work.data(), m, s.data(), u.data(), m,
                          vt.data(), k, superb.data());
  }
  if (info != 0) throw NumericalError("SVD failed to converge (info=" + std::to_string(info) + ")");
}

void eigh(const Matrix& a, Vector& values, Matrix& vectors) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  vectors = a;
  values.resize(n);
  if (n == 0) return;
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, vectors.data(), n, values.data());
  if (info != 0) {
    throw NumericalError("symmetric eigensolver failed (info=" + std::to_string(info) + ")");
  }
}

void qr(const Matrix& a, Matrix& q, Matrix& r) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  const Eigen::Index k = std::min(m, n);
  Eigen::HouseholderQR<Matrix> hqr(a);
  q = hqr.householderQ() * Matrix::Identity(m, k);
  r = hqr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < k; ++i) {
    if (r(i, i) < 0.0) {
      r.row(i) *= -1.0;
      q.col(i) *= -1.0;
    }
  }
}

}  // namespace curvemps::linalg
