#include "curvemps/lanczos.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "curvemps/errors.hpp"

namespace curvemps {

namespace {

void project_out(linalg::Vector& v, const std::vector<linalg::Vector>* deflate) {
  if (!deflate) return;
  for (const auto& d : *deflate) v -= d.dot(v) * d;
}

// One Lanczos run of at most `kmax` steps from the unit vector v.
LanczosResult lanczos_pass(const MatVec& op, linalg::Vector v, int kmax, double tol,
                           const std::vector<linalg::Vector>* deflate) {
  const Eigen::Index n = v.size();
  std::vector<linalg::Vector> basis;
  std::vector<double> alpha, beta;
  linalg::Vector w(n);
  LanczosResult res;
  for (int j = 0; j < kmax; ++j) {
    basis.push_back(v);
    op(v, w);
    if (!w.allFinite()) throw NumericalError("lanczos: operator produced non-finite values");
    project_out(w, deflate);
    const double a = v.dot(w);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) w -= b.dot(w) * b;
      project_out(w, deflate);
    }
    const double b = w.norm();

    const int k = static_cast<int>(alpha.size());
    const bool last = k == kmax || b < 1e-14 * std::max(1.0, std::abs(a));
    // the projected problem grows cubically; long runs check every tenth step
    if (k > 60 && k % 10 != 0 && !last) {
      beta.push_back(b);
      v = w / b;
      continue;
    }
    linalg::Matrix t = linalg::Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<linalg::Matrix> es(t);
    const double theta = es.eigenvalues()(0);
    const linalg::Vector y = es.eigenvectors().col(0);
    res.value = theta;
    res.residual = std::abs(b * y(k - 1));
    res.iterations = k;
    const bool invariant = b < 1e-14 * std::max(1.0, std::abs(theta));
    if (res.residual <= tol || invariant || k == kmax) {
      res.vector = linalg::Vector::Zero(n);
      for (int i = 0; i < k; ++i) res.vector += y(i) * basis[i];
      res.vector.normalize();
      res.converged = res.residual <= tol || invariant;
      return res;
    }
    beta.push_back(b);
    v = w / b;
  }
  return res;
}

}  // namespace

LanczosResult lanczos_lowest(const MatVec& op, const linalg::Vector& start, const LanczosOptions& options,
                             const std::vector<linalg::Vector>* deflate) {
  const Eigen::Index n = start.size();
  if (n == 0) throw NumericalError("lanczos: empty space");
  linalg::Vector v = start;
  project_out(v, deflate);
  double nv = v.norm();
  if (!(nv > 1e-300) || !std::isfinite(nv)) {
    // deterministic fallback start
    v = linalg::Vector::LinSpaced(n, 1.0, 2.0);
    project_out(v, deflate);
    nv = v.norm();
    if (!(nv > 0.0)) throw NumericalError("lanczos: start vector lies in the deflated space");
  }
  v /= nv;

  int left = static_cast<int>(std::min<Eigen::Index>(options.max_iter, n));
  const int cap = options.max_basis > 1 ? options.max_basis : left;
  LanczosResult res;
  int used = 0;
  while (left > 0) {
    const int k = std::min(left, cap);
    res = lanczos_pass(op, v, k, options.tol, deflate);
    used += res.iterations;
    left -= res.iterations;
    if (res.converged) break;
    v = res.vector;
  }
  res.iterations = used;
  return res;
}

}  // namespace curvemps
