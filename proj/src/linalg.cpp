#include "latmpc/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "latmpc/kernels.hpp"

namespace latmpc {

bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Mat::all_finite() const { return latmpc::all_finite(d_); }

Mat operator+(const Mat& a, const Mat& b) {
  Mat c = a;
  kern::axpy(1.0, {b.data(), b.rows() * b.cols()}, {c.data(), c.rows() * c.cols()});
  return c;
}

Mat operator-(const Mat& a, const Mat& b) {
  Mat c = a;
  kern::axpy(-1.0, {b.data(), b.rows() * b.cols()}, {c.data(), c.rows() * c.cols()});
  return c;
}

Mat operator*(double s, const Mat& a) {
  Mat c = a;
  kern::scal(s, {c.data(), c.rows() * c.cols()});
  return c;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  Mat c(a.rows(), b.cols());
  // ikj order keeps the inner update on contiguous rows of B and C.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik != 0.0) kern::axpy(aik, b.row(k), ci);
    }
  }
  return c;
}

Vec matvec(const Mat& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matvec: shape mismatch");
  Vec y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = kern::dot(a.row(i), x);
  return y;
}

Vec matvec_t(const Mat& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw std::invalid_argument("matvec_t: shape mismatch");
  Vec y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) kern::axpy(x[i], a.row(i), y);
  return y;
}

Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double inf_norm(const Mat& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += std::fabs(v);
    best = std::max(best, s);
  }
  return best;
}

Mat expm(const Mat& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: square matrix required");
  const std::size_t n = a.rows();
  // Scale so the series argument has infinity norm <= 0.5.
  int s = 0;
  double norm = inf_norm(a);
  while (norm > 0.5 && s < 60) {
    norm *= 0.5;
    ++s;
  }
  Mat x = std::ldexp(1.0, -s) * a;
  Mat result = Mat::identity(n);
  Mat term = Mat::identity(n);
  for (int k = 1; k <= 13; ++k) {
    term = (1.0 / k) * matmul(term, x);
    result = result + term;
  }
  for (int i = 0; i < s; ++i) result = matmul(result, result);
  if (!result.all_finite()) throw std::runtime_error("expm: series did not converge");
  return result;
}

Cholesky::Cholesky(const Mat& spd) : l_(spd.rows(), spd.cols()) {
  const std::size_t n = spd.rows();
  if (spd.cols() != n) return;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = spd(i, j) - kern::dot(l_.row(i).subspan(0, j), l_.row(j).subspan(0, j));
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return;
        l_(i, i) = std::sqrt(s);
      } else {
        l_(i, j) = s / l_(j, j);
      }
    }
  }
  ok_ = true;
}

Vec Cholesky::solve(std::span<const double> b) const {
  const std::size_t n = l_.rows();
  Vec y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i)
    y[i] = (y[i] - kern::dot(l_.row(i).subspan(0, i), std::span<const double>(y).subspan(0, i))) / l_(i, i);
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= l_(j, i) * y[j];
    y[i] = s / l_(i, i);
  }
  return y;
}

Mat Cholesky::solve_mat(const Mat& b) const {
  Mat x(b.rows(), b.cols());
  Vec col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    Vec sol = solve(col);
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

Vec lu_solve(Mat a, Vec b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n)
    throw std::invalid_argument("lu_solve: shape mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(a(i, k)) > std::fabs(a(piv, k))) piv = i;
    if (std::fabs(a(piv, k)) < 1e-300) throw std::runtime_error("lu_solve: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      a(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * b[j];
    b[i] = s / a(i, i);
  }
  return b;
}

}  // namespace latmpc
