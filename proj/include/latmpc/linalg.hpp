#ifndef LATMPC_LINALG_HPP
#define LATMPC_LINALG_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace latmpc {

using Vec = std::vector<double>;

// Dense row-major matrix. Everything in this project is desk-scale
// (a few tens of rows), so storage is a flat vector and the inner loops
// go through the kernel layer.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), d_(rows * cols, 0.0) {}

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return d_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return d_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return d_.empty(); }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }

  std::span<double> row(std::size_t r) { return {d_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {d_.data() + r * cols_, cols_};
  }

  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec d_;
};

Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(double s, const Mat& a);

// C = A * B
Mat matmul(const Mat& a, const Mat& b);

// y = A * x
Vec matvec(const Mat& a, std::span<const double> x);

// y = A^T * x
Vec matvec_t(const Mat& a, std::span<const double> x);

Mat transpose(const Mat& a);

double inf_norm(const Mat& a);

// Matrix exponential by scaling-and-squaring with a 13-term Taylor series.
Mat expm(const Mat& a);

// Cholesky factorization of a symmetric positive definite matrix.
// ok() is false when the matrix is not positive definite.
class Cholesky {
 public:
  explicit Cholesky(const Mat& spd);
  bool ok() const { return ok_; }
  Vec solve(std::span<const double> b) const;
  // Solve for each column of B.
  Mat solve_mat(const Mat& b) const;

 private:
  Mat l_;
  bool ok_ = false;
};

// Gaussian elimination with partial pivoting; throws std::runtime_error on
// a singular system.
Vec lu_solve(Mat a, Vec b);

bool all_finite(std::span<const double> x);

}  // namespace latmpc

#endif  // LATMPC_LINALG_HPP
