#ifndef HAR_TENSOR_HPP
#define HAR_TENSOR_HPP

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace har::nn {

using Real = double;

// Dense row-major tensor. Rank 1 or 2 covers everything in this project.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<Real> v;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    v.assign(count(), Real(0));
  }

  static Tensor zeros(std::size_t n) { return Tensor({n}); }
  static Tensor zeros(std::size_t r, std::size_t c) { return Tensor({r, c}); }

  std::size_t count() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  Real& operator[](std::size_t i) { return v[i]; }
  Real operator[](std::size_t i) const { return v[i]; }

  Real& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  Real at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  Real* row(std::size_t r) { return v.data() + r * cols(); }
  const Real* row(std::size_t r) const { return v.data() + r * cols(); }

  void fill(Real x) { std::fill(v.begin(), v.end(), x); }
  void zero() { fill(Real(0)); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void add(const Tensor& o) {
    require_same_shape(o, "Tensor::add");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
  }

  void require_same_shape(const Tensor& o, const std::string& where) const {
    if (!same_shape(o))
      throw std::invalid_argument(where + ": shape mismatch");
  }
};

// y[1xN] += x[1xM] . W[MxN]
inline void vec_mat_acc(const Real* x, const Tensor& w, Real* y) {
  const std::size_t m = w.rows(), n = w.cols();
  for (std::size_t k = 0; k < m; ++k) {
    const Real xk = x[k];
    if (xk == Real(0)) continue;
    const Real* wr = w.row(k);
    for (std::size_t j = 0; j < n; ++j) y[j] += xk * wr[j];
  }
}

// dx[1xM] += dy[1xN] . W^T   (i.e. dx_k = sum_j dy_j W[k][j])
inline void vec_mat_t_acc(const Real* dy, const Tensor& w, Real* dx) {
  const std::size_t m = w.rows(), n = w.cols();
  for (std::size_t k = 0; k < m; ++k) {
    const Real* wr = w.row(k);
    Real acc = 0;
    for (std::size_t j = 0; j < n; ++j) acc += dy[j] * wr[j];
    dx[k] += acc;
  }
}

// dW[MxN] += x^T[Mx1] . dy[1xN]
inline void outer_acc(const Real* x, const Real* dy, Tensor& dw) {
  const std::size_t m = dw.rows(), n = dw.cols();
  for (std::size_t k = 0; k < m; ++k) {
    const Real xk = x[k];
    if (xk == Real(0)) continue;
    Real* wr = dw.row(k);
    for (std::size_t j = 0; j < n; ++j) wr[j] += xk * dy[j];
  }
}

inline Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace har::nn

#endif  // HAR_TENSOR_HPP
