#ifndef HAR_NN_HPP
#define HAR_NN_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "har/rng.hpp"
#include "har/tensor.hpp"

namespace har::nn {

using Mask = std::vector<std::uint8_t>;

inline Real sigmoid(Real x) {
  return x >= 0 ? Real(1) / (Real(1) + std::exp(-x))
                : std::exp(x) / (Real(1) + std::exp(x));
}

// A trainable tensor with its gradient and Adam moment slots.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // first moment
  Tensor s;  // second moment

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(shape), m(shape), s(shape) {}

  void zero_grad() { grad.zero(); }
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); the default for dense and
// recurrent weights. Output projections are left at zero instead so an
// untrained model predicts the uniform distribution.
void init_fan_in(Parameter& p, std::size_t fan_in, Rng& rng);
void init_normal(Parameter& p, Real stddev, Rng& rng);

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

// Canonical cell. Gate order along the 4H axis is [input, forget, cell,
// output]. w_ih is Dx4H, w_hh is Hx4H, bias is 4H.
struct LstmCellParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Parameter w_ih;
  Parameter w_hh;
  Parameter bias;

  LstmCellParams() = default;
  LstmCellParams(const std::string& prefix, std::size_t d, std::size_t h);

  // Fan-in init for weights, zero bias except forget gate at 1.
  void init(Rng& rng);

  std::vector<Parameter*> parameters();
};

// h', c' out of one step. Shapes: x[D], h[H], c[H].
void lstm_cell_forward(const Real* x, const Real* h, const Real* c,
                       const LstmCellParams& p, Real* h_out, Real* c_out);

// Everything the backward pass needs, per time step.
struct LstmStepCache {
  std::vector<Real> gates;  // 4H post-activation [i f g o]
  std::vector<Real> c_prev;
  std::vector<Real> h_prev;
  std::vector<Real> c;
  std::vector<Real> tanh_c;
};

struct LstmCache {
  std::vector<LstmStepCache> steps;  // indexed by time, only real steps filled
};

// Steps the cell across time. Masked (padding) steps pass state through
// unchanged and emit zero output. reverse=true scans right-to-left.
// xs is TxD; returns TxH.
Tensor lstm_sequence_forward(const Tensor& xs, const Mask& mask,
                             const LstmCellParams& p, bool reverse,
                             LstmCache* cache);

// BPTT. d_ys is TxH (gradient w.r.t. the emitted outputs); accumulates into
// p's parameter grads and, when d_xs is non-null, into d_xs (TxD).
void lstm_sequence_backward(const Tensor& d_ys, const Tensor& xs,
                            const Mask& mask, LstmCellParams& p, bool reverse,
                            const LstmCache& cache, Tensor* d_xs);

// Forward track left-to-right, backward track right-to-left, per-step
// concatenation [fwd;bwd]. Returns Tx2H.
Tensor bidirectional_forward(const Tensor& xs, const Mask& mask,
                             const LstmCellParams& p_fwd,
                             const LstmCellParams& p_bwd, LstmCache* cache_fwd,
                             LstmCache* cache_bwd);

void bidirectional_backward(const Tensor& d_ys, const Tensor& xs,
                            const Mask& mask, LstmCellParams& p_fwd,
                            LstmCellParams& p_bwd, const LstmCache& cache_fwd,
                            const LstmCache& cache_bwd, Tensor* d_xs);

// ---------------------------------------------------------------------------
// Dense / softmax
// ---------------------------------------------------------------------------

struct DenseParams {
  Parameter w;  // DxC
  Parameter b;  // C

  DenseParams() = default;
  DenseParams(const std::string& prefix, std::size_t d, std::size_t c);
  std::vector<Parameter*> parameters();
};

void dense_forward(const Real* x, const DenseParams& p, Real* y);
// Accumulates weight grads; adds input gradient into d_x when non-null.
void dense_backward(const Real* x, const Real* d_y, DenseParams& p,
                    Real* d_x);

// Max-subtracted stable softmax, in place over n logits.
void softmax_inplace(Real* logits, std::size_t n);

// loss = -log softmax(logits)[target]; grad = softmax - onehot(target).
std::pair<Real, Tensor> softmax_cross_entropy(const Tensor& logits,
                                              std::size_t target);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamConfig {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Standard bias-corrected update; zeroes gradients afterwards.
  void step(const std::vector<Parameter*>& params);

  std::size_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient checking (64-bit only)
// ---------------------------------------------------------------------------

// Central differences against the analytic gradients already stored in each
// parameter. loss_fn must recompute the loss from current parameter values.
// max_entries_per_param samples entries evenly when a tensor is larger.
Real grad_check(const std::function<Real()>& loss_fn,
                const std::vector<Parameter*>& params, Real eps = 1e-5,
                std::size_t max_entries_per_param = 64);

}  // namespace har::nn

#endif  // HAR_NN_HPP
