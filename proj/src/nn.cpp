#include "har/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace har::nn {

void init_fan_in(Parameter& p, std::size_t fan_in, Rng& rng) {
  const Real bound = Real(1) / std::sqrt(static_cast<Real>(fan_in));
  for (Real& x : p.value.v) x = rng.uniform(-bound, bound);
}

void init_normal(Parameter& p, Real stddev, Rng& rng) {
  for (Real& x : p.value.v) x = rng.normal(0.0, stddev);
}

LstmCellParams::LstmCellParams(const std::string& prefix, std::size_t d,
                               std::size_t h)
    : input_size(d),
      hidden_size(h),
      w_ih(prefix + ".w_ih", {d, 4 * h}),
      w_hh(prefix + ".w_hh", {h, 4 * h}),
      bias(prefix + ".bias", {4 * h}) {}

void LstmCellParams::init(Rng& rng) {
  init_fan_in(w_ih, input_size, rng);
  init_fan_in(w_hh, hidden_size, rng);
  bias.value.zero();
  // Forget-gate bias at 1 keeps early memory open.
  for (std::size_t j = hidden_size; j < 2 * hidden_size; ++j)
    bias.value[j] = Real(1);
}

std::vector<Parameter*> LstmCellParams::parameters() {
  return {&w_ih, &w_hh, &bias};
}

namespace {

// Pre-activations a[4H] = x.w_ih + h.w_hh + b, then gate nonlinearities
// in place: [i f g o] with sigmoid on i,f,o and tanh on g.
void lstm_gates(const Real* x, const Real* h, const LstmCellParams& p,
                Real* a) {
  const std::size_t h4 = 4 * p.hidden_size;
  for (std::size_t j = 0; j < h4; ++j) a[j] = p.bias.value[j];
  vec_mat_acc(x, p.w_ih.value, a);
  vec_mat_acc(h, p.w_hh.value, a);
  const std::size_t hs = p.hidden_size;
  for (std::size_t j = 0; j < 2 * hs; ++j) a[j] = sigmoid(a[j]);
  for (std::size_t j = 2 * hs; j < 3 * hs; ++j) a[j] = std::tanh(a[j]);
  for (std::size_t j = 3 * hs; j < 4 * hs; ++j) a[j] = sigmoid(a[j]);
}

}  // namespace

void lstm_cell_forward(const Real* x, const Real* h, const Real* c,
                       const LstmCellParams& p, Real* h_out, Real* c_out) {
  const std::size_t hs = p.hidden_size;
  std::vector<Real> a(4 * hs);
  lstm_gates(x, h, p, a.data());
  const Real* gi = a.data();
  const Real* gf = a.data() + hs;
  const Real* gg = a.data() + 2 * hs;
  const Real* go = a.data() + 3 * hs;
  for (std::size_t j = 0; j < hs; ++j) {
    c_out[j] = gf[j] * c[j] + gi[j] * gg[j];
    h_out[j] = go[j] * std::tanh(c_out[j]);
  }
}

Tensor lstm_sequence_forward(const Tensor& xs, const Mask& mask,
                             const LstmCellParams& p, bool reverse,
                             LstmCache* cache) {
  const std::size_t t_len = xs.rows();
  if (mask.size() != t_len)
    throw std::invalid_argument("lstm_sequence_forward: mask length mismatch");
  if (xs.cols() != p.input_size)
    throw std::invalid_argument("lstm_sequence_forward: input width mismatch");
  const std::size_t hs = p.hidden_size;

  Tensor ys = Tensor::zeros(t_len, hs);
  if (cache) {
    cache->steps.clear();
    cache->steps.resize(t_len);
  }

  std::vector<Real> h(hs, 0), c(hs, 0), a(4 * hs);
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t t = reverse ? t_len - 1 - step : step;
    if (!mask[t]) continue;  // state passes through, output stays zero

    lstm_gates(xs.row(t), h.data(), p, a.data());
    const Real* gi = a.data();
    const Real* gf = a.data() + hs;
    const Real* gg = a.data() + 2 * hs;
    const Real* go = a.data() + 3 * hs;

    if (cache) {
      LstmStepCache& sc = cache->steps[t];
      sc.gates = a;
      sc.c_prev = c;
      sc.h_prev = h;
      sc.c.resize(hs);
      sc.tanh_c.resize(hs);
    }
    for (std::size_t j = 0; j < hs; ++j) {
      const Real c_new = gf[j] * c[j] + gi[j] * gg[j];
      const Real tc = std::tanh(c_new);
      c[j] = c_new;
      h[j] = go[j] * tc;
      ys.at(t, j) = h[j];
      if (cache) {
        cache->steps[t].c[j] = c_new;
        cache->steps[t].tanh_c[j] = tc;
      }
    }
  }
  return ys;
}

void lstm_sequence_backward(const Tensor& d_ys, const Tensor& xs,
                            const Mask& mask, LstmCellParams& p, bool reverse,
                            const LstmCache& cache, Tensor* d_xs) {
  const std::size_t t_len = xs.rows();
  const std::size_t hs = p.hidden_size;
  if (d_ys.rows() != t_len || d_ys.cols() != hs)
    throw std::invalid_argument("lstm_sequence_backward: d_ys shape mismatch");

  std::vector<Real> dh(hs, 0), dc(hs, 0), da(4 * hs);
  // Walk time in the opposite order of the forward scan.
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t t = reverse ? step : t_len - 1 - step;
    if (!mask[t]) continue;  // pass-through step: dh, dc flow unchanged

    const LstmStepCache& sc = cache.steps[t];
    const Real* gi = sc.gates.data();
    const Real* gf = sc.gates.data() + hs;
    const Real* gg = sc.gates.data() + 2 * hs;
    const Real* go = sc.gates.data() + 3 * hs;

    for (std::size_t j = 0; j < hs; ++j) {
      const Real dh_j = dh[j] + d_ys.at(t, j);
      const Real tc = sc.tanh_c[j];
      const Real dc_j = dc[j] + dh_j * go[j] * (Real(1) - tc * tc);
      const Real d_go = dh_j * tc;
      const Real d_gi = dc_j * gg[j];
      const Real d_gf = dc_j * sc.c_prev[j];
      const Real d_gg = dc_j * gi[j];
      da[j] = d_gi * gi[j] * (Real(1) - gi[j]);
      da[hs + j] = d_gf * gf[j] * (Real(1) - gf[j]);
      da[2 * hs + j] = d_gg * (Real(1) - gg[j] * gg[j]);
      da[3 * hs + j] = d_go * go[j] * (Real(1) - go[j]);
      dc[j] = dc_j * gf[j];
    }

    outer_acc(xs.row(t), da.data(), p.w_ih.grad);
    outer_acc(sc.h_prev.data(), da.data(), p.w_hh.grad);
    for (std::size_t j = 0; j < 4 * hs; ++j) p.bias.grad[j] += da[j];

    if (d_xs) vec_mat_t_acc(da.data(), p.w_ih.value, d_xs->row(t));

    std::fill(dh.begin(), dh.end(), Real(0));
    vec_mat_t_acc(da.data(), p.w_hh.value, dh.data());
  }
}

Tensor bidirectional_forward(const Tensor& xs, const Mask& mask,
                             const LstmCellParams& p_fwd,
                             const LstmCellParams& p_bwd, LstmCache* cache_fwd,
                             LstmCache* cache_bwd) {
  if (p_fwd.hidden_size != p_bwd.hidden_size)
    throw std::invalid_argument("bidirectional_forward: hidden size mismatch");
  const std::size_t hs = p_fwd.hidden_size;
  Tensor fwd = lstm_sequence_forward(xs, mask, p_fwd, false, cache_fwd);
  Tensor bwd = lstm_sequence_forward(xs, mask, p_bwd, true, cache_bwd);
  Tensor ys = Tensor::zeros(xs.rows(), 2 * hs);
  for (std::size_t t = 0; t < xs.rows(); ++t) {
    for (std::size_t j = 0; j < hs; ++j) {
      ys.at(t, j) = fwd.at(t, j);
      ys.at(t, hs + j) = bwd.at(t, j);
    }
  }
  return ys;
}

void bidirectional_backward(const Tensor& d_ys, const Tensor& xs,
                            const Mask& mask, LstmCellParams& p_fwd,
                            LstmCellParams& p_bwd, const LstmCache& cache_fwd,
                            const LstmCache& cache_bwd, Tensor* d_xs) {
  const std::size_t hs = p_fwd.hidden_size;
  const std::size_t t_len = xs.rows();
  Tensor d_fwd = Tensor::zeros(t_len, hs);
  Tensor d_bwd = Tensor::zeros(t_len, hs);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t j = 0; j < hs; ++j) {
      d_fwd.at(t, j) = d_ys.at(t, j);
      d_bwd.at(t, j) = d_ys.at(t, hs + j);
    }
  }
  lstm_sequence_backward(d_fwd, xs, mask, p_fwd, false, cache_fwd, d_xs);
  lstm_sequence_backward(d_bwd, xs, mask, p_bwd, true, cache_bwd, d_xs);
}

DenseParams::DenseParams(const std::string& prefix, std::size_t d,
                         std::size_t c)
    : w(prefix + ".w", {d, c}), b(prefix + ".b", {c}) {}

std::vector<Parameter*> DenseParams::parameters() { return {&w, &b}; }

void dense_forward(const Real* x, const DenseParams& p, Real* y) {
  const std::size_t c = p.w.value.cols();
  for (std::size_t j = 0; j < c; ++j) y[j] = p.b.value[j];
  vec_mat_acc(x, p.w.value, y);
}

void dense_backward(const Real* x, const Real* d_y, DenseParams& p,
                    Real* d_x) {
  outer_acc(x, d_y, p.w.grad);
  const std::size_t c = p.w.value.cols();
  for (std::size_t j = 0; j < c; ++j) p.b.grad[j] += d_y[j];
  if (d_x) vec_mat_t_acc(d_y, p.w.value, d_x);
}

void softmax_inplace(Real* logits, std::size_t n) {
  Real mx = logits[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = std::exp(logits[i] - mx);
    total += logits[i];
  }
  for (std::size_t i = 0; i < n; ++i) logits[i] /= total;
}

std::pair<Real, Tensor> softmax_cross_entropy(const Tensor& logits,
                                              std::size_t target) {
  const std::size_t n = logits.count();
  if (target >= n)
    throw std::out_of_range("softmax_cross_entropy: target out of range");
  Tensor grad = logits;
  softmax_inplace(grad.v.data(), n);
  const Real loss = -std::log(std::max(grad[target], Real(1e-300)));
  grad[target] -= Real(1);
  return {loss, grad};
}

void Adam::step(const std::vector<Parameter*>& params) {
  ++t_;
  const Real bc1 = Real(1) - std::pow(cfg_.beta1, static_cast<Real>(t_));
  const Real bc2 = Real(1) - std::pow(cfg_.beta2, static_cast<Real>(t_));
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.v.size(); ++i) {
      const Real g = p->grad[i];
      p->m[i] = cfg_.beta1 * p->m[i] + (Real(1) - cfg_.beta1) * g;
      p->s[i] = cfg_.beta2 * p->s[i] + (Real(1) - cfg_.beta2) * g * g;
      const Real m_hat = p->m[i] / bc1;
      const Real s_hat = p->s[i] / bc2;
      p->value[i] -= cfg_.lr * m_hat / (std::sqrt(s_hat) + cfg_.eps);
    }
    p->zero_grad();
  }
}

Real grad_check(const std::function<Real()>& loss_fn,
                const std::vector<Parameter*>& params, Real eps,
                std::size_t max_entries_per_param) {
  Real worst = 0;
  for (Parameter* p : params) {
    const std::size_t n = p->value.v.size();
    const std::size_t stride =
        n <= max_entries_per_param ? 1 : n / max_entries_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const Real saved = p->value[i];
      p->value[i] = saved + eps;
      const Real lp = loss_fn();
      p->value[i] = saved - eps;
      const Real lm = loss_fn();
      p->value[i] = saved;
      const Real numeric = (lp - lm) / (2 * eps);
      const Real analytic = p->grad[i];
      const Real denom =
          std::max(Real(1), std::max(std::abs(numeric), std::abs(analytic)));
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

}  // namespace har::nn
