#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqdec/rng.hpp"
#include "seqdec/tensor.hpp"

// Neural building blocks written against plain tensors; Eigen supplies the
// matrix kernels, all gradients are derived here (no autodiff).
namespace seqdec::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

template <typename T>
MatMap<T> as_matrix(Tensor<T>& t, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
  return MatMap<T>(t.data() + offset, rows, cols);
}

template <typename T>
ConstMatMap<T> as_matrix(const Tensor<T>& t, std::size_t rows, std::size_t cols,
                         std::size_t offset = 0) {
  return ConstMatMap<T>(t.data() + offset, rows, cols);
}

enum class Activation { linear, elu, sigmoid, tanh };

template <typename M>
void apply_activation(Activation act, M&& m) {
  using T = typename std::remove_reference_t<M>::Scalar;
  switch (act) {
    case Activation::linear:
      break;
    case Activation::elu:
      m.array() = (m.array() > T(0)).select(m.array(), m.array().exp() - T(1));
      break;
    case Activation::sigmoid:
      m.array() = ((-m.array()).exp() + T(1)).inverse();
      break;
    case Activation::tanh:
      m.array() = m.array().tanh();
      break;
  }
}

// Activation derivative expressed through the post-activation value y.
// ELU with alpha=1 satisfies d/dx = min(y + 1, 1) for outputs y.
template <typename M, typename Y>
void scale_by_activation_grad(Activation act, M&& grad, const Y& y) {
  using T = typename std::remove_reference_t<M>::Scalar;
  switch (act) {
    case Activation::linear:
      break;
    case Activation::elu:
      grad.array() *= (y.array() + T(1)).min(T(1));
      break;
    case Activation::sigmoid:
      grad.array() *= y.array() * (T(1) - y.array());
      break;
    case Activation::tanh:
      grad.array() *= T(1) - y.array().square();
      break;
  }
}

// ---------------------------------------------------------------------------
// Dense layer

template <typename T>
struct DenseParams {
  Tensor<T> w;  // [in x out]
  Tensor<T> b;  // [out]
  Activation act = Activation::linear;

  std::size_t in_width() const { return w.dim(0); }
  std::size_t out_width() const { return w.dim(1); }
};

template <typename T>
struct DenseCache {
  Tensor<T> x;  // [rows x in]
  Tensor<T> y;  // [rows x out], post-activation
};

template <typename T>
struct DenseGrads {
  Tensor<T> w, b;
  explicit DenseGrads(const DenseParams<T>& p) : w(p.w.shape()), b(p.b.shape()) {}
  void zero() {
    w.fill(T(0));
    b.fill(T(0));
  }
};

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const DenseParams<T>& p, DenseCache<T>* cache = nullptr) {
  const std::size_t rows = x.size() / p.in_width();
  Tensor<T> y({rows, p.out_width()});
  auto xm = as_matrix(x, rows, p.in_width());
  auto ym = as_matrix(y, rows, p.out_width());
  auto wm = as_matrix(p.w, p.in_width(), p.out_width());
  auto bm = ConstMatMap<T>(p.b.data(), 1, p.out_width());
  ym.noalias() = xm * wm;
  ym.rowwise() += bm.row(0);
  apply_activation(p.act, ym);
  if (cache) {
    cache->x = x;
    cache->y = y;
  }
  return y;
}

// Accumulates parameter gradients and returns grad wrt the layer input.
template <typename T>
Tensor<T> dense_backward(const Tensor<T>& grad_y, const DenseParams<T>& p, const DenseCache<T>& cache,
                         DenseGrads<T>& grads) {
  const std::size_t rows = grad_y.size() / p.out_width();
  Tensor<T> delta = grad_y;  // becomes grad wrt pre-activation
  auto dm = as_matrix(delta, rows, p.out_width());
  auto ym = as_matrix(cache.y, rows, p.out_width());
  scale_by_activation_grad(p.act, dm, ym);

  auto xm = as_matrix(cache.x, rows, p.in_width());
  as_matrix(grads.w, p.in_width(), p.out_width()).noalias() += xm.transpose() * dm;
  MatMap<T>(grads.b.data(), 1, p.out_width()).noalias() += dm.colwise().sum();

  Tensor<T> grad_x({rows, p.in_width()});
  as_matrix(grad_x, rows, p.in_width()).noalias() = dm * as_matrix(p.w, p.in_width(), p.out_width()).transpose();
  return grad_x;
}

// ---------------------------------------------------------------------------
// GRU layer
//
// z = sigmoid(x W_z + h U_z + b_z)
// r = sigmoid(x W_r + h U_r + b_r)
// c = tanh  (x W_c + (r .* h) U_c + b_c)
// h' = (1 - z) .* h + z .* c
//
// Gates are fused along columns in z,r,c order: w is [in x 3H], u is [H x 3H],
// b is [3H]. Sequences are time-major [T x N x width].

template <typename T>
struct GruParams {
  Tensor<T> w, u, b;

  std::size_t in_width() const { return w.dim(0); }
  std::size_t hidden_width() const { return u.dim(0); }
};

template <typename T>
GruParams<T> make_gru_params(std::size_t in_width, std::size_t hidden) {
  GruParams<T> p;
  p.w = Tensor<T>({in_width, 3 * hidden});
  p.u = Tensor<T>({hidden, 3 * hidden});
  p.b = Tensor<T>({3 * hidden});
  return p;
}

template <typename T>
struct GruCache {
  Tensor<T> x;        // [T x N x D]
  Tensor<T> h;        // [(T+1) x N x H], h[0] is the initial state
  Tensor<T> z, r, c;  // [T x N x H]
  std::size_t seq_len = 0, batch = 0;
};

template <typename T>
struct GruGrads {
  Tensor<T> w, u, b;
  explicit GruGrads(const GruParams<T>& p) : w(p.w.shape()), u(p.u.shape()), b(p.b.shape()) {}
  void zero() {
    w.fill(T(0));
    u.fill(T(0));
    b.fill(T(0));
  }
};

// x_seq: [T x N x D], h0: [N x H]; returns the hidden sequence [T x N x H].
template <typename T>
Tensor<T> gru_forward(const Tensor<T>& x_seq, const Tensor<T>& h0, const GruParams<T>& p,
                      GruCache<T>* cache = nullptr) {
  const std::size_t seq_len = x_seq.dim(0), batch = x_seq.dim(1), in = x_seq.dim(2);
  const std::size_t H = p.hidden_width();
  if (in != p.in_width()) throw std::invalid_argument("gru_forward: input width mismatch");
  if (h0.size() != batch * H) throw std::invalid_argument("gru_forward: h0 shape mismatch");

  // Input projections for the whole sequence in one product.
  Tensor<T> pre({seq_len * batch, 3 * H});
  {
    auto xm = as_matrix(x_seq, seq_len * batch, in);
    auto prem = as_matrix(pre, seq_len * batch, 3 * H);
    prem.noalias() = xm * as_matrix(p.w, in, 3 * H);
    prem.rowwise() += ConstMatMap<T>(p.b.data(), 1, 3 * H).row(0);
  }

  Tensor<T> h_all({seq_len + 1, batch, H});
  std::copy(h0.data(), h0.data() + batch * H, h_all.data());
  Tensor<T> z_all({seq_len, batch, H}), r_all({seq_len, batch, H}), c_all({seq_len, batch, H});
  Mat<T> gates(batch, 2 * H), rh(batch, H), a_c(batch, H);

  auto um = as_matrix(p.u, H, 3 * H);
  for (std::size_t t = 0; t < seq_len; ++t) {
    auto h_prev = as_matrix(h_all, batch, H, t * batch * H);
    auto h_next = as_matrix(h_all, batch, H, (t + 1) * batch * H);
    auto prem = as_matrix(pre, batch, 3 * H, t * batch * 3 * H);
    auto z = as_matrix(z_all, batch, H, t * batch * H);
    auto r = as_matrix(r_all, batch, H, t * batch * H);
    auto c = as_matrix(c_all, batch, H, t * batch * H);

    gates.noalias() = h_prev * um.leftCols(2 * H);
    z = prem.leftCols(H) + gates.leftCols(H);
    r = prem.middleCols(H, H) + gates.rightCols(H);
    apply_activation(Activation::sigmoid, z);
    apply_activation(Activation::sigmoid, r);

    rh.array() = r.array() * h_prev.array();
    a_c.noalias() = rh * um.rightCols(H);
    c = prem.rightCols(H) + a_c;
    apply_activation(Activation::tanh, c);

    h_next.array() = (T(1) - z.array()) * h_prev.array() + z.array() * c.array();
  }

  Tensor<T> h_seq({seq_len, batch, H});
  std::copy(h_all.data() + batch * H, h_all.data() + (seq_len + 1) * batch * H, h_seq.data());
  if (cache) {
    cache->x = x_seq;
    cache->h = std::move(h_all);
    cache->z = std::move(z_all);
    cache->r = std::move(r_all);
    cache->c = std::move(c_all);
    cache->seq_len = seq_len;
    cache->batch = batch;
  }
  return h_seq;
}

// Full backpropagation through time. grad_h_seq is [T x N x H]; parameter
// gradients accumulate into `grads`; grad wrt the input sequence is returned
// and grad wrt h0 is written to grad_h0 when provided.
template <typename T>
Tensor<T> gru_backward(const Tensor<T>& grad_h_seq, const GruParams<T>& p, const GruCache<T>& cache,
                       GruGrads<T>& grads, Tensor<T>* grad_h0 = nullptr) {
  const std::size_t seq_len = cache.seq_len, batch = cache.batch;
  const std::size_t H = p.hidden_width(), in = p.in_width();
  auto um = as_matrix(p.u, H, 3 * H);

  Tensor<T> d_gates({seq_len, batch, 3 * H});  // grads wrt gate pre-activations
  Tensor<T> rh_all({seq_len, batch, H});       // r .* h_prev, rebuilt for the U_c grad
  Mat<T> dh = Mat<T>::Zero(batch, H), dh_prev(batch, H), drh(batch, H), tmp(batch, H);

  for (std::size_t t = seq_len; t-- > 0;) {
    auto h_prev = as_matrix(cache.h, batch, H, t * batch * H);
    auto z = as_matrix(cache.z, batch, H, t * batch * H);
    auto r = as_matrix(cache.r, batch, H, t * batch * H);
    auto c = as_matrix(cache.c, batch, H, t * batch * H);
    auto dgm = as_matrix(d_gates, batch, 3 * H, t * batch * 3 * H);
    auto rh = as_matrix(rh_all, batch, H, t * batch * H);

    dh += as_matrix(grad_h_seq, batch, H, t * batch * H);
    rh.array() = r.array() * h_prev.array();

    // dz, dc through the interpolation h' = (1-z) h + z c.
    dgm.leftCols(H).array() =
        dh.array() * (c.array() - h_prev.array()) * z.array() * (T(1) - z.array());
    dgm.rightCols(H).array() = dh.array() * z.array() * (T(1) - c.array().square());

    drh.noalias() = dgm.rightCols(H) * um.rightCols(H).transpose();
    dgm.middleCols(H, H).array() =
        drh.array() * h_prev.array() * r.array() * (T(1) - r.array());

    dh_prev.array() = dh.array() * (T(1) - z.array()) + drh.array() * r.array();
    dh_prev.noalias() += dgm.leftCols(2 * H) * um.leftCols(2 * H).transpose();
    dh = dh_prev;
  }
  if (grad_h0) {
    *grad_h0 = Tensor<T>({batch, H});
    MatMap<T>(grad_h0->data(), batch, H) = dh;
  }

  // Fused parameter-gradient products over the whole sequence.
  auto dgm_all = as_matrix(d_gates, seq_len * batch, 3 * H);
  auto xm = as_matrix(cache.x, seq_len * batch, in);
  auto h_prev_all = as_matrix(cache.h, seq_len * batch, H);  // rows 0..T-1 of h
  auto rh_flat = as_matrix(rh_all, seq_len * batch, H);

  as_matrix(grads.w, in, 3 * H).noalias() += xm.transpose() * dgm_all;
  as_matrix(grads.u, H, 3 * H).leftCols(2 * H).noalias() +=
      h_prev_all.transpose() * dgm_all.leftCols(2 * H);
  as_matrix(grads.u, H, 3 * H).rightCols(H).noalias() += rh_flat.transpose() * dgm_all.rightCols(H);
  MatMap<T>(grads.b.data(), 1, 3 * H).noalias() += dgm_all.colwise().sum();

  Tensor<T> grad_x({seq_len, batch, in});
  as_matrix(grad_x, seq_len * batch, in).noalias() = dgm_all * as_matrix(p.w, in, 3 * H).transpose();
  return grad_x;
}

// ---------------------------------------------------------------------------
// Losses (batch-mean reductions)

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;  // d value / d prediction, same shape as the prediction
};

// Binary cross-entropy; predictions are clamped to [eps, 1-eps] before the logs.
template <typename T>
LossResult<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target, std::size_t normalizer = 0) {
  constexpr T eps = T(1e-7);
  if (pred.size() != target.size()) throw std::invalid_argument("bce_loss: shape mismatch");
  const std::size_t batch = normalizer ? normalizer : pred.dim(0);
  LossResult<T> out;
  out.grad = Tensor<T>(pred.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T pc = std::clamp(pred[i], eps, T(1) - eps);
    const T u = target[i];
    sum -= static_cast<double>(u) * std::log(static_cast<double>(pc)) +
           (1.0 - static_cast<double>(u)) * std::log(1.0 - static_cast<double>(pc));
    out.grad[i] = (pc - u) / (pc * (T(1) - pc)) / static_cast<T>(batch);
  }
  out.value = sum / static_cast<double>(batch);
  return out;
}

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target, std::size_t normalizer = 0) {
  if (pred.size() != target.size()) throw std::invalid_argument("mse_loss: shape mismatch");
  const std::size_t batch = normalizer ? normalizer : pred.dim(0);
  LossResult<T> out;
  out.grad = Tensor<T>(pred.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += d * d;
    out.grad[i] = T(2) * static_cast<T>(d) / static_cast<T>(batch);
  }
  out.value = sum / static_cast<double>(batch);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizers

enum class OptKind { rmsprop, adam };

inline OptKind optimizer_from_string(std::string_view s) {
  if (s == "rmsprop") return OptKind::rmsprop;
  if (s == "adam") return OptKind::adam;
  throw std::invalid_argument("unknown optimizer \"" + std::string(s) + "\"");
}

struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
struct Optimizer {
  OptKind kind = OptKind::rmsprop;
  T learning_rate = T(1e-4);
  T rho = T(0.9);               // rmsprop decay
  T beta1 = T(0.9), beta2 = T(0.999);
  T eps = T(1e-8);
  long step_count = 0;
  std::vector<Tensor<T>> v;  // second-moment accumulators
  std::vector<Tensor<T>> m;  // first moment (adam only)

  void init(const std::vector<Tensor<T>*>& params) {
    v.clear();
    m.clear();
    for (const Tensor<T>* p : params) {
      v.emplace_back(p->shape());
      if (kind == OptKind::adam) m.emplace_back(p->shape());
    }
    step_count = 0;
  }

  // Applies one update in-place. Non-finite gradients abort the step.
  void step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads) {
    if (params.size() != v.size() || grads.size() != params.size())
      throw std::invalid_argument("optimizer: parameter registry mismatch");
    for (const Tensor<T>* g : grads)
      if (!g->all_finite()) throw NonFiniteGradient("optimizer: non-finite gradient");

    ++step_count;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& theta = *params[i];
      const Tensor<T>& g = *grads[i];
      if (kind == OptKind::rmsprop) {
        for (std::size_t j = 0; j < theta.size(); ++j) {
          v[i][j] = rho * v[i][j] + (T(1) - rho) * g[j] * g[j];
          theta[j] -= learning_rate * g[j] / (std::sqrt(v[i][j]) + eps);
        }
      } else {
        const T bc1 = T(1) - std::pow(beta1, T(step_count));
        const T bc2 = T(1) - std::pow(beta2, T(step_count));
        for (std::size_t j = 0; j < theta.size(); ++j) {
          m[i][j] = beta1 * m[i][j] + (T(1) - beta1) * g[j];
          v[i][j] = beta2 * v[i][j] + (T(1) - beta2) * g[j] * g[j];
          theta[j] -= learning_rate * (m[i][j] / bc1) / (std::sqrt(v[i][j] / bc2) + eps);
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Initialization

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_fill(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * a);
}

template <typename T>
DenseParams<T> init_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseParams<T> p;
  p.w = Tensor<T>({in, out});
  p.b = Tensor<T>({out});
  p.act = act;
  glorot_fill(p.w, in, out, rng);
  return p;
}

// Per-gate fans are (in, H) for w and (H, H) for u; biases start at zero.
template <typename T>
GruParams<T> init_gru(std::size_t in, std::size_t hidden, Rng& rng) {
  GruParams<T> p = make_gru_params<T>(in, hidden);
  glorot_fill(p.w, in, hidden, rng);
  glorot_fill(p.u, hidden, hidden, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking (double precision only)

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// f() re-evaluates the scalar objective from the current parameter contents.
// For each parameter element, compares the analytic gradient against the
// central difference (f(x+e) - f(x-e)) / 2e.
inline GradCheckReport grad_check(const std::function<double()>& f,
                                  const std::vector<Tensor<double>*>& params,
                                  const std::vector<const Tensor<double>*>& analytic,
                                  double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("grad_check: epsilon must be positive");
  if (params.size() != analytic.size()) throw std::invalid_argument("grad_check: registry mismatch");
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<double>& theta = *params[i];
    const Tensor<double>& g = *analytic[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double saved = theta[j];
      theta[j] = saved + epsilon;
      const double up = f();
      theta[j] = saved - epsilon;
      const double down = f();
      theta[j] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double denom = std::max({std::abs(numeric), std::abs(g[j]), 1e-6});
      report.max_rel_error = std::max(report.max_rel_error, std::abs(numeric - g[j]) / denom);
      ++report.checked;
    }
  }
  return report;
}

}  // namespace seqdec::nn
