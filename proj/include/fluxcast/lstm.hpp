#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fluxcast/common.hpp"
#include "fluxcast/rng.hpp"

namespace fluxcast::lstm {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

namespace detail {

template <class S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

struct SigmoidOp {
  template <class S>
  S operator()(S x) const {
    return sigmoid(x);
  }
};

struct TanhOp {
  template <class S>
  S operator()(S x) const {
    return std::tanh(x);
  }
};

}  // namespace detail

/// Gate weights are stored packed as one matrix of four row blocks in the
/// order forget, input, candidate, output; each block is
/// hidden_dim x (input_dim + hidden_dim) and acts on [x; h].
template <class S>
struct Params {
  Eigen::Index input_dim = 0;
  Eigen::Index hidden_dim = 0;
  Eigen::Index output_dim = 0;

  Mat<S> w_gates;  // 4*hidden x (input + hidden)
  Vec<S> b_gates;  // 4*hidden
  Mat<S> w_y;      // output x hidden
  Vec<S> b_y;      // output

  auto w_f() { return w_gates.middleRows(0 * hidden_dim, hidden_dim); }
  auto w_i() { return w_gates.middleRows(1 * hidden_dim, hidden_dim); }
  auto w_g() { return w_gates.middleRows(2 * hidden_dim, hidden_dim); }
  auto w_o() { return w_gates.middleRows(3 * hidden_dim, hidden_dim); }
  auto w_f() const { return w_gates.middleRows(0 * hidden_dim, hidden_dim); }
  auto w_i() const { return w_gates.middleRows(1 * hidden_dim, hidden_dim); }
  auto w_g() const { return w_gates.middleRows(2 * hidden_dim, hidden_dim); }
  auto w_o() const { return w_gates.middleRows(3 * hidden_dim, hidden_dim); }
  auto b_f() { return b_gates.segment(0 * hidden_dim, hidden_dim); }
  auto b_i() { return b_gates.segment(1 * hidden_dim, hidden_dim); }
  auto b_g() { return b_gates.segment(2 * hidden_dim, hidden_dim); }
  auto b_o() { return b_gates.segment(3 * hidden_dim, hidden_dim); }
  auto b_f() const { return b_gates.segment(0 * hidden_dim, hidden_dim); }
  auto b_i() const { return b_gates.segment(1 * hidden_dim, hidden_dim); }
  auto b_g() const { return b_gates.segment(2 * hidden_dim, hidden_dim); }
  auto b_o() const { return b_gates.segment(3 * hidden_dim, hidden_dim); }

  static Params zeros(Eigen::Index in, Eigen::Index hidden, Eigen::Index out) {
    Params p;
    p.input_dim = in;
    p.hidden_dim = hidden;
    p.output_dim = out;
    p.w_gates = Mat<S>::Zero(4 * hidden, in + hidden);
    p.b_gates = Vec<S>::Zero(4 * hidden);
    p.w_y = Mat<S>::Zero(out, hidden);
    p.b_y = Vec<S>::Zero(out);
    return p;
  }

  /// Uniform +-1/sqrt(fan-in) weights, zero biases except the forget-gate
  /// bias at +1.
  static Params init(Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
                     std::uint64_t seed) {
    Params p = zeros(in, hidden, out);
    Rng rng(seed);
    const double gate_bound = 1.0 / std::sqrt(static_cast<double>(in + hidden));
    for (Eigen::Index r = 0; r < p.w_gates.rows(); ++r)
      for (Eigen::Index c = 0; c < p.w_gates.cols(); ++c)
        p.w_gates(r, c) = static_cast<S>(rng.uniform(-gate_bound, gate_bound));
    const double y_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index r = 0; r < p.w_y.rows(); ++r)
      for (Eigen::Index c = 0; c < p.w_y.cols(); ++c)
        p.w_y(r, c) = static_cast<S>(rng.uniform(-y_bound, y_bound));
    p.b_f().setConstant(S(1));
    return p;
  }

  bool finite() const {
    return w_gates.allFinite() && b_gates.allFinite() && w_y.allFinite() && b_y.allFinite();
  }
};

/// Applies fn to each of the four parameter storages, in a fixed order.
template <class S, class F>
void visit_arrays(Params<S>& p, F&& fn) {
  fn(p.w_gates);
  fn(p.b_gates);
  fn(p.w_y);
  fn(p.b_y);
}

template <class S, class F>
void visit_arrays(const Params<S>& p, F&& fn) {
  fn(p.w_gates);
  fn(p.b_gates);
  fn(p.w_y);
  fn(p.b_y);
}

template <class S>
struct State {
  Vec<S> c;
  Vec<S> h;

  static State zeros(Eigen::Index hidden) {
    return State{Vec<S>::Zero(hidden), Vec<S>::Zero(hidden)};
  }
};

template <class S>
struct StepResult {
  Vec<S> y;
  State<S> state;
};

/// Per-timestep activations of a batched forward pass (columns = batch).
template <class S>
struct Cache {
  std::vector<Mat<S>> z, f, i, g, o, c, tanh_c, h;

  std::size_t steps() const { return z.size(); }
  void clear() {
    z.clear(); f.clear(); i.clear(); g.clear(); o.clear();
    c.clear(); tanh_c.clear(); h.clear();
  }
};

/// One batched gated step. x is input x batch; h/c are hidden x batch.
/// If cache is non-null the step's activations are appended to it.
template <class S>
void step_batch(const Params<S>& p, const Mat<S>& x, Mat<S>& c_state, Mat<S>& h_state,
                Cache<S>* cache) {
  const Eigen::Index hd = p.hidden_dim;
  const Eigen::Index batch = x.cols();
  if (x.rows() != p.input_dim)
    throw ShapeError("lstm step: input has " + std::to_string(x.rows()) +
                     " features, expected " + std::to_string(p.input_dim));
  if (c_state.rows() != hd || h_state.rows() != hd || c_state.cols() != batch ||
      h_state.cols() != batch)
    throw ShapeError("lstm step: state shape mismatch");

  Mat<S> z(p.input_dim + hd, batch);
  z.topRows(p.input_dim) = x;
  z.bottomRows(hd) = h_state;

  Mat<S> pre = (p.w_gates * z).colwise() + p.b_gates;
  Mat<S> f = pre.middleRows(0 * hd, hd).unaryExpr(detail::SigmoidOp{});
  Mat<S> i = pre.middleRows(1 * hd, hd).unaryExpr(detail::SigmoidOp{});
  Mat<S> g = pre.middleRows(2 * hd, hd).unaryExpr(detail::TanhOp{});
  Mat<S> o = pre.middleRows(3 * hd, hd).unaryExpr(detail::SigmoidOp{});

  c_state = (f.array() * c_state.array() + i.array() * g.array()).matrix();
  Mat<S> tc = c_state.unaryExpr(detail::TanhOp{});
  h_state = (o.array() * tc.array()).matrix();

  if (cache != nullptr) {
    cache->z.push_back(std::move(z));
    cache->f.push_back(std::move(f));
    cache->i.push_back(std::move(i));
    cache->g.push_back(std::move(g));
    cache->o.push_back(std::move(o));
    cache->c.push_back(c_state);
    cache->tanh_c.push_back(std::move(tc));
    cache->h.push_back(h_state);
  }
}

/// Readout from the hidden carrier: y = w_y * h + b_y.
template <class S>
Mat<S> readout(const Params<S>& p, const Mat<S>& h) {
  return (p.w_y * h).colwise() + p.b_y;
}

/// Single-sample gated update, the sequence-to-one building block:
///   f,i,o = logistic(W [x;h] + b),  g = tanh(W_g [x;h] + b_g)
///   c' = f.c + i.g,  h' = o.tanh(c'),  y = W_y h' + b_y
template <class S>
StepResult<S> step(const Params<S>& p, const State<S>& state, const Vec<S>& x) {
  Mat<S> c = state.c;
  Mat<S> h = state.h;
  step_batch<S>(p, x, c, h, nullptr);
  StepResult<S> out;
  out.state.c = c.col(0);
  out.state.h = h.col(0);
  out.y = readout(p, h).col(0);
  return out;
}

/// Batched sequence-to-one forward from zero state. xs[t] is input x batch.
/// Returns the final-step readout (output x batch).
template <class S>
Mat<S> forward_batch(const Params<S>& p, const std::vector<Mat<S>>& xs, Cache<S>* cache) {
  if (xs.empty()) throw InputError("lstm forward: empty sequence");
  const Eigen::Index batch = xs.front().cols();
  Mat<S> c = Mat<S>::Zero(p.hidden_dim, batch);
  Mat<S> h = Mat<S>::Zero(p.hidden_dim, batch);
  if (cache != nullptr) cache->clear();
  for (const auto& x : xs) step_batch(p, x, c, h, cache);
  return readout(p, h);
}

template <class S>
struct ForwardResult {
  Vec<S> y_last;
  Cache<S> cache;
};

/// Spec surface for one sequence; the cache feeds backward().
template <class S>
ForwardResult<S> forward_sequence(const Params<S>& p, const std::vector<Vec<S>>& xs) {
  if (xs.empty()) throw InputError("lstm forward: empty sequence");
  std::vector<Mat<S>> cols;
  cols.reserve(xs.size());
  for (const auto& x : xs) cols.push_back(x);
  ForwardResult<S> out;
  out.y_last = forward_batch(p, cols, &out.cache).col(0);
  return out;
}

/// Reverse-mode gradients of a scalar loss through the whole sequence, given
/// dL/dy at the final step (output x batch). Gradients are summed over the
/// batch.
template <class S>
Params<S> backward_batch(const Params<S>& p, const Cache<S>& cache, const Mat<S>& grad_y) {
  const Eigen::Index hd = p.hidden_dim;
  const std::size_t steps = cache.steps();
  if (steps == 0) throw InputError("lstm backward: empty cache");
  if (grad_y.rows() != p.output_dim || grad_y.cols() != cache.h.back().cols())
    throw ShapeError("lstm backward: grad_y shape mismatch");

  Params<S> grads = Params<S>::zeros(p.input_dim, hd, p.output_dim);

  grads.w_y.noalias() = grad_y * cache.h.back().transpose();
  grads.b_y = grad_y.rowwise().sum();

  Mat<S> dh = p.w_y.transpose() * grad_y;
  Mat<S> dc_next = Mat<S>::Zero(hd, grad_y.cols());
  Mat<S> dpre(4 * hd, grad_y.cols());

  for (std::size_t t = steps; t-- > 0;) {
    const auto& f = cache.f[t];
    const auto& i = cache.i[t];
    const auto& g = cache.g[t];
    const auto& o = cache.o[t];
    const auto& tc = cache.tanh_c[t];

    Mat<S> dc =
        (dh.array() * o.array() * (S(1) - tc.array().square()) + dc_next.array()).matrix();

    if (t > 0) {
      dpre.middleRows(0, hd) =
          (dc.array() * cache.c[t - 1].array() * f.array() * (S(1) - f.array())).matrix();
    } else {
      dpre.middleRows(0, hd).setZero();  // c_{-1} = 0
    }
    dpre.middleRows(hd, hd) = (dc.array() * g.array() * i.array() * (S(1) - i.array())).matrix();
    dpre.middleRows(2 * hd, hd) = (dc.array() * i.array() * (S(1) - g.array().square())).matrix();
    dpre.middleRows(3 * hd, hd) =
        (dh.array() * tc.array() * o.array() * (S(1) - o.array())).matrix();

    grads.w_gates.noalias() += dpre * cache.z[t].transpose();
    grads.b_gates += dpre.rowwise().sum();

    if (t > 0) {
      dh.noalias() = p.w_gates.transpose().bottomRows(hd) * dpre;
      dc_next = (dc.array() * f.array()).matrix();
    }
  }
  return grads;
}

/// Spec surface for one sequence.
template <class S>
Params<S> backward(const Params<S>& p, const Cache<S>& cache, const Vec<S>& grad_y) {
  return backward_batch<S>(p, cache, grad_y);
}

/// Adaptive-moment optimizer state (one slot per parameter).
template <class S>
struct Adam {
  Params<S> m, v;
  S beta1, beta2, eps;
  long step_count = 0;

  Adam(const Params<S>& like, S b1, S b2, S e)
      : m(Params<S>::zeros(like.input_dim, like.hidden_dim, like.output_dim)),
        v(Params<S>::zeros(like.input_dim, like.hidden_dim, like.output_dim)),
        beta1(b1),
        beta2(b2),
        eps(e) {}

  void update(Params<S>& p, const Params<S>& g, S lr) {
    ++step_count;
    const S bc1 = S(1) - std::pow(beta1, static_cast<S>(step_count));
    const S bc2 = S(1) - std::pow(beta2, static_cast<S>(step_count));
    auto apply = [&](auto& pa, auto& ma, auto& va, const auto& ga) {
      ma = beta1 * ma + (S(1) - beta1) * ga;
      va.array() = beta2 * va.array() + (S(1) - beta2) * ga.array().square();
      pa.array() -= lr * (ma.array() / bc1) / ((va.array() / bc2).sqrt() + eps);
    };
    apply(p.w_gates, m.w_gates, v.w_gates, g.w_gates);
    apply(p.b_gates, m.b_gates, v.b_gates, g.b_gates);
    apply(p.w_y, m.w_y, v.w_y, g.w_y);
    apply(p.b_y, m.b_y, v.b_y, g.b_y);
  }
};

struct HyperParams {
  Eigen::Index hidden_dim = 64;
  int epochs = 200;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double val_fraction = 0.1;       // chronological tail of the training set
  double final_lr_fraction = 0.05; // cosine decay floor

  void validate() const {
    if (hidden_dim < 1) throw ConfigError("train.hidden_dim must be >= 1");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
      throw ConfigError("train.val_fraction must be in [0, 1)");
    if (final_lr_fraction <= 0.0 || final_lr_fraction > 1.0)
      throw ConfigError("train.final_lr_fraction must be in (0, 1]");
  }
};

/// Per-epoch train and validation RMSE.
struct TrainCurve {
  std::vector<double> train_rmse;
  std::vector<double> val_rmse;
};

/// Normalized training windows: one input x lookback matrix per sample plus
/// an output x n_samples target matrix, in chronological order.
template <class S>
struct Dataset {
  std::vector<Mat<S>> windows;
  Mat<S> targets;
};

namespace detail {

/// Batched forward over explicit sample indices; no cache kept.
template <class S>
Mat<S> predict_indices(const Params<S>& p, const Dataset<S>& data,
                       const std::vector<std::size_t>& idx) {
  const Eigen::Index L = data.windows.front().cols();
  const Eigen::Index F = data.windows.front().rows();
  Mat<S> out(p.output_dim, static_cast<Eigen::Index>(idx.size()));
  const std::size_t chunk = 2048;
  std::vector<Mat<S>> xs(static_cast<std::size_t>(L));
  for (std::size_t base = 0; base < idx.size(); base += chunk) {
    const auto b = static_cast<Eigen::Index>(std::min(chunk, idx.size() - base));
    for (Eigen::Index t = 0; t < L; ++t) xs[static_cast<std::size_t>(t)].resize(F, b);
    for (Eigen::Index col = 0; col < b; ++col) {
      const auto& w = data.windows[idx[base + static_cast<std::size_t>(col)]];
      for (Eigen::Index t = 0; t < L; ++t) xs[static_cast<std::size_t>(t)].col(col) = w.col(t);
    }
    out.middleCols(static_cast<Eigen::Index>(base), b) = forward_batch<S>(p, xs, nullptr);
  }
  return out;
}

template <class S>
double rmse_on(const Params<S>& p, const Dataset<S>& data, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  const Mat<S> pred = predict_indices(p, data, idx);
  double ss = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto diff = pred.col(static_cast<Eigen::Index>(k)) -
                      data.targets.col(static_cast<Eigen::Index>(idx[k]));
    ss += static_cast<double>(diff.squaredNorm());
  }
  return std::sqrt(ss / (static_cast<double>(idx.size()) * static_cast<double>(p.output_dim)));
}

}  // namespace detail

/// Mini-batch Adam on mean squared error, recording per-epoch train and
/// validation RMSE (computed with a full pass after each epoch). The split
/// is chronological; shuffling, init and reduction order are fixed by seed.
/// Throws NumericError with epoch/batch diagnostics on a non-finite loss.
template <class S>
std::pair<Params<S>, TrainCurve> train(const Dataset<S>& data, const HyperParams& hp,
                                       std::uint64_t seed) {
  hp.validate();
  const std::size_t n = data.windows.size();
  if (n == 0) throw InputError("lstm train: empty dataset");
  if (data.targets.cols() != static_cast<Eigen::Index>(n))
    throw ShapeError("lstm train: targets/windows size mismatch");
  const Eigen::Index F = data.windows.front().rows();
  const Eigen::Index L = data.windows.front().cols();
  const Eigen::Index O = data.targets.rows();

  std::size_t n_train = n - static_cast<std::size_t>(hp.val_fraction * static_cast<double>(n));
  n_train = std::max<std::size_t>(1, std::min(n, n_train));
  std::vector<std::size_t> train_idx(n_train), val_idx;
  for (std::size_t k = 0; k < n_train; ++k) train_idx[k] = k;
  for (std::size_t k = n_train; k < n; ++k) val_idx.push_back(k);

  Params<S> params = Params<S>::init(F, hp.hidden_dim, O, derive_seed(seed, "lstm", "init", 0));
  Adam<S> adam(params, static_cast<S>(hp.beta1), static_cast<S>(hp.beta2),
               static_cast<S>(hp.adam_eps));
  TrainCurve curve;

  std::vector<std::size_t> order = train_idx;
  std::vector<Mat<S>> xs(static_cast<std::size_t>(L));
  Cache<S> cache;

  const double lr0 = hp.learning_rate;
  const double lr_min = hp.learning_rate * hp.final_lr_fraction;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    const double phase =
        hp.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(hp.epochs - 1) : 0.0;
    const double lr = lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase * 3.14159265358979));

    Rng shuffle_rng(derive_seed(seed, "lstm", "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    for (std::size_t base = 0, batch_no = 0; base < order.size();
         base += static_cast<std::size_t>(hp.batch_size), ++batch_no) {
      const auto b = static_cast<Eigen::Index>(
          std::min<std::size_t>(static_cast<std::size_t>(hp.batch_size), order.size() - base));
      for (Eigen::Index t = 0; t < L; ++t) xs[static_cast<std::size_t>(t)].resize(F, b);
      Mat<S> targets(O, b);
      for (Eigen::Index col = 0; col < b; ++col) {
        const std::size_t si = order[base + static_cast<std::size_t>(col)];
        const auto& w = data.windows[si];
        for (Eigen::Index t = 0; t < L; ++t) xs[static_cast<std::size_t>(t)].col(col) = w.col(t);
        targets.col(col) = data.targets.col(static_cast<Eigen::Index>(si));
      }

      const Mat<S> pred = forward_batch<S>(params, xs, &cache);
      const Mat<S> diff = pred - targets;
      const double loss = static_cast<double>(diff.squaredNorm()) / static_cast<double>(b);
      const Mat<S> grad_y = diff * static_cast<S>(2.0 / static_cast<double>(b));
      const Params<S> grads = backward_batch<S>(params, cache, grad_y);

      if (!std::isfinite(loss) || !grads.finite()) {
        double gnorm = 0.0;
        visit_arrays(grads, [&](const auto& a) { gnorm += static_cast<double>(a.squaredNorm()); });
        throw NumericError("lstm train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_no) +
                           ", grad norm " + std::to_string(std::sqrt(gnorm)));
      }
      adam.update(params, grads, static_cast<S>(lr));
    }

    curve.train_rmse.push_back(detail::rmse_on(params, data, train_idx));
    curve.val_rmse.push_back(detail::rmse_on(params, data, val_idx));
  }
  return {std::move(params), std::move(curve)};
}

nlohmann::json params_to_json(const Params<double>& p);
Params<double> params_from_json(const nlohmann::json& j);

void write_curve_csv(std::ostream& out, const TrainCurve& curve);

}  // namespace fluxcast::lstm
