#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rfdsa/iq.hpp"
#include "rfdsa/rng.hpp"

namespace rfdsa::nn {

inline constexpr double kLogClamp = 1e-12;

struct SeluConfig {
  double a = 1.6732632423543772;
  double scale = 1.0507009873554805;
};

enum class LayerKind { ZeroPad1D, Conv1D, MaxPool1D, Dense, Selu, Dropout };

struct LayerSpec {
  LayerKind kind;
  int arg0 = 0;  // pad size / conv out_channels / pool size / dense units
  int arg1 = 0;  // conv kernel / pool stride
  double p = 0.0;  // dropout probability

  static LayerSpec zero_pad(int pad) { return {LayerKind::ZeroPad1D, pad}; }
  static LayerSpec conv(int out_channels, int kernel) { return {LayerKind::Conv1D, out_channels, kernel}; }
  static LayerSpec max_pool(int size, int stride) { return {LayerKind::MaxPool1D, size, stride}; }
  static LayerSpec dense(int units) { return {LayerKind::Dense, units}; }
  static LayerSpec selu() { return {LayerKind::Selu}; }
  static LayerSpec dropout(double p) { return {LayerKind::Dropout, 0, 0, p}; }
};

struct Shape {
  int channels = 0;
  int length = 0;
  int flat() const { return channels * length; }
};

struct ScoreVector {
  std::array<double, 4> p{};  // idle, in-network, jammer, out-network
};

// Feed-forward model over (channels x length) inputs with a flat parameter
// vector. Layer geometry is validated at construction; pooling strides must
// divide the pooled extent.
class Model {
 public:
  Model() = default;
  Model(std::vector<LayerSpec> specs, Shape input, std::vector<std::string> labels,
        uint64_t init_seed, SeluConfig selu = {})
      : specs_(std::move(specs)), labels_(std::move(labels)), selu_(selu) {
    shapes_.push_back(input);
    size_t offset = 0;
    for (const auto& s : specs_) {
      offsets_.push_back(offset);
      Shape in = shapes_.back();
      Shape out = in;
      switch (s.kind) {
        case LayerKind::ZeroPad1D:
          out.length = in.length + 2 * s.arg0;
          break;
        case LayerKind::Conv1D:
          if (in.length < s.arg1) throw std::invalid_argument("conv kernel larger than input");
          out.channels = s.arg0;
          out.length = in.length - s.arg1 + 1;
          offset += static_cast<size_t>(s.arg0) * in.channels * s.arg1 + s.arg0;
          break;
        case LayerKind::MaxPool1D: {
          if (s.arg1 <= 0 || (in.length - s.arg0) % s.arg1 != 0)
            throw std::invalid_argument("pool stride must divide pooled extent");
          out.length = (in.length - s.arg0) / s.arg1 + 1;
          break;
        }
        case LayerKind::Dense:
          out.channels = s.arg0;
          out.length = 1;
          offset += static_cast<size_t>(s.arg0) * in.flat() + s.arg0;
          break;
        case LayerKind::Selu:
        case LayerKind::Dropout:
          break;
      }
      shapes_.push_back(out);
    }
    if (shapes_.back().flat() != static_cast<int>(labels_.size()))
      throw std::invalid_argument("output size does not match label count");
    params_.assign(offset, 0.0);
    init_params(init_seed);
  }

  const std::vector<LayerSpec>& specs() const { return specs_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<Shape>& shapes() const { return shapes_; }
  const SeluConfig& selu_config() const { return selu_; }
  size_t layer_offset(size_t l) const { return offsets_[l]; }
  size_t num_params() const { return params_.size(); }
  int num_classes() const { return static_cast<int>(labels_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // He-style seeded initialization; biases zero.
  void init_params(uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x6e6e6574ULL));
    for (size_t l = 0; l < specs_.size(); ++l) {
      const auto& s = specs_[l];
      Shape in = shapes_[l];
      if (s.kind == LayerKind::Conv1D) {
        size_t nw = static_cast<size_t>(s.arg0) * in.channels * s.arg1;
        double sd = std::sqrt(2.0 / (in.channels * s.arg1));
        for (size_t i = 0; i < nw; ++i) params_[offsets_[l] + i] = sd * rng.normal();
        for (int i = 0; i < s.arg0; ++i) params_[offsets_[l] + nw + i] = 0.0;
      } else if (s.kind == LayerKind::Dense) {
        size_t nw = static_cast<size_t>(s.arg0) * in.flat();
        double sd = std::sqrt(2.0 / in.flat());
        for (size_t i = 0; i < nw; ++i) params_[offsets_[l] + i] = sd * rng.normal();
        for (int i = 0; i < s.arg0; ++i) params_[offsets_[l] + nw + i] = 0.0;
      }
    }
  }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<std::string> labels_;
  std::vector<size_t> offsets_;
  std::vector<Shape> shapes_;
  std::vector<double> params_;
  SeluConfig selu_;
};

// Reduced mirror of the paper-style cascade: pad/conv/pool blocks feeding a
// SELU dense head with dropout.
inline std::vector<LayerSpec> default_arch(int num_classes, int width1 = 16, int width2 = 32,
                                           int dense1 = 64, int dense2 = 32,
                                           double dropout_p = 0.5) {
  std::vector<LayerSpec> specs;
  specs.push_back(LayerSpec::zero_pad(1));
  specs.push_back(LayerSpec::conv(width1, 3));
  specs.push_back(LayerSpec::selu());
  specs.push_back(LayerSpec::max_pool(2, 2));
  for (int i = 0; i < 2; ++i) {
    specs.push_back(LayerSpec::zero_pad(1));
    specs.push_back(LayerSpec::conv(width2, 3));
    specs.push_back(LayerSpec::selu());
    specs.push_back(LayerSpec::max_pool(2, 2));
  }
  specs.push_back(LayerSpec::dense(dense1));
  specs.push_back(LayerSpec::selu());
  specs.push_back(LayerSpec::dropout(dropout_p));
  specs.push_back(LayerSpec::dense(dense2));
  specs.push_back(LayerSpec::selu());
  specs.push_back(LayerSpec::dropout(dropout_p));
  specs.push_back(LayerSpec::dense(num_classes));
  return specs;
}

// I channel then Q channel, each kFrameLen long.
inline std::vector<double> input_from_frame(const IQFrame& f) {
  std::vector<double> x(2 * f.samples.size());
  for (size_t i = 0; i < f.samples.size(); ++i) {
    x[i] = f.samples[i].real();
    x[f.samples.size() + i] = f.samples[i].imag();
  }
  return x;
}

// Per-sample activation and cache buffers, reusable across samples.
struct Workspace {
  std::vector<std::vector<double>> acts;       // acts[l] = input of layer l; acts[L] = logits
  std::vector<std::vector<int>> pool_argmax;   // per layer
  std::vector<std::vector<double>> drop_mask;  // per layer, scaled keep mask
  std::vector<std::vector<double>> grads;      // backward buffers, same shapes as acts

  explicit Workspace(const Model& m) {
    size_t L = m.specs().size();
    acts.resize(L + 1);
    grads.resize(L + 1);
    pool_argmax.resize(L);
    drop_mask.resize(L);
    for (size_t l = 0; l <= L; ++l) {
      acts[l].resize(m.shapes()[l].flat());
      grads[l].resize(m.shapes()[l].flat());
    }
    for (size_t l = 0; l < L; ++l) {
      if (m.specs()[l].kind == LayerKind::MaxPool1D) pool_argmax[l].resize(m.shapes()[l + 1].flat());
      if (m.specs()[l].kind == LayerKind::Dropout) drop_mask[l].resize(m.shapes()[l].flat());
    }
  }
};

inline std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

// Forward pass for one sample. mask_seed fixes dropout masks when
// train_mode is on; eval mode is deterministic with dropout as identity.
inline const std::vector<double>& forward_sample(const Model& m, const std::vector<double>& x,
                                                 Workspace& ws, bool train_mode = false,
                                                 uint64_t mask_seed = 0) {
  if (static_cast<int>(x.size()) != m.shapes()[0].flat())
    throw std::invalid_argument("input shape mismatch");
  ws.acts[0] = x;
  const auto& params = m.params();
  for (size_t l = 0; l < m.specs().size(); ++l) {
    const auto& s = m.specs()[l];
    const Shape in = m.shapes()[l];
    const Shape out = m.shapes()[l + 1];
    const auto& a = ws.acts[l];
    auto& b = ws.acts[l + 1];
    switch (s.kind) {
      case LayerKind::ZeroPad1D: {
        std::fill(b.begin(), b.end(), 0.0);
        for (int c = 0; c < in.channels; ++c)
          std::copy(a.begin() + c * in.length, a.begin() + (c + 1) * in.length,
                    b.begin() + c * out.length + s.arg0);
        break;
      }
      case LayerKind::Conv1D: {
        const int k = s.arg1;
        const double* W = params.data() + m.layer_offset(l);
        const double* bias = W + static_cast<size_t>(out.channels) * in.channels * k;
        for (int o = 0; o < out.channels; ++o) {
          double* dst = b.data() + o * out.length;
          std::fill(dst, dst + out.length, bias[o]);
          for (int c = 0; c < in.channels; ++c) {
            const double* src = a.data() + c * in.length;
            const double* w = W + (static_cast<size_t>(o) * in.channels + c) * k;
            for (int j = 0; j < k; ++j) {
              const double wj = w[j];
              for (int i = 0; i < out.length; ++i) dst[i] += wj * src[i + j];
            }
          }
        }
        break;
      }
      case LayerKind::MaxPool1D: {
        for (int c = 0; c < in.channels; ++c) {
          for (int i = 0; i < out.length; ++i) {
            int base = c * in.length + i * s.arg1;
            int best = base;
            for (int j = 1; j < s.arg0; ++j)
              if (a[base + j] > a[best]) best = base + j;
            b[c * out.length + i] = a[best];
            ws.pool_argmax[l][c * out.length + i] = best;
          }
        }
        break;
      }
      case LayerKind::Dense: {
        const int n = in.flat();
        const double* W = params.data() + m.layer_offset(l);
        const double* bias = W + static_cast<size_t>(s.arg0) * n;
        for (int u = 0; u < s.arg0; ++u) {
          const double* w = W + static_cast<size_t>(u) * n;
          double acc = bias[u];
          for (int i = 0; i < n; ++i) acc += w[i] * a[i];
          b[u] = acc;
        }
        break;
      }
      case LayerKind::Selu: {
        for (size_t i = 0; i < a.size(); ++i) {
          double v = a[i];
          b[i] = m.selu_config().scale *
                 (v > 0 ? v : m.selu_config().a * (std::exp(v) - 1.0));
        }
        break;
      }
      case LayerKind::Dropout: {
        if (train_mode && s.p > 0.0) {
          Rng rng(substream(mask_seed, "dropout", l));
          double keep = 1.0 - s.p;
          for (size_t i = 0; i < a.size(); ++i) {
            double mask = rng.uniform() < keep ? 1.0 / keep : 0.0;
            ws.drop_mask[l][i] = mask;
            b[i] = a[i] * mask;
          }
        } else {
          b = a;
          if (!ws.drop_mask[l].empty())
            std::fill(ws.drop_mask[l].begin(), ws.drop_mask[l].end(), 1.0);
        }
        break;
      }
    }
  }
  return ws.acts.back();
}

// Backward pass from d(loss)/d(logits); accumulates parameter gradients
// into grad_accum (same length as the parameter vector).
inline void backward_sample(const Model& m, Workspace& ws, const std::vector<double>& dlogits,
                            std::vector<double>& grad_accum) {
  size_t L = m.specs().size();
  ws.grads[L] = dlogits;
  const auto& params = m.params();
  for (size_t li = L; li-- > 0;) {
    const auto& s = m.specs()[li];
    const Shape in = m.shapes()[li];
    const Shape out = m.shapes()[li + 1];
    const auto& a = ws.acts[li];
    const auto& gout = ws.grads[li + 1];
    auto& gin = ws.grads[li];
    switch (s.kind) {
      case LayerKind::ZeroPad1D: {
        for (int c = 0; c < in.channels; ++c)
          std::copy(gout.begin() + c * out.length + s.arg0,
                    gout.begin() + c * out.length + s.arg0 + in.length,
                    gin.begin() + c * in.length);
        break;
      }
      case LayerKind::Conv1D: {
        const int k = s.arg1;
        const double* W = params.data() + m.layer_offset(li);
        double* gW = grad_accum.data() + m.layer_offset(li);
        double* gbias = gW + static_cast<size_t>(out.channels) * in.channels * k;
        std::fill(gin.begin(), gin.end(), 0.0);
        for (int o = 0; o < out.channels; ++o) {
          const double* go = gout.data() + o * out.length;
          double acc = 0.0;
          for (int i = 0; i < out.length; ++i) acc += go[i];
          gbias[o] += acc;
          for (int c = 0; c < in.channels; ++c) {
            const double* src = a.data() + c * in.length;
            double* gsrc = gin.data() + c * in.length;
            const double* w = W + (static_cast<size_t>(o) * in.channels + c) * k;
            double* gw = gW + (static_cast<size_t>(o) * in.channels + c) * k;
            for (int j = 0; j < k; ++j) {
              double gwj = 0.0;
              const double wj = w[j];
              for (int i = 0; i < out.length; ++i) {
                gwj += go[i] * src[i + j];
                gsrc[i + j] += wj * go[i];
              }
              gw[j] += gwj;
            }
          }
        }
        break;
      }
      case LayerKind::MaxPool1D: {
        std::fill(gin.begin(), gin.end(), 0.0);
        for (int i = 0; i < out.flat(); ++i) gin[ws.pool_argmax[li][i]] += gout[i];
        break;
      }
      case LayerKind::Dense: {
        const int n = in.flat();
        const double* W = params.data() + m.layer_offset(li);
        double* gW = grad_accum.data() + m.layer_offset(li);
        double* gbias = gW + static_cast<size_t>(s.arg0) * n;
        std::fill(gin.begin(), gin.end(), 0.0);
        for (int u = 0; u < s.arg0; ++u) {
          const double gu = gout[u];
          gbias[u] += gu;
          const double* w = W + static_cast<size_t>(u) * n;
          double* gw = gW + static_cast<size_t>(u) * n;
          for (int i = 0; i < n; ++i) {
            gw[i] += gu * a[i];
            gin[i] += gu * w[i];
          }
        }
        break;
      }
      case LayerKind::Selu: {
        for (size_t i = 0; i < a.size(); ++i) {
          double v = a[i];
          double d = m.selu_config().scale *
                     (v > 0 ? 1.0 : m.selu_config().a * std::exp(v));
          gin[i] = gout[i] * d;
        }
        break;
      }
      case LayerKind::Dropout: {
        if (!ws.drop_mask[li].empty()) {
          for (size_t i = 0; i < a.size(); ++i) gin[i] = gout[i] * ws.drop_mask[li][i];
        } else {
          gin = gout;
        }
        break;
      }
    }
  }
}

// Mean cross-entropy over probability rows, with the log clamped away
// from zero.
inline double cross_entropy(const std::vector<std::vector<double>>& probs,
                            const std::vector<int>& labels) {
  double loss = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    loss -= std::log(std::max(probs[i][labels[i]], kLogClamp));
  }
  return loss / probs.size();
}

struct FisherDiag {
  std::vector<double> f;       // per-parameter importance, >= 0
  std::vector<double> anchor;  // theta*_A snapshot
  double lambda = 100.0;
};

// Mean cross-entropy loss of a batch plus, when fisher is given, the
// quadratic consolidation penalty sum_i (lambda/2) F_i (theta_i - theta*_i)^2.
inline double batch_loss(const Model& m, const std::vector<std::vector<double>>& xs,
                         const std::vector<int>& labels, Workspace& ws, bool train_mode = false,
                         uint64_t mask_seed = 0, const FisherDiag* fisher = nullptr) {
  double loss = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const auto& logits = forward_sample(m, xs[i], ws, train_mode, splitmix64(mask_seed ^ i));
    auto p = softmax(logits);
    loss -= std::log(std::max(p[labels[i]], kLogClamp));
  }
  loss /= xs.size();
  if (fisher) {
    if (fisher->f.size() != m.num_params()) throw std::invalid_argument("fisher misaligned");
    double pen = 0.0;
    for (size_t i = 0; i < fisher->f.size(); ++i) {
      double d = m.params()[i] - fisher->anchor[i];
      pen += fisher->f[i] * d * d;
    }
    loss += 0.5 * fisher->lambda * pen;
  }
  return loss;
}

// Analytic gradient of batch_loss; returns the loss.
inline double batch_gradient(const Model& m, const std::vector<std::vector<double>>& xs,
                             const std::vector<int>& labels, Workspace& ws,
                             std::vector<double>& grad, bool train_mode = false,
                             uint64_t mask_seed = 0, const FisherDiag* fisher = nullptr) {
  grad.assign(m.num_params(), 0.0);
  double loss = 0.0;
  std::vector<double> dlogits(m.num_classes());
  for (size_t i = 0; i < xs.size(); ++i) {
    const auto& logits = forward_sample(m, xs[i], ws, train_mode, splitmix64(mask_seed ^ i));
    auto p = softmax(logits);
    loss -= std::log(std::max(p[labels[i]], kLogClamp));
    for (int j = 0; j < m.num_classes(); ++j) dlogits[j] = p[j];
    dlogits[labels[i]] -= 1.0;
    backward_sample(m, ws, dlogits, grad);
  }
  double inv = 1.0 / xs.size();
  for (auto& g : grad) g *= inv;
  loss *= inv;
  if (fisher) {
    double pen = 0.0;
    for (size_t i = 0; i < fisher->f.size(); ++i) {
      double d = m.params()[i] - fisher->anchor[i];
      pen += fisher->f[i] * d * d;
      grad[i] += fisher->lambda * fisher->f[i] * d;
    }
    loss += 0.5 * fisher->lambda * pen;
  }
  return loss;
}

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
};

struct TrainConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 8;
  double split = 0.8;
  uint64_t seed = 1;
  bool use_sgd = false;  // plain SGD instead of Adam
};

inline void adam_step(std::vector<double>& params, const std::vector<double>& grad,
                      AdamState& state, const TrainConfig& cfg) {
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.t;
  double c1 = 1.0 - std::pow(cfg.beta1, state.t);
  double c2 = 1.0 - std::pow(cfg.beta2, state.t);
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1 - cfg.beta2) * grad[i] * grad[i];
    params[i] -= cfg.learning_rate * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + cfg.eps);
  }
}

inline void sgd_step(std::vector<double>& params, const std::vector<double>& grad,
                     const TrainConfig& cfg) {
  for (size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
}

struct EpochStats {
  double train_loss, train_acc, val_loss, val_acc;
};

struct History {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

inline double eval_accuracy(const Model& m, const std::vector<std::vector<double>>& xs,
                            const std::vector<int>& labels, Workspace& ws) {
  int correct = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const auto& logits = forward_sample(m, xs[i], ws);
    int arg = 0;
    for (int j = 1; j < m.num_classes(); ++j)
      if (logits[j] > logits[arg]) arg = j;
    if (arg == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / xs.size();
}

// Minibatch training with an internal seeded train/validation split and
// early stopping: when validation loss has not improved for cfg.patience
// epochs, stop and restore the best snapshot.
// The optional per-epoch observer sees the model in its end-of-epoch state,
// before the final restore of the best snapshot.
using EpochObserver = std::function<void(int, const Model&)>;

inline History train(Model& m, const std::vector<std::vector<double>>& xs,
                     const std::vector<int>& labels, const TrainConfig& cfg,
                     const FisherDiag* fisher = nullptr,
                     const EpochObserver& on_epoch = {}) {
  if (xs.empty()) throw std::invalid_argument("empty dataset");
  {
    std::vector<int> uniq = labels;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (uniq.size() < 2) throw std::invalid_argument("need at least two classes");
  }
  std::vector<size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(substream(cfg.seed, "train.split"));
  split_rng.shuffle(order);
  size_t n_train = static_cast<size_t>(cfg.split * xs.size());
  n_train = std::max<size_t>(1, std::min(n_train, xs.size() - 1));

  std::vector<std::vector<double>> xtr, xval;
  std::vector<int> ytr, yval;
  for (size_t i = 0; i < order.size(); ++i) {
    if (i < n_train) {
      xtr.push_back(xs[order[i]]);
      ytr.push_back(labels[order[i]]);
    } else {
      xval.push_back(xs[order[i]]);
      yval.push_back(labels[order[i]]);
    }
  }

  Workspace ws(m);
  AdamState adam;
  History hist;
  std::vector<double> best_params = m.params();
  std::vector<double> grad;
  std::vector<size_t> idx(xtr.size());
  std::iota(idx.begin(), idx.end(), 0);

  int since_best = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng epoch_rng(substream(cfg.seed, "train.epoch", epoch));
    epoch_rng.shuffle(idx);
    double train_loss = 0.0;
    size_t nb = 0;
    for (size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      size_t end = std::min(idx.size(), start + cfg.batch_size);
      std::vector<std::vector<double>> bx;
      std::vector<int> by;
      for (size_t i = start; i < end; ++i) {
        bx.push_back(xtr[idx[i]]);
        by.push_back(ytr[idx[i]]);
      }
      uint64_t mask_seed = substream(cfg.seed, "train.mask", epoch * 1000003ULL + start);
      double loss = batch_gradient(m, bx, by, ws, grad, true, mask_seed, fisher);
      if (cfg.use_sgd) {
        sgd_step(m.params(), grad, cfg);
      } else {
        adam_step(m.params(), grad, adam, cfg);
      }
      train_loss += loss;
      ++nb;
    }
    train_loss /= nb;
    double train_acc = eval_accuracy(m, xtr, ytr, ws);
    double val_loss = batch_loss(m, xval, yval, ws);
    double val_acc = eval_accuracy(m, xval, yval, ws);
    hist.epochs.push_back({train_loss, train_acc, val_loss, val_acc});
    if (on_epoch) on_epoch(epoch, m);

    if (val_loss < hist.best_val_loss) {
      hist.best_val_loss = val_loss;
      hist.best_epoch = epoch;
      best_params = m.params();
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.patience) break;
    }
  }
  m.params() = best_params;
  return hist;
}

// Empirical Fisher diagonal: mean squared gradient of the true-label
// log-likelihood, with the current parameters stored as the anchor.
inline FisherDiag fisher_diagonal(const Model& m, const std::vector<std::vector<double>>& xs,
                                  const std::vector<int>& labels, double lambda = 100.0) {
  if (xs.empty()) throw std::invalid_argument("empty fisher sample set");
  Workspace ws(m);
  FisherDiag out;
  out.f.assign(m.num_params(), 0.0);
  out.anchor = m.params();
  out.lambda = lambda;
  std::vector<double> g(m.num_params());
  std::vector<double> dlogits(m.num_classes());
  for (size_t i = 0; i < xs.size(); ++i) {
    const auto& logits = forward_sample(m, xs[i], ws);
    auto p = softmax(logits);
    for (int j = 0; j < m.num_classes(); ++j) dlogits[j] = -p[j];
    dlogits[labels[i]] += 1.0;  // d log y_label / d logit
    std::fill(g.begin(), g.end(), 0.0);
    backward_sample(m, ws, dlogits, g);
    for (size_t k = 0; k < g.size(); ++k) out.f[k] += g[k] * g[k];
  }
  for (auto& v : out.f) v /= xs.size();
  return out;
}

// Activations at the output of the last pooling layer, flattened.
inline std::vector<double> extract_features(const Model& m, const IQFrame& frame, Workspace& ws) {
  int last_pool = -1;
  for (size_t l = 0; l < m.specs().size(); ++l)
    if (m.specs()[l].kind == LayerKind::MaxPool1D) last_pool = static_cast<int>(l);
  if (last_pool < 0) throw std::logic_error("model has no pooling layer");
  forward_sample(m, input_from_frame(frame), ws);
  return ws.acts[last_pool + 1];
}

inline int feature_dim(const Model& m) {
  int last_pool = -1;
  for (size_t l = 0; l < m.specs().size(); ++l)
    if (m.specs()[l].kind == LayerKind::MaxPool1D) last_pool = static_cast<int>(l);
  if (last_pool < 0) throw std::logic_error("model has no pooling layer");
  return m.shapes()[last_pool + 1].flat();
}

// Argmax classification with ties broken by class order
// Idle < InNetwork < Jammer < OutNetwork.
inline std::pair<SignalClass, ScoreVector> classify(const Model& m, const IQFrame& frame,
                                                    Workspace& ws) {
  if (m.num_classes() != 4) throw std::logic_error("classify needs a 4-class model");
  const auto& logits = forward_sample(m, input_from_frame(frame), ws);
  auto p = softmax(logits);
  ScoreVector sv;
  std::copy(p.begin(), p.end(), sv.p.begin());
  int arg = 0;
  for (int j = 1; j < 4; ++j)
    if (p[j] > p[arg]) arg = j;
  return {static_cast<SignalClass>(arg), sv};
}

struct ConfusionMatrix {
  std::vector<std::vector<long>> counts;       // rows = true labels
  std::vector<std::vector<double>> normalized;  // rows sum to 1
};

inline ConfusionMatrix confusion_matrix(const Model& m, const std::vector<std::vector<double>>& xs,
                                        const std::vector<int>& labels) {
  if (xs.empty()) throw std::invalid_argument("empty evaluation set");
  int k = m.num_classes();
  ConfusionMatrix cm;
  cm.counts.assign(k, std::vector<long>(k, 0));
  Workspace ws(m);
  for (size_t i = 0; i < xs.size(); ++i) {
    const auto& logits = forward_sample(m, xs[i], ws);
    int arg = 0;
    for (int j = 1; j < k; ++j)
      if (logits[j] > logits[arg]) arg = j;
    cm.counts[labels[i]][arg]++;
  }
  cm.normalized.assign(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < k; ++i) {
    long row = std::accumulate(cm.counts[i].begin(), cm.counts[i].end(), 0L);
    if (row > 0)
      for (int j = 0; j < k; ++j) cm.normalized[i][j] = static_cast<double>(cm.counts[i][j]) / row;
  }
  return cm;
}

// ---- checkpoint io ----

inline void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for write: " + path);
  const char magic[8] = {'R', 'F', 'D', 'S', 'A', 'M', '0', '1'};
  os.write(magic, 8);
  auto w32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  auto wf64 = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
  w32(static_cast<uint32_t>(m.labels().size()));
  for (const auto& s : m.labels()) {
    w32(static_cast<uint32_t>(s.size()));
    os.write(s.data(), s.size());
  }
  w32(static_cast<uint32_t>(m.shapes()[0].channels));
  w32(static_cast<uint32_t>(m.shapes()[0].length));
  w32(static_cast<uint32_t>(m.specs().size()));
  for (const auto& s : m.specs()) {
    w32(static_cast<uint32_t>(s.kind));
    w32(static_cast<uint32_t>(s.arg0));
    w32(static_cast<uint32_t>(s.arg1));
    wf64(s.p);
  }
  wf64(m.selu_config().a);
  wf64(m.selu_config().scale);
  uint64_t np = m.num_params();
  os.write(reinterpret_cast<const char*>(&np), 8);
  os.write(reinterpret_cast<const char*>(m.params().data()), np * 8);
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, "RFDSAM01", 8) != 0) throw std::runtime_error("bad checkpoint magic");
  auto r32 = [&] {
    uint32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto rf64 = [&] {
    double v;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  uint32_t nlabels = r32();
  std::vector<std::string> labels(nlabels);
  for (auto& s : labels) {
    uint32_t n = r32();
    s.resize(n);
    is.read(s.data(), n);
  }
  Shape input{static_cast<int>(r32()), static_cast<int>(r32())};
  uint32_t nspecs = r32();
  std::vector<LayerSpec> specs(nspecs);
  for (auto& s : specs) {
    s.kind = static_cast<LayerKind>(r32());
    s.arg0 = static_cast<int>(r32());
    s.arg1 = static_cast<int>(r32());
    s.p = rf64();
  }
  SeluConfig selu;
  selu.a = rf64();
  selu.scale = rf64();
  Model m(specs, input, labels, 0, selu);
  uint64_t np;
  is.read(reinterpret_cast<char*>(&np), 8);
  if (np != m.num_params()) throw std::runtime_error("checkpoint parameter count mismatch");
  is.read(reinterpret_cast<char*>(m.params().data()), np * 8);
  if (!is) throw std::runtime_error("truncated checkpoint");
  return m;
}

inline void dump_history_csv(const History& h, std::ostream& os) {
  os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (size_t i = 0; i < h.epochs.size(); ++i) {
    const auto& e = h.epochs[i];
    os << i << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss << ',' << e.val_acc
       << '\n';
  }
}

}  // namespace rfdsa::nn
