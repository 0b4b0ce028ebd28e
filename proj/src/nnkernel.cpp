#include "berrystack/nnkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "berrystack/errors.hpp"
#include "berrystack/kernels.hpp"

namespace berrystack::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_code(std::uint8_t code) {
  if (code > 2) throw FormatError(fmt::format("unknown activation code {}", code));
  return static_cast<Activation>(code);
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out, Activation act) {
  return DenseLayer{Tensor({out, in}), Tensor({out}), act, false};
}

DenseLayer DenseLayer::he_uniform(std::size_t in, std::size_t out,
                                  Activation act, std::mt19937_64& rng) {
  DenseLayer layer = zeros(in, out, act);
  const double limit = std::sqrt(6.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& w : layer.weights.values()) w = dist(rng);
  return layer;
}

std::size_t Network::input_width() const {
  return layers.empty() ? 0 : layers.front().in_width();
}

std::size_t Network::output_width() const {
  return layers.empty() ? 0 : layers.back().out_width();
}

std::size_t Network::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    if (!l.frozen) n += l.weights.size() + l.bias.size();
  }
  return n;
}

void Network::validate() const {
  if (layers.empty()) throw DimensionError("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.rank() != 2 || l.bias.size() != l.out_width()) {
      throw DimensionError(fmt::format("layer {}: weights {} vs bias {}", i,
                                       l.weights.shape_string(),
                                       l.bias.shape_string()));
    }
    if (i > 0 && layers[i - 1].out_width() != l.in_width()) {
      throw DimensionError(fmt::format(
          "layer {} expects width {} but layer {} produces {}", i,
          l.in_width(), i - 1, layers[i - 1].out_width()));
    }
  }
}

bool operator==(const Network& a, const Network& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.activation != y.activation || x.frozen != y.frozen ||
        x.weights != y.weights || x.bias != y.bias) {
      return false;
    }
  }
  return true;
}

namespace {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z < 0.0 ? 0.0 : z;  // NaN passes through
    case Activation::sigmoid: return sigmoid(z);
    case Activation::none: break;
  }
  return z;
}

inline double activation_slope(Activation a, double z, double out) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return out * (1.0 - out);
    case Activation::none: break;
  }
  return 1.0;
}

}  // namespace

Tensor dense_forward(const Tensor& x, const DenseLayer& layer,
                     LayerCache* cache) {
  const std::size_t in = layer.in_width();
  const std::size_t out = layer.out_width();
  if (x.cols() != in || x.rank() > 2 || x.empty()) {
    throw DimensionError(fmt::format("dense layer expects width {}, got {}",
                                     in, x.shape_string()));
  }
  const std::size_t batch = x.rows();
  std::vector<std::size_t> out_shape =
      x.rank() == 1 ? std::vector<std::size_t>{out}
                    : std::vector<std::size_t>{batch, out};
  Tensor z(out_shape);
  kernels::gemm_nt(x.values(), layer.weights.values(), z.values(), batch, out,
                   in);
  Tensor y(out_shape);
  for (std::size_t s = 0; s < batch; ++s) {
    for (std::size_t j = 0; j < out; ++j) {
      const std::size_t idx = s * out + j;
      z[idx] += layer.bias[j];
      y[idx] = activate(layer.activation, z[idx]);
    }
  }
  if (cache) {
    cache->input = x;
    cache->pre_activation = z;
    cache->output = y;
  }
  return y;
}

Tensor forward(const Network& net, const Tensor& batch, ForwardCache* cache) {
  if (net.layers.empty()) throw DimensionError("network has no layers");
  if (cache) cache->layers.assign(net.layers.size(), LayerCache{});
  Tensor h = batch;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    h = dense_forward(h, net.layers[i], cache ? &cache->layers[i] : nullptr);
  }
  return h;
}

double bce_loss(std::span<const double> p, std::span<const double> y) {
  if (p.empty() || y.empty()) throw ArgumentError("bce_loss: empty input");
  if (p.size() != y.size()) {
    throw DimensionError(fmt::format("bce_loss: {} probabilities vs {} labels",
                                     p.size(), y.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kProbabilityClip, 1.0 - kProbabilityClip);
    total -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  return total / static_cast<double>(p.size());
}

Gradients backward(const Network& net, const ForwardCache& cache,
                   std::span<const double> labels) {
  if (cache.empty() || cache.layers.size() != net.layers.size() ||
      cache.layers.back().output.empty()) {
    throw StateError("backward called without a matching forward pass");
  }
  const Tensor& out = cache.layers.back().output;
  if (labels.size() != out.size()) {
    throw DimensionError(fmt::format("backward: {} labels for output {}",
                                     labels.size(), out.shape_string()));
  }

  // Index of the earliest trainable layer; nothing below it needs a delta.
  std::size_t first_trainable = net.layers.size();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.layers[i].frozen) {
      first_trainable = i;
      break;
    }
  }

  Gradients grads;
  grads.layers.resize(net.layers.size());
  if (first_trainable == net.layers.size()) return grads;

  const double n = static_cast<double>(out.size());
  const Activation last_act = net.layers.back().activation;
  const Tensor& last_z = cache.layers.back().pre_activation;

  // dL/dz at the output layer.
  Tensor delta(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double p = out[i];
    if (p < kProbabilityClip || p > 1.0 - kProbabilityClip) {
      delta[i] = 0.0;
    } else if (last_act == Activation::sigmoid) {
      delta[i] = (p - labels[i]) / n;
    } else {
      const double dp = (-labels[i] / p + (1.0 - labels[i]) / (1.0 - p)) / n;
      delta[i] = dp * activation_slope(last_act, last_z[i], p);
    }
  }

  for (std::size_t li = net.layers.size(); li-- > first_trainable;) {
    const DenseLayer& layer = net.layers[li];
    const LayerCache& lc = cache.layers[li];
    const std::size_t batch = lc.input.rows();
    const std::size_t in = layer.in_width();
    const std::size_t outw = layer.out_width();

    if (!layer.frozen) {
      LayerGradient g{Tensor({outw, in}), Tensor({outw})};
      kernels::gemm_tn(delta.values(), lc.input.values(), g.weights.values(),
                       outw, in, batch);
      for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t j = 0; j < outw; ++j) g.bias[j] += delta[s * outw + j];
      }
      grads.layers[li] = std::move(g);
    }

    if (li == first_trainable) break;

    Tensor dx(lc.input.shape());
    kernels::gemm_nn(delta.values(), layer.weights.values(), dx.values(), batch,
                     in, outw);
    const DenseLayer& below = net.layers[li - 1];
    const LayerCache& bc = cache.layers[li - 1];
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] *= activation_slope(below.activation, bc.pre_activation[i],
                                bc.output[i]);
    }
    delta = std::move(dx);
  }
  return grads;
}

// ---------------------------------------------------------------------------

std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adagrad: return "adagrad";
  }
  return "?";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adagrad") return OptimizerKind::adagrad;
  throw ArgumentError(fmt::format("unknown optimizer '{}'", name));
}

OptimizerSettings OptimizerSettings::defaults_for(OptimizerKind kind) {
  OptimizerSettings s;
  s.kind = kind;
  s.learning_rate = kind == OptimizerKind::sgd ? 0.01 : 0.001;
  return s;
}

void OptimizerSettings::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ArgumentError("adam decay rates must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ArgumentError("momentum must lie in [0, 1)");
  }
}

void optimizer_step(std::span<double> params, std::span<const double> grads,
                    ParameterSlot& slot, const OptimizerSettings& s,
                    std::int64_t t, std::string_view path) {
  if (params.size() != grads.size()) {
    throw DimensionError(fmt::format("{}: {} parameters vs {} gradients", path,
                                     params.size(), grads.size()));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError(fmt::format("non-finite gradient at {}[{}]", path, i));
    }
  }
  const std::size_t n = params.size();
  const double lr = s.learning_rate;
  switch (s.kind) {
    case OptimizerKind::adam: {
      slot.first.resize(n, 0.0);
      slot.second.resize(n, 0.0);
      const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
      for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        slot.first[i] = s.beta1 * slot.first[i] + (1.0 - s.beta1) * g;
        slot.second[i] = s.beta2 * slot.second[i] + (1.0 - s.beta2) * g * g;
        const double m_hat = slot.first[i] / c1;
        const double v_hat = slot.second[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
      }
      break;
    }
    case OptimizerKind::adagrad: {
      slot.second.resize(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        slot.second[i] += g * g;
        params[i] -= lr * g / (std::sqrt(slot.second[i]) + s.epsilon);
      }
      break;
    }
    case OptimizerKind::sgd: {
      if (s.momentum == 0.0) {
        for (std::size_t i = 0; i < n; ++i) params[i] -= lr * grads[i];
        break;
      }
      slot.first.resize(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        slot.first[i] = s.momentum * slot.first[i] - lr * grads[i];
        params[i] += slot.first[i];
      }
      break;
    }
  }
}

void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state) {
  if (grads.layers.size() != net.layers.size()) {
    throw DimensionError("gradient set does not match the network");
  }
  state.slots.resize(2 * net.layers.size());
  const std::int64_t t = state.step_count + 1;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    DenseLayer& layer = net.layers[i];
    if (layer.frozen) continue;
    if (!grads.layers[i]) {
      throw StateError(fmt::format("missing gradient for trainable layer {}", i));
    }
    const LayerGradient& g = *grads.layers[i];
    optimizer_step(layer.weights.values(), g.weights.values(),
                   state.slots[2 * i], state.settings, t,
                   fmt::format("layers[{}].weights", i));
    optimizer_step(layer.bias.values(), g.bias.values(), state.slots[2 * i + 1],
                   state.settings, t, fmt::format("layers[{}].bias", i));
  }
  state.step_count = t;
}

// ---------------------------------------------------------------------------

void TrainSchedule::validate() const {
  if (epochs <= 0) throw ArgumentError("epochs must be > 0");
  if (batch_size <= 0) throw ArgumentError("batch_size must be > 0");
  if (patience < 1) throw ArgumentError("patience must be >= 1");
}

double threshold_accuracy(std::span<const double> p, std::span<const double> y) {
  if (p.empty() || p.size() != y.size()) {
    throw DimensionError("threshold_accuracy: size mismatch or empty input");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double label = p[i] >= 0.5 ? 1.0 : 0.0;
    if (label == y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(p.size());
}

namespace {

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> idx) {
  const std::size_t cols = x.cols();
  Tensor out({idx.size(), cols});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = x.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

void check_xy(const Network& net, const Tensor& x, std::span<const double> y,
              std::string_view what) {
  if (x.rank() != 2 || x.cols() != net.input_width()) {
    throw DimensionError(fmt::format("{} features {} do not match input width {}",
                                     what, x.shape_string(), net.input_width()));
  }
  if (x.rows() != y.size()) {
    throw DimensionError(fmt::format("{}: {} rows vs {} labels", what, x.rows(),
                                     y.size()));
  }
  for (double v : y) {
    if (v != 0.0 && v != 1.0) {
      throw ArgumentError(fmt::format("{} labels must be 0 or 1", what));
    }
  }
}

}  // namespace

FitResult fit(Network net, const Tensor& train_x,
              std::span<const double> train_y, const Tensor& val_x,
              std::span<const double> val_y, const TrainSchedule& schedule,
              const OptimizerSettings& optimizer, std::uint64_t seed) {
  schedule.validate();
  optimizer.validate();
  net.validate();
  if (net.output_width() != 1) {
    throw DimensionError("fit expects a single-output network");
  }
  check_xy(net, train_x, train_y, "train");
  check_xy(net, val_x, val_y, "validation");
  const std::size_t n = train_x.rows();
  if (static_cast<std::size_t>(schedule.batch_size) > n) {
    throw ArgumentError(fmt::format("batch size {} exceeds {} training samples",
                                    schedule.batch_size, n));
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  OptimizerState state{optimizer, 0, {}};
  FitResult result;
  result.network = net;
  double best_val = std::numeric_limits<double>::infinity();
  int waited = 0;

  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(schedule.batch_size)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(schedule.batch_size));
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      Tensor xb = gather_rows(train_x, idx);
      std::vector<double> yb(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) yb[r] = train_y[idx[r]];

      ForwardCache cache;
      Tensor p = forward(net, xb, &cache);
      const double loss = bce_loss(p.values(), yb);
      if (!std::isfinite(loss) || !p.all_finite()) {
        throw TrainingError(fmt::format("non-finite loss in epoch {}", epoch));
      }
      loss_sum += loss * static_cast<double>(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        if ((p[r] >= 0.5 ? 1.0 : 0.0) == yb[r]) ++hits;
      }
      try {
        optimizer_step(net, backward(net, cache, yb), state);
      } catch (const NumericError& e) {
        throw TrainingError(fmt::format("epoch {}: {}", epoch, e.what()));
      }
    }

    Tensor pv = forward(net, val_x);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
    rec.val_loss = bce_loss(pv.values(), val_y);
    rec.val_accuracy = threshold_accuracy(pv.values(), val_y);
    if (!std::isfinite(rec.val_loss) || !pv.all_finite()) {
      throw TrainingError(fmt::format("non-finite validation loss in epoch {}", epoch));
    }
    result.history.push_back(rec);

    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.network = net;
      result.best_epoch = epoch;
      waited = 0;
    } else if (++waited >= schedule.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

void round_to_float32(Network& net) {
  for (auto& layer : net.layers) {
    for (double& w : layer.weights.values()) w = static_cast<float>(w);
    for (double& b : layer.bias.values()) b = static_cast<float>(b);
  }
}

}  // namespace berrystack::nn
