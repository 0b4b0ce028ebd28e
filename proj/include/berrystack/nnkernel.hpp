#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "berrystack/tensor.hpp"

// Minimal dense-network engine: forward and backward passes through dense
// layers, binary cross-entropy, the Adam / SGD / AdaGrad optimizers, and a
// mini-batch training loop with early stopping on validation loss.

namespace berrystack::nn {

enum class Activation : std::uint8_t { none = 0, relu = 1, sigmoid = 2 };

std::string_view to_string(Activation a);
Activation activation_from_code(std::uint8_t code);

/// Fully connected layer computing activation(W x + b).
///
/// `weights` is out x in, `bias` has length out. Frozen layers take part in
/// forward passes but never receive gradients or optimizer updates.
struct DenseLayer {
  Tensor weights;
  Tensor bias;
  Activation activation = Activation::none;
  bool frozen = false;

  std::size_t in_width() const { return weights.cols(); }
  std::size_t out_width() const { return weights.rows(); }

  static DenseLayer zeros(std::size_t in, std::size_t out, Activation act);
  // Uniform He-style init: U(-sqrt(6/in), sqrt(6/in)), zero bias.
  static DenseLayer he_uniform(std::size_t in, std::size_t out, Activation act,
                               std::mt19937_64& rng);
};

struct Network {
  std::vector<DenseLayer> layers;

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t trainable_parameter_count() const;
  // Throws DimensionError when consecutive layer widths disagree.
  void validate() const;

  friend bool operator==(const Network& a, const Network& b);
};

// Per-layer record of one forward pass, needed by `backward`.
struct LayerCache {
  Tensor input;
  Tensor pre_activation;
  Tensor output;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  bool empty() const { return layers.empty(); }
};

/// x may be a single vector (rank 1) or a batch (rank 2, one row per sample).
/// When `cache` is given, the input and pre-activation are stored in it.
Tensor dense_forward(const Tensor& x, const DenseLayer& layer,
                     LayerCache* cache = nullptr);

Tensor forward(const Network& net, const Tensor& batch,
               ForwardCache* cache = nullptr);

inline constexpr double kProbabilityClip = 1e-7;

/// Mean binary cross-entropy, probabilities clipped into [eps, 1 - eps].
double bce_loss(std::span<const double> p, std::span<const double> y);

struct LayerGradient {
  Tensor weights;
  Tensor bias;
};

/// One entry per network layer; frozen layers hold std::nullopt.
struct Gradients {
  std::vector<std::optional<LayerGradient>> layers;
};

/// Gradients of the mean BCE loss of the cached batch with respect to every
/// trainable parameter. The network output is read as a probability; outside
/// the clip band the loss is flat and the gradient is zero.
Gradients backward(const Network& net, const ForwardCache& cache,
                   std::span<const double> labels);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { adam, sgd, adagrad };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view name);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.0;  // sgd only

  // SGD 0.01, Adam 0.001, AdaGrad 0.001.
  static OptimizerSettings defaults_for(OptimizerKind kind);
  void validate() const;
};

// Accumulators for one parameter tensor. Adam uses both, AdaGrad uses
// `second` for the running sum of squared gradients, SGD uses `first` as
// momentum velocity.
struct ParameterSlot {
  std::vector<double> first;
  std::vector<double> second;
};

struct OptimizerState {
  OptimizerSettings settings;
  std::int64_t step_count = 0;
  // Two slots (weights, bias) per layer, created lazily for trainable ones.
  std::vector<ParameterSlot> slots;
};

/// Single update of one parameter tensor at step `t` (1-based). `path` names
/// the tensor in error messages.
void optimizer_step(std::span<double> params, std::span<const double> grads,
                    ParameterSlot& slot, const OptimizerSettings& settings,
                    std::int64_t t, std::string_view path);

/// Updates every trainable parameter of `net` and increments step_count.
void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state);

// ---------------------------------------------------------------------------
// Training

struct TrainSchedule {
  int epochs = 20;
  int batch_size = 10;
  int patience = 5;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct FitResult {
  Network network;  // best-validation checkpoint
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  bool stopped_early = false;
};

/// Mini-batch training with per-epoch shuffling from `seed`. After each epoch
/// the validation loss is recorded; training halts once it has failed to
/// improve for `patience` consecutive epochs, and the best checkpoint is
/// returned. A non-finite loss or gradient raises TrainingError naming the
/// epoch.
FitResult fit(Network net, const Tensor& train_x,
              std::span<const double> train_y, const Tensor& val_x,
              std::span<const double> val_y, const TrainSchedule& schedule,
              const OptimizerSettings& optimizer, std::uint64_t seed);

/// Fraction of rows where (p >= 0.5) matches the binary label.
double threshold_accuracy(std::span<const double> p, std::span<const double> y);

/// Rounds every parameter to float32 precision, so the network survives a
/// round trip through the weight file bit-exactly.
void round_to_float32(Network& net);

}  // namespace berrystack::nn
