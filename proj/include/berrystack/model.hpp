#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "berrystack/dataset.hpp"
#include "berrystack/nnkernel.hpp"

// Two-branch classifier: one frozen feature extractor applied to the 700 nm
// and 770 nm bands, features concatenated, then a trainable head of two relu
// layers and a single sigmoid output.

namespace berrystack::model {

inline constexpr std::size_t kInputWidth =
    data::kSampleSide * data::kSampleSide * data::kSampleChannels;  // 3072

enum class ExtractorKind { loaded_frozen_conv, deterministic_surrogate };

/// Frozen image -> feature map. Both kinds are stored as a stack of frozen
/// dense layers over the flattened 32x32x3 image (HWC order); convolutions
/// are unrolled with `unroll_conv2d`.
class FeatureExtractor {
 public:
  /// relu(P x + b) with P drawn N(0, 1/3072) and b drawn U[0, 0.1) from
  /// `seed`. On an all-zero image the output is exactly `bias()`.
  static FeatureExtractor surrogate(std::size_t output_dim = 512, std::uint64_t seed = 0);

  /// Weight file whose first layer takes 3072 inputs. Every layer is marked
  /// frozen on load. Missing or corrupt files raise FormatError.
  static FeatureExtractor load(const std::filesystem::path& path);

  ExtractorKind kind() const { return kind_; }
  std::size_t output_dim() const { return net_.output_width(); }
  const nn::Network& network() const { return net_; }
  // Bias of the last layer: the surrogate's response to a black image.
  const Tensor& bias() const { return net_.layers.back().bias; }
  // 16 hex digits over the encoded weights.
  const std::string& digest() const { return digest_; }

  std::vector<double> features(const Image& band) const;
  // One row per image.
  Tensor features(const std::vector<const Image*>& bands) const;

  void save(const std::filesystem::path& path) const;

 private:
  FeatureExtractor(ExtractorKind kind, nn::Network net);

  ExtractorKind kind_;
  nn::Network net_;
  std::string digest_;
};

using ExtractorPtr = std::shared_ptr<const FeatureExtractor>;

/// Square-kernel 2-D convolution over an HWC image, zero padded.
struct Conv2dSpec {
  std::size_t in_height = 0, in_width = 0, in_channels = 0;
  std::size_t out_channels = 0, kernel = 3, stride = 1, padding = 1;
  // out_channels x in_channels x kernel x kernel
  std::vector<double> weights;
  std::vector<double> bias;  // out_channels
  nn::Activation activation = nn::Activation::relu;

  std::size_t out_height() const;
  std::size_t out_width() const;
};

/// Equivalent frozen dense layer (output in HWC order).
nn::DenseLayer unroll_conv2d(const Conv2dSpec& conv);

std::pair<std::vector<double>, std::vector<double>> extract_features(
    const data::BispectralSample& sample, const FeatureExtractor& extractor);

/// Feature rows [f700 | f770] for a whole dataset, with labels.
struct FeatureSet {
  Tensor x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  FeatureSet subset(const std::vector<std::size_t>& rows) const;
};

FeatureSet extract_dataset(const data::LabeledDataset& dataset, const FeatureExtractor& extractor);

struct FcSpec {
  std::size_t n1 = 1024;
  std::size_t n2 = 1024;

  std::string label() const;  // "N^{n1,n2}"
  static FcSpec parse(const std::string& text);  // "1024x256" or "1024,256"
  friend bool operator==(const FcSpec&, const FcSpec&) = default;
};

struct ModelConfig {
  FcSpec fc;
  nn::OptimizerSettings optimizer = nn::OptimizerSettings::defaults_for(nn::OptimizerKind::adam);
  nn::TrainSchedule schedule;  // batch 10, 20 epochs
  std::uint64_t seed = 0;

  void validate() const;
};

/// fc1 (relu) -> fc2 (relu) -> out (sigmoid, width 1), He-uniform from seed.
nn::Network make_head(std::size_t feature_dim, const FcSpec& fc, std::uint64_t seed);

struct TrainedModel {
  ExtractorPtr extractor;
  nn::Network head;
  ModelConfig config;
  std::vector<nn::EpochRecord> history;
  int best_epoch = 0;
};

/// Confidence that the sample is unripe.
double forward(const TrainedModel& model, const data::BispectralSample& sample);
/// Same, from precomputed feature rows; one confidence per row.
std::vector<double> forward_features(const TrainedModel& model, const Tensor& features);

/// >= 0.5 -> unripe, < 0.5 -> ripe. Outside [0, 1] (or NaN) is an
/// ArgumentError.
int classify(double confidence);

TrainedModel train_model(const data::LabeledDataset& train, const data::LabeledDataset& val,
                         const ModelConfig& config, ExtractorPtr extractor);
TrainedModel train_head(const FeatureSet& train, const FeatureSet& val, const ModelConfig& config,
                        ExtractorPtr extractor);

/// Head weights to `path`, config sidecar to `path` + ".cfg".
void save_model(const TrainedModel& model, const std::filesystem::path& path);
/// ConfigError when the sidecar's extractor digest or feature width does not
/// match `extractor`.
TrainedModel load_model(const std::filesystem::path& path, ExtractorPtr extractor);

}  // namespace berrystack::model
