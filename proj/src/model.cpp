#include "berrystack/model.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "berrystack/errors.hpp"
#include "berrystack/io_util.hpp"
#include "berrystack/weight_file.hpp"

namespace berrystack::model {

namespace fs = std::filesystem;

FeatureExtractor::FeatureExtractor(ExtractorKind kind, nn::Network net)
    : kind_(kind), net_(std::move(net)) {
  net_.validate();
  if (net_.layers.empty() || net_.input_width() != kInputWidth) {
    throw FormatError(fmt::format("feature extractor must take {} inputs", kInputWidth));
  }
  for (auto& layer : net_.layers) layer.frozen = true;
  digest_ = io::hex_digest(io::fnv1a(nn::encode_network(net_)));
}

FeatureExtractor FeatureExtractor::surrogate(std::size_t output_dim, std::uint64_t seed) {
  if (output_dim == 0) throw ArgumentError("surrogate output_dim must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(kInputWidth)));
  std::uniform_real_distribution<double> offset(0.0, 0.1);
  nn::DenseLayer layer = nn::DenseLayer::zeros(kInputWidth, output_dim, nn::Activation::relu);
  for (double& w : layer.weights.values()) w = gauss(rng);
  for (double& b : layer.bias.values()) b = offset(rng);
  layer.frozen = true;
  nn::Network net{{std::move(layer)}};
  nn::round_to_float32(net);  // identical after a save / load cycle
  return FeatureExtractor(ExtractorKind::deterministic_surrogate, std::move(net));
}

FeatureExtractor FeatureExtractor::load(const fs::path& path) {
  return FeatureExtractor(ExtractorKind::loaded_frozen_conv, nn::load_network(path));
}

void FeatureExtractor::save(const fs::path& path) const { nn::save_network(net_, path); }

std::vector<double> FeatureExtractor::features(const Image& band) const {
  const Tensor row = features(std::vector<const Image*>{&band});
  return {row.values().begin(), row.values().end()};
}

Tensor FeatureExtractor::features(const std::vector<const Image*>& bands) const {
  Tensor batch({bands.size(), kInputWidth});
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const Image& img = *bands[i];
    if (img.width != data::kSampleSide || img.height != data::kSampleSide ||
        img.channels != data::kSampleChannels) {
      throw ArgumentError(fmt::format("extractor input must be 32x32x3, got {}x{}x{}",
                                      img.width, img.height, img.channels));
    }
    std::copy(img.data.begin(), img.data.end(), batch.row(i).begin());
  }
  return nn::forward(net_, batch);
}

// ---------------------------------------------------------------------------

std::size_t Conv2dSpec::out_height() const {
  return (in_height + 2 * padding - kernel) / stride + 1;
}
std::size_t Conv2dSpec::out_width() const {
  return (in_width + 2 * padding - kernel) / stride + 1;
}

nn::DenseLayer unroll_conv2d(const Conv2dSpec& conv) {
  if (conv.kernel == 0 || conv.stride == 0 || conv.in_channels == 0 || conv.out_channels == 0 ||
      conv.in_height + 2 * conv.padding < conv.kernel ||
      conv.in_width + 2 * conv.padding < conv.kernel) {
    throw ArgumentError("invalid convolution geometry");
  }
  const std::size_t k = conv.kernel;
  if (conv.weights.size() != conv.out_channels * conv.in_channels * k * k ||
      conv.bias.size() != conv.out_channels) {
    throw DimensionError("convolution weights do not match its geometry");
  }
  const std::size_t oh = conv.out_height(), ow = conv.out_width();
  const std::size_t in_size = conv.in_height * conv.in_width * conv.in_channels;
  auto layer = nn::DenseLayer::zeros(in_size, oh * ow * conv.out_channels, conv.activation);
  layer.frozen = true;
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t oc = 0; oc < conv.out_channels; ++oc) {
        const std::size_t row = (oy * ow + ox) * conv.out_channels + oc;
        layer.bias[row] = conv.bias[oc];
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * conv.stride + ky) -
                          static_cast<std::ptrdiff_t>(conv.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(conv.in_height)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * conv.stride + kx) -
                            static_cast<std::ptrdiff_t>(conv.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(conv.in_width)) continue;
            for (std::size_t ic = 0; ic < conv.in_channels; ++ic) {
              const std::size_t col =
                  (static_cast<std::size_t>(iy) * conv.in_width + static_cast<std::size_t>(ix)) *
                      conv.in_channels + ic;
              layer.weights.at(row, col) =
                  conv.weights[((oc * conv.in_channels + ic) * k + ky) * k + kx];
            }
          }
        }
      }
    }
  }
  return layer;
}

// ---------------------------------------------------------------------------

std::pair<std::vector<double>, std::vector<double>> extract_features(
    const data::BispectralSample& sample, const FeatureExtractor& extractor) {
  return {extractor.features(sample.band700), extractor.features(sample.band770)};
}

FeatureSet FeatureSet::subset(const std::vector<std::size_t>& rows) const {
  FeatureSet out{Tensor({rows.size(), x.cols()}), {}};
  out.y.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw ArgumentError(fmt::format("row {} out of range", rows[i]));
    const auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.x.row(i).begin());
    out.y.push_back(y[rows[i]]);
  }
  return out;
}

FeatureSet extract_dataset(const data::LabeledDataset& dataset, const FeatureExtractor& extractor) {
  if (dataset.empty()) throw ArgumentError("cannot extract features of an empty dataset");
  std::vector<const Image*> b700, b770;
  for (const auto& s : dataset.samples) {
    b700.push_back(&s.band700);
    b770.push_back(&s.band770);
  }
  const Tensor f700 = extractor.features(b700);
  const Tensor f770 = extractor.features(b770);
  const std::size_t d = extractor.output_dim();
  FeatureSet out{Tensor({dataset.size(), 2 * d}), dataset.labels()};
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto row = out.x.row(i);
    std::copy(f700.row(i).begin(), f700.row(i).end(), row.begin());
    std::copy(f770.row(i).begin(), f770.row(i).end(), row.begin() + static_cast<std::ptrdiff_t>(d));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string FcSpec::label() const { return fmt::format("N^{{{},{}}}", n1, n2); }

FcSpec FcSpec::parse(const std::string& text) {
  const char sep = text.find('x') != std::string::npos ? 'x' : ',';
  const auto parts = io::split(text, sep);
  if (parts.size() != 2) throw ConfigError(fmt::format("fc spec '{}' is not N1xN2", text));
  FcSpec fc;
  try {
    std::size_t used = 0;
    const std::string a = io::trim(parts[0]), b = io::trim(parts[1]);
    fc.n1 = std::stoul(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    fc.n2 = std::stoul(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
  } catch (const std::logic_error&) {
    throw ConfigError(fmt::format("fc spec '{}' is not N1xN2", text));
  }
  if (fc.n1 == 0 || fc.n2 == 0) throw ConfigError("fc layer widths must be positive");
  return fc;
}

void ModelConfig::validate() const {
  if (fc.n1 == 0 || fc.n2 == 0) throw ConfigError("fc layer widths must be positive");
  optimizer.validate();
  schedule.validate();
}

nn::Network make_head(std::size_t feature_dim, const FcSpec& fc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::Network head;
  head.layers.push_back(nn::DenseLayer::he_uniform(2 * feature_dim, fc.n1, nn::Activation::relu, rng));
  head.layers.push_back(nn::DenseLayer::he_uniform(fc.n1, fc.n2, nn::Activation::relu, rng));
  head.layers.push_back(nn::DenseLayer::he_uniform(fc.n2, 1, nn::Activation::sigmoid, rng));
  return head;
}

namespace {

void check_shapes(const TrainedModel& model) {
  if (!model.extractor) throw StateError("model has no feature extractor");
  if (model.head.layers.empty() || model.head.output_width() != 1) {
    throw ConfigError("head must end in a single output");
  }
  if (model.head.input_width() != 2 * model.extractor->output_dim()) {
    throw ConfigError(fmt::format("head expects {} features but the extractor yields 2 x {}",
                                  model.head.input_width(), model.extractor->output_dim()));
  }
}

}  // namespace

std::vector<double> forward_features(const TrainedModel& model, const Tensor& features) {
  if (features.rank() != 2 || features.cols() != model.head.input_width()) {
    throw ConfigError(fmt::format("feature rows of shape {} do not fit a head of input width {}",
                                  features.shape_string(), model.head.input_width()));
  }
  const Tensor p = nn::forward(model.head, features);
  return {p.values().begin(), p.values().end()};
}

double forward(const TrainedModel& model, const data::BispectralSample& sample) {
  check_shapes(model);
  auto [f700, f770] = extract_features(sample, *model.extractor);
  std::vector<double> row = std::move(f700);
  row.insert(row.end(), f770.begin(), f770.end());
  const std::size_t width = row.size();
  return forward_features(model, Tensor({1, width}, std::move(row)))[0];
}

int classify(double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw ArgumentError(fmt::format("confidence {} outside [0, 1]", confidence));
  }
  return confidence >= 0.5 ? data::unripe : data::ripe;
}

TrainedModel train_head(const FeatureSet& train, const FeatureSet& val, const ModelConfig& config,
                        ExtractorPtr extractor) {
  config.validate();
  if (!extractor) throw StateError("train_head needs a feature extractor");
  const std::size_t d = extractor->output_dim();
  if (train.x.cols() != 2 * d || val.x.cols() != 2 * d) {
    throw ConfigError("feature width does not match the extractor");
  }
  auto fitted = nn::fit(make_head(d, config.fc, config.seed), train.x, train.y, val.x, val.y,
                        config.schedule, config.optimizer, config.seed);
  nn::round_to_float32(fitted.network);
  TrainedModel m{std::move(extractor), std::move(fitted.network), config,
                 std::move(fitted.history), fitted.best_epoch};
  return m;
}

TrainedModel train_model(const data::LabeledDataset& train, const data::LabeledDataset& val,
                         const ModelConfig& config, ExtractorPtr extractor) {
  if (!extractor) throw StateError("train_model needs a feature extractor");
  const FeatureSet train_features = extract_dataset(train, *extractor);
  const FeatureSet val_features = extract_dataset(val, *extractor);
  return train_head(train_features, val_features, config, std::move(extractor));
}

// ---------------------------------------------------------------------------

void save_model(const TrainedModel& model, const fs::path& path) {
  check_shapes(model);
  nn::save_network(model.head, path);
  const auto& c = model.config;
  io::write_atomic(fs::path(path.string() + ".cfg"),
                   fmt::format("fc_spec = {}x{}\n"
                               "optimizer = {}\n"
                               "learning_rate = {:.17g}\n"
                               "momentum = {:.17g}\n"
                               "batch_size = {}\n"
                               "epochs = {}\n"
                               "patience = {}\n"
                               "seed = {}\n"
                               "best_epoch = {}\n"
                               "feature_dim = {}\n"
                               "extractor_digest = {}\n",
                               c.fc.n1, c.fc.n2, nn::to_string(c.optimizer.kind),
                               c.optimizer.learning_rate, c.optimizer.momentum,
                               c.schedule.batch_size, c.schedule.epochs, c.schedule.patience,
                               c.seed, model.best_epoch, model.extractor->output_dim(),
                               model.extractor->digest()));
}

TrainedModel load_model(const fs::path& path, ExtractorPtr extractor) {
  if (!extractor) throw StateError("load_model needs a feature extractor");
  const fs::path sidecar(path.string() + ".cfg");
  std::map<std::string, std::string> kv;
  std::istringstream in(io::read_text(sidecar));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (io::trim(line).empty()) continue;
    if (eq == std::string::npos) throw FormatError(fmt::format("{}: bad line '{}'", sidecar.string(), line));
    kv[io::trim(line.substr(0, eq))] = io::trim(line.substr(eq + 1));
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(fmt::format("{}: missing '{}'", sidecar.string(), key));
    return it->second;
  };

  TrainedModel m;
  m.extractor = std::move(extractor);
  try {
    m.config.fc = FcSpec::parse(get("fc_spec"));
    m.config.optimizer = nn::OptimizerSettings::defaults_for(nn::optimizer_from_string(get("optimizer")));
    m.config.optimizer.learning_rate = std::stod(get("learning_rate"));
    m.config.optimizer.momentum = std::stod(get("momentum"));
    m.config.schedule.batch_size = std::stoi(get("batch_size"));
    m.config.schedule.epochs = std::stoi(get("epochs"));
    m.config.schedule.patience = std::stoi(get("patience"));
    m.config.seed = std::stoull(get("seed"));
    m.best_epoch = std::stoi(get("best_epoch"));
  } catch (const std::logic_error&) {
    throw FormatError(fmt::format("{}: malformed value", sidecar.string()));
  }
  if (get("extractor_digest") != m.extractor->digest()) {
    throw ConfigError(fmt::format("model '{}' was trained with extractor {}, not {}", path.string(),
                                  get("extractor_digest"), m.extractor->digest()));
  }
  m.head = nn::load_network(path);
  check_shapes(m);
  return m;
}

}  // namespace berrystack::model
