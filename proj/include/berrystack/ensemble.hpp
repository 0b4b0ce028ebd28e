#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "berrystack/model.hpp"

// Homogeneous ensemble: B heads trained on bootstrap subsets of the
// (oversampled) training split, combined by a logistic-regression
// meta-learner fitted on their validation-split confidences.

namespace berrystack::ensemble {

struct EnsembleConfig {
  std::size_t learners = 5;  // B
  model::ModelConfig base;
  std::uint64_t seed = 0;
  double ridge = 1e-3;
  bool parallel = true;  // train learners concurrently

  void validate() const;
};

/// One column per learner, one row per sample.
struct StackedFeatures {
  Tensor matrix;
  std::vector<double> labels;

  std::size_t learners() const { return matrix.cols(); }
  std::string digest() const;
};

struct MetaLearner {
  double beta0 = 0.0;
  std::vector<double> beta1;

  // Fit diagnostics.
  int iterations = 0;
  bool converged = false;
  double final_nll = 0.0;
  std::vector<double> nll_trace;        // mean NLL after each accepted step
  std::vector<double> objective_trace;  // NLL + ridge penalty
};

struct MetaFitOptions {
  double ridge = 1e-3;
  double tolerance = 1e-8;  // on the gradient max-norm
  int max_iterations = 10000;
};

/// Learner i (1-based) trains on bootstrap_indices(n, seed + i) of `train`
/// with head seed base.seed + i. Failures are rethrown naming the learner.
std::vector<model::TrainedModel> train_base_learners(const model::FeatureSet& train,
                                                     const model::FeatureSet& val,
                                                     const EnsembleConfig& config,
                                                     model::ExtractorPtr extractor);

StackedFeatures stack_predictions(const std::vector<model::TrainedModel>& learners,
                                  const model::FeatureSet& samples);

/// Minimizes mean NLL + (ridge/2)|beta1|^2 (intercept unpenalized) by
/// gradient descent with backtracking line search. Non-convergence is
/// reported through `converged`, not thrown.
MetaLearner fit_meta(const StackedFeatures& stacked, const MetaFitOptions& options = {});

double predict_meta(const MetaLearner& meta, std::span<const double> row);

struct EnsembleModel {
  std::vector<model::TrainedModel> learners;
  MetaLearner meta;
  EnsembleConfig config;
  std::string stack_digest;
};

EnsembleModel train_ensemble(const model::FeatureSet& train, const model::FeatureSet& val,
                             const EnsembleConfig& config, model::ExtractorPtr extractor);

double predict_ensemble(const EnsembleModel& model, const data::BispectralSample& sample);
/// Ensemble confidence per feature row, plus the per-learner stack.
std::vector<double> predict_ensemble(const EnsembleModel& model, const model::FeatureSet& samples,
                                     StackedFeatures* stack = nullptr);

/// Directory holding learner_<i>.bstk (+ .cfg) and meta.txt.
void save_ensemble(const EnsembleModel& model, const std::filesystem::path& dir);
EnsembleModel load_ensemble(const std::filesystem::path& dir, model::ExtractorPtr extractor);

}  // namespace berrystack::ensemble
