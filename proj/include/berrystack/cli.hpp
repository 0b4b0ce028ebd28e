#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "berrystack/dataset.hpp"
#include "berrystack/ensemble.hpp"
#include "berrystack/evalx.hpp"
#include "berrystack/model.hpp"
#include "berrystack/tuning.hpp"

// Command-line front end: run configuration, commands and the run manifest.
//
// Config files are INI ([section] / key = value, ';' comments). Every key is
// checked against a fixed schema, so a misspelt hyperparameter is an error
// rather than a silent default. Relative paths resolve against the config
// file's directory.

namespace berrystack::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { ok = 0, usage_error = 2, data_error = 3, numeric_error = 4 };

class RunConfig {
 public:
  static RunConfig load(const std::filesystem::path& path,
                        std::optional<std::uint64_t> seed_override = std::nullopt,
                        std::optional<std::filesystem::path> out_override = std::nullopt);
  // Same, from text; relative paths resolve against `base_dir`.
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir,
                         std::optional<std::uint64_t> seed_override = std::nullopt,
                         std::optional<std::filesystem::path> out_override = std::nullopt);

  bool has(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const;

  // ConfigError when missing or malformed.
  std::string text(const std::string& section, const std::string& key) const;
  std::string text_or(const std::string& section, const std::string& key,
                      const std::string& fallback) const;
  double number(const std::string& section, const std::string& key) const;
  double number_or(const std::string& section, const std::string& key, double fallback) const;
  long long integer(const std::string& section, const std::string& key) const;
  long long integer_or(const std::string& section, const std::string& key,
                       long long fallback) const;
  bool flag_or(const std::string& section, const std::string& key, bool fallback) const;

  // Resolved path that must exist (ConfigError otherwise).
  std::filesystem::path input_path(const std::string& section, const std::string& key) const;

  std::uint64_t seed() const { return seed_; }
  const std::filesystem::path& out_dir() const { return out_; }
  // FNV-1a over the sorted, resolved key/value pairs (output dir excluded).
  std::string digest() const;

 private:
  std::filesystem::path base_dir_;
  std::map<std::string, std::map<std::string, std::string>> values_;
  std::uint64_t seed_ = 0;
  std::filesystem::path out_;
};

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::string tool_version = kToolVersion;
  double duration_seconds = 0.0;
  std::vector<std::filesystem::path> outputs;

  std::string to_json() const;
  // Atomically writes run_manifest.json under `dir`; returns its path.
  std::filesystem::path write(const std::filesystem::path& dir) const;
};

// Section builders shared by the commands.
model::ExtractorPtr make_extractor(const RunConfig& config);
model::ModelConfig model_config(const RunConfig& config);
ensemble::EnsembleConfig ensemble_config(const RunConfig& config);
tuning::GridSpec grid_spec(const RunConfig& config);
// [augmentation]; default ranges when keys are absent. `brightness` false
// forces the brightness range to identity.
data::AugmentationSpec augmentation_spec(const RunConfig& config, bool brightness);

struct RobustnessRow {
  std::string condition;
  evalx::MetricsReport metrics;
};

std::vector<std::string> command_names();
// Commands print a one-line summary to stdout unless silenced.
void set_quiet(bool quiet);
// Runs one command, returning the artifact paths it wrote.
std::vector<std::filesystem::path> run_command(const std::string& name, const RunConfig& config);

// The robustness table without touching disk.
std::vector<RobustnessRow> robustness_rows(const RunConfig& config);

int exit_code_for(const std::exception_ptr& error);

// Whole program: argument parsing, dispatch, manifest, exit code.
int main_entry(int argc, char** argv);

}  // namespace berrystack::cli
