#include <chrono>
#include <cstdio>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "berrystack/cli.hpp"
#include "berrystack/errors.hpp"

namespace berrystack::cli {

namespace {

const char* describe(const std::string& command) {
  static const std::map<std::string, const char*> text = {
      {"synth", "generate a synthetic dataset, stereo captures or spectral cubes"},
      {"select-wavelengths", "pick the visible/NIR band pair from calibrated cubes"},
      {"prepare", "crop, equalize and split a manifest into train/validation/test"},
      {"train", "train one classifier head"},
      {"tune", "k-fold coordinate grid search over the head hyperparameters"},
      {"train-ensemble", "train bootstrap base learners and the stacking meta-learner"},
      {"evaluate", "metrics, confusion matrix, ROC and PR points on the test split"},
      {"robustness", "test accuracy with and without augmentation"},
      {"correlate", "Pearson matrix between sensory scores and machine confidence"},
  };
  auto it = text.find(command);
  return it == text.end() ? "" : it->second;
}

}  // namespace

int exit_code_for(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const ArgumentError&) {
    return usage_error;
  } catch (const StateError&) {
    return usage_error;
  } catch (const FormatError&) {
    return data_error;
  } catch (const std::filesystem::filesystem_error&) {
    return data_error;
  } catch (const NumericError&) {
    return numeric_error;
  } catch (...) {
    return 1;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Bispectral berry ripeness classification pipeline", "berrystack"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", config_path, "INI run configuration")->required();
    sub->add_option("--seed", seed, "overrides [run] seed");
    sub->add_option("--out", out, "output directory (overrides [run] out)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage_error;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const auto start = std::chrono::steady_clock::now();
    const auto config = RunConfig::load(
        config_path, seed,
        out ? std::optional<std::filesystem::path>(*out) : std::nullopt);
    RunManifest manifest;
    manifest.command = command;
    manifest.config_digest = config.digest();
    manifest.outputs = run_command(command, config);
    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.write(config.out_dir());
    return ok;
  } catch (const std::exception& e) {
    const int code = exit_code_for(std::current_exception());
    fmt::print(stderr, "berrystack {}: {}\n", command, e.what());
    return code;
  }
}

}  // namespace berrystack::cli
