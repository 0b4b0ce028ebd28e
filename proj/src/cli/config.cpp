#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "berrystack/cli.hpp"
#include "berrystack/errors.hpp"
#include "berrystack/io_util.hpp"

namespace berrystack::cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

using Schema = std::map<std::string, std::set<std::string>>;

const Schema& schema() {
  static const Schema s = {
      {"run", {"seed", "out"}},
      {"synth", {"kind", "samples", "unripe_fraction", "noise", "side", "width", "height"}},
      {"spectral",
       {"raw_header", "raw_data", "white_header", "white_data", "dark_header", "dark_data",
        "mask_0", "mask_1", "mask_2", "mask_3", "mask_4", "visible_lo", "visible_hi", "nir_lo",
        "nir_hi"}},
      {"data",
       {"manifest", "bboxes", "prepared", "train_ratio", "validation_ratio", "min_per_class",
        "train", "validation", "test"}},
      {"extractor", {"kind", "dim", "seed", "path"}},
      {"model",
       {"fc", "optimizer", "learning_rate", "momentum", "batch_size", "epochs", "patience",
        "path"}},
      {"ensemble", {"learners", "ridge", "path"}},
      {"augmentation", {"rotation", "zoom_lo", "zoom_hi", "brightness_lo", "brightness_hi"}},
      {"tuning", {"k", "metric", "fc", "optimizers", "batch_sizes", "epochs"}},
      {"evaluate", {"source"}},
      {"sensory", {"table", "predictions", "variables"}},
  };
  return s;
}

std::uint64_t parse_seed(const std::string& v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) {
    throw ConfigError(fmt::format("[run] seed: '{}' is not a non-negative integer", v));
  }
  return out;
}

}  // namespace

RunConfig RunConfig::load(const fs::path& path, std::optional<std::uint64_t> seed_override,
                          std::optional<fs::path> out_override) {
  if (!fs::is_regular_file(path)) {
    throw ConfigError(fmt::format("config file '{}' not found", path.string()));
  }
  return parse(io::read_text(path), fs::absolute(path).parent_path(), seed_override,
               std::move(out_override));
}

RunConfig RunConfig::parse(const std::string& text, const fs::path& base_dir,
                           std::optional<std::uint64_t> seed_override,
                           std::optional<fs::path> out_override) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  RunConfig c;
  c.base_dir_ = base_dir;
  for (const auto& [section, body] : tree) {
    auto known = schema().find(section);
    if (body.empty()) {
      throw ConfigError(known == schema().end()
                            ? fmt::format("key '{}' appears outside any section", section)
                            : fmt::format("[{}] has no keys", section));
    }
    if (known == schema().end()) throw ConfigError(fmt::format("unknown section [{}]", section));
    for (const auto& [key, value] : body) {
      if (!known->second.count(key)) {
        throw ConfigError(fmt::format("unknown key '{}' in [{}]", key, section));
      }
      c.values_[section][key] = io::trim(value.data());
    }
  }

  if (seed_override) {
    c.seed_ = *seed_override;
  } else if (c.has("run", "seed")) {
    c.seed_ = parse_seed(c.text("run", "seed"));
  } else {
    throw ConfigError("no seed: set [run] seed or pass --seed");
  }
  c.values_["run"]["seed"] = std::to_string(c.seed_);

  if (out_override) {
    c.out_ = *out_override;
  } else if (c.has("run", "out")) {
    c.out_ = base_dir / c.text("run", "out");
  } else {
    c.out_ = "berrystack_out";
  }
  return c;
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
  auto s = values_.find(section);
  return s != values_.end() && s->second.count(key) > 0;
}

bool RunConfig::has_section(const std::string& section) const {
  return values_.count(section) > 0;
}

std::string RunConfig::text(const std::string& section, const std::string& key) const {
  if (!has(section, key)) throw ConfigError(fmt::format("missing [{}] {}", section, key));
  return values_.at(section).at(key);
}

std::string RunConfig::text_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  return has(section, key) ? text(section, key) : fallback;
}

double RunConfig::number(const std::string& section, const std::string& key) const {
  const std::string v = text(section, key);
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(fmt::format("[{}] {}: '{}' is not a number", section, key, v));
  }
  return out;
}

double RunConfig::number_or(const std::string& section, const std::string& key,
                            double fallback) const {
  return has(section, key) ? number(section, key) : fallback;
}

long long RunConfig::integer(const std::string& section, const std::string& key) const {
  const std::string v = text(section, key);
  long long out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) {
    throw ConfigError(fmt::format("[{}] {}: '{}' is not an integer", section, key, v));
  }
  return out;
}

long long RunConfig::integer_or(const std::string& section, const std::string& key,
                                long long fallback) const {
  return has(section, key) ? integer(section, key) : fallback;
}

bool RunConfig::flag_or(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = text(section, key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(fmt::format("[{}] {}: '{}' is not a boolean", section, key, v));
}

fs::path RunConfig::input_path(const std::string& section, const std::string& key) const {
  const fs::path p = base_dir_ / text(section, key);
  if (!fs::exists(p)) {
    throw ConfigError(fmt::format("[{}] {}: '{}' does not exist", section, key, p.string()));
  }
  return p;
}

std::string RunConfig::digest() const {
  std::string canon;
  for (const auto& [section, body] : values_) {
    for (const auto& [key, value] : body) {
      if (section == "run" && key == "out") continue;
      canon += section + "." + key + "=" + value + "\n";
    }
  }
  return io::hex_digest(io::fnv1a(canon));
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config_digest"] = config_digest;
  j["tool_version"] = tool_version;
  j["duration_seconds"] = duration_seconds;
  j["outputs"] = nlohmann::json::array();
  for (const auto& p : outputs) j["outputs"].push_back(p.string());
  return j.dump(2) + "\n";
}

fs::path RunManifest::write(const fs::path& dir) const {
  fs::create_directories(dir);
  const fs::path p = dir / "run_manifest.json";
  io::write_atomic(p, to_json());
  return p;
}

}  // namespace berrystack::cli
