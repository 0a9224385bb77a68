#pragma once

#include "xvl/dictionary.hpp"
#include "xvl/features.hpp"
#include "xvl/learning.hpp"
#include "xvl/localization.hpp"
#include "xvl/synthetic.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xvl {

/// Every tunable of a run, loaded from a plain-text `key = value` file.
/// Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  FeatureConfig features;
  DictionaryOptions dictionary;
  TrainConfig training;
  LocalizerOptions localizer;
  std::string knn_mode = "exact";  // exact | approximate
  std::size_t check_budget = 0;    // approximate mode; 0 means 64 * knn_m
  double tau = 0.0;
  double inlier_radius = 10.0;
  SyntheticParams synthetic;

  void set(const std::string& key, const std::string& value);
  /// Propagates seed, threads and search mode into the sub-configs and
  /// validates everything.
  void finalize();

  std::string to_text() const;
  static std::vector<std::string> keys();

  static RunConfig from_text(const std::string& text, const std::string& origin = "config");
  static RunConfig from_file(const std::filesystem::path& path);
};

}  // namespace xvl
