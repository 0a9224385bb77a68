#include "xvl/config.hpp"

#include "xvl/error.hpp"
#include "xvl/io.hpp"

#include <functional>

namespace xvl {

namespace {

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field real(const char* key, T RunConfig::*section, double T::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*section.*member = io::parse_double(v, key); },
          [=](const RunConfig& c) { return io::format_double(c.*section.*member); }};
}

template <typename T, typename Int>
Field integer(const char* key, T RunConfig::*section, Int T::*member) {
  return {key,
          [=](RunConfig& c, const std::string& v) {
            const auto n = io::parse_int(v, key);
            if (n < 0) throw ValidationError(std::string(key) + " must be non-negative");
            c.*section.*member = static_cast<Int>(n);
          },
          [=](const RunConfig& c) { return std::to_string(c.*section.*member); }};
}

template <typename T>
Field boolean(const char* key, T RunConfig::*section, bool T::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*section.*member = io::parse_bool(v, key); },
          [=](const RunConfig& c) { return std::string(c.*section.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"seed", [](RunConfig& c, const std::string& v) {
                   c.seed = static_cast<std::uint64_t>(io::parse_int(v, "seed"));
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    f.push_back({"threads",
                 [](RunConfig& c, const std::string& v) {
                   const auto n = io::parse_int(v, "threads");
                   if (n < 1) throw ValidationError("threads must be >= 1");
                   c.threads = static_cast<unsigned>(n);
                 },
                 [](const RunConfig& c) { return std::to_string(c.threads); }});
    f.push_back({"feature_source", [](RunConfig& c, const std::string& v) { c.features.source = v; },
                 [](const RunConfig& c) { return c.features.source; }});
    f.push_back({"semantic_suffix", [](RunConfig& c, const std::string& v) { c.features.semantic_suffix = v; },
                 [](const RunConfig& c) { return c.features.semantic_suffix; }});
    f.push_back(boolean("standardize", &RunConfig::features, &FeatureConfig::standardize));
    f.push_back({"grid_interval",
                 [](RunConfig& c, const std::string& v) {
                   c.dictionary.grid.interval = static_cast<int>(io::parse_int(v, "grid_interval"));
                 },
                 [](const RunConfig& c) { return std::to_string(c.dictionary.grid.interval); }});
    f.push_back({"grid_margin",
                 [](RunConfig& c, const std::string& v) {
                   c.dictionary.grid.margin = static_cast<int>(io::parse_int(v, "grid_margin"));
                 },
                 [](const RunConfig& c) { return std::to_string(c.dictionary.grid.margin); }});
    f.push_back(real("max_range", &RunConfig::dictionary, &DictionaryOptions::max_range));
    f.push_back(integer("knn_m", &RunConfig::localizer, &LocalizerOptions::knn_m));
    f.push_back({"knn_mode", [](RunConfig& c, const std::string& v) { c.knn_mode = v; },
                 [](const RunConfig& c) { return c.knn_mode; }});
    f.push_back({"check_budget",
                 [](RunConfig& c, const std::string& v) {
                   const auto n = io::parse_int(v, "check_budget");
                   if (n < 0) throw ValidationError("check_budget must be non-negative");
                   c.check_budget = static_cast<std::size_t>(n);
                 },
                 [](const RunConfig& c) { return std::to_string(c.check_budget); }});
    f.push_back(real("candidate_spacing", &RunConfig::localizer, &LocalizerOptions::candidate_spacing));
    f.push_back(integer("neighborhood_size", &RunConfig::training, &TrainConfig::neighborhood_size));
    f.push_back(real("learning_rate", &RunConfig::training, &TrainConfig::learning_rate));
    f.push_back(real("adam_beta1", &RunConfig::training, &TrainConfig::beta1));
    f.push_back(real("adam_beta2", &RunConfig::training, &TrainConfig::beta2));
    f.push_back(real("adam_epsilon", &RunConfig::training, &TrainConfig::epsilon));
    f.push_back(integer("max_iter", &RunConfig::training, &TrainConfig::max_iter));
    f.push_back(real("tolerance", &RunConfig::training, &TrainConfig::tolerance));
    f.push_back(integer("output_dim", &RunConfig::training, &TrainConfig::output_dim));
    f.push_back(integer("max_train_points", &RunConfig::training, &TrainConfig::max_train_points));
    f.push_back({"tau", [](RunConfig& c, const std::string& v) { c.tau = io::parse_double(v, "tau"); },
                 [](const RunConfig& c) { return io::format_double(c.tau); }});
    f.push_back({"inlier_radius",
                 [](RunConfig& c, const std::string& v) { c.inlier_radius = io::parse_double(v, "inlier_radius"); },
                 [](const RunConfig& c) { return io::format_double(c.inlier_radius); }});

    using S = SyntheticParams;
    f.push_back(real("synth_extent", &RunConfig::synthetic, &S::extent));
    f.push_back(real("synth_meters_per_pixel", &RunConfig::synthetic, &S::meters_per_pixel));
    f.push_back(integer("synth_channels", &RunConfig::synthetic, &S::channels));
    f.push_back(real("synth_blob_density", &RunConfig::synthetic, &S::blob_density));
    f.push_back(real("synth_blob_sigma_min", &RunConfig::synthetic, &S::blob_sigma_min));
    f.push_back(real("synth_blob_sigma_max", &RunConfig::synthetic, &S::blob_sigma_max));
    f.push_back(real("synth_noise_sigma", &RunConfig::synthetic, &S::noise_sigma));
    f.push_back(boolean("synth_identity_mixing", &RunConfig::synthetic, &S::identity_mixing));
    f.push_back(real("synth_mixing_condition", &RunConfig::synthetic, &S::mixing_condition));
    f.push_back(real("synth_path_length", &RunConfig::synthetic, &S::path_length));
    f.push_back(real("synth_db_spacing", &RunConfig::synthetic, &S::db_spacing));
    f.push_back(integer("synth_num_queries", &RunConfig::synthetic, &S::num_queries));
    f.push_back(integer("synth_num_outside_queries", &RunConfig::synthetic, &S::num_outside_queries));
    f.push_back(real("synth_outside_clearance", &RunConfig::synthetic, &S::outside_clearance));
    f.push_back(real("synth_query_lateral_offset", &RunConfig::synthetic, &S::query_lateral_offset));
    f.push_back(real("synth_query_heading_deg", &RunConfig::synthetic, &S::query_heading_deg));
    f.push_back(boolean("synth_queries_on_candidates", &RunConfig::synthetic, &S::queries_on_candidates));
    f.push_back(integer("synth_image_w", &RunConfig::synthetic, &S::image_w));
    f.push_back(integer("synth_image_h", &RunConfig::synthetic, &S::image_h));
    f.push_back(real("synth_focal", &RunConfig::synthetic, &S::focal));
    f.push_back(real("synth_camera_height", &RunConfig::synthetic, &S::camera_height));
    return f;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ValidationError("unknown config key '" + key + "'");
}

void RunConfig::finalize() {
  training.seed = seed;
  synthetic.seed = seed;
  synthetic.candidate_spacing = localizer.candidate_spacing;
  localizer.threads = threads;
  if (knn_mode == "exact") {
    localizer.search = SearchMode::exact();
  } else if (knn_mode == "approximate") {
    localizer.search = check_budget == 0 ? SearchMode::approximate_default(localizer.knn_m)
                                         : SearchMode::approximate(check_budget);
  } else {
    throw ValidationError("knn_mode must be 'exact' or 'approximate', got '" + knn_mode + "'");
  }
  features.validate();
  dictionary.validate();
  training.validate();
  localizer.validate();
  synthetic.validate();
  if (!(inlier_radius > 0.0)) throw ValidationError("inlier_radius must be positive");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
  RunConfig c;
  for (const auto& [k, v] : io::parse_key_values(text, origin)) c.set(k, v);
  c.finalize();
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  RunConfig c;
  for (const auto& [k, v] : io::read_key_values(path)) c.set(k, v);
  c.finalize();
  return c;
}

}  // namespace xvl
