#pragma once

#include "xvl/geometry.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace xvl {

/// One row of the localize output CSV.
struct LocalizationRecord {
  std::string id;
  Pose2D estimate;
  double confidence = 0.0;
  bool inlier = true;
};

/// Ground truth; `inside` is false for queries taken outside the mapped area.
struct GroundTruthRecord {
  std::string id;
  Pose2D pose;
  bool inside = true;
};

/// Error statistics use the population standard deviation and cover inside
/// queries only. A true positive is an inlier-classified inside query within
/// the inlier radius; any other inlier classification is a false positive.
/// Recall is over all inside queries; precision is 1 when nothing is
/// classified as an inlier.
struct EvalReport {
  std::vector<std::string> ids;
  std::vector<double> errors;  // per query, same order as ids
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 1.0;
  double recall = 0.0;
};

struct ErrorStats {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
};

ErrorStats error_stats(std::span<const double> errors);

/// Results and truth are matched by id; any missing or extra id is an error.
EvalReport evaluate_localization(std::span<const LocalizationRecord> results, std::span<const GroundTruthRecord> truth,
                                 double inlier_radius = 10.0);

struct PrPoint {
  double tau = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // ascending tau
  PrPoint best;
};

/// Sweeps tau over every distinct confidence (inlier iff confidence >= tau).
/// The chosen tau maximizes precision * recall, ties to the larger tau.
/// Needs at least one inside and one outside query.
PrCurve pr_sweep(std::span<const LocalizationRecord> results, std::span<const GroundTruthRecord> truth,
                 double inlier_radius = 10.0);

std::string localization_csv(std::span<const LocalizationRecord> records);
std::vector<LocalizationRecord> read_localization_csv(const std::filesystem::path& path);

std::string ground_truth_csv(std::span<const GroundTruthRecord> records);
std::vector<GroundTruthRecord> read_ground_truth_csv(const std::filesystem::path& path);

std::string eval_report_csv(const EvalReport& report);
std::string pr_curve_csv(const PrCurve& curve);

}  // namespace xvl
