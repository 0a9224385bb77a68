#include "xvl/evaluation.hpp"

#include "xvl/error.hpp"
#include "xvl/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace xvl {

namespace {

struct Matched {
  const LocalizationRecord* result;
  const GroundTruthRecord* truth;
  double error;
};

std::vector<Matched> match(std::span<const LocalizationRecord> results, std::span<const GroundTruthRecord> truth) {
  std::map<std::string, const GroundTruthRecord*> by_id;
  for (const auto& t : truth)
    if (!by_id.emplace(t.id, &t).second) throw ValidationError("duplicate ground-truth id '" + t.id + "'");
  std::vector<Matched> out;
  std::map<std::string, bool> seen;
  for (const auto& r : results) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw ValidationError("result id '" + r.id + "' has no ground truth");
    if (!seen.emplace(r.id, true).second) throw ValidationError("duplicate result id '" + r.id + "'");
    out.push_back({&r, it->second, delta_location(r.estimate, it->second->pose)});
  }
  if (out.size() != truth.size()) throw ValidationError("ground truth has ids with no localization result");
  return out;
}

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t inside = 0;
};

double precision_of(const Counts& c) { return c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fp); }
double recall_of(const Counts& c) { return c.inside == 0 ? 0.0 : static_cast<double>(c.tp) / c.inside; }

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::size_t fields,
                                               const std::string& header) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.rfind(header, 0) == 0) continue;
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) row.push_back(f);
    if (row.size() != fields)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(fields) +
                            " fields");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

ErrorStats error_stats(std::span<const double> errors) {
  ErrorStats s;
  if (errors.empty()) return s;
  const double n = static_cast<double>(errors.size());
  for (double e : errors) s.mean += e;
  s.mean /= n;
  for (double e : errors) s.stddev += (e - s.mean) * (e - s.mean);
  s.stddev = std::sqrt(s.stddev / n);
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const auto mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

EvalReport evaluate_localization(std::span<const LocalizationRecord> results, std::span<const GroundTruthRecord> truth,
                                 double inlier_radius) {
  EvalReport rep;
  Counts c;
  std::vector<double> inside_errors;
  for (const auto& m : match(results, truth)) {
    rep.ids.push_back(m.result->id);
    rep.errors.push_back(m.error);
    if (m.truth->inside) {
      ++c.inside;
      inside_errors.push_back(m.error);
    }
    if (!m.result->inlier) continue;
    if (m.truth->inside && m.error <= inlier_radius)
      ++c.tp;
    else
      ++c.fp;
  }
  const auto stats = error_stats(inside_errors);
  rep.mean = stats.mean;
  rep.stddev = stats.stddev;
  rep.median = stats.median;
  rep.true_positives = c.tp;
  rep.false_positives = c.fp;
  rep.false_negatives = c.inside - c.tp;
  rep.precision = precision_of(c);
  rep.recall = recall_of(c);
  return rep;
}

PrCurve pr_sweep(std::span<const LocalizationRecord> results, std::span<const GroundTruthRecord> truth,
                 double inlier_radius) {
  auto matched = match(results, truth);
  const auto inside = static_cast<std::size_t>(
      std::count_if(matched.begin(), matched.end(), [](const Matched& m) { return m.truth->inside; }));
  if (inside == 0 || inside == matched.size())
    throw ValidationError("pr_sweep needs at least one inside and one outside query");

  // Descending confidence; each distinct value closes a threshold group.
  std::sort(matched.begin(), matched.end(),
            [](const Matched& a, const Matched& b) { return a.result->confidence > b.result->confidence; });
  PrCurve curve;
  Counts c;
  c.inside = inside;
  for (std::size_t i = 0; i < matched.size(); ++i) {
    const auto& m = matched[i];
    if (m.truth->inside && m.error <= inlier_radius)
      ++c.tp;
    else
      ++c.fp;
    if (i + 1 == matched.size() || matched[i + 1].result->confidence != m.result->confidence)
      curve.points.push_back({m.result->confidence, precision_of(c), recall_of(c)});
  }
  std::reverse(curve.points.begin(), curve.points.end());
  curve.best = curve.points.front();
  for (const auto& p : curve.points)
    if (p.precision * p.recall >= curve.best.precision * curve.best.recall) curve.best = p;
  return curve;
}

std::string localization_csv(std::span<const LocalizationRecord> records) {
  std::string out = "query_id,est_x,est_y,est_theta,confidence,inlier\n";
  for (const auto& r : records)
    out += r.id + "," + io::format_double(r.estimate.x) + "," + io::format_double(r.estimate.y) + "," +
           io::format_double(r.estimate.theta) + "," + io::format_double(r.confidence) + "," +
           (r.inlier ? "1" : "0") + "\n";
  return out;
}

std::vector<LocalizationRecord> read_localization_csv(const std::filesystem::path& path) {
  std::vector<LocalizationRecord> out;
  for (const auto& row : read_csv(path, 6, "query_id")) {
    const std::string& w = path.string();
    out.push_back({row[0],
                   Pose2D(io::parse_double(row[1], w), io::parse_double(row[2], w), io::parse_double(row[3], w)),
                   io::parse_double(row[4], w), io::parse_bool(row[5], w)});
  }
  return out;
}

std::string ground_truth_csv(std::span<const GroundTruthRecord> records) {
  std::string out = "id,x,y,theta,inside\n";
  for (const auto& r : records)
    out += r.id + "," + io::format_double(r.pose.x) + "," + io::format_double(r.pose.y) + "," +
           io::format_double(r.pose.theta) + "," + (r.inside ? "1" : "0") + "\n";
  return out;
}

std::vector<GroundTruthRecord> read_ground_truth_csv(const std::filesystem::path& path) {
  std::vector<GroundTruthRecord> out;
  for (const auto& row : read_csv(path, 5, "id")) {
    const std::string& w = path.string();
    out.push_back({row[0],
                   Pose2D(io::parse_double(row[1], w), io::parse_double(row[2], w), io::parse_double(row[3], w)),
                   io::parse_bool(row[4], w)});
  }
  return out;
}

std::string eval_report_csv(const EvalReport& r) {
  std::string out = "# error statistics over inside queries; stddev is the population standard deviation\n";
  out += "# mean=" + io::format_double(r.mean) + " stddev=" + io::format_double(r.stddev) +
         " median=" + io::format_double(r.median) + " tp=" + std::to_string(r.true_positives) +
         " fp=" + std::to_string(r.false_positives) + " fn=" + std::to_string(r.false_negatives) +
         " precision=" + io::format_double(r.precision) + " recall=" + io::format_double(r.recall) + "\n";
  out += "query_id,error_m\n";
  for (std::size_t i = 0; i < r.ids.size(); ++i) out += r.ids[i] + "," + io::format_double(r.errors[i]) + "\n";
  return out;
}

std::string pr_curve_csv(const PrCurve& curve) {
  std::string out = "# optimal tau=" + io::format_double(curve.best.tau) +
                    " precision=" + io::format_double(curve.best.precision) +
                    " recall=" + io::format_double(curve.best.recall) + "\n";
  out += "tau,precision,recall\n";
  for (const auto& p : curve.points)
    out += io::format_double(p.tau) + "," + io::format_double(p.precision) + "," + io::format_double(p.recall) + "\n";
  return out;
}

}  // namespace xvl
