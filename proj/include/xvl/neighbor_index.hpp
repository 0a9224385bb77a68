#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace xvl {

struct NeighborHit {
  std::uint32_t id = 0;
  double distance = 0.0;

  friend bool operator==(const NeighborHit&, const NeighborHit&) = default;
};

struct SearchMode {
  enum class Kind { Exact, Approximate };

  Kind kind = Kind::Exact;
  /// Maximum number of leaves inspected in approximate mode.
  std::size_t check_budget = std::numeric_limits<std::size_t>::max();

  static SearchMode exact() { return {}; }
  static SearchMode approximate(std::size_t budget) { return {Kind::Approximate, budget}; }
  /// Default budget: 64 leaves per requested neighbor.
  static SearchMode approximate_default(std::size_t m) { return approximate(64 * m); }
};

/// k-d tree over float feature vectors (one per column), keyed by caller ids.
/// Splits at the median of the widest-spread dimension; leaves hold at most
/// kLeafSize points. Immutable after build; queries are thread-safe.
class NeighborIndex {
public:
  static constexpr std::size_t kLeafSize = 16;

  NeighborIndex() = default;

  /// Throws ValidationError on empty input, id/column count mismatch or
  /// duplicate ids.
  static NeighborIndex build(std::span<const std::uint32_t> ids, const Eigen::MatrixXf& points);

  int dimension() const { return static_cast<int>(points_.rows()); }
  std::size_t size() const { return ids_.size(); }
  std::span<const std::uint32_t> ids() const { return ids_; }
  const Eigen::MatrixXf& points() const { return points_; }

  /// The m nearest entries in ascending (distance, id) order.
  std::vector<NeighborHit> knn(const Eigen::Ref<const Eigen::VectorXf>& query, std::size_t m,
                               SearchMode mode = SearchMode::exact()) const;

private:
  struct Node {
    // Leaf when left < 0; then [begin, end) indexes order_.
    int left = -1;
    int right = -1;
    int split_dim = 0;
    float split_value = 0.0f;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  int build_node(std::uint32_t begin, std::uint32_t end);
  void check_query(const Eigen::Ref<const Eigen::VectorXf>& query, std::size_t m) const;

  std::vector<std::uint32_t> ids_;
  Eigen::MatrixXf points_;
  std::vector<std::uint32_t> order_;  // column indices, permuted by the tree
  std::vector<Node> nodes_;

  friend class KnnSearch;
};

/// Linear scan with the same ordering rules as NeighborIndex::knn.
std::vector<NeighborHit> brute_force_knn(std::span<const std::uint32_t> ids, const Eigen::MatrixXf& points,
                                         const Eigen::Ref<const Eigen::VectorXf>& query, std::size_t m);

}  // namespace xvl
