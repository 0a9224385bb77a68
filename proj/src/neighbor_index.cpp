#include "xvl/neighbor_index.hpp"

#include "xvl/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <unordered_set>

namespace xvl {

namespace {

double squared_distance(const Eigen::Ref<const Eigen::VectorXf>& a, const float* b, Eigen::Index dim) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double d = static_cast<double>(a(i)) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

struct Candidate {
  double sq;
  std::uint32_t id;

  bool operator<(const Candidate& o) const { return sq < o.sq || (sq == o.sq && id < o.id); }
};

// Bounded max-heap of the best m candidates.
class BestSet {
public:
  explicit BestSet(std::size_t m) : m_(m) { heap_.reserve(m + 1); }

  bool full() const { return heap_.size() == m_; }
  double worst() const { return heap_.front().sq; }

  void offer(const Candidate& c) {
    if (!full()) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (c < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  // A subtree whose lower bound ties the current worst may still hold a
  // lower-id tie, so only strictly larger bounds are pruned.
  bool can_prune(double lower_bound) const { return full() && lower_bound > worst(); }

  std::vector<NeighborHit> sorted() {
    std::sort(heap_.begin(), heap_.end());
    std::vector<NeighborHit> out;
    out.reserve(heap_.size());
    for (const auto& c : heap_) out.push_back({c.id, std::sqrt(c.sq)});
    return out;
  }

private:
  std::size_t m_;
  std::vector<Candidate> heap_;
};

}  // namespace

class KnnSearch {
public:
  KnnSearch(const NeighborIndex& index, const Eigen::Ref<const Eigen::VectorXf>& query, std::size_t m)
      : index_(index), query_(query), best_(m) {}

  void scan_leaf(const NeighborIndex::Node& node) {
    const auto dim = index_.points_.rows();
    for (auto i = node.begin; i < node.end; ++i) {
      const auto col = index_.order_[i];
      best_.offer({squared_distance(query_, index_.points_.col(col).data(), dim), index_.ids_[col]});
    }
  }

  void exact(int node_id) {
    const auto& node = index_.nodes_[node_id];
    if (node.left < 0) {
      scan_leaf(node);
      return;
    }
    const double diff = static_cast<double>(query_(node.split_dim)) - static_cast<double>(node.split_value);
    const int near = diff <= 0.0 ? node.left : node.right;
    const int far = diff <= 0.0 ? node.right : node.left;
    exact(near);
    if (!best_.can_prune(diff * diff)) exact(far);
  }

  // Best-bin-first: always expand the pending branch with the smallest lower
  // bound, stopping after `budget` leaves.
  void approximate(std::size_t budget) {
    using Branch = std::pair<double, int>;
    std::priority_queue<Branch, std::vector<Branch>, std::greater<>> pending;
    pending.push({0.0, 0});
    std::size_t leaves = 0;
    while (!pending.empty() && leaves < budget) {
      auto [bound, node_id] = pending.top();
      pending.pop();
      if (best_.can_prune(bound)) break;
      while (index_.nodes_[node_id].left >= 0) {
        const auto& node = index_.nodes_[node_id];
        const double diff = static_cast<double>(query_(node.split_dim)) - static_cast<double>(node.split_value);
        const int near = diff <= 0.0 ? node.left : node.right;
        const int far = diff <= 0.0 ? node.right : node.left;
        pending.push({std::max(bound, diff * diff), far});
        node_id = near;
      }
      scan_leaf(index_.nodes_[node_id]);
      ++leaves;
    }
  }

  std::vector<NeighborHit> result() { return best_.sorted(); }

private:
  const NeighborIndex& index_;
  const Eigen::Ref<const Eigen::VectorXf>& query_;
  BestSet best_;
};

NeighborIndex NeighborIndex::build(std::span<const std::uint32_t> ids, const Eigen::MatrixXf& points) {
  if (ids.empty() || points.cols() == 0) throw ValidationError("build_index: empty input");
  if (static_cast<Eigen::Index>(ids.size()) != points.cols())
    throw ValidationError("build_index: " + std::to_string(ids.size()) + " ids for " +
                          std::to_string(points.cols()) + " vectors");
  if (points.rows() == 0) throw ValidationError("build_index: zero-dimensional vectors");
  if (!points.allFinite()) throw ValidationError("build_index: non-finite feature values");
  std::unordered_set<std::uint32_t> seen;
  for (auto id : ids)
    if (!seen.insert(id).second) throw ValidationError("build_index: duplicate id " + std::to_string(id));

  NeighborIndex index;
  index.ids_.assign(ids.begin(), ids.end());
  index.points_ = points;
  index.order_.resize(ids.size());
  for (std::uint32_t i = 0; i < index.order_.size(); ++i) index.order_[i] = i;
  index.nodes_.reserve(2 * ids.size() / kLeafSize + 1);
  index.build_node(0, static_cast<std::uint32_t>(ids.size()));
  return index;
}

int NeighborIndex::build_node(std::uint32_t begin, std::uint32_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({-1, -1, 0, 0.0f, begin, end});
  if (end - begin <= kLeafSize) return id;

  int best_dim = 0;
  float best_spread = -1.0f;
  for (Eigen::Index d = 0; d < points_.rows(); ++d) {
    float lo = points_(d, order_[begin]);
    float hi = lo;
    for (auto i = begin + 1; i < end; ++i) {
      const float v = points_(d, order_[i]);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = static_cast<int>(d);
    }
  }

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const float va = points_(best_dim, a);
                     const float vb = points_(best_dim, b);
                     return va < vb || (va == vb && ids_[a] < ids_[b]);
                   });
  const float split = points_(best_dim, order_[mid]);
  const int left = build_node(begin, mid);
  const int right = build_node(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].split_dim = best_dim;
  nodes_[id].split_value = split;
  return id;
}

void NeighborIndex::check_query(const Eigen::Ref<const Eigen::VectorXf>& query, std::size_t m) const {
  if (query.size() != points_.rows())
    throw ValidationError("knn: query dimension " + std::to_string(query.size()) + " != index dimension " +
                          std::to_string(points_.rows()));
  if (m < 1 || m > size())
    throw ValidationError("knn: M=" + std::to_string(m) + " outside [1, " + std::to_string(size()) + "]");
}

std::vector<NeighborHit> NeighborIndex::knn(const Eigen::Ref<const Eigen::VectorXf>& query, std::size_t m,
                                            SearchMode mode) const {
  check_query(query, m);
  KnnSearch search(*this, query, m);
  if (mode.kind == SearchMode::Kind::Exact)
    search.exact(0);
  else
    search.approximate(std::max<std::size_t>(mode.check_budget, 1));
  return search.result();
}

std::vector<NeighborHit> brute_force_knn(std::span<const std::uint32_t> ids, const Eigen::MatrixXf& points,
                                         const Eigen::Ref<const Eigen::VectorXf>& query, std::size_t m) {
  if (ids.empty() || static_cast<Eigen::Index>(ids.size()) != points.cols())
    throw ValidationError("brute_force_knn: ids and vectors disagree or are empty");
  if (query.size() != points.rows()) throw ValidationError("brute_force_knn: query dimension mismatch");
  if (m < 1 || m > ids.size()) throw ValidationError("brute_force_knn: M out of range");
  std::vector<std::pair<double, std::uint32_t>> all;
  all.reserve(ids.size());
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const double d = static_cast<double>(query(i)) - static_cast<double>(points(i, c));
      s += d * d;
    }
    all.emplace_back(s, ids[static_cast<std::size_t>(c)]);
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end());
  std::vector<NeighborHit> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back({all[i].second, std::sqrt(all[i].first)});
  return out;
}

}  // namespace xvl
