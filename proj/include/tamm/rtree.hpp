#ifndef TAMM_RTREE_HPP
#define TAMM_RTREE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "tamm/geo.hpp"

namespace tamm {

/// Counters filled by a k-nearest query.
struct IndexQueryStats {
  std::size_t nodes_visited = 0;
  std::size_t exact_distance_evals = 0;
};

/// Static R-tree packed with the Sort-Tile-Recursive method. Leaves hold item
/// indices; the k-nearest search is best-first over box lower bounds with
/// exact distances supplied by the caller.
class PackedRTree {
 public:
  static constexpr std::size_t kFanout = 16;

  PackedRTree() = default;

  explicit PackedRTree(std::span<const BoundingBox> item_boxes) { build(item_boxes); }

  std::size_t size() const { return item_count_; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Returns up to k (item, distance) pairs sorted by ascending distance,
  /// ties broken by ascending item index. `exact(i)` must return the true
  /// distance from the query point to item i, and that distance must be no
  /// smaller than the point-to-box distance of item i.
  template <class ExactDistance>
  std::vector<std::pair<std::uint32_t, double>> nearest(const GeoPoint& p, std::size_t k,
                                                        ExactDistance&& exact,
                                                        IndexQueryStats* stats = nullptr) const {
    std::vector<std::pair<std::uint32_t, double>> out;
    if (nodes_.empty() || k == 0) return out;

    struct Entry {
      double key;
      bool is_item;
      std::uint32_t id;
    };
    // min-heap on (key, nodes before items, id)
    auto worse = [](const Entry& a, const Entry& b) {
      if (a.key != b.key) return a.key > b.key;
      if (a.is_item != b.is_item) return a.is_item && !b.is_item;
      return a.id > b.id;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
    heap.push({lower_bound(nodes_[root_].box, p), false, root_});

    while (!heap.empty() && out.size() < k) {
      const Entry e = heap.top();
      heap.pop();
      if (e.is_item) {
        out.emplace_back(e.id, e.key);
        continue;
      }
      const Node& n = nodes_[e.id];
      if (stats) ++stats->nodes_visited;
      for (std::uint32_t c : n.children) {
        if (n.leaf) {
          const double d = exact(c);
          if (stats) ++stats->exact_distance_evals;
          heap.push({d, true, c});
        } else {
          heap.push({lower_bound(nodes_[c].box, p), false, c});
        }
      }
    }
    return out;
  }

 private:
  struct Node {
    BoundingBox box;
    bool leaf = false;
    std::vector<std::uint32_t> children;
  };

  // Slightly shrunk box distance so rounding never lets a box key exceed the
  // exact distance of an item inside it.
  static double lower_bound(const BoundingBox& b, const GeoPoint& p) {
    const double d = b.min_distance(p);
    return d - (1e-9 + 1e-12 * d);
  }

  void build(std::span<const BoundingBox> item_boxes) {
    item_count_ = item_boxes.size();
    nodes_.clear();
    if (item_boxes.empty()) return;

    struct Slot {
      BoundingBox box;
      std::uint32_t ref;
    };
    std::vector<Slot> level;
    level.reserve(item_boxes.size());
    for (std::uint32_t i = 0; i < item_boxes.size(); ++i) level.push_back({item_boxes[i], i});

    bool leaf = true;
    while (true) {
      const std::size_t n = level.size();
      const std::size_t pages = (n + kFanout - 1) / kFanout;
      const auto slices = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(pages))));
      const std::size_t per_slice = slices * kFanout;

      auto by_x = [](const Slot& a, const Slot& b) {
        if (a.box.center_x() != b.box.center_x()) return a.box.center_x() < b.box.center_x();
        return a.ref < b.ref;
      };
      auto by_y = [](const Slot& a, const Slot& b) {
        if (a.box.center_y() != b.box.center_y()) return a.box.center_y() < b.box.center_y();
        return a.ref < b.ref;
      };
      std::sort(level.begin(), level.end(), by_x);
      std::vector<Slot> next;
      for (std::size_t s = 0; s < n; s += per_slice) {
        const auto slice_end = level.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + per_slice));
        std::sort(level.begin() + static_cast<std::ptrdiff_t>(s), slice_end, by_y);
        for (auto it = level.begin() + static_cast<std::ptrdiff_t>(s); it < slice_end;) {
          Node node;
          node.leaf = leaf;
          for (std::size_t c = 0; c < kFanout && it < slice_end; ++c, ++it) {
            node.box.expand(it->box);
            node.children.push_back(it->ref);
          }
          next.push_back({node.box, static_cast<std::uint32_t>(nodes_.size())});
          nodes_.push_back(std::move(node));
        }
      }
      leaf = false;
      if (next.size() == 1) {
        root_ = next.front().ref;
        break;
      }
      level = std::move(next);
    }
  }

  std::vector<Node> nodes_;
  std::uint32_t root_ = 0;
  std::size_t item_count_ = 0;
};

}  // namespace tamm

#endif  // TAMM_RTREE_HPP
