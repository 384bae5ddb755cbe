#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "atos/tensor.hpp"

namespace atos {

enum class GroupingMode { ElementWise, PixelWise, GroupWise };

/// Categorizing rule. window_n and stride_s are used by GroupWise only.
struct GroupingRule {
  GroupingMode mode = GroupingMode::ElementWise;
  std::size_t window_n = 1;
  std::size_t stride_s = 1;

  static GroupingRule element_wise() { return {GroupingMode::ElementWise, 1, 1}; }
  static GroupingRule pixel_wise() { return {GroupingMode::PixelWise, 1, 1}; }
  static GroupingRule group_wise(std::size_t n, std::size_t s) {
    return {GroupingMode::GroupWise, n, s};
  }
};

/// How the groups were laid out; the smoothness bounds depend on it.
enum class GroupLayout {
  Singleton,  // one element per group
  Disjoint,   // equal-size groups, no overlap
  Linear,     // 1-D sliding groups of n_v elements with stride s
  Window,     // 2-D n x n windows of full channel depth with stride s
};

/// Group membership tables for one shape and rule. Immutable once built.
class GroupIndex {
 public:
  std::size_t n_elements() const { return element_groups_.size(); }
  std::size_t n_groups() const { return members_.size(); }

  /// Members of group b, ascending element index.
  std::span<const std::size_t> members(std::size_t b) const { return members_[b]; }
  /// B_j: the groups that contain element j, ascending.
  std::span<const std::size_t> groups_of(std::size_t j) const { return element_groups_[j]; }

  /// Elements per group (n_v for Linear/Disjoint, c*n*n for Window).
  std::size_t group_size() const { return group_size_; }
  std::size_t stride() const { return stride_; }
  /// Side of the window for Window layout, 0 otherwise.
  std::size_t window() const { return window_; }
  GroupLayout layout() const { return layout_; }
  /// Image shape for image groupings; {1, N, 1} for linear groupings.
  const Shape& shape() const { return shape_; }

  /// n_{B_m}: max over elements of |B_j|.
  std::size_t max_groups_per_element() const { return max_groups_per_element_; }
  /// n_n: max over elements j of the number of elements (j included) that
  /// share at least one group with j.
  std::size_t max_neighbors() const { return max_neighbors_; }

  /// Number of groups that share at least one element with another group.
  std::size_t count_linked_groups() const;

  static GroupIndex from_groups(std::vector<std::vector<std::size_t>> groups,
                                std::size_t n_elements, GroupLayout layout,
                                std::size_t group_size, std::size_t stride, std::size_t window,
                                Shape shape);

 private:
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::vector<std::size_t>> element_groups_;
  std::size_t group_size_ = 0;
  std::size_t stride_ = 0;
  std::size_t window_ = 0;
  GroupLayout layout_ = GroupLayout::Singleton;
  Shape shape_;
  std::size_t max_groups_per_element_ = 0;
  std::size_t max_neighbors_ = 0;
};

/// Builds the group index for an image shape.
///
/// GroupWise windows sit at offsets 0, s, 2s, ... along each spatial axis;
/// when the last regular offset leaves a strip uncovered an extra window is
/// placed flush with the far edge. Each window spans all channels.
/// Throws std::invalid_argument for s > n, s == 0 or n > min(w, h).
GroupIndex build_index(const GroupingRule& rule, const Shape& shape);

/// Sliding 1-D grouping of a length-N vector: groups of n_v consecutive
/// elements at offsets 0, s, 2s, ..., with a final group flush with the end
/// when needed for coverage. s == n_v gives disjoint groups, n_v == 1 gives
/// singletons.
GroupIndex build_linear_index(std::size_t n_elements, std::size_t group_size,
                              std::size_t stride);

/// Read-only grouped access to a flat value vector (the categorizing
/// operator). Holds references; the index and values must outlive it.
class GroupedView {
 public:
  GroupedView(std::span<const double> values, const GroupIndex& index);

  std::size_t n_groups() const { return index_->n_groups(); }
  std::size_t n_elements() const { return values_.size(); }
  const GroupIndex& index() const { return *index_; }
  std::span<const double> values() const { return values_; }

  /// Member values of group b, in member order.
  std::vector<double> group(std::size_t b) const;
  /// Sum of squared member values of group b.
  double group_energy(std::size_t b) const;

 private:
  std::span<const double> values_;
  const GroupIndex* index_;
};

GroupedView categorize(const Tensor& delta, const GroupIndex& index);

}  // namespace atos
