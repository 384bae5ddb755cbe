#include "atos/grouping.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace atos {

namespace {

// Offsets 0, s, 2s, ... that fit in [0, extent), plus one flush with the end
// if the regular offsets leave the tail uncovered.
std::vector<std::size_t> sliding_offsets(std::size_t extent, std::size_t window,
                                         std::size_t stride) {
  std::vector<std::size_t> offsets;
  for (std::size_t off = 0; off + window <= extent; off += stride) offsets.push_back(off);
  if (offsets.back() + window < extent) offsets.push_back(extent - window);
  return offsets;
}

}  // namespace

GroupIndex GroupIndex::from_groups(std::vector<std::vector<std::size_t>> groups,
                                   std::size_t n_elements, GroupLayout layout,
                                   std::size_t group_size, std::size_t stride,
                                   std::size_t window, Shape shape) {
  GroupIndex idx;
  idx.members_ = std::move(groups);
  idx.element_groups_.assign(n_elements, {});
  for (std::size_t b = 0; b < idx.members_.size(); ++b) {
    auto& m = idx.members_[b];
    std::sort(m.begin(), m.end());
    for (std::size_t j : m) {
      if (j >= n_elements) throw std::invalid_argument("group member out of range");
      idx.element_groups_[j].push_back(b);
    }
  }
  for (const auto& bj : idx.element_groups_) {
    idx.max_groups_per_element_ = std::max(idx.max_groups_per_element_, bj.size());
  }

  // Neighbor count per element via a stamp array, O(sum_j sum_{b in B_j} |b|).
  std::vector<std::size_t> stamp(n_elements, static_cast<std::size_t>(-1));
  for (std::size_t j = 0; j < n_elements; ++j) {
    std::size_t count = 0;
    for (std::size_t b : idx.element_groups_[j]) {
      for (std::size_t k : idx.members_[b]) {
        if (stamp[k] != j) {
          stamp[k] = j;
          ++count;
        }
      }
    }
    idx.max_neighbors_ = std::max(idx.max_neighbors_, count);
  }

  if (idx.max_groups_per_element_ <= 1) {
    layout = group_size == 1 ? GroupLayout::Singleton : GroupLayout::Disjoint;
  }
  idx.layout_ = layout;
  idx.group_size_ = group_size;
  idx.stride_ = stride;
  idx.window_ = layout == GroupLayout::Window ? window : 0;
  idx.shape_ = shape;
  return idx;
}

std::size_t GroupIndex::count_linked_groups() const {
  std::size_t linked = 0;
  for (const auto& m : members_) {
    const bool shares = std::any_of(m.begin(), m.end(), [&](std::size_t j) {
      return element_groups_[j].size() > 1;
    });
    if (shares) ++linked;
  }
  return linked;
}

GroupIndex build_index(const GroupingRule& rule, const Shape& shape) {
  if (shape.size() == 0) throw std::invalid_argument("cannot group an empty shape");
  const std::size_t n = shape.size();
  std::vector<std::vector<std::size_t>> groups;

  switch (rule.mode) {
    case GroupingMode::ElementWise: {
      groups.reserve(n);
      for (std::size_t j = 0; j < n; ++j) groups.push_back({j});
      return GroupIndex::from_groups(std::move(groups), n, GroupLayout::Singleton, 1, 1, 0,
                                     shape);
    }
    case GroupingMode::PixelWise: {
      groups.reserve(shape.pixels());
      for (std::size_t row = 0; row < shape.height; ++row) {
        for (std::size_t col = 0; col < shape.width; ++col) {
          std::vector<std::size_t> g;
          for (std::size_t ch = 0; ch < shape.channels; ++ch) g.push_back(shape.index(ch, row, col));
          groups.push_back(std::move(g));
        }
      }
      return GroupIndex::from_groups(std::move(groups), n, GroupLayout::Disjoint,
                                     shape.channels, shape.channels, 0, shape);
    }
    case GroupingMode::GroupWise: {
      const std::size_t win = rule.window_n;
      const std::size_t s = rule.stride_s;
      if (s == 0 || win == 0) throw std::invalid_argument("window and stride must be positive");
      if (s > win) {
        throw std::invalid_argument("stride " + std::to_string(s) + " exceeds window " +
                                    std::to_string(win) + ": elements would be left ungrouped");
      }
      if (win > std::min(shape.width, shape.height)) {
        throw std::invalid_argument("window " + std::to_string(win) + " larger than image " +
                                    to_string(shape));
      }
      const auto rows = sliding_offsets(shape.height, win, s);
      const auto cols = sliding_offsets(shape.width, win, s);
      groups.reserve(rows.size() * cols.size());
      for (std::size_t r0 : rows) {
        for (std::size_t c0 : cols) {
          std::vector<std::size_t> g;
          g.reserve(shape.channels * win * win);
          for (std::size_t ch = 0; ch < shape.channels; ++ch) {
            for (std::size_t r = r0; r < r0 + win; ++r) {
              for (std::size_t c = c0; c < c0 + win; ++c) g.push_back(shape.index(ch, r, c));
            }
          }
          groups.push_back(std::move(g));
        }
      }
      return GroupIndex::from_groups(std::move(groups), n, GroupLayout::Window,
                                     shape.channels * win * win, s, win, shape);
    }
  }
  throw std::invalid_argument("unknown grouping mode");
}

GroupIndex build_linear_index(std::size_t n_elements, std::size_t group_size,
                              std::size_t stride) {
  if (n_elements == 0 || group_size == 0 || stride == 0) {
    throw std::invalid_argument("linear grouping needs positive sizes");
  }
  if (stride > group_size) throw std::invalid_argument("stride exceeds group size");
  if (group_size > n_elements) throw std::invalid_argument("group larger than vector");
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t off : sliding_offsets(n_elements, group_size, stride)) {
    std::vector<std::size_t> g(group_size);
    for (std::size_t i = 0; i < group_size; ++i) g[i] = off + i;
    groups.push_back(std::move(g));
  }
  return GroupIndex::from_groups(std::move(groups), n_elements, GroupLayout::Linear, group_size,
                                 stride, 0, Shape{1, n_elements, 1});
}

GroupedView::GroupedView(std::span<const double> values, const GroupIndex& index)
    : values_(values), index_(&index) {
  if (values.size() != index.n_elements()) {
    throw std::invalid_argument("grouped view: " + std::to_string(values.size()) +
                                " values for an index over " +
                                std::to_string(index.n_elements()) + " elements");
  }
}

std::vector<double> GroupedView::group(std::size_t b) const {
  std::vector<double> out;
  for (std::size_t j : index_->members(b)) out.push_back(values_[j]);
  return out;
}

double GroupedView::group_energy(std::size_t b) const {
  double e = 0.0;
  for (std::size_t j : index_->members(b)) e += values_[j] * values_[j];
  return e;
}

GroupedView categorize(const Tensor& delta, const GroupIndex& index) {
  return GroupedView(delta.values(), index);
}

}  // namespace atos
