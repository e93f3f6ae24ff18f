#pragma once

#include <span>
#include <vector>

#include "sublaplace/common.hpp"

namespace sublaplace {

/// Ordered index set S over the D inference-eligible parameters. Every index
/// not in `selected` is held at its MAP value.
class SubnetworkMask {
 public:
  /// Sorts the indices; throws InvalidSize on duplicates, out-of-range
  /// indices or an empty selection.
  SubnetworkMask(std::vector<std::size_t> selected, std::size_t total);

  static SubnetworkMask full(std::size_t total);

  const std::vector<std::size_t>& selected() const { return selected_; }
  std::span<const std::size_t> indices() const { return selected_; }
  std::size_t size() const { return selected_.size(); }
  std::size_t total() const { return total_; }
  bool is_full() const { return selected_.size() == total_; }
  bool contains(std::size_t index) const;

  /// m_d in {0, 1} for d in [0, total).
  Vector indicator() const;

  bool operator==(const SubnetworkMask&) const = default;

 private:
  std::vector<std::size_t> selected_;
  std::size_t total_ = 0;
};

}  // namespace sublaplace
