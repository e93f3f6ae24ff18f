#include "sublaplace/mask.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace sublaplace {

SubnetworkMask::SubnetworkMask(std::vector<std::size_t> selected, std::size_t total)
    : selected_(std::move(selected)), total_(total) {
  std::sort(selected_.begin(), selected_.end());
  if (selected_.empty()) throw Error(ErrorCode::kInvalidSize, "mask must select >= 1 index");
  if (std::adjacent_find(selected_.begin(), selected_.end()) != selected_.end()) {
    throw Error(ErrorCode::kInvalidSize, "mask indices must be unique");
  }
  if (selected_.back() >= total_) {
    throw Error(ErrorCode::kInvalidSize, "mask index " + std::to_string(selected_.back()) +
                                             " out of range for D=" + std::to_string(total_));
  }
}

SubnetworkMask SubnetworkMask::full(std::size_t total) {
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return SubnetworkMask(std::move(all), total);
}

bool SubnetworkMask::contains(std::size_t index) const {
  return std::binary_search(selected_.begin(), selected_.end(), index);
}

Vector SubnetworkMask::indicator() const {
  Vector m = Vector::Zero(static_cast<Index>(total_));
  for (std::size_t i : selected_) m[static_cast<Index>(i)] = 1.0;
  return m;
}

}  // namespace sublaplace
