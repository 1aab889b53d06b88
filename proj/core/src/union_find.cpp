#include "loopcycle/union_find.hpp"

#include <limits>
#include <numeric>

#include "loopcycle/errors.hpp"

namespace loopcycle {

UnionFind::UnionFind(std::int64_t n) {
  if (n < 0 || n > static_cast<std::int64_t>(std::numeric_limits<std::uint32_t>::max())) {
    throw ResourceError("union-find size exceeds 32-bit labels: " + std::to_string(n));
  }
  parent_.resize(static_cast<std::size_t>(n));
  std::iota(parent_.begin(), parent_.end(), 0u);
  rank_.assign(static_cast<std::size_t>(n), 0);
  sets_ = n;
}

std::uint32_t UnionFind::find(std::uint32_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool UnionFind::unite(std::uint32_t a, std::uint32_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  --sets_;
  return true;
}

std::vector<std::uint32_t> UnionFind::labels() {
  std::vector<std::uint32_t> out(parent_.size());
  for (std::size_t k = 0; k < parent_.size(); ++k) out[k] = find(static_cast<std::uint32_t>(k));
  return out;
}

}  // namespace loopcycle
