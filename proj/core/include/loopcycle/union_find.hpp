#pragma once

#include <cstdint>
#include <vector>

namespace loopcycle {

// Disjoint sets over [0, n) with union by rank and path halving.
// 32-bit storage keeps d=7 boxes within a few hundred megabytes.
class UnionFind {
 public:
  explicit UnionFind(std::int64_t n = 0);

  std::int64_t size() const { return static_cast<std::int64_t>(parent_.size()); }
  std::uint32_t find(std::uint32_t x);
  // Returns true when two distinct sets were merged.
  bool unite(std::uint32_t a, std::uint32_t b);
  bool same(std::uint32_t a, std::uint32_t b) { return find(a) == find(b); }
  std::int64_t set_count() const { return sets_; }
  // Root label for every element (fully compressed).
  std::vector<std::uint32_t> labels();

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::int64_t sets_ = 0;
};

}  // namespace loopcycle
