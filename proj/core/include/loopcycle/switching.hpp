#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loopcycle/clusters.hpp"
#include "loopcycle/lattice.hpp"
#include "loopcycle/loop_sampler.hpp"
#include "loopcycle/stats.hpp"

namespace loopcycle {

struct SwitchRecord {
  std::int64_t replica = 0;
  std::int64_t cluster = 0;
  std::int64_t size = 0;  // cluster vertex count
  long long index = 0;    // i > 0
  long long sigma = 0;
  int parity = 0;  // (sigma / index) mod 2
};

struct DecileStat {
  std::int64_t min_size = 0;
  std::int64_t max_size = 0;
  std::int64_t even = 0;
  std::int64_t n = 0;
  Interval ci;
};

struct SwitchStat {
  int tube_id = -1;
  Tube tube;
  double clearance_min = 0.0;
  std::vector<SwitchRecord> records;
  std::int64_t even = 0;
  std::int64_t odd = 0;
  std::int64_t replicas = 0;

  std::int64_t n() const { return even + odd; }
  double even_frequency() const { return n() ? static_cast<double>(even) / static_cast<double>(n()) : 0.0; }
  Interval wilson(double confidence = 0.95) const { return wilson_interval(even, n(), confidence); }
  // Even frequency within cluster-size deciles (fewer groups when sizes tie).
  std::vector<DecileStat> by_size_decile(double confidence = 0.95) const;
  // Chi-square homogeneity of the even frequency across the size deciles.
  TestResult decile_homogeneity() const;
  std::string to_json() const;
};

struct SwitchOptions {
  double kappa = -1.0;  // bridge constant, negative means default_kappa(d)
  int threads = 1;
};

// Over independent critical soups (with bridges) on the box, every cluster with
// certified index i > 0 around the tube at clearance eps*N/2 contributes the
// parity of Σ/i. Replica r uses replica_seed(seed, r).
SwitchStat switching_experiment(const BoxConfig& box, const Tube& tube, double eps, std::int64_t replicas,
                                std::uint64_t seed, const SwitchOptions& opt = {});

// Flips the crossing parity of every edge carried an odd number of times by
// the certificate's witness walk for tube t. On such an edge one crossing is
// removed (the one of the least loop index and time) when there is one, and
// one is added otherwise; free strand ends at each vertex are then re-paired in
// strand-id order and the affected loops are retraced. Edges losing their last
// crossing keep an open bridge bit and edges gaining a first crossing drop it,
// so the open-edge set and the cluster are unchanged. Visit holding times are
// summed into the new visits; a visit made only of new strands takes half of the
// vertex's stationary time. Σ/i changes parity.
// Throws PreconditionError when c has no winding certificate for t.
SoupSample parity_switch(const ClusterRecord& c, const SoupSample& s, const Tube& t);

// Crossing count of every edge slot.
std::vector<std::int32_t> edge_crossings(const Lattice& lat, const std::vector<RWLoop>& loops);

}  // namespace loopcycle
