#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "loopcycle/greens.hpp"
#include "loopcycle/lattice.hpp"

namespace loopcycle {

struct RWLoop {
  std::int64_t id = 0;
  VertexId root = 0;
  std::vector<std::uint8_t> steps;  // direction codes, closed
  std::vector<double> holding;      // one exponential time per visit (may be empty)
  int diameter = 0;                 // L∞

  int length() const { return static_cast<int>(steps.size()); }
  // Vertex at times 0..L-1.
  std::vector<VertexId> vertices(const Lattice& lat) const { return walk_vertices(lat, root, steps); }
  std::map<VertexId, int> visit_counts(const Lattice& lat) const;
};

enum class SampleMode { kFull, kLargeOnly };

// Edge bit set indexed by Lattice edge ids (lower endpoint * d + axis).
using EdgeBits = std::vector<bool>;

struct SoupSample {
  BoxConfig box;
  std::uint64_t seed = 0;
  SampleMode mode = SampleMode::kFull;
  double diam_cutoff = 0.0;
  double alpha = 0.5;
  int lmax = 0;
  double tail_bound = 0.0;
  std::string table_hash;
  std::vector<RWLoop> loops;
  // Time spent by the holding-time decoration of trivial (zero-step) loops;
  // empty in large-only mode.
  std::vector<double> stationary;
  std::vector<double> occupation;
  // Open bridge bits on edges not crossed by any loop; empty until attached.
  EdgeBits bridges;
  double kappa = 0.0;

  bool has_bridges() const { return !bridges.empty(); }
};

struct SamplerOptions {
  // Refuse tables whose certified tail mass exceeds this.
  double max_tail_bound = 1e-3;
};

SoupSample sample_soup(const LoopIntensityTable& table, std::uint64_t seed,
                       const SamplerOptions& opt = {});
// Poisson thinning of the soup to loops of L∞ diameter >= cutoff.
SoupSample sample_large_loops(const LoopIntensityTable& table, double diam_cutoff,
                              std::uint64_t seed, const SamplerOptions& opt = {});
SoupSample sample_large_loops(const BoxConfig& box, double diam_cutoff, std::uint64_t seed);

// Loops of the box soup that never leave `region`: the soup of the walk killed
// on exiting it, with lengths capped at lmax like the box tables. Used to
// resample the inside of a cluster while the rest of the soup stays fixed.
class RegionSoupSampler {
 public:
  RegionSoupSampler(const BoxConfig& box, std::vector<VertexId> region, int lmax, double alpha = 0.5);

  const std::vector<VertexId>& region() const { return region_; }
  int lmax() const { return lmax_; }
  double alpha() const { return alpha_; }
  double total_mass() const { return cum_.empty() ? 0.0 : cum_.back(); }
  // α P_x(S_L = x, no exit)/L.
  double lambda(VertexId x, int L) const;

  // Loops with unit-mean holding per visit and ids 0, 1, ...
  std::vector<RWLoop> sample_loops(Rng& rng) const;
  // Trivial-loop time at each region vertex, in region order.
  std::vector<double> sample_stationary(Rng& rng) const;

 private:
  int local(VertexId v) const;
  std::vector<std::uint8_t> sample_bridge(int root, int L, Rng& rng) const;

  Lattice lattice_;
  std::vector<VertexId> region_;       // sorted
  std::vector<std::int32_t> adj_;      // [k*2d + dir] local neighbour or -1
  int lmax_ = 2;
  double alpha_ = 0.5;
  std::vector<double> return_;         // [k*(lmax/2) + L/2-1]
  std::vector<double> cum_;            // cumulative λ over (k, L)
};

// Signed index of the loop's vertex cycle around the tube (exact integer route).
long long loop_index(const Lattice& lat, const RWLoop& loop, const Tube& t);
// Unoriented index.
long long loop_winding(const Lattice& lat, const RWLoop& loop, const Tube& t);

// Per-vertex stationary time plus the holding times of every loop visit.
std::vector<double> occupation_field(const SoupSample& s);
std::vector<double> occupation_field(const Lattice& lat, const std::vector<RWLoop>& loops,
                                     const std::vector<double>& stationary);

// Edges traversed by at least one loop.
EdgeBits crossed_edges(const Lattice& lat, const std::vector<RWLoop>& loops);

// Edge-bridging constant: an uncrossed edge {a,b} is open with probability
// 1 - exp(-kappa * sqrt(L_a L_b)).
inline double default_kappa(int d) { return 1.0 / d; }
void attach_bridges(SoupSample& s, double kappa);

// Open-edge draw shared with the GFF backend: returns true with probability 1 - exp(-t).
bool bernoulli_one_minus_exp(double t, double u);

void write_loops_ndjson(std::ostream& os, const Lattice& lat, const std::vector<RWLoop>& loops);
std::vector<RWLoop> read_loops_ndjson(std::istream& is, const Lattice& lat);

}  // namespace loopcycle
