#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "loopcycle/lattice.hpp"
#include "loopcycle/rng.hpp"

namespace loopcycle {

struct CgOptions {
  double tolerance = 1e-10;
  int max_iterations = 200000;
};

// One column of g = (I - P_killed)^{-1}: expected visits to `source`.
struct GreenColumn {
  VertexId source = 0;
  std::vector<double> values;
  double relative_residual = 0.0;
  int iterations = 0;
};

// y <- (I - P_killed) x, matrix-free.
void apply_killed_laplacian(const Lattice& lat, const std::vector<double>& x, std::vector<double>& y);

GreenColumn green_column(const Lattice& lat, VertexId source, const CgOptions& opt = {});
GreenColumn green_column(const BoxConfig& box, const Point& y, const CgOptions& opt = {});

// Lazily solved Green's function; columns are cached and shared.
class GreenTable {
 public:
  explicit GreenTable(BoxConfig box, CgOptions opt = {});

  const BoxConfig& box() const { return lattice_.box(); }
  const Lattice& lattice() const { return lattice_; }
  double operator()(VertexId x, VertexId y) const;
  double value(const Point& x, const Point& y) const;
  std::shared_ptr<const GreenColumn> column(VertexId y) const;

 private:
  Lattice lattice_;
  CgOptions opt_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<VertexId, std::shared_ptr<const GreenColumn>> cache_;
};

double two_point_arcsine(const GreenTable& g, const Point& x, const Point& y);
double two_point_arcsine(const GreenTable& g, VertexId x, VertexId y);

// CSV rows: x_0,...,x_{d-1},value
void write_green_column_csv(std::ostream& os, const Lattice& lat, const GreenColumn& col);

struct IntensityOptions {
  double alpha = 0.5;
  std::size_t memory_budget_bytes = std::size_t{3} << 30;
};

// Largest eigenvalue of P_killed on Λ_N.
double spectral_radius(const BoxConfig& box);
// Certified upper bound on Σ_x Σ_{L > lmax} λ(x,L).
double tail_mass_bound(const BoxConfig& box, int lmax, double alpha = 0.5);
// Smallest even lmax >= 2 whose tail bound is below `tail_target`.
int suggested_lmax(const BoxConfig& box, double tail_target = 1e-6, double alpha = 0.5);

// λ(x,L) = α p_L(x,x)/L for the killed walk, L even in [2, lmax].
//
// The killed return probability factorizes over coordinates: each step picks
// one coordinate uniformly, and that coordinate performs a killed 1D walk on
// [-N,N]. Roots with the same multiset of |x_i| share a table, which keeps
// d=7 boxes tractable. The same tables drive exact bridge sampling.
class LoopIntensityTable {
 public:
  const BoxConfig& box() const { return lattice_.box(); }
  const Lattice& lattice() const { return lattice_; }
  double alpha() const { return alpha_; }
  int lmax() const { return lmax_; }
  double tail_bound() const { return tail_bound_; }
  const std::string& hash() const { return hash_; }

  double return_probability(VertexId x, int L) const;
  double lambda(VertexId x, int L) const;
  double lambda(const Point& x, int L) const;
  double total_mass() const { return total_mass_; }
  // Σ_x λ(x,L)
  double mass_at_length(int L) const;
  // Σ_x Σ_{L >= lmin} λ(x,L)
  double mass_from_length(int lmin) const;

  int class_count() const { return static_cast<int>(classes_.size()); }
  int class_of(VertexId x) const;
  const std::vector<int>& class_tuple(int c) const { return classes_[c].tuple; }
  std::int64_t class_size(int c) const { return classes_[c].size; }
  // Σ_L λ over one representative root of the class, restricted to L >= lmin.
  double class_root_mass(int c, int lmin = 2) const;

  // Uniform root within a class.
  VertexId sample_root(int c, Rng& rng) const;
  // L >= lmin with probability proportional to λ(root of class c, L).
  int sample_length(int c, int lmin, Rng& rng) const;
  // Exact uniform sample among L-step killed bridges from x to x.
  std::vector<std::uint8_t> sample_bridge(VertexId x, int L, Rng& rng) const;

  // One-dimensional killed walk started at a in [0,N]: P_a(S_r = y, alive).
  double walk_1d(int a, int r, int y) const;

  // Binary export: header JSON plus float64 little-endian class-major data.
  std::string header_json() const;
  void write_binary(std::ostream& os) const;

 private:
  friend LoopIntensityTable loop_intensity(const BoxConfig& box, int lmax, const IntensityOptions& opt);
  explicit LoopIntensityTable(BoxConfig box) : lattice_(box) {}

  struct RootClass {
    std::vector<int> tuple;          // sorted |x_i|
    std::int64_t size = 0;           // number of roots
    std::vector<int> suffix;         // suffix table index for positions 0..d-1
    std::vector<double> cum_lambda;  // cumulative λ over even L (index L/2)
  };

  double binom_weight(int m, int L, int l) const;
  std::int64_t key_of(const std::vector<int>& sorted_tuple) const;
  const std::vector<double>& suffix_table(int c, int pos) const { return suffix_tables_[classes_[c].suffix[pos]]; }

  Lattice lattice_;
  double alpha_ = 0.5;
  int lmax_ = 2;
  int half_ = 1;  // lmax/2
  double tail_bound_ = 0.0;
  double total_mass_ = 0.0;
  std::string hash_;
  std::vector<RootClass> classes_;
  std::unordered_map<std::int64_t, int> class_index_;
  std::vector<std::vector<double>> suffix_tables_;  // S over even L
  std::vector<std::vector<double>> walk1d_;         // [a][r*(2N+1) + y+N]
  std::vector<std::vector<double>> binom_;          // [m][tri(L/2) + l/2]
  std::vector<double> mass_by_length_;              // Σ_x λ(x, 2k)
};

LoopIntensityTable loop_intensity(const BoxConfig& box, int lmax, const IntensityOptions& opt = {});

struct MassEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::int64_t samples = 0;
};

// Monte Carlo estimate of the soup intensity of loops with L∞ diameter >= cutoff.
MassEstimate mass_large_loops(const LoopIntensityTable& table, double diam_cutoff,
                              std::int64_t samples, std::uint64_t seed);

}  // namespace loopcycle
