#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include "loopcycle/greens.hpp"
#include "loopcycle/loop_sampler.hpp"

namespace loopcycle {

struct GFFSample {
  BoxConfig box;
  std::uint64_t seed = 0;
  std::vector<double> phi;  // covariance g
  EdgeBits edge_open;       // empty until open_edges
  double kappa = 0.0;

  bool has_edges() const { return !edge_open.empty(); }
};

// Reusable sampler: sparse Cholesky factor of the precision I - P_killed.
class GffSampler {
 public:
  explicit GffSampler(const BoxConfig& box);
  ~GffSampler();
  GffSampler(GffSampler&&) noexcept;
  GffSampler& operator=(GffSampler&&) noexcept;

  const BoxConfig& box() const;
  GFFSample sample(std::uint64_t seed) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

GFFSample sample_gff(const GreenTable& g, std::uint64_t seed);

// Same-sign edges open with probability 1 - exp(-kappa phi_a phi_b).
GFFSample open_edges(GFFSample s, std::uint64_t seed, double kappa);

struct SignCluster {
  int sign = 1;
  std::vector<VertexId> vertices;
};

// Component label for every vertex (open edges only join same-sign vertices).
std::vector<std::uint32_t> sign_cluster_labels(const GFFSample& s);
// Components ordered by their smallest vertex id.
std::vector<SignCluster> sign_clusters(const GFFSample& s);
std::int64_t sign_cluster_count(const GFFSample& s);

void write_sign_clusters_ndjson(std::ostream& os, const Lattice& lat,
                                const std::vector<SignCluster>& clusters);
std::string field_header_json(const GFFSample& s);
void write_field_binary(std::ostream& os, const GFFSample& s);

}  // namespace loopcycle
