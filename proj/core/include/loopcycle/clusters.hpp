#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "loopcycle/lattice.hpp"
#include "loopcycle/loop_sampler.hpp"

namespace loopcycle {

enum class ClusterTag { kUnclassified, kType1, kType2, kNeither };
std::string to_string(ClusterTag tag);

struct WindingCertificate {
  int tube_id = -1;  // index into the tube family, -1 for an ad hoc tube
  Tube tube;
  double clearance_min = 0.0;
  // Distinct nonzero lift discrepancies seen in the certified component; their gcd is `index`.
  std::vector<long long> offsets;
  long long index = 0;
  long long sigma = 0;  // Σ over member loops of their unoriented index
  // Closed vertex walk (front == back) of index exactly `index`; empty when index == 0.
  std::vector<VertexId> witness;
  // A simple cycle of nonzero index carved out of the witness.
  std::vector<VertexId> simple_witness;
  double clearance = 0.0;  // min edge clearance along the witness
  bool winds() const { return index > 0; }
};

struct ClusterRecord {
  std::int64_t id = 0;
  std::vector<std::int64_t> loops;  // indices into SoupSample::loops
  std::vector<VertexId> vertices;   // sorted
  std::vector<EdgeId> edges;        // open edges (crossed or bridged), sorted
  int diameter = 0;
  std::vector<int> lo, hi;  // coordinate bounding box
  std::vector<WindingCertificate> certificates;
  ClusterTag tag = ClusterTag::kUnclassified;

  const WindingCertificate* certificate_for(int tube_id) const;
};

struct ClusterOptions {
  bool use_bridges = true;  // ignored when the sample carries no bridge bits
  int min_diameter = 0;     // clusters below this L∞ diameter are not materialized
};

// Clusters of the soup: loops sharing a vertex merge, and so do the endpoints
// of open bridge edges. Sorted by decreasing diameter, ties by least vertex.
std::vector<ClusterRecord> build_clusters(const SoupSample& s, const ClusterOptions& opt = {});

// Component label of every vertex; vertices touched by nothing are singletons.
std::vector<std::uint32_t> cluster_labels(const SoupSample& s, bool use_bridges = true);
// Number of components over all vertices, singletons included.
std::int64_t cluster_count(const SoupSample& s, bool use_bridges = true);

// Sorted distinct edges traversed by a loop.
std::vector<EdgeId> loop_edges(const Lattice& lat, const RWLoop& loop);

// Cycle structure of an edge set, pruned to its 2-core. Certificates are
// computed on the subgraph of edges whose whole segment keeps the clearance.
class CycleGraph {
 public:
  CycleGraph(const Lattice& lat, std::vector<EdgeId> edges);

  bool acyclic() const { return vertices_.empty(); }
  const std::vector<int>& lo() const { return lo_; }
  const std::vector<int>& hi() const { return hi_; }
  // Necessary condition for a winding cycle at the clearance: the 2-core box
  // straddles the anchor by at least the clearance on both tube axes.
  bool may_wind(const Tube& t, double clearance_min) const;
  WindingCertificate certify(const Tube& t, double clearance_min, bool want_witness = true) const;

 private:
  const Lattice* lat_;
  std::vector<VertexId> vertices_;  // sorted 2-core vertices
  std::vector<std::int64_t> offset_;
  std::vector<std::int32_t> adj_;  // neighbour local index
  std::vector<std::uint8_t> dir_;  // direction code of the step
  std::vector<int> lo_, hi_;
};

// Certificate of cluster c around t. sigma is computed from the member loops.
WindingCertificate winding_bfs(const SoupSample& s, const ClusterRecord& c, const Tube& t,
                               double clearance_min);

struct DetectOptions {
  bool all_certificates = false;  // otherwise stop at the first winding tube per cluster
};

// Clusters that wind around some family tube at clearance eps*N/2 and have
// diameter >= 2 eps N. Certificates are attached; returns positions in `clusters`.
std::vector<std::size_t> detect_C_eps(const SoupSample& s, std::vector<ClusterRecord>& clusters,
                                      const TubeFamily& family, const DetectOptions& opt = {});

struct BLoop {
  std::int64_t loop = 0;
  WindingCertificate certificate;
};
// Loops whose own trace winds around a family tube at clearance eps*N.
std::vector<BLoop> detect_B_eps(const SoupSample& s, const TubeFamily& family);

struct ChainLink {
  enum class Kind { kLoop, kBridge };
  Kind kind = Kind::kLoop;
  std::int64_t id = 0;  // loop index or bridge edge id
  int diameter = 1;
};

struct MinimalChain {
  std::vector<ChainLink> links;  // in order along the witness cycle
  int max_loop_diameter = 0;
  bool simple_ring = false;  // each link meets exactly its two ring neighbours
  WindingCertificate certificate;
};

// Inclusion-minimal set of member loops and bridges whose union still winds
// around t at the clearance. Larger pieces are dropped first.
std::optional<MinimalChain> minimal_chain(const SoupSample& s, const ClusterRecord& c, const Tube& t,
                                          double clearance_min);

void write_clusters_ndjson(std::ostream& os, const Lattice& lat, const std::vector<ClusterRecord>& clusters);

}  // namespace loopcycle
