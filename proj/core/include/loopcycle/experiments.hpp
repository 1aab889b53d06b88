#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loopcycle/clusters.hpp"
#include "loopcycle/gff.hpp"
#include "loopcycle/greens.hpp"
#include "loopcycle/lattice.hpp"
#include "loopcycle/loop_sampler.hpp"
#include "loopcycle/stats.hpp"

namespace loopcycle {

// Header line carried by every experiment report.
extern const char* const kDeskScaleDisclaimer;

// ---------------------------------------------------------------- classification

struct ClassifyConfig {
  double eps = 0.5;
  double beta = 0.9;
  double gamma0 = 0.6;
  // Small-loop threshold is small_fraction * eps * N.
  double small_fraction = 0.1;
};

struct ClassifiedCluster {
  std::size_t position = 0;  // index into the cluster list
  std::int64_t cluster = 0;  // ClusterRecord::id
  ClusterTag tag = ClusterTag::kUnclassified;
  int b_members = 0;
  int max_member_diameter = 0;
  int chain_max_diameter = -1;  // -1 when no chain was computed
  bool small_loops_only = false;
};

struct ClassifierReport {
  int N = 0;
  ClassifyConfig cfg;
  double beta_threshold = 0.0;    // N^beta
  double gamma0_threshold = 0.0;  // N^gamma0
  double small_threshold = 0.0;   // small_fraction * eps * N
  std::vector<ClassifiedCluster> clusters;
  std::int64_t k_eps = 0;
  std::int64_t type1 = 0;
  std::int64_t type2 = 0;
  std::int64_t neither = 0;
  std::int64_t small_loops_only = 0;

  double frequency(ClusterTag tag) const;
  // |freq(type1) - 1/2|, zero when nothing was detected.
  double u_deviation() const;
  std::string to_json() const;
};

// Tags the C(eps,N) clusters listed in `hits` (certificates attached) using
// the B(eps,N) loops in `b`. type1: exactly one B member and no other member
// of diameter > N^beta. type2: no member of diameter > N^beta and the minimal
// chain for the first certificate has every loop below N^gamma0.
ClassifierReport classify_clusters(const SoupSample& s, const std::vector<ClusterRecord>& clusters,
                                   const std::vector<std::size_t>& hits, const std::vector<BLoop>& b,
                                   const ClassifyConfig& cfg);

// ---------------------------------------------------------------- replica analysis

struct ReplicaCounts {
  int N = 0;
  std::int64_t replica = 0;
  std::int64_t k_eps = 0;
  std::int64_t b_clusters = 0;  // C(eps,N) clusters holding a B(eps,N) loop
  std::int64_t b_loops = 0;
  std::int64_t big_loops = 0;  // loops of diameter >= eps N
  std::int64_t type1 = 0;
  std::int64_t type2 = 0;
  std::int64_t neither = 0;
};

struct RunOptions {
  double kappa = -1.0;  // negative means default_kappa(d)
  int threads = 1;
};

// One soup with bridges: detection, B loops and classification.
// Throws ConsistencyError when a B loop's cluster is missing from C(eps,N).
ReplicaCounts analyse_replica(const LoopIntensityTable& table, const TubeFamily& family, std::uint64_t seed,
                              const ClassifyConfig& cfg, double kappa);

// ---------------------------------------------------------------- doubling

struct DoublingRow {
  int N = 0;
  std::int64_t replicas = 0;
  std::int64_t family_size = 0;
  double k_mean = 0.0;
  double k_var = 0.0;
  double k_dispersion = 0.0;
  double b_mean = 0.0;
  double big_mean = 0.0;
  double big_dispersion = 0.0;
  Interval dispersion_null;  // 95% Poisson band for the dispersion index
  double ratio = 0.0;        // mean K / mean #B-clusters (NaN when no B cluster)
  double ratio_se = 0.0;
  Interval ratio_ci95;
  Interval ratio_ci99;
  double z_vs_two = 0.0;
  double p_vs_two = 0.0;
  std::int64_t min_excess = 0;  // min over replicas of K - #B-clusters
  std::int64_t type1 = 0;
  std::int64_t type2 = 0;
  std::int64_t neither = 0;
};

struct DoublingReport {
  int d = 0;
  double eps = 0.0;
  ClassifyConfig cfg;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  std::vector<DoublingRow> rows;
  std::vector<ReplicaCounts> replicas;

  std::string to_json() const;
  std::string summary_csv() const;
  std::string replicas_csv() const;
};

// replicas[k] soups at Ns[k]; N uses base seed derive_seed(seed, Stream::kEstimator, N).
DoublingReport doubling_experiment(int d, const std::vector<int>& Ns, double eps,
                                   const std::vector<std::int64_t>& replicas, std::uint64_t seed,
                                   const ClassifyConfig& cfg = {}, const RunOptions& opt = {});

// ---------------------------------------------------------------- gamma window

struct GammaWindowRow {
  double gamma0 = 0.0;
  double threshold = 0.0;  // N^gamma0
  std::int64_t within = 0;
  std::int64_t candidates = 0;
  Interval ci;
  double frequency() const { return candidates ? static_cast<double>(within) / candidates : 0.0; }
};

struct GammaWindowReport {
  BoxConfig box;
  double eps = 0.0;
  double beta = 0.0;
  std::int64_t replicas = 0;
  std::uint64_t seed = 0;
  std::vector<int> chain_max;  // per candidate cluster
  std::vector<GammaWindowRow> rows;
  std::string to_json() const;
  std::string to_csv() const;
};

// Candidates are C(eps,N) clusters without a member loop above N^beta; each
// row gives the fraction whose minimal chain keeps every loop below N^gamma0.
GammaWindowReport gamma_window_experiment(const BoxConfig& box, double eps, double beta,
                                          const std::vector<double>& gamma0s, std::int64_t replicas,
                                          std::uint64_t seed, const RunOptions& opt = {});

// ---------------------------------------------------------------- hausdorff

enum class ResampleScope { kFullBox, kInsideCluster };
std::string to_string(ResampleScope scope);
ResampleScope resample_scope_from_string(const std::string& s);

struct ResampleOptions {
  ResampleScope scope = ResampleScope::kInsideCluster;
  // Abort once the running acceptance rate is below this after 1/floor attempts.
  double min_acceptance_rate = 1e-5;
  double kappa = -1.0;
};

struct Resample {
  SoupSample soup;
  std::vector<std::int64_t> cluster_loops;  // loops of the reproduced cluster in `soup`
  std::int64_t attempts = 0;
};

// Draws the soup conditioned on `c` being a cluster with the same vertex set.
// kInsideCluster keeps every loop outside c and redraws the loops and trivial
// times inside it, the bridges inside it and the bridges on its boundary;
// kFullBox redraws the whole soup. Both accept on an exact vertex-set match.
// Throws RejectionRateError when the acceptance floor is hit.
Resample resample_cluster(const SoupSample& s, const ClusterRecord& c, const LoopIntensityTable& table,
                          std::uint64_t seed, const ResampleOptions& opt = {});

struct HausdorffRow {
  std::int64_t replica = 0;
  std::int64_t cluster = 0;
  std::int64_t size = 0;
  std::int64_t attempts = 0;
  bool has_b2 = false;
  double distance = 0.0;  // d_H(B1, B2) when has_b2
  double scaled = 0.0;    // distance / N^beta
};

struct HausdorffReport {
  BoxConfig box;
  double eps = 0.0;
  double beta = 0.0;
  ResampleScope scope = ResampleScope::kInsideCluster;
  std::int64_t replicas = 0;
  std::uint64_t seed = 0;
  std::vector<HausdorffRow> rows;
  std::int64_t skipped_large = 0;
  std::int64_t attempts = 0;
  std::int64_t accepted = 0;
  std::int64_t tail = 0;  // rows with distance > N^beta
  std::int64_t with_b2 = 0;

  double acceptance_rate() const { return attempts ? static_cast<double>(accepted) / attempts : 0.0; }
  Interval tail_ci() const { return wilson_interval(tail, with_b2); }
  std::string to_json() const;
  std::string to_csv() const;
};

struct HausdorffOptions {
  ResampleOptions resample;
  int threads = 1;
  std::int64_t max_cluster_vertices = 1500;  // larger clusters are skipped and counted
};

// For every C(eps,N) cluster holding a B(eps,N) loop, B1 is its largest B loop
// and B2 the largest B loop of a conditional resample of the cluster.
HausdorffReport hausdorff_experiment(const BoxConfig& box, double eps, double beta, std::int64_t replicas,
                                     std::uint64_t seed, const HausdorffOptions& opt = {});

// Largest-diameter loop among `loops` whose trace winds around a family tube
// at clearance eps*N (ties to the smaller loop index); -1 when none does.
std::int64_t largest_b_loop(const SoupSample& s, const std::vector<std::int64_t>& loops,
                            const TubeFamily& family);

// ---------------------------------------------------------------- point on a big loop

struct PointOnLoopRow {
  int N = 0;
  double threshold = 0.0;  // N^a
  std::int64_t hits = 0;
  std::int64_t replicas = 0;
  double p() const { return replicas ? static_cast<double>(hits) / replicas : 0.0; }
  double se() const;
};

struct PointOnLoopReport {
  int d = 0;
  double a = 0.0;
  std::uint64_t seed = 0;
  std::vector<PointOnLoopRow> rows;
  LinearFit fit;           // log p against log N over rows with hits
  double bound_slope = 0;  // -a(d-2)
  bool slope_consistent = false;  // fit.slope <= bound_slope + 2 slope_se
  // Linearization at the largest N: the same estimate with alpha doubled.
  PointOnLoopRow doubled;
  double alpha_ratio = 0.0;
  double alpha_ratio_se = 0.0;
  std::string to_json() const;
  std::string to_csv() const;
};

// Frequency of the origin lying on a loop of L∞ diameter >= N^a.
PointOnLoopRow point_on_big_loop(int d, int N, double a, std::int64_t replicas, std::uint64_t seed,
                                 double alpha = 0.5, int threads = 1);
PointOnLoopReport point_on_big_loop_scaling(int d, const std::vector<int>& Ns, double a, std::int64_t replicas,
                                            std::uint64_t seed, int threads = 1);

// ---------------------------------------------------------------- two-point oracle

struct PointPair {
  Point x;
  Point y;
};

// Pairs used to fit kappa and the disjoint pairs used to test it (9^3 box).
std::vector<PointPair> calibration_pairs();
std::vector<PointPair> held_out_pairs();

enum class Backend { kLoop, kGff };
std::string to_string(Backend b);

struct TwoPointRow {
  PointPair pair;
  double arcsine = 0.0;
  std::int64_t hits = 0;
  std::int64_t replicas = 0;
  double frequency() const { return replicas ? static_cast<double>(hits) / replicas : 0.0; }
  // Binomial standard error at the arcsine value.
  double se() const;
  double z() const;
};

struct TwoPointReport {
  BoxConfig box;
  Backend backend = Backend::kLoop;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  std::vector<TwoPointRow> rows;
  double max_abs_z() const;
  std::string to_json() const;
  std::string to_csv() const;
};

TwoPointReport two_point_experiment(const BoxConfig& box, Backend backend, const std::vector<PointPair>& pairs,
                                    double kappa, std::int64_t replicas, std::uint64_t seed, int threads = 1);

struct KappaCalibration {
  BoxConfig box;
  std::vector<double> multipliers;  // kappa = multiplier / d
  std::vector<double> chi2;         // both backends, all calibration pairs
  std::size_t best = 0;
  std::int64_t replicas = 0;
  std::uint64_t seed = 0;
  double kappa() const { return multipliers[best] / box.d; }
  std::string to_json() const;
  std::string to_csv() const;
};

// Grid search with common random numbers across the multipliers.
KappaCalibration calibrate_kappa(const BoxConfig& box, const std::vector<PointPair>& pairs,
                                 const std::vector<double>& multipliers, std::int64_t replicas,
                                 std::uint64_t seed, int threads = 1);

struct CrossBackendReport {
  BoxConfig box;
  double kappa = 0.0;
  std::int64_t replicas = 0;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> loop_counts;
  std::vector<std::int64_t> gff_counts;
  TestResult count_test;
  struct PairTest {
    PointPair pair;
    std::int64_t loop_hits = 0;
    std::int64_t gff_hits = 0;
    TestResult test;
  };
  std::vector<PairTest> pairs;
  double min_p() const;
  std::string to_json() const;
  std::string to_csv() const;
};

// Cluster counts (singletons included) and two-point frequencies from both backends.
CrossBackendReport cross_backend_experiment(const BoxConfig& box, const std::vector<PointPair>& pairs,
                                            double kappa, std::int64_t replicas, std::uint64_t seed,
                                            int threads = 1);

}  // namespace loopcycle
