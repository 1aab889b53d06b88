#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "loopcycle/errors.hpp"
#include "loopcycle/experiments.hpp"
#include "loopcycle/manifest.hpp"
#include "support/fixtures.hpp"

using namespace loopcycle;
using fixture::loop_at;
using fixture::soup_of;
namespace fs = std::filesystem;

namespace {

std::string repeat(const std::string& s, int n) {
  std::string out;
  for (int k = 0; k < n; ++k) out += s;
  return out;
}

// Axis-aligned square of side `side` with lower-left corner at root, in the 01-plane.
RWLoop square(const Lattice& lat, std::vector<int> root, int side) {
  return loop_at(lat, std::move(root), repeat("R", side) + repeat("U", side) + repeat("L", side) + repeat("D", side));
}

TubeFamily centre_family(double eps) {
  TubeFamily f;
  f.eps = eps;
  f.tubes = {Tube::make(0, 1, 0.5, 0.5)};
  return f;
}

ClassifierReport classify(const SoupSample& s, const TubeFamily& f, ClassifyConfig cfg = {}) {
  auto clusters = build_clusters(s);
  auto hits = detect_C_eps(s, clusters, f);
  auto b = detect_B_eps(s, f);
  return classify_clusters(s, clusters, hits, b, cfg);
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("loopcycle_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

// Box N=8, eps=1/2: C needs clearance 2 and diameter 8, B needs clearance 4.
// N^beta = 8^0.9 ~ 6.5 and N^gamma0 = 8^0.6 ~ 3.5.
TEST(Classify, SingleBigWindingLoopIsType1) {
  BoxConfig box{3, 8};
  Lattice lat(box);
  auto s = soup_of(box, {square(lat, {-4, -4, 0}, 9), loop_at(lat, {6, 6, 6}, "RL")});
  auto r = classify(s, centre_family(0.5));
  ASSERT_EQ(r.k_eps, 1);
  EXPECT_EQ(r.clusters[0].tag, ClusterTag::kType1);
  EXPECT_EQ(r.clusters[0].b_members, 1);
  EXPECT_DOUBLE_EQ(r.u_deviation(), 0.5);
}

TEST(Classify, RingOfTinyLoopsIsType2) {
  BoxConfig box{3, 8};
  Lattice lat(box);
  std::vector<RWLoop> loops;
  for (int a : {-4, -2, 0, 2, 4}) {
    for (int b : {-4, 4}) {
      loops.push_back(square(lat, {a, b, 0}, 2));
      if (a != -4 && a != 4) loops.push_back(square(lat, {b, a, 0}, 2));
    }
  }
  auto s = soup_of(box, loops);
  auto r = classify(s, centre_family(0.5));
  ASSERT_EQ(r.k_eps, 1);
  EXPECT_EQ(r.clusters[0].tag, ClusterTag::kType2);
  EXPECT_EQ(r.clusters[0].b_members, 0);
  EXPECT_EQ(r.clusters[0].chain_max_diameter, 2);
  // With gamma0 pushed below the loop scale the chain no longer qualifies.
  ClassifyConfig tight;
  tight.gamma0 = 0.3;
  EXPECT_EQ(classify(s, centre_family(0.5), tight).clusters[0].tag, ClusterTag::kNeither);
}

TEST(Classify, TwoBigLoopsIsNeither) {
  BoxConfig box{3, 8};
  Lattice lat(box);
  auto s = soup_of(box, {square(lat, {-4, -4, 0}, 9), loop_at(lat, {-4, -4, 0}, repeat("R", 9) + repeat("L", 9))});
  auto r = classify(s, centre_family(0.5));
  ASSERT_EQ(r.k_eps, 1);
  EXPECT_EQ(r.clusters[0].tag, ClusterTag::kNeither);
  EXPECT_EQ(r.neither, 1);
}

TEST(Classify, TagsPartitionAndArePure) {
  BoxConfig box{3, 8};
  auto table = loop_intensity(box, suggested_lmax(box));
  auto family = tube_family(0.25, box);
  std::int64_t seen = 0;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    auto s = sample_soup(table, seed);
    attach_bridges(s, default_kappa(3));
    auto clusters = build_clusters(s);
    auto hits = detect_C_eps(s, clusters, family);
    auto b = detect_B_eps(s, family);
    ClassifyConfig cfg;
    cfg.eps = 0.25;
    auto r1 = classify_clusters(s, clusters, hits, b, cfg);
    auto r2 = classify_clusters(s, clusters, hits, b, cfg);
    EXPECT_EQ(r1.to_json(), r2.to_json());
    EXPECT_EQ(r1.type1 + r1.type2 + r1.neither, r1.k_eps);
    if (r1.k_eps) {
      double total = r1.frequency(ClusterTag::kType1) + r1.frequency(ClusterTag::kType2) +
                     r1.frequency(ClusterTag::kNeither);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    seen += r1.k_eps;
  }
  EXPECT_GT(seen, 0);
}

TEST(RegionSoupSampler, WholeBoxMatchesTable) {
  BoxConfig box{3, 2};
  Lattice lat(box);
  auto table = loop_intensity(box, 40);
  std::vector<VertexId> all(static_cast<std::size_t>(lat.volume()));
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<VertexId>(k);
  RegionSoupSampler region(box, all, 40);
  for (VertexId x : {VertexId{0}, lat.id(std::vector<int>{0, 0, 0}), lat.id(std::vector<int>{1, -2, 0})}) {
    for (int L : {2, 4, 10, 40}) {
      EXPECT_NEAR(region.lambda(x, L), table.lambda(x, L), 1e-12 + 1e-9 * table.lambda(x, L)) << x << " " << L;
    }
  }
}

TEST(RegionSoupSampler, TwoVertexRegion) {
  BoxConfig box{3, 2};
  Lattice lat(box);
  VertexId a = lat.id(std::vector<int>{0, 0, 0}), b = lat.id(std::vector<int>{1, 0, 0});
  RegionSoupSampler region(box, {a, b}, 10);
  // Back-and-forth walks only: P(return in L steps) = 6^-L.
  for (int L = 2; L <= 10; L += 2) EXPECT_NEAR(region.lambda(a, L), 0.5 * std::pow(6.0, -L) / L, 1e-12 * std::pow(6.0, -L));
  EXPECT_EQ(region.lambda(lat.id(std::vector<int>{0, 1, 0}), 2), 0.0);
}

TEST(RegionSoupSampler, LoopsStayInsideAndCountIsPoisson) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  std::vector<VertexId> region;
  for (int x = -1; x <= 1; ++x)
    for (int y = -1; y <= 1; ++y) region.push_back(lat.id(std::vector<int>{x, y, 0}));
  RegionSoupSampler sampler(box, region, 30);
  std::sort(region.begin(), region.end());
  Rng rng(7);
  double total = 0;
  const int R = 20000;
  for (int r = 0; r < R; ++r) {
    auto loops = sampler.sample_loops(rng);
    total += static_cast<double>(loops.size());
    for (const auto& loop : loops) {
      for (VertexId v : loop.vertices(lat)) ASSERT_TRUE(std::binary_search(region.begin(), region.end(), v));
      ASSERT_EQ(loop.holding.size(), loop.steps.size());
    }
  }
  double mean = total / R, se = std::sqrt(sampler.total_mass() / R);
  EXPECT_NEAR(mean, sampler.total_mass(), 4 * se);
}

TEST(Resample, InsidePlaquetteKeepsVertexSetAndTrace) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, "RULD"), loop_at(lat, {-3, -3, -3}, "RL")});
  s.bridges.assign(static_cast<std::size_t>(lat.edge_slots()), false);
  s.kappa = default_kappa(3);
  auto table = loop_intensity(box, suggested_lmax(box));
  const Tube t = Tube::make(0, 1, 0.5, 0.5);
  ClusterRecord plaquette;
  for (const auto& c : build_clusters(s)) {
    if (c.vertices.size() == 4) plaquette = c;
  }
  ASSERT_EQ(plaquette.vertices.size(), 4u);
  int winding = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    auto r = resample_cluster(s, plaquette, table, seed);
    ASSERT_GE(r.attempts, 1);
    // Outside loops are kept, the cluster's own loops are redrawn.
    EXPECT_EQ(encode_steps(r.soup.loops[0].steps), "RL");
    bool found = false;
    for (const auto& c : build_clusters(r.soup)) {
      if (c.vertices == plaquette.vertices) found = true;
    }
    EXPECT_TRUE(found) << "seed " << seed;
    for (auto id : r.cluster_loops) {
      const auto& loop = r.soup.loops[static_cast<std::size_t>(id)];
      if (loop_winding(lat, loop, t) == 0) continue;
      ++winding;
      // Any winding loop of the plaquette visits all four vertices: d_H = 0.
      auto v = loop.vertices(lat);
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      EXPECT_EQ(hausdorff_distance(lat, v, plaquette.vertices), 0.0);
    }
  }
  EXPECT_GT(winding, 0);
}

TEST(Resample, FullBoxReproducesSingleton) {
  BoxConfig box{3, 1};
  auto table = loop_intensity(box, suggested_lmax(box));
  auto s = sample_soup(table, 3);
  attach_bridges(s, default_kappa(3));
  auto clusters = build_clusters(s);
  ClusterRecord target = clusters.back();
  ResampleOptions opt;
  opt.scope = ResampleScope::kFullBox;
  opt.min_acceptance_rate = 1e-4;
  auto r = resample_cluster(s, target, table, 11, opt);
  bool found = false;
  for (const auto& c : build_clusters(r.soup)) found = found || c.vertices == target.vertices;
  EXPECT_TRUE(found);
}

TEST(Resample, FloorAborts) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  auto s = soup_of(box, {square(lat, {-2, -2, 0}, 4)});
  s.bridges.assign(static_cast<std::size_t>(lat.edge_slots()), false);
  auto table = loop_intensity(box, suggested_lmax(box));
  auto c = build_clusters(s).front();
  ResampleOptions opt;
  opt.min_acceptance_rate = 0.5;
  try {
    resample_cluster(s, c, table, 1, opt);
    FAIL() << "expected the floor to trip";
  } catch (const RejectionRateError& e) {
    EXPECT_EQ(e.attempts(), 2);
  }
}

TEST(Hausdorff, LargestBLoop) {
  BoxConfig box{3, 8};
  Lattice lat(box);
  auto s = soup_of(box, {square(lat, {-2, -2, 0}, 4), square(lat, {-4, -4, 0}, 9), square(lat, {-5, -5, 1}, 11)});
  auto f = centre_family(0.5);
  EXPECT_EQ(largest_b_loop(s, {0, 1, 2}, f), 2);
  EXPECT_EQ(largest_b_loop(s, {0, 1}, f), 1);
  EXPECT_EQ(largest_b_loop(s, {0}, f), -1);
}

TEST(Hausdorff, EmptyWhenNothingWinds) {
  auto rep = hausdorff_experiment(BoxConfig{3, 3}, 0.5, 0.9, 10, 1);
  EXPECT_EQ(rep.accepted, 0);
  EXPECT_EQ(rep.tail_ci().lo, 0.0);
}

TEST(Doubling, ContainmentAndDeterminism) {
  RunOptions one, two;
  two.threads = 2;
  ClassifyConfig cfg;
  auto a = doubling_experiment(3, {6, 8}, 0.25, {20, 10}, 5, cfg, one);
  auto b = doubling_experiment(3, {6, 8}, 0.25, {20, 10}, 5, cfg, two);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.replicas_csv(), b.replicas_csv());
  ASSERT_EQ(a.rows.size(), 2u);
  EXPECT_EQ(a.replicas.size(), 30u);
  for (const auto& r : a.replicas) EXPECT_GE(r.k_eps, r.b_clusters);
  for (const auto& row : a.rows) {
    EXPECT_GE(row.min_excess, 0);
    if (row.b_mean > 0) EXPECT_GE(row.ratio, 1.0);
  }
  EXPECT_NE(a.summary_csv().find(kDeskScaleDisclaimer), std::string::npos);
}

TEST(GammaWindow, MonotoneWithTrivialEnds) {
  auto rep = gamma_window_experiment(BoxConfig{3, 8}, 0.25, 0.9, {0.0, 0.3, 0.6, 0.9, 1.0}, 40, 3);
  ASSERT_EQ(rep.rows.size(), 5u);
  ASSERT_GT(rep.rows[0].candidates, 0);
  for (std::size_t k = 1; k < rep.rows.size(); ++k) EXPECT_GE(rep.rows[k].within, rep.rows[k - 1].within);
  // Candidates have no loop above N^beta < N, so gamma0 = 1 admits all of them.
  EXPECT_EQ(rep.rows.back().within, rep.rows.back().candidates);
  // N^0 = 1: only loop-free chains could pass.
  for (int m : rep.chain_max) {
    if (m >= 1) continue;
    FAIL() << "bridge-only chain in a random soup";
  }
  EXPECT_EQ(rep.rows[0].within, 0);
}

TEST(PointOnLoop, ThresholdAboveBoxIsZero) {
  auto row = point_on_big_loop(3, 4, 1.6, 50, 1);  // 4^1.6 > 8
  EXPECT_EQ(row.hits, 0);
  EXPECT_EQ(row.replicas, 50);
}

TEST(PointOnLoop, ScalingReportShape) {
  auto rep = point_on_big_loop_scaling(3, {3, 4}, 0.5, 400, 2);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.bound_slope, -0.5);
  EXPECT_EQ(rep.doubled.N, 4);
  for (const auto& r : rep.rows) EXPECT_GT(r.hits, 0);
}

TEST(TwoPoint, PairsFitBothBoxes) {
  for (int N : {3, 4}) {
    Lattice lat(BoxConfig{3, N});
    for (const auto& p : held_out_pairs()) EXPECT_TRUE(lat.contains(p.x) && lat.contains(p.y));
    for (const auto& p : calibration_pairs()) EXPECT_TRUE(lat.contains(p.x) && lat.contains(p.y));
  }
  EXPECT_EQ(held_out_pairs().size(), 10u);
}

TEST(TwoPoint, BackendsAreDeterministicAndNearArcsine) {
  BoxConfig box{3, 3};
  for (Backend b : {Backend::kLoop, Backend::kGff}) {
    auto r1 = two_point_experiment(box, b, held_out_pairs(), -1, 2000, 4);
    auto r2 = two_point_experiment(box, b, held_out_pairs(), -1, 2000, 4, 2);
    EXPECT_EQ(r1.to_json(), r2.to_json());
    EXPECT_LT(r1.max_abs_z(), 5.0) << to_string(b);
  }
}

TEST(TwoPoint, CalibrationGridPrefersUnitMultiplier) {
  auto cal = calibrate_kappa(BoxConfig{3, 3}, calibration_pairs(), {0.5, 1.0, 2.0}, 3000, 9);
  ASSERT_EQ(cal.chi2.size(), 3u);
  EXPECT_EQ(cal.best, 1u);
  EXPECT_DOUBLE_EQ(cal.kappa(), 1.0 / 3.0);
}

TEST(CrossBackend, CountsAgree) {
  auto rep = cross_backend_experiment(BoxConfig{3, 2}, {{{0, 0, 0}, {1, 0, 0}}, {{-1, 0, 0}, {1, 1, 0}}}, -1, 3000, 2);
  EXPECT_EQ(rep.loop_counts.size(), 3000u);
  EXPECT_GT(rep.min_p(), 1e-4);
}

TEST(Manifest, RunWritesManifestAndReplayMatches) {
  auto dir = scratch("run"), again = scratch("again");
  auto m = run_experiment("sample", {{"d", "3"}, {"N", "3"}, {"seed", "9"}}, dir.string());
  ASSERT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_EQ(m.params.at("seed"), "9");
  EXPECT_EQ(m.params.at("format"), "json");  // defaults are recorded
  auto read = ExperimentManifest::read((dir / "manifest.json").string());
  EXPECT_EQ(read.outputs, m.outputs);
  EXPECT_EQ(read.to_json(), m.to_json());
  auto r = replay_manifest((dir / "manifest.json").string(), again.string());
  EXPECT_TRUE(r.identical());
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST(Manifest, ChangedSeedIsDetected) {
  auto dir = scratch("seed"), again = scratch("seed2");
  run_experiment("sample", {{"N", "2"}, {"seed", "1"}}, dir.string());
  auto m = ExperimentManifest::read((dir / "manifest.json").string());
  m.params["seed"] = "2";
  std::ofstream(dir / "manifest.json") << m.to_json();
  auto r = replay_manifest((dir / "manifest.json").string(), again.string());
  EXPECT_FALSE(r.identical());
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST(Manifest, UnknownParameterRejected) {
  auto dir = scratch("unknown");
  EXPECT_THROW(run_experiment("sample", {{"bogus", "1"}}, dir.string()), DomainError);
  EXPECT_THROW(run_experiment("nope", {}, dir.string()), DomainError);
  fs::remove_all(dir);
}

TEST(Manifest, DefaultOutputDirFromEnvironment) {
  ::setenv("LOOPCYCLE_OUT", "/tmp/somewhere", 1);
  EXPECT_EQ(default_output_dir(), "/tmp/somewhere");
  ::unsetenv("LOOPCYCLE_OUT");
  EXPECT_EQ(default_output_dir(), "loopcycle-out");
}

TEST(Manifest, AbortedRunKeepsReport) {
  auto dir = scratch("abort");
  Params p{{"N", "8"}, {"eps", "0.125"}, {"replicas", "60"}, {"min_rate", "0.5"}, {"max_cluster", "100000"}};
  EXPECT_THROW(run_experiment("hausdorff", p, dir.string()), RejectionRateError);
  auto m = ExperimentManifest::read((dir / "manifest.json").string());
  EXPECT_EQ(m.status, "aborted");
  ASSERT_EQ(m.outputs.size(), 1u);
  EXPECT_EQ(m.outputs[0].file, "hausdorff_abort.json");
  fs::remove_all(dir);
}
