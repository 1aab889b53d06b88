#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "loopcycle/errors.hpp"
#include "loopcycle/switching.hpp"
#include "support/fixtures.hpp"

using namespace loopcycle;
using fixture::loop_at;
using fixture::soup_of;

namespace {

const Tube kCentre = Tube::make(0, 1, 0.5, 0.5);

// Cluster of s containing vertex v, with its certificate for the centre tube.
ClusterRecord cluster_at(const SoupSample& s, VertexId v) {
  for (auto& c : build_clusters(s)) {
    if (std::binary_search(c.vertices.begin(), c.vertices.end(), v)) {
      c.certificates.push_back(winding_bfs(s, c, kCentre, 0.0));
      return c;
    }
  }
  throw std::runtime_error("no cluster at vertex");
}

long long parity_of(const ClusterRecord& c) {
  const auto& w = c.certificates.front();
  return (w.sigma / w.index) % 2;
}

std::vector<EdgeId> witness_odd_edges(const Lattice& lat, const WindingCertificate& w) {
  std::map<EdgeId, int> m;
  for (std::size_t k = 0; k + 1 < w.witness.size(); ++k) {
    for (int dir = 0; dir < 2 * lat.dim(); ++dir) {
      if (lat.step(w.witness[k], dir) == w.witness[k + 1]) ++m[lat.edge_of_step(w.witness[k], dir)];
    }
  }
  std::vector<EdgeId> out;
  for (auto [e, k] : m) {
    if (k & 1) out.push_back(e);
  }
  return out;
}

double total(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST(ParitySwitch, SingleWindingLoopBecomesEven) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, "RULD"), loop_at(lat, {-3, -3, -3}, "RL")});
  auto c = cluster_at(s, lat.id(std::vector<int>{0, 0, 0}));
  ASSERT_EQ(c.certificates[0].index, 1);
  ASSERT_EQ(parity_of(c), 1);

  auto s2 = parity_switch(c, s, kCentre);
  // The plaquette is gone; its edges stay open as bridges.
  ASSERT_EQ(s2.loops.size(), 1u);
  auto c2 = cluster_at(s2, lat.id(std::vector<int>{0, 0, 0}));
  EXPECT_EQ(c2.vertices, c.vertices);
  EXPECT_EQ(c2.edges, c.edges);
  EXPECT_EQ(c2.certificates[0].index, 1);
  EXPECT_EQ(parity_of(c2), 0);
  EXPECT_NEAR(total(s2.occupation), total(s.occupation), 1e-12);

  // Switching back restores a winding loop.
  auto s3 = parity_switch(c2, s2, kCentre);
  auto c3 = cluster_at(s3, lat.id(std::vector<int>{0, 0, 0}));
  EXPECT_EQ(parity_of(c3), 1);
  EXPECT_EQ(edge_crossings(lat, s3.loops), edge_crossings(lat, s.loops));
}

TEST(ParitySwitch, NeedsCertificate) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, "RULD")});
  auto c = build_clusters(s).front();
  EXPECT_THROW(parity_switch(c, s, kCentre), PreconditionError);
  c.certificates.push_back(winding_bfs(s, c, Tube::make(0, 1, 2.5, 2.5), 0.0));
  EXPECT_THROW(parity_switch(c, s, Tube::make(0, 1, 2.5, 2.5)), PreconditionError);
}

TEST(ParitySwitch, RandomClustersFlipOnlyWitnessParities) {
  BoxConfig box{3, 4};
  Lattice lat(box);
  auto table = loop_intensity(box, suggested_lmax(box));
  int switched = 0;
  for (std::uint64_t seed = 1; seed <= 200 && switched < 25; ++seed) {
    auto s = sample_soup(table, seed);
    attach_bridges(s, default_kappa(3));
    for (auto c : build_clusters(s)) {
      auto cert = winding_bfs(s, c, kCentre, 0.0);
      if (!cert.winds()) continue;
      c.certificates.push_back(cert);
      auto s2 = parity_switch(c, s, kCentre);
      ++switched;

      auto c2 = cluster_at(s2, c.vertices.front());
      EXPECT_EQ(c2.vertices, c.vertices) << "seed " << seed;
      EXPECT_EQ(c2.edges, c.edges) << "seed " << seed;
      EXPECT_EQ(c2.certificates[0].index, cert.index);
      EXPECT_NE(parity_of(c2), parity_of(c)) << "seed " << seed;

      auto before = edge_crossings(lat, s.loops), after = edge_crossings(lat, s2.loops);
      auto odd = witness_odd_edges(lat, cert);
      for (std::size_t e = 0; e < before.size(); ++e) {
        bool on = std::binary_search(odd.begin(), odd.end(), static_cast<EdgeId>(e));
        ASSERT_EQ((before[e] + after[e]) % 2, on ? 1 : 0) << "edge " << e;
      }
      for (std::size_t v = 0; v < s.occupation.size(); ++v) {
        ASSERT_NEAR(s2.occupation[v], s.occupation[v], 1e-9);
      }
      // Twice with the same witness: parities come back.
      auto same = c2;
      same.certificates = {cert};
      auto s3 = parity_switch(same, s2, kCentre);
      auto back = edge_crossings(lat, s3.loops);
      for (std::size_t e = 0; e < before.size(); ++e) ASSERT_EQ(back[e] % 2, before[e] % 2);
      // Loops outside the cluster are untouched.
      EXPECT_EQ(cluster_count(s2), cluster_count(s));
      break;
    }
  }
  EXPECT_GE(switched, 10);
}

TEST(SwitchingExperiment, RecordsOnlyWindingClusters) {
  BoxConfig box{3, 3};
  auto st = switching_experiment(box, kCentre, 0.0, 60, 7);
  EXPECT_EQ(st.replicas, 60);
  EXPECT_EQ(st.n(), static_cast<std::int64_t>(st.records.size()));
  for (const auto& r : st.records) {
    EXPECT_GT(r.index, 0);
    EXPECT_EQ(r.sigma % r.index, 0);
    EXPECT_EQ(r.parity, (r.sigma / r.index) % 2);
  }
  std::int64_t in_groups = 0;
  for (const auto& g : st.by_size_decile()) in_groups += g.n;
  EXPECT_EQ(in_groups, st.n());
  // Same seed, same records, whatever the thread count.
  SwitchOptions two;
  two.threads = 2;
  auto again = switching_experiment(box, kCentre, 0.0, 60, 7, two);
  EXPECT_EQ(again.to_json(), st.to_json());
}

TEST(SwitchingExperiment, LoneWindingLoopIsOdd) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, "RULD")});
  EXPECT_EQ(parity_of(cluster_at(s, lat.id(std::vector<int>{0, 0, 0}))), 1);
}
