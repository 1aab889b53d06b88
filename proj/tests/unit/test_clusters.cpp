#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "loopcycle/clusters.hpp"
#include "loopcycle/errors.hpp"
#include "support/brute_force.hpp"
#include "support/fixtures.hpp"

using namespace loopcycle;
using fixture::loop_at;
using fixture::soup_of;

namespace {

// Plaquette around the anchor (0.5, 0.5) of axes (0, 1), rooted at (x, y, z...).
std::string plaquette() { return "RULD"; }

// Simple 14-step cycle winding twice around the (0,1) tube at (0.5, 0.5):
// two turns climbing along axis 2, return along axis 3.
std::string double_helix() { return "RULFDRUFLDGBBg"; }

}  // namespace

TEST(BuildClusters, SharedVertexMerges) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, "RL"), loop_at(lat, {1, 0, 0}, "UD")});
  auto cs = build_clusters(s);
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].loops.size(), 2u);
  EXPECT_EQ(cs[0].vertices.size(), 3u);
  EXPECT_EQ(cs[0].edges.size(), 2u);
  EXPECT_EQ(cs[0].diameter, 1);
}

TEST(BuildClusters, DisjointLoopsStaySeparateAndSortByDiameter) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {-3, -3, -3}, "RL"), loop_at(lat, {0, 0, 0}, "RRUULLDD"),
                         loop_at(lat, {3, 3, 3}, "DU")});
  auto cs = build_clusters(s);
  ASSERT_EQ(cs.size(), 3u);
  EXPECT_EQ(cs[0].diameter, 2);
  EXPECT_EQ(cs[0].loops, std::vector<std::int64_t>{1});
  EXPECT_EQ(cs[1].loops, std::vector<std::int64_t>{0});
  EXPECT_EQ(cs[2].loops, std::vector<std::int64_t>{2});
  EXPECT_EQ(cluster_count(s), lat.volume() - 12 + 3);
}

TEST(BuildClusters, BridgesJoinAndMinDiameterFilters) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, "RL"), loop_at(lat, {2, 0, 0}, "RL")});
  s.bridges.assign(static_cast<std::size_t>(lat.edge_slots()), false);
  s.bridges[static_cast<std::size_t>(lat.edge_id(lat.id(std::vector<int>{1, 0, 0}), 0))] = true;
  EXPECT_EQ(build_clusters(s).size(), 1u);
  ClusterOptions no_bridges;
  no_bridges.use_bridges = false;
  EXPECT_EQ(build_clusters(s, no_bridges).size(), 2u);
  ClusterOptions big;
  big.min_diameter = 4;
  EXPECT_TRUE(build_clusters(s, big).empty());
}

TEST(BuildClusters, LabelsAgreeWithGraphSearch) {
  BoxConfig box{3, 3};
  auto table = loop_intensity(box, suggested_lmax(box));
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = sample_soup(table, seed);
    attach_bridges(s, default_kappa(3));
    auto a = cluster_labels(s);
    auto b = brute::search_labels(s, true);
    std::map<std::uint32_t, std::int64_t> m;
    for (std::size_t v = 0; v < a.size(); ++v) {
      auto [it, fresh] = m.try_emplace(a[v], b[v]);
      EXPECT_EQ(it->second, b[v]);
    }
    std::set<std::int64_t> distinct(b.begin(), b.end());
    EXPECT_EQ(static_cast<std::size_t>(cluster_count(s)), distinct.size());
  }
}

TEST(WindingBfs, ElementaryPlaquette) {
  BoxConfig box{3, 2};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, plaquette())});
  auto cs = build_clusters(s);
  auto cert = winding_bfs(s, cs[0], Tube::make(0, 1, 0.5, 0.5), 0.0);
  EXPECT_EQ(cert.index, 1);
  EXPECT_EQ(cert.sigma, 1);
  ASSERT_EQ(cert.witness.size(), 5u);
  EXPECT_EQ(cert.witness.front(), cert.witness.back());
  std::set<VertexId> ring(cert.witness.begin(), cert.witness.end());
  EXPECT_EQ(ring, std::set<VertexId>(cs[0].vertices.begin(), cs[0].vertices.end()));
  EXPECT_EQ(cert.offsets, std::vector<long long>{1});
  EXPECT_DOUBLE_EQ(cert.clearance, 0.5);
  // Clearance above the plaquette's half-unit distance kills the cycle.
  EXPECT_EQ(winding_bfs(s, cs[0], Tube::make(0, 1, 0.5, 0.5), 0.6).index, 0);
}

TEST(WindingBfs, TreeHasNoIndex) {
  BoxConfig box{3, 2};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, "RL"), loop_at(lat, {1, 0, 0}, "UD"),
                         loop_at(lat, {1, 1, 0}, "LR"), loop_at(lat, {0, 1, 0}, "FB")});
  auto cs = build_clusters(s);
  ASSERT_EQ(cs.size(), 1u);
  auto cert = winding_bfs(s, cs[0], Tube::make(0, 1, 0.5, 0.5), 0.0);
  EXPECT_EQ(cert.index, 0);
  EXPECT_TRUE(cert.witness.empty());
  EXPECT_EQ(cert.sigma, 0);
}

TEST(WindingBfs, RingOfBacktracksStillWinds) {
  // Four length-2 loops whose union is the plaquette: a cluster cycle, no winding loop.
  BoxConfig box{3, 2};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, "RL"), loop_at(lat, {1, 0, 0}, "UD"),
                         loop_at(lat, {1, 1, 0}, "LR"), loop_at(lat, {0, 1, 0}, "DU")});
  auto cs = build_clusters(s);
  auto cert = winding_bfs(s, cs[0], Tube::make(0, 1, 0.5, 0.5), 0.0);
  EXPECT_EQ(cert.index, 1);
  EXPECT_EQ(cert.sigma, 0);
}

TEST(WindingBfs, DoubleHelixHasIndexTwo) {
  BoxConfig box{4, 2};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0, 0}, double_helix())});
  auto cs = build_clusters(s);
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  auto cert = winding_bfs(s, cs[0], t, 0.0);
  EXPECT_EQ(cert.index, 2);
  EXPECT_EQ(cert.sigma, 2);
  EXPECT_EQ(cert.witness.size(), 15u);
  auto oracle = brute::simple_cycle_index(lat, cs[0].edges, t, 0.0);
  EXPECT_EQ(oracle.index, 2);
  EXPECT_EQ(oracle.simple_cycles, 1);
}

TEST(WindingBfs, MixedIndicesGiveGcdWithExactWitness) {
  // A double helix plus a plaquette elsewhere on the axis: indices 2 and 1 in one cluster.
  BoxConfig box{4, 2};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0, 0}, double_helix()), loop_at(lat, {0, 0, -1, 0}, plaquette()),
                         loop_at(lat, {0, 0, -1, 0}, "FB")});
  auto cs = build_clusters(s);
  ASSERT_EQ(cs.size(), 1u);
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  auto cert = winding_bfs(s, cs[0], t, 0.0);
  EXPECT_EQ(cert.index, 1);
  EXPECT_EQ(cert.sigma, 3);
  EXPECT_FALSE(cert.simple_witness.empty());
  EXPECT_EQ(brute::simple_cycle_index(lat, cs[0].edges, t, 0.0).index, 1);
}

TEST(WindingBfs, RandomSoupsMatchSimpleCycleEnumeration) {
  BoxConfig box{3, 2};
  auto table = loop_intensity(box, suggested_lmax(box));
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  int winding = 0;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    auto s = sample_soup(table, seed);
    attach_bridges(s, default_kappa(3));
    Lattice lat(box);
    for (const auto& c : build_clusters(s)) {
      for (double clearance : {0.0, 1.0}) {
        auto cert = winding_bfs(s, c, t, clearance);
        auto oracle = brute::simple_cycle_index(lat, c.edges, t, clearance);
        EXPECT_EQ(cert.index, oracle.index) << "seed " << seed;
        EXPECT_EQ(!cert.witness.empty(), oracle.index > 0);
        winding += cert.index > 0;
      }
    }
  }
  EXPECT_GT(winding, 0);
}

TEST(WindingBfs, EmptyClusterIsDomainError) {
  BoxConfig box{3, 1};
  SoupSample s;
  s.box = box;
  EXPECT_THROW(winding_bfs(s, ClusterRecord{}, Tube::make(0, 1, 0.5, 0.5), 0.0), DomainError);
}

TEST(DetectCEps, SmallClustersAreNeverDetected) {
  BoxConfig box{3, 4};
  Lattice lat(box);
  // Plaquette: diameter 1 < 2 eps N = 4.
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, plaquette())});
  auto cs = build_clusters(s);
  EXPECT_TRUE(detect_C_eps(s, cs, tube_family(0.5, box)).empty());
}

TEST(DetectCEps, PlantedRingOfLoopsIsDetected) {
  // Frame of twelve 2x2 squares filling [-4,4]^2 minus the hole [-2,2]^2.
  BoxConfig box{3, 4};
  Lattice lat(box);
  std::vector<RWLoop> ring;
  for (int x : {-4, -2, 0, 2}) {
    for (int y : {-4, -2, 0, 2}) {
      if (x == -4 || x == 2 || y == -4 || y == 2) ring.push_back(loop_at(lat, {x, y, 0}, "RRUULLDD"));
    }
  }
  auto s = soup_of(box, ring);
  auto cs = build_clusters(s);
  ASSERT_EQ(cs.size(), 1u);
  auto family = tube_family(0.5, box);
  auto hits = detect_C_eps(s, cs, family);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_GE(cs[0].certificates.front().clearance, 1.0);
  EXPECT_TRUE(detect_B_eps(s, family).empty());
  Tube centre = Tube::make(0, 1, 0.5, 0.5);
  EXPECT_EQ(winding_bfs(s, cs[0], centre, 1.0).sigma, 0);
  auto chain = minimal_chain(s, cs[0], centre, 1.0);
  ASSERT_TRUE(chain.has_value());
  // Side squares meet diagonally at the hole's corners, so corner squares drop out.
  EXPECT_EQ(chain->links.size(), 8u);
  EXPECT_TRUE(chain->simple_ring);
  EXPECT_EQ(chain->max_loop_diameter, 2);
}

TEST(DetectBEps, BigWindingLoopAndItsCluster) {
  BoxConfig box{3, 4};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {-3, -3, 0}, "RRRRRRUUUUUULLLLLLDDDDDD"), loop_at(lat, {0, 0, 0}, plaquette())});
  auto family = tube_family(0.5, box);
  auto b = detect_B_eps(s, family);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].loop, 0);
  EXPECT_EQ(b[0].certificate.index, 1);
  EXPECT_GE(b[0].certificate.clearance, 2.0);
  auto cs = build_clusters(s);
  auto hits = detect_C_eps(s, cs, family);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(cs[hits[0]].loops, std::vector<std::int64_t>{0});
  auto chain = minimal_chain(s, cs[hits[0]], family.tubes[b[0].certificate.tube_id], 1.0);
  ASSERT_TRUE(chain.has_value());
  ASSERT_EQ(chain->links.size(), 1u);
  EXPECT_EQ(chain->links[0].id, 0);
  EXPECT_EQ(chain->max_loop_diameter, 6);
}

TEST(MinimalChain, RemovableLoopsAreDropped) {
  BoxConfig box{3, 3};
  Lattice lat(box);
  // Big plaquette ring plus a dangling loop and a second parallel route.
  auto s = soup_of(box, {loop_at(lat, {-1, -1, 0}, "RRRUUULLLDDD"), loop_at(lat, {-1, -1, 0}, "FB"),
                         loop_at(lat, {-1, -1, 0}, "RL")});
  auto cs = build_clusters(s);
  auto chain = minimal_chain(s, cs[0], Tube::make(0, 1, 0.5, 0.5), 0.0);
  ASSERT_TRUE(chain.has_value());
  ASSERT_EQ(chain->links.size(), 1u);
  EXPECT_EQ(chain->links[0].id, 0);
  EXPECT_FALSE(minimal_chain(s, cs[0], Tube::make(0, 1, 2.5, 2.5), 0.0).has_value());
}

TEST(ClusterIo, NdjsonHasOneLinePerCluster) {
  BoxConfig box{3, 2};
  Lattice lat(box);
  auto s = soup_of(box, {loop_at(lat, {0, 0, 0}, plaquette()), loop_at(lat, {-2, -2, -2}, "RL")});
  auto cs = build_clusters(s);
  for (auto& c : cs) c.certificates.push_back(winding_bfs(s, c, Tube::make(0, 1, 0.5, 0.5), 0.0));
  std::stringstream ss;
  write_clusters_ndjson(ss, lat, cs);
  std::string line;
  int n = 0, with_witness = 0;
  while (std::getline(ss, line)) {
    ++n;
    with_witness += line.find("\"witness_steps\":\"RULD\"") != std::string::npos;
  }
  EXPECT_EQ(n, 2);
  EXPECT_EQ(with_witness, 1);
}
