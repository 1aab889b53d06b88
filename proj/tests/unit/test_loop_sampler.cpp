#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "loopcycle/errors.hpp"
#include "loopcycle/loop_sampler.hpp"
#include "loopcycle/stats.hpp"
#include "support/oracles.hpp"

using namespace loopcycle;

namespace {

const LoopIntensityTable& small_table() {
  static const auto t = loop_intensity({3, 2}, suggested_lmax({3, 2}));
  return t;
}

}  // namespace

TEST(SampleSoup, LoopCountIsPoisson) {
  const auto& t = small_table();
  std::vector<std::int64_t> counts;
  std::vector<double> as_double;
  for (std::uint64_t seed = 1; seed <= 2000; ++seed) {
    auto s = sample_soup(t, seed);
    counts.push_back(static_cast<std::int64_t>(s.loops.size()));
    as_double.push_back(static_cast<double>(s.loops.size()));
  }
  auto gof = poisson_goodness_of_fit(counts, t.total_mass());
  EXPECT_GT(gof.p_value, 1e-3) << "chi2=" << gof.statistic;
  EXPECT_TRUE(dispersion_null_interval(2000, 0.999).contains(dispersion_index(as_double)));
}

TEST(SampleSoup, LengthLawMatchesIntensity) {
  const auto& t = small_table();
  std::vector<std::int64_t> observed(t.lmax() + 1, 0);
  std::int64_t total = 0;
  for (std::uint64_t seed = 1; seed <= 3000; ++seed) {
    for (const auto& loop : sample_soup(t, seed).loops) {
      ++observed[loop.length()];
      ++total;
    }
  }
  // Pearson statistic over L = 2, 4, 6 and a pooled tail.
  double chi2 = 0.0;
  double tail_expected = static_cast<double>(total);
  std::int64_t tail_observed = total;
  for (int L : {2, 4, 6}) {
    double e = total * t.mass_at_length(L) / t.total_mass();
    chi2 += std::pow(observed[L] - e, 2) / e;
    tail_expected -= e;
    tail_observed -= observed[L];
  }
  chi2 += std::pow(tail_observed - tail_expected, 2) / tail_expected;
  EXPECT_GT(chi_square_sf(chi2, 3), 1e-3);
}

TEST(SampleSoup, LoopsAreClosedNearestNeighbourWalksInTheBox) {
  const auto& t = small_table();
  Lattice lat = t.lattice();
  auto s = sample_soup(t, 99);
  for (const auto& loop : s.loops) {
    EXPECT_EQ(loop.length() % 2, 0);
    EXPECT_EQ(loop.holding.size(), loop.steps.size());
    auto verts = loop.vertices(lat);
    for (std::size_t k = 0; k < verts.size(); ++k) {
      VertexId next = k + 1 < verts.size() ? verts[k + 1] : verts[0];
      EXPECT_EQ(lat.linf_distance(verts[k], next), 1);
    }
    EXPECT_EQ(loop.diameter, lat.diameter(verts));
  }
}

TEST(SampleSoup, DeterministicInSeed) {
  const auto& t = small_table();
  auto a = sample_soup(t, 5), b = sample_soup(t, 5);
  ASSERT_EQ(a.loops.size(), b.loops.size());
  for (std::size_t k = 0; k < a.loops.size(); ++k) {
    EXPECT_EQ(a.loops[k].steps, b.loops[k].steps);
    EXPECT_EQ(a.loops[k].holding, b.loops[k].holding);
  }
  EXPECT_EQ(a.occupation, b.occupation);
}

TEST(SampleSoup, RefusesLooseTailBound) {
  auto t = loop_intensity({3, 6}, 4);
  EXPECT_THROW(sample_soup(t, 1), ResourceError);
}

TEST(SampleBridge, FirstStepMatchesDenseMatrixRatio) {
  BoxConfig box{3, 2};
  Lattice lat(box);
  auto P = oracle::killed_transition(lat);
  auto t = loop_intensity(box, 12);
  const int L = 8;
  VertexId x = lat.id(std::vector<int>{1, 0, -2});
  Eigen::MatrixXd P7 = Eigen::MatrixXd::Identity(lat.volume(), lat.volume());
  for (int k = 0; k < L - 1; ++k) P7 = P7 * P;
  double pL = (P7 * P)(x, x);
  std::vector<double> expected(6, 0.0);
  for (int dir = 0; dir < 6; ++dir) {
    VertexId y = lat.step(x, dir);
    if (y != kNoVertex) expected[dir] = P(x, y) * P7(y, x) / pL;
  }
  Rng rng = make_rng(17, Stream::kEstimator);
  const int n = 30000;
  std::vector<int> observed(6, 0);
  for (int k = 0; k < n; ++k) {
    auto steps = t.sample_bridge(x, L, rng);
    ASSERT_EQ(static_cast<int>(steps.size()), L);
    ++observed[steps[0]];
  }
  double chi2 = 0.0;
  int bins = 0;
  for (int dir = 0; dir < 6; ++dir) {
    if (expected[dir] == 0.0) {
      EXPECT_EQ(observed[dir], 0);
      continue;
    }
    chi2 += std::pow(observed[dir] - n * expected[dir], 2) / (n * expected[dir]);
    ++bins;
  }
  EXPECT_GT(chi_square_sf(chi2, bins - 1), 1e-3);
}

TEST(SampleBridge, WholePathLawOnTinyBox) {
  // On the 3x3x3 box every 4-step bridge from a corner has equal probability.
  BoxConfig box{3, 1};
  Lattice lat(box);
  auto t = loop_intensity(box, 6);
  VertexId x = lat.id(std::vector<int>{1, 1, 1});
  Rng rng = make_rng(3, Stream::kEstimator);
  std::map<std::vector<std::uint8_t>, int> freq;
  const int n = 36000;
  for (int k = 0; k < n; ++k) ++freq[t.sample_bridge(x, 4, rng)];
  // Oracle: enumerate 4-step closed walks from the corner.
  int count = 0;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      for (int c = 0; c < 6; ++c)
        for (int e = 0; e < 6; ++e) {
          VertexId v = x;
          for (int dir : {a, b, c, e}) {
            if (v != kNoVertex) v = lat.step(v, dir);
          }
          if (v == x) ++count;
        }
  ASSERT_EQ(static_cast<int>(freq.size()), count);
  double chi2 = 0.0;
  for (const auto& [path, k] : freq) chi2 += std::pow(k - double(n) / count, 2) / (double(n) / count);
  EXPECT_GT(chi_square_sf(chi2, count - 1), 1e-3);
}

TEST(SampleLargeLoops, MatchesThinnedFullSoup) {
  BoxConfig box{3, 3};
  auto t = loop_intensity(box, suggested_lmax(box));
  const double D = 4.0;
  std::vector<std::int64_t> full, large;
  for (std::uint64_t seed = 1; seed <= 1500; ++seed) {
    std::int64_t k = 0;
    for (const auto& loop : sample_soup(t, seed).loops) k += loop.diameter >= D;
    full.push_back(k);
    auto s = sample_large_loops(t, D, seed + 100000);
    for (const auto& loop : s.loops) EXPECT_GE(loop.diameter, D);
    large.push_back(static_cast<std::int64_t>(s.loops.size()));
  }
  auto r = chi_square_two_sample(full, large);
  EXPECT_GT(r.p_value, 1e-3);
}

TEST(SampleLargeLoops, CutoffBelowTwoIsDomainError) {
  EXPECT_THROW(sample_large_loops(small_table(), 1.0, 1), DomainError);
}

TEST(Occupation, MeanIsAlphaTimesGreenDiagonal) {
  BoxConfig box{3, 2};
  const auto& t = small_table();
  GreenTable g(box);
  Lattice lat(box);
  VertexId o = lat.id(std::vector<int>{0, 0, 0});
  VertexId c = lat.id(std::vector<int>{2, 2, 2});
  RunningStats so, sc;
  for (std::uint64_t seed = 1; seed <= 20000; ++seed) {
    auto s = sample_soup(t, seed);
    so.add(s.occupation[o]);
    sc.add(s.occupation[c]);
  }
  EXPECT_NEAR(so.mean(), 0.5 * g(o, o), 4 * so.sem());
  EXPECT_NEAR(sc.mean(), 0.5 * g(c, c), 4 * sc.sem());
  // Variance of phi^2/2 with phi ~ N(0, g) is g^2/2.
  EXPECT_NEAR(so.variance(), 0.5 * g(o, o) * g(o, o), 0.1 * g(o, o) * g(o, o));
}

TEST(Bridges, OnlyUncrossedEdgesAndProbabilityLaw) {
  const auto& t = small_table();
  Lattice lat = t.lattice();
  std::int64_t opened = 0;
  double expected = 0.0;
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    auto s = sample_soup(t, seed);
    attach_bridges(s, default_kappa(3));
    auto crossed = crossed_edges(lat, s.loops);
    for (EdgeId e = 0; e < lat.edge_slots(); ++e) {
      if (!lat.edge_valid(e)) {
        EXPECT_FALSE(s.bridges[e]);
        continue;
      }
      if (crossed[e]) {
        EXPECT_FALSE(s.bridges[e]);
        continue;
      }
      opened += s.bridges[e];
      expected += -std::expm1(-s.kappa * std::sqrt(s.occupation[lat.edge_lower(e)] *
                                                  s.occupation[lat.edge_upper(e)]));
    }
  }
  EXPECT_NEAR(static_cast<double>(opened), expected, 4 * std::sqrt(expected));
}

TEST(Bridges, FastBernoulliAgreesWithExactComparison) {
  Rng rng(1);
  for (int k = 0; k < 200000; ++k) {
    double t = std::ldexp(uniform01(rng), -static_cast<int>(rng() % 12)) * 4.0;
    double u = uniform01(rng);
    EXPECT_EQ(bernoulli_one_minus_exp(t, u), u < -std::expm1(-t));
  }
}

TEST(LoopIndex, ElementaryPlaquetteAroundTube) {
  Lattice lat({3, 2});
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  RWLoop loop;
  loop.root = lat.id(std::vector<int>{0, 0, 0});
  loop.steps = {0, 2, 1, 3};  // +x, +y, -x, -y
  EXPECT_EQ(loop_index(lat, loop, t), 1);
  std::reverse(loop.steps.begin(), loop.steps.end());
  for (auto& s : loop.steps) s ^= 1;
  EXPECT_EQ(loop_index(lat, loop, t), -1);
  EXPECT_EQ(loop_winding(lat, loop, t), 1);
}

TEST(LoopIo, NdjsonRoundTrip) {
  const auto& t = small_table();
  Lattice lat = t.lattice();
  auto s = sample_soup(t, 8);
  std::stringstream ss;
  write_loops_ndjson(ss, lat, s.loops);
  auto back = read_loops_ndjson(ss, lat);
  ASSERT_EQ(back.size(), s.loops.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    EXPECT_EQ(back[k].root, s.loops[k].root);
    EXPECT_EQ(back[k].steps, s.loops[k].steps);
    EXPECT_EQ(back[k].diameter, s.loops[k].diameter);
  }
}
