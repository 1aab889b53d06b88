#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "loopcycle/errors.hpp"
#include "loopcycle/lattice.hpp"
#include "support/oracles.hpp"

using namespace loopcycle;

namespace {

std::vector<Point> square(int x0, int y0, int d, bool ccw = true) {
  auto pt = [&](int x, int y) {
    std::vector<int> c(d, 0);
    c[0] = x;
    c[1] = y;
    return Point(c);
  };
  std::vector<Point> p = {pt(x0, y0), pt(x0 + 1, y0), pt(x0 + 1, y0 + 1), pt(x0, y0 + 1), pt(x0, y0)};
  if (!ccw) std::reverse(p.begin(), p.end());
  return p;
}

}  // namespace

TEST(Neighbors, CornerHasDNeighbors) {
  EXPECT_EQ(neighbors(Point{1, 1, 1}, {3, 1}).size(), 3u);
}

TEST(Neighbors, InteriorHasTwoDNeighbors) {
  EXPECT_EQ(neighbors(Point{0, 0, 0}, {3, 2}).size(), 6u);
  EXPECT_EQ(neighbors(Point(std::vector<int>(7, 0)), {7, 1}).size(), 14u);
}

TEST(Neighbors, OutsidePointIsDomainError) {
  EXPECT_THROW(neighbors(Point{2, 0, 0}, {3, 1}), DomainError);
}

TEST(Lattice, IdRoundTripAndSteps) {
  Lattice lat({4, 2});
  for (VertexId v = 0; v < lat.volume(); ++v) {
    auto c = lat.coords(v);
    EXPECT_EQ(lat.id(c), v);
    for (int dir = 0; dir < 8; ++dir) {
      VertexId w = lat.step(v, dir);
      auto c2 = c;
      c2[dir_axis(dir)] += dir_sign(dir);
      if (lat.contains(c2)) {
        EXPECT_EQ(w, lat.id(c2));
        EdgeId e = lat.edge_of_step(v, dir);
        EXPECT_TRUE(lat.edge_valid(e));
        EXPECT_EQ(lat.edge_of_step(w, dir_opposite(dir)), e);
      } else {
        EXPECT_EQ(w, kNoVertex);
      }
    }
  }
}

TEST(Lattice, BoxValidation) {
  EXPECT_THROW(validate(BoxConfig{2, 3}), DomainError);
  EXPECT_THROW(validate(BoxConfig{3, -1}), DomainError);
  EXPECT_THROW(validate(BoxConfig{40, 1000}), DomainError);
  EXPECT_EQ(vertex_count({7, 5}), 19487171);
}

TEST(DistToTube, PlanarDistance) {
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(dist_to_tube(Point{3, 4, 0}, t), std::sqrt(2.5 * 2.5 + 3.5 * 3.5));
}

TEST(DistToTube, InvariantUnderOffPlaneTranslation) {
  Tube t = Tube::make(1, 3, -1.5, 2.5);
  Point a{1, 2, 3, 4, 5};
  Point b{1, 2, -3, 4, -5};
  EXPECT_DOUBLE_EQ(dist_to_tube(a, t), dist_to_tube(b, t));
}

TEST(DistToTube, LatticeVerticesKeepHalfDiagonalClearance) {
  Lattice lat({3, 3});
  auto fam = tube_family(0.5, lat.box());
  for (const auto& t : fam.tubes) {
    for (VertexId v = 0; v < lat.volume(); v += 7) EXPECT_GE(dist_to_tube(lat, v, t), std::sqrt(0.5) - 1e-15);
  }
}

TEST(DistToTube, EdgeClearanceIsSegmentDistance) {
  Lattice lat({3, 3});
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  // Edge from (0,0,0) to (1,0,0) passes at distance 0.5 below the anchor.
  EXPECT_DOUBLE_EQ(edge_clearance(lat, lat.id(std::vector<int>{0, 0, 0}), make_dir(0, 1), t), 0.5);
  // Off-plane edge keeps the vertex distance.
  EXPECT_DOUBLE_EQ(edge_clearance(lat, lat.id(std::vector<int>{2, 0, 0}), make_dir(2, 1), t),
                   std::hypot(1.5, 0.5));
  // Edge from (2,3,0) to (2,2,0): closest point (2,2).
  EXPECT_DOUBLE_EQ(edge_clearance(lat, lat.id(std::vector<int>{2, 3, 0}), make_dir(1, -1), t),
                   std::hypot(1.5, 1.5));
}

TEST(WindingIncrement, QuarterTurnMatchesAngleSumOracle) {
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  double w = winding_increment(Point{1, 0, 0}, Point{1, 1, 0}, t);
  double oracle_value = oracle::angle_sum_turns(0.5, -0.5, 0.5, 0.5);
  EXPECT_NEAR(oracle_value, 0.25, 1e-12);
  EXPECT_NEAR(w, oracle_value, 1e-12);
}

TEST(WindingIncrement, RandomStepsMatchAngleSumOracle) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> coord(-5, 5), axis(0, 3), tw(-5, 4);
  for (int rep = 0; rep < 500; ++rep) {
    Tube t{0, 2, 2 * tw(rng) + 1, 2 * tw(rng) + 1};
    std::vector<int> a = {coord(rng), coord(rng), coord(rng), coord(rng)};
    auto b = a;
    b[axis(rng)] += (rng() & 1) ? 1 : -1;
    double w = winding_increment(Point(a), Point(b), t);
    double o = oracle::angle_sum_turns(a[0] - t.u(), a[2] - t.v(), b[0] - t.u(), b[2] - t.v());
    EXPECT_NEAR(w, o, 1e-9);
    EXPECT_LT(std::abs(w), 0.5);
  }
}

TEST(WindingIncrement, OffPlaneStepIsZeroAndReversalNegates) {
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  EXPECT_EQ(winding_increment(Point{2, 3, 0}, Point{2, 3, 1}, t), 0.0);
  EXPECT_DOUBLE_EQ(winding_increment(Point{2, 3, 0}, Point{2, 2, 0}, t),
                   -winding_increment(Point{2, 2, 0}, Point{2, 3, 0}, t));
}

TEST(WindingIncrement, NonAdjacentIsDomainError) {
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  EXPECT_THROW(winding_increment(Point{0, 0, 0}, Point{1, 1, 0}, t), DomainError);
  EXPECT_THROW(winding_increment(Point{0, 0, 0}, Point{2, 0, 0}, t), DomainError);
}

TEST(WindingIncrement, CablePointsOnOneEdge) {
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  Point a({1, 0, 0}, CablePosition{1, 0.25});
  Point b({1, 0, 0}, CablePosition{1, 0.75});
  double o = oracle::angle_sum_turns(0.5, -0.25, 0.5, 0.25);
  EXPECT_NEAR(winding_increment(a, b, t), o, 1e-12);
}

TEST(PathWinding, ElementarySquare) {
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  EXPECT_EQ(path_winding(square(0, 0, 3), t), 1);
  EXPECT_EQ(path_winding(square(0, 0, 3, false), t), -1);
  EXPECT_EQ(path_winding(square(2, 2, 3), t), 0);
}

TEST(PathWinding, DoubleTraversalAdds) {
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  auto p = square(0, 0, 3);
  auto q = p;
  q.insert(q.end(), p.begin() + 1, p.end());
  EXPECT_EQ(path_winding(q, t), 2);
}

TEST(PathWinding, OpenPathIsDomainError) {
  Tube t = Tube::make(0, 1, 0.5, 0.5);
  auto p = square(0, 0, 3);
  p.pop_back();
  EXPECT_THROW(path_winding(p, t), DomainError);
}

TEST(PathWinding, RandomClosedWalksAgreeWithExactCrossings) {
  Lattice lat({3, 6});
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    Tube t{rep % 2, 2, 2 * static_cast<int>(rng() % 7) - 7, 2 * static_cast<int>(rng() % 7) - 7};
    // Random walk, then retrace it backwards through a random closing route.
    std::vector<std::uint8_t> dirs;
    std::vector<int> c = {0, 0, 0};
    for (int k = 0; k < 60; ++k) {
      int dir = static_cast<int>(rng() % 6);
      c[dir_axis(dir)] += dir_sign(dir);
      if (!lat.contains(c)) {
        c[dir_axis(dir)] -= dir_sign(dir);
        continue;
      }
      dirs.push_back(static_cast<std::uint8_t>(dir));
    }
    for (int axis : {2, 0, 1}) {
      while (c[axis] != 0) {
        int s = c[axis] > 0 ? -1 : 1;
        dirs.push_back(static_cast<std::uint8_t>(make_dir(axis, s)));
        c[axis] += s;
      }
    }
    VertexId start = lat.id(std::vector<int>{0, 0, 0});
    auto verts = walk_vertices(lat, start, dirs);
    std::vector<Point> path;
    for (auto v : verts) path.push_back(lat.point(v));
    path.push_back(lat.point(start));
    int w = path_winding(path, t);
    EXPECT_EQ(w, closed_walk_index(lat, start, dirs, t));
    // Rotation invariance.
    std::vector<Point> rot(path.begin() + 5, path.end() - 1);
    rot.insert(rot.end(), path.begin(), path.begin() + 6);
    EXPECT_EQ(path_winding(rot, t), w);
    std::vector<Point> rev(path.rbegin(), path.rend());
    EXPECT_EQ(path_winding(rev, t), -w);
  }
}

TEST(TubeFamily, PitchAndCountFromFormula) {
  auto f = tube_family(0.5, {3, 4});
  // eps*N/4 = 0.5, so the pitch is one lattice unit: anchors -3.5..3.5.
  EXPECT_EQ(f.pitch, 1);
  EXPECT_EQ(f.tubes.size(), 3u * 8u * 8u);
  EXPECT_EQ(tube_family_size(0.5, {3, 4}), 192);
  for (const auto& t : f.tubes) {
    EXPECT_NO_THROW(validate(t, 3));
    EXPECT_LE(std::abs(t.u()), 3.5);
  }
}

TEST(TubeFamily, NonEmptyNearOne) {
  auto f = tube_family(0.99, {4, 2});
  EXPECT_EQ(f.tubes.size(), static_cast<std::size_t>(tube_family_size(0.99, {4, 2})));
  EXPECT_GE(f.tubes.size(), 6u);
}

TEST(TubeFamily, SizeScalesLikeInverseEpsSquared) {
  BoxConfig box{3, 400};
  for (double eps : {0.8, 0.4, 0.2, 0.1}) {
    double per_pair = static_cast<double>(tube_family_size(eps, box)) / 3.0;
    // Grid-count oracle: (floor((2N-1)/p)+1)^2 with p = floor(eps N / 4) ~ 64/eps^2.
    int p = static_cast<int>(std::floor(eps * 400 / 4));
    double expected = std::pow((2 * 400 - 1) / p + 1, 2);
    EXPECT_DOUBLE_EQ(per_pair, expected);
    EXPECT_GT(per_pair * eps * eps, 50.0);
    EXPECT_LT(per_pair * eps * eps, 80.0);
  }
}

TEST(TubeFamily, EpsOutsideUnitIntervalIsDomainError) {
  EXPECT_THROW(tube_family(0.0, {3, 2}), DomainError);
  EXPECT_THROW(tube_family(1.0, {3, 2}), DomainError);
}

TEST(TubeJson, Format) {
  EXPECT_EQ(to_json(Tube::make(0, 1, 0.5, -1.5)), "{\"axes\":[0,1],\"anchor\":[0.5,-1.5]}");
  EXPECT_THROW(Tube::make(0, 1, 0.0, 0.5), DomainError);
}

TEST(Hausdorff, Examples) {
  std::vector<Point> a = {Point{0, 0, 0}};
  std::vector<Point> b = {Point{3, 4, 0}};
  EXPECT_DOUBLE_EQ(hausdorff_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(hausdorff_distance(a, b), 5.0);
  std::vector<Point> empty;
  EXPECT_THROW(hausdorff_distance(a, empty), DomainError);
}

TEST(Hausdorff, AddedFarPointMatchesBruteForce) {
  std::vector<Point> A = {Point{0, 0, 0}, Point{1, 0, 0}, Point{1, 1, 0}, Point{0, 2, 1}};
  std::vector<Point> B = A;
  B.push_back(Point{8, 0, 0});  // nearest point of A is (1,0,0) at distance 7
  double brute = 0.0;
  for (const auto& p : B) {
    double m = 1e9;
    for (const auto& q : A) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += std::pow(p.coords[k] - q.coords[k], 2);
      m = std::min(m, std::sqrt(s));
    }
    brute = std::max(brute, m);
  }
  EXPECT_DOUBLE_EQ(brute, 7.0);
  EXPECT_DOUBLE_EQ(hausdorff_distance(A, B), brute);
}

TEST(StepLetters, RoundTrip) {
  std::vector<std::uint8_t> dirs;
  for (int dir = 0; dir < 14; ++dir) dirs.push_back(static_cast<std::uint8_t>(dir));
  std::string s = encode_steps(dirs);
  EXPECT_EQ(s.substr(0, 6), "RLUDFB");
  EXPECT_EQ(decode_steps(s, 7), dirs);
  EXPECT_THROW(decode_steps("G", 3), DomainError);
}
