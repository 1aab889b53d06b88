#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "loopcycle/clusters.hpp"
#include "loopcycle/lattice.hpp"
#include "loopcycle/loop_sampler.hpp"

namespace loopcycle {

struct ExponentConfig {
  int d = 7;
  double a = 0.95;
  double b = 0.9;
  double c = 0.5;
  double alpha = 0.95;
  double beta = 0.9;
  double gamma = 0.5;
  double gamma0 = 0.6;
};

// Exact rational value, reduced, den > 0.
struct ExactValue {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  int sign() const { return (num > 0) - (num < 0); }
  std::string str() const;
  bool operator==(const ExactValue&) const = default;
};

// Decimal inputs are read as exact fractions over 10^9 before the arithmetic.
struct ExponentReport {
  ExponentConfig cfg;
  ExactValue nu1;  // (a+b)(d-2) - (d + c(d-4))
  ExactValue nu2;  // a + b - (1 + 4/(d-2))
  ExactValue nu3;  // (d-2)a + (d-4)c - d
  bool pinching_ok = false;  // nu1 > 0
  bool two_loops_ok = false;  // nu2 > 0
  bool distant_ok = false;   // nu3 > 0
  bool ordered = false;      // c < b <= a
  bool beta_ok = false;      // beta > 4/(d-2)
  bool gamma_ok = false;     // gamma > 2/(d-4)
  bool gamma0_ok = false;    // gamma0 > 2/(d-4)
  bool all_ok() const {
    return pinching_ok && two_loops_ok && distant_ok && ordered && beta_ok && gamma_ok && gamma0_ok;
  }
  std::string to_json() const;
};

// Throws DomainError when d <= 4 or an exponent lies outside (0,1].
ExponentReport check_abc_conditions(const ExponentConfig& cfg);

// Length scales N^a, N^b, N^c of a box.
struct EventScales {
  double Na = 0.0;
  double Nb = 0.0;
  double Nc = 0.0;
};
EventScales event_scales(const ExponentConfig& cfg, int N);

enum class EventKind { kPinching, kTwoMesoscopic, kDistantConnection };
std::string to_string(EventKind k);

struct EventWitness {
  EventKind kind = EventKind::kPinching;
  std::int64_t cluster = -1;        // cluster id (two-mesoscopic only)
  std::vector<std::int64_t> loops;  // loop indices into SoupSample::loops
  // Pinching: x, y. Distant connection: x, y, x', y'.
  std::vector<VertexId> points;
  // Pinching: the visit times i < j of x and y.
  std::vector<std::int64_t> times;
  bool operator==(const EventWitness&) const = default;
};

// Loops with visit times i < j such that |B(i) - B(j)| < N^c while the two
// arcs between them have L∞ diameters above N^a and N^b (in either order).
// One witness per loop: the lexicographically first (i, j).
std::vector<EventWitness> detect_pinching(const SoupSample& s, const ExponentConfig& cfg);

// Clusters holding a member loop of diameter above N^a and another above N^b.
// Witness loops: the largest member, then the largest other member.
std::vector<EventWitness> detect_two_mesoscopic(const SoupSample& s, const std::vector<ClusterRecord>& clusters,
                                                const ExponentConfig& cfg);

// Loops B of diameter >= N^a carrying two vertices x < y at distance >= N^c
// with lattice neighbours x', y' in one cluster of the soup without B. Bridge
// bits are kept; edges crossed only by B are closed. Vertices not touched by
// the remaining soup belong to no cluster. One witness per loop: the least
// (x, y) by vertex id, then the least neighbours.
std::vector<EventWitness> detect_distant_connection(const SoupSample& s, const ExponentConfig& cfg);

// CSV with header: event,seed,N,d,cluster,loops,points
void write_witnesses_csv(std::ostream& os, const Lattice& lat, std::uint64_t seed,
                         const std::vector<EventWitness>& witnesses, bool header = true);

}  // namespace loopcycle
