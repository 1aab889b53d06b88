#pragma once

#include <cstdint>
#include <vector>

#include "loopcycle/clusters.hpp"
#include "loopcycle/events.hpp"
#include "loopcycle/lattice.hpp"
#include "loopcycle/loop_sampler.hpp"

namespace brute {

using loopcycle::EdgeId;
using loopcycle::Lattice;
using loopcycle::Tube;
using loopcycle::VertexId;

struct CycleIndex {
  long long index = 0;            // smallest positive per-component gcd, 0 if none
  bool exhaustive = true;         // every simple cycle was enumerated
  std::int64_t simple_cycles = 0;  // number enumerated
  int max_rank = 0;               // largest cycle rank met
};

// Index generator of the edge set restricted to segments at distance >= clearance,
// from the windings (angle route) of simple cycles. Components of cycle rank up to
// `rank_limit` are enumerated exhaustively as Z/2 combinations of fundamental
// cycles; larger ones fall back to the fundamental cycles themselves, which span
// the same integer lattice of indices.
CycleIndex simple_cycle_index(const Lattice& lat, std::vector<EdgeId> edges, const Tube& t,
                              double clearance, int rank_limit = 18);

// Cluster label per vertex by explicit graph search (no union-find).
std::vector<std::int64_t> search_labels(const loopcycle::SoupSample& s, bool use_bridges);

// Reference event scans, written directly from the event definitions with
// full pair enumeration and a fresh graph search per candidate loop.
std::vector<loopcycle::EventWitness> pinching(const loopcycle::SoupSample& s, const loopcycle::ExponentConfig& cfg);
std::vector<loopcycle::EventWitness> two_mesoscopic(const loopcycle::SoupSample& s,
                                                    const loopcycle::ExponentConfig& cfg);
std::vector<loopcycle::EventWitness> distant_connection(const loopcycle::SoupSample& s,
                                                        const loopcycle::ExponentConfig& cfg);

}  // namespace brute
