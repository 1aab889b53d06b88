#pragma once

#include <string>
#include <vector>

#include "loopcycle/lattice.hpp"
#include "loopcycle/loop_sampler.hpp"

namespace fixture {

// Loop from a root and a step string (R/L, U/D, F/B, then G/g, H/h, ...).
inline loopcycle::RWLoop loop_at(const loopcycle::Lattice& lat, std::vector<int> root, const std::string& steps) {
  loopcycle::RWLoop loop;
  loop.root = lat.id(root);
  loop.steps = loopcycle::decode_steps(steps, lat.dim());
  loop.holding.assign(loop.steps.size(), 1.0);
  loop.diameter = loopcycle::walk_diameter(lat, loop.root, loop.steps);
  return loop;
}

inline loopcycle::SoupSample soup_of(loopcycle::BoxConfig box, std::vector<loopcycle::RWLoop> loops) {
  loopcycle::SoupSample s;
  s.box = box;
  for (std::size_t k = 0; k < loops.size(); ++k) loops[k].id = static_cast<std::int64_t>(k);
  s.loops = std::move(loops);
  loopcycle::Lattice lat(box);
  s.stationary.assign(static_cast<std::size_t>(lat.volume()), 0.5);
  s.occupation = loopcycle::occupation_field(lat, s.loops, s.stationary);
  return s;
}

}  // namespace fixture
