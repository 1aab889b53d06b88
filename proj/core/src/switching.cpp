#include "loopcycle/switching.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "loopcycle/errors.hpp"
#include "loopcycle/parallel.hpp"
#include "loopcycle/rng.hpp"

namespace loopcycle {

std::vector<std::int32_t> edge_crossings(const Lattice& lat, const std::vector<RWLoop>& loops) {
  std::vector<std::int32_t> n(static_cast<std::size_t>(lat.edge_slots()), 0);
  for (const auto& loop : loops) {
    VertexId v = loop.root;
    for (auto dir : loop.steps) {
      ++n[static_cast<std::size_t>(lat.edge_of_step(v, dir))];
      v = lat.step(v, dir);
    }
  }
  return n;
}

namespace {

int step_to(const Lattice& lat, VertexId a, VertexId b) {
  for (int dir = 0; dir < 2 * lat.dim(); ++dir) {
    if (lat.step(a, dir) == b) return dir;
  }
  throw ConsistencyError("strand endpoints are not adjacent");
}

// Traversals of the affected loops plus the added ones. End 2k sits at
// from[k], end 2k+1 at to[k]; partner[] pairs ends into visits.
struct Strands {
  std::vector<VertexId> from, to;
  std::vector<char> removed;
  std::vector<std::int64_t> partner;
  std::vector<double> hold;  // holding of the visit an end belongs to

  std::int64_t add(VertexId a, VertexId b) {
    from.push_back(a);
    to.push_back(b);
    removed.push_back(0);
    partner.push_back(-1);
    partner.push_back(-1);
    hold.push_back(0.0);
    hold.push_back(0.0);
    return static_cast<std::int64_t>(from.size()) - 1;
  }
  VertexId at(std::int64_t end) const { return (end & 1) ? to[end >> 1] : from[end >> 1]; }
  void pair(std::int64_t x, std::int64_t y, double h) {
    partner[x] = y;
    partner[y] = x;
    hold[x] = hold[y] = h;
  }
};

}  // namespace

SoupSample parity_switch(const ClusterRecord& c, const SoupSample& s, const Tube& t) {
  const WindingCertificate* cert = nullptr;
  for (const auto& w : c.certificates) {
    if (w.tube == t && w.index > 0 && w.witness.size() > 1) cert = &w;
  }
  if (!cert) throw PreconditionError("parity_switch needs a winding certificate with witness for the tube");
  Lattice lat(s.box);

  // Edges carried an odd number of times by the witness walk.
  std::map<EdgeId, int> mult;
  for (std::size_t k = 0; k + 1 < cert->witness.size(); ++k) {
    VertexId a = cert->witness[k], b = cert->witness[k + 1];
    ++mult[lat.edge_of_step(a, step_to(lat, a, b))];
  }
  std::vector<EdgeId> gamma;
  for (auto [e, m] : mult) {
    if (m & 1) gamma.push_back(e);
  }

  // First traversal (least loop, then time) of each gamma edge.
  std::map<EdgeId, std::pair<std::size_t, std::size_t>> first;
  {
    std::set<EdgeId> want(gamma.begin(), gamma.end());
    for (std::size_t l = 0; l < s.loops.size() && first.size() < want.size(); ++l) {
      VertexId v = s.loops[l].root;
      for (std::size_t k = 0; k < s.loops[l].steps.size(); ++k) {
        int dir = s.loops[l].steps[k];
        EdgeId e = lat.edge_of_step(v, dir);
        if (want.count(e)) first.try_emplace(e, l, k);
        v = lat.step(v, dir);
      }
    }
  }

  std::set<std::size_t> affected;
  for (auto& [e, lk] : first) affected.insert(lk.first);

  Strands st;
  std::map<std::pair<std::size_t, std::size_t>, std::int64_t> trav_of;
  for (std::size_t l : affected) {
    const auto& loop = s.loops[l];
    auto verts = loop.vertices(lat);
    const std::size_t L = verts.size();
    std::int64_t base = static_cast<std::int64_t>(st.from.size());
    for (std::size_t k = 0; k < L; ++k) {
      std::int64_t id = st.add(verts[k], verts[(k + 1) % L]);
      trav_of[{l, k}] = id;
    }
    for (std::size_t k = 0; k < L; ++k) {
      std::int64_t prev = base + static_cast<std::int64_t>((k + L - 1) % L);
      std::int64_t cur = base + static_cast<std::int64_t>(k);
      st.pair(2 * prev + 1, 2 * cur, loop.holding.empty() ? 0.0 : loop.holding[k]);
    }
  }

  SoupSample out = s;
  if (out.bridges.empty()) out.bridges.assign(static_cast<std::size_t>(lat.edge_slots()), false);
  auto counts = edge_crossings(lat, s.loops);
  std::map<VertexId, std::vector<std::pair<std::int64_t, double>>> free_ends;
  std::map<VertexId, double> pending;
  std::vector<std::int64_t> removed;
  for (EdgeId e : gamma) {
    auto it = first.find(e);
    if (it != first.end()) {
      std::int64_t tr = trav_of.at(it->second);
      st.removed[tr] = 1;
      removed.push_back(tr);
      if (--counts[e] == 0) out.bridges[e] = true;
    } else {
      std::int64_t tr = st.add(lat.edge_lower(e), lat.edge_upper(e));
      free_ends[st.from[tr]].push_back({2 * tr, 0.0});
      free_ends[st.to[tr]].push_back({2 * tr + 1, 0.0});
      ++counts[e];
      out.bridges[e] = false;
    }
  }
  for (std::int64_t tr : removed) {
    for (std::int64_t x : {2 * tr, 2 * tr + 1}) {
      std::int64_t p = st.partner[x];
      const VertexId v = st.at(x);
      if (st.removed[p >> 1]) {
        if (x < p) pending[v] += st.hold[x];  // the whole visit is gone
      } else {
        free_ends[v].push_back({p, st.hold[x]});
        st.partner[p] = -1;
      }
    }
  }

  // Re-pair free ends vertex by vertex in strand-id order.
  for (auto& [v, ends] : free_ends) {
    if (ends.size() % 2) throw ConsistencyError("odd number of free strand ends");
    std::sort(ends.begin(), ends.end());
    double extra = pending.count(v) ? std::exchange(pending[v], 0.0) : 0.0;
    for (std::size_t k = 0; k < ends.size(); k += 2) {
      double h = ends[k].second + ends[k + 1].second + extra;
      extra = 0.0;
      if (h == 0.0 && !out.stationary.empty() && out.stationary[v] > 0.0) {
        h = 0.5 * out.stationary[v];
        out.stationary[v] -= h;
      }
      st.pair(ends[k].first, ends[k + 1].first, h);
    }
  }
  for (auto [v, h] : pending) {
    if (h > 0.0 && !out.stationary.empty()) out.stationary[v] += h;
  }

  // Retrace closed walks through the surviving strands.
  std::vector<RWLoop> traced;
  std::vector<char> used(st.from.size(), 0);
  const bool with_holding = std::any_of(s.loops.begin(), s.loops.end(), [](const RWLoop& l) { return !l.holding.empty(); });
  for (std::size_t tr0 = 0; tr0 < st.from.size(); ++tr0) {
    if (st.removed[tr0] || used[tr0]) continue;
    RWLoop loop;
    const std::int64_t start = 2 * static_cast<std::int64_t>(tr0);
    loop.root = st.at(start);
    std::int64_t end = start;
    do {
      std::int64_t tr = end >> 1;
      if (used[tr]) throw ConsistencyError("strand reused while retracing");
      used[tr] = 1;
      if (with_holding) loop.holding.push_back(st.hold[end]);
      std::int64_t other = end ^ 1;
      loop.steps.push_back(static_cast<std::uint8_t>(step_to(lat, st.at(end), st.at(other))));
      end = st.partner[other];
      if (end < 0) throw ConsistencyError("dangling strand end");
    } while (end != start);
    loop.diameter = walk_diameter(lat, loop.root, loop.steps);
    traced.push_back(std::move(loop));
  }

  out.loops.clear();
  std::int64_t next_id = 0;
  for (const auto& l : s.loops) next_id = std::max(next_id, l.id + 1);
  for (std::size_t l = 0; l < s.loops.size(); ++l) {
    if (!affected.count(l)) out.loops.push_back(s.loops[l]);
  }
  for (auto& l : traced) {
    l.id = next_id++;
    out.loops.push_back(std::move(l));
  }
  if (!out.occupation.empty()) out.occupation = occupation_field(lat, out.loops, out.stationary);
  return out;
}

std::vector<DecileStat> SwitchStat::by_size_decile(double confidence) const {
  std::vector<std::int64_t> sizes;
  for (const auto& r : records) sizes.push_back(r.size);
  std::sort(sizes.begin(), sizes.end());
  std::vector<DecileStat> out;
  if (sizes.empty()) return out;
  std::vector<std::int64_t> cuts;
  for (int k = 1; k < 10; ++k) {
    std::int64_t c = sizes[sizes.size() * k / 10];
    if (c > sizes.front() && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
  }
  out.resize(cuts.size() + 1);
  for (std::size_t g = 0; g < out.size(); ++g) {
    out[g].min_size = g == 0 ? sizes.front() : cuts[g - 1];
    out[g].max_size = g == cuts.size() ? sizes.back() : cuts[g] - 1;
  }
  for (const auto& r : records) {
    std::size_t g = std::upper_bound(cuts.begin(), cuts.end(), r.size) - cuts.begin();
    ++out[g].n;
    out[g].even += r.parity == 0;
  }
  for (auto& d : out) d.ci = wilson_interval(d.even, d.n, confidence);
  return out;
}

TestResult SwitchStat::decile_homogeneity() const {
  auto groups = by_size_decile();
  TestResult r;
  if (groups.size() < 2 || n() == 0) return r;
  const double p = even_frequency();
  for (const auto& g : groups) {
    double e_even = p * static_cast<double>(g.n), e_odd = (1.0 - p) * static_cast<double>(g.n);
    if (e_even > 0) r.statistic += (g.even - e_even) * (g.even - e_even) / e_even;
    if (e_odd > 0) r.statistic += ((g.n - g.even) - e_odd) * ((g.n - g.even) - e_odd) / e_odd;
  }
  r.dof = static_cast<double>(groups.size() - 1);
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

std::string SwitchStat::to_json() const {
  nlohmann::ordered_json j;
  j["tube_id"] = tube_id;
  j["tube"] = nlohmann::json::parse(loopcycle::to_json(tube));
  j["clearance_min"] = clearance_min;
  j["replicas"] = replicas;
  j["winding_clusters"] = n();
  j["even"] = even;
  j["odd"] = odd;
  j["even_frequency"] = even_frequency();
  auto ci = wilson();
  j["wilson95"] = {ci.lo, ci.hi};
  nlohmann::ordered_json dec = nlohmann::ordered_json::array();
  for (const auto& g : by_size_decile()) {
    dec.push_back({{"min_size", g.min_size}, {"max_size", g.max_size}, {"n", g.n}, {"even", g.even},
                   {"wilson95", {g.ci.lo, g.ci.hi}}});
  }
  j["size_deciles"] = dec;
  auto h = decile_homogeneity();
  j["decile_homogeneity"] = {{"chi2", h.statistic}, {"dof", h.dof}, {"p_value", h.p_value}};
  return j.dump();
}

SwitchStat switching_experiment(const BoxConfig& box, const Tube& tube, double eps, std::int64_t replicas,
                                std::uint64_t seed, const SwitchOptions& opt) {
  validate(box);
  validate(tube, box.d);
  if (!(eps >= 0.0)) throw DomainError("eps must be >= 0");
  Lattice lat(box);
  const auto table = loop_intensity(box, suggested_lmax(box));
  const double kappa = opt.kappa < 0 ? default_kappa(box.d) : opt.kappa;
  SwitchStat stat;
  stat.tube = tube;
  stat.clearance_min = eps * box.N / 2.0;
  stat.replicas = replicas;
  auto per = run_replicas(replicas, opt.threads, [&](std::int64_t r) {
    std::vector<SwitchRecord> recs;
    auto s = sample_soup(table, replica_seed(seed, static_cast<std::uint64_t>(r)));
    attach_bridges(s, kappa);
    for (const auto& c : build_clusters(s)) {
      CycleGraph cg(lat, c.edges);
      if (cg.acyclic() || !cg.may_wind(tube, stat.clearance_min)) continue;
      auto cert = cg.certify(tube, stat.clearance_min, false);
      if (cert.index <= 0) continue;
      SwitchRecord rec;
      rec.replica = r;
      rec.cluster = c.id;
      rec.size = static_cast<std::int64_t>(c.vertices.size());
      rec.index = cert.index;
      for (std::int64_t l : c.loops) rec.sigma += loop_winding(lat, s.loops[l], tube);
      if (rec.sigma % rec.index != 0) throw ConsistencyError("member loop index not a multiple of i");
      rec.parity = static_cast<int>((rec.sigma / rec.index) % 2);
      recs.push_back(rec);
    }
    return recs;
  });
  for (auto& recs : per) {
    for (auto& rec : recs) {
      (rec.parity ? stat.odd : stat.even) += 1;
      stat.records.push_back(rec);
    }
  }
  return stat;
}

}  // namespace loopcycle
