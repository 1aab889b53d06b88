#include "loopcycle/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "loopcycle/errors.hpp"
#include "loopcycle/union_find.hpp"

namespace loopcycle {

std::string to_string(ClusterTag tag) {
  switch (tag) {
    case ClusterTag::kType1: return "type1";
    case ClusterTag::kType2: return "type2";
    case ClusterTag::kNeither: return "neither";
    default: return "unclassified";
  }
}

const WindingCertificate* ClusterRecord::certificate_for(int tube_id) const {
  for (const auto& c : certificates) {
    if (c.tube_id == tube_id) return &c;
  }
  return nullptr;
}

namespace {

constexpr double kClearanceSlack = 1e-9;

UnionFind soup_union_find(const Lattice& lat, const SoupSample& s, bool use_bridges,
                          std::vector<std::uint8_t>* touched) {
  UnionFind uf(lat.volume());
  if (touched) touched->assign(static_cast<std::size_t>(lat.volume()), 0);
  for (const auto& loop : s.loops) {
    VertexId v = loop.root;
    for (auto dir : loop.steps) {
      VertexId w = v + dir_sign(dir) * lat.stride(dir_axis(dir));
      uf.unite(static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(w));
      if (touched) (*touched)[static_cast<std::size_t>(v)] = 1;
      v = w;
    }
  }
  if (use_bridges && s.has_bridges()) {
    for (std::size_t e = 0; e < s.bridges.size(); ++e) {
      if (!s.bridges[e]) continue;
      VertexId a = lat.edge_lower(static_cast<EdgeId>(e));
      VertexId b = lat.edge_upper(static_cast<EdgeId>(e));
      uf.unite(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
      if (touched) {
        (*touched)[static_cast<std::size_t>(a)] = 1;
        (*touched)[static_cast<std::size_t>(b)] = 1;
      }
    }
  }
  return uf;
}

int step_between(const Lattice& lat, VertexId a, VertexId b) {
  for (int dir = 0; dir < 2 * lat.dim(); ++dir) {
    if (lat.step(a, dir) == b) return dir;
  }
  throw ConsistencyError("witness vertices are not adjacent");
}

long long walk_voltage(const Lattice& lat, const std::vector<VertexId>& closed, const Tube& t) {
  long long w = 0;
  for (std::size_t k = 0; k + 1 < closed.size(); ++k) {
    w += crossing_voltage(lat, closed[k], step_between(lat, closed[k], closed[k + 1]), t);
  }
  return w;
}

long long loop_sigma(const SoupSample& s, const Lattice& lat, const std::vector<std::int64_t>& loops,
                     const Tube& t) {
  long long sigma = 0;
  for (auto id : loops) sigma += loop_winding(lat, s.loops[static_cast<std::size_t>(id)], t);
  return sigma;
}

// Removes immediate backtracks, including those across the base point.
std::vector<VertexId> cyclically_reduce(const std::vector<VertexId>& closed) {
  std::vector<VertexId> st;
  for (VertexId v : closed) {
    if (st.size() >= 2 && st[st.size() - 2] == v) {
      st.pop_back();
    } else {
      st.push_back(v);
    }
  }
  while (st.size() >= 3 && st[1] == st[st.size() - 2]) {
    st.pop_back();
    st.erase(st.begin());
  }
  return st;
}

std::vector<VertexId> first_winding_simple_cycle(const Lattice& lat, const std::vector<VertexId>& closed,
                                                 const Tube& t) {
  std::vector<VertexId> stack;
  std::unordered_map<VertexId, std::size_t> pos;
  for (VertexId v : closed) {
    auto it = pos.find(v);
    if (it == pos.end()) {
      pos[v] = stack.size();
      stack.push_back(v);
      continue;
    }
    std::vector<VertexId> sub(stack.begin() + static_cast<std::ptrdiff_t>(it->second), stack.end());
    sub.push_back(v);
    for (std::size_t k = it->second + 1; k < stack.size(); ++k) pos.erase(stack[k]);
    stack.resize(it->second + 1);
    if (sub.size() > 3 && walk_voltage(lat, sub, t) != 0) return sub;
  }
  return {};
}

}  // namespace

std::vector<std::uint32_t> cluster_labels(const SoupSample& s, bool use_bridges) {
  Lattice lat(s.box);
  return soup_union_find(lat, s, use_bridges, nullptr).labels();
}

std::int64_t cluster_count(const SoupSample& s, bool use_bridges) {
  Lattice lat(s.box);
  return soup_union_find(lat, s, use_bridges, nullptr).set_count();
}

std::vector<EdgeId> loop_edges(const Lattice& lat, const RWLoop& loop) {
  std::vector<EdgeId> edges;
  edges.reserve(loop.steps.size());
  VertexId v = loop.root;
  for (auto dir : loop.steps) {
    edges.push_back(lat.edge_of_step(v, dir));
    v += dir_sign(dir) * lat.stride(dir_axis(dir));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<ClusterRecord> build_clusters(const SoupSample& s, const ClusterOptions& opt) {
  Lattice lat(s.box);
  const int d = lat.dim();
  const bool bridges = opt.use_bridges && s.has_bridges();
  std::vector<std::uint8_t> touched;
  UnionFind uf = soup_union_find(lat, s, bridges, &touched);
  std::vector<std::uint32_t> label = uf.labels();
  const std::size_t V = static_cast<std::size_t>(lat.volume());

  // Component sizes over touched vertices, then boxes for the big enough ones.
  std::vector<std::uint32_t> size(V, 0);
  for (std::size_t v = 0; v < V; ++v) size[label[v]] += touched[v];
  const std::uint32_t min_size = static_cast<std::uint32_t>(std::max(2, opt.min_diameter + 1));
  std::unordered_map<std::uint32_t, std::size_t> slot;
  std::vector<ClusterRecord> recs;
  for (std::size_t v = 0; v < V; ++v) {
    if (!touched[v] || size[label[v]] < min_size) continue;
    auto [it, fresh] = slot.try_emplace(label[v], recs.size());
    if (fresh) {
      ClusterRecord r;
      r.lo.assign(d, lat.half_side());
      r.hi.assign(d, -lat.half_side());
      recs.push_back(std::move(r));
    }
    ClusterRecord& r = recs[it->second];
    for (int k = 0; k < d; ++k) {
      int x = lat.coord(static_cast<VertexId>(v), k);
      r.lo[k] = std::min(r.lo[k], x);
      r.hi[k] = std::max(r.hi[k], x);
    }
  }
  std::vector<char> keep(recs.size(), 0);
  for (std::size_t k = 0; k < recs.size(); ++k) {
    int diam = 0;
    for (int a = 0; a < d; ++a) diam = std::max(diam, recs[k].hi[a] - recs[k].lo[a]);
    recs[k].diameter = diam;
    keep[k] = diam >= opt.min_diameter;
  }
  auto slot_of = [&](VertexId v) -> long long {
    auto it = slot.find(label[static_cast<std::size_t>(v)]);
    if (it == slot.end() || !keep[it->second]) return -1;
    return static_cast<long long>(it->second);
  };
  for (std::size_t v = 0; v < V; ++v) {
    if (!touched[v]) continue;
    long long k = slot_of(static_cast<VertexId>(v));
    if (k >= 0) recs[static_cast<std::size_t>(k)].vertices.push_back(static_cast<VertexId>(v));
  }
  for (std::size_t id = 0; id < s.loops.size(); ++id) {
    const auto& loop = s.loops[id];
    long long k = slot_of(loop.root);
    if (k < 0) continue;
    auto& r = recs[static_cast<std::size_t>(k)];
    r.loops.push_back(static_cast<std::int64_t>(id));
    VertexId v = loop.root;
    for (auto dir : loop.steps) {
      r.edges.push_back(lat.edge_of_step(v, dir));
      v += dir_sign(dir) * lat.stride(dir_axis(dir));
    }
  }
  if (bridges) {
    for (std::size_t e = 0; e < s.bridges.size(); ++e) {
      if (!s.bridges[e]) continue;
      long long k = slot_of(lat.edge_lower(static_cast<EdgeId>(e)));
      if (k >= 0) recs[static_cast<std::size_t>(k)].edges.push_back(static_cast<EdgeId>(e));
    }
  }
  std::vector<ClusterRecord> out;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    if (!keep[k]) continue;
    auto& e = recs[k].edges;
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    out.push_back(std::move(recs[k]));
  }
  std::sort(out.begin(), out.end(), [](const ClusterRecord& a, const ClusterRecord& b) {
    if (a.diameter != b.diameter) return a.diameter > b.diameter;
    return a.vertices.front() < b.vertices.front();
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].id = static_cast<std::int64_t>(k);
  return out;
}

CycleGraph::CycleGraph(const Lattice& lat, std::vector<EdgeId> edges) : lat_(&lat) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<VertexId> verts;
  verts.reserve(2 * edges.size());
  for (EdgeId e : edges) {
    verts.push_back(lat.edge_lower(e));
    verts.push_back(lat.edge_upper(e));
  }
  std::sort(verts.begin(), verts.end());
  verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
  auto local = [&](VertexId v) {
    return static_cast<std::int32_t>(std::lower_bound(verts.begin(), verts.end(), v) - verts.begin());
  };
  const std::size_t n = verts.size();
  std::vector<std::vector<std::pair<std::uint8_t, std::int32_t>>> nb(n);
  for (EdgeId e : edges) {
    int axis = lat.edge_axis(e);
    auto a = local(lat.edge_lower(e)), b = local(lat.edge_upper(e));
    nb[a].push_back({static_cast<std::uint8_t>(make_dir(axis, 1)), b});
    nb[b].push_back({static_cast<std::uint8_t>(make_dir(axis, -1)), a});
  }
  // Peel to the 2-core: trees carry no cycles.
  std::vector<int> deg(n);
  std::vector<char> alive(n, 1);
  std::vector<std::int32_t> leaves;
  for (std::size_t v = 0; v < n; ++v) {
    deg[v] = static_cast<int>(nb[v].size());
    if (deg[v] <= 1) leaves.push_back(static_cast<std::int32_t>(v));
  }
  while (!leaves.empty()) {
    auto v = leaves.back();
    leaves.pop_back();
    if (!alive[v]) continue;
    alive[v] = 0;
    for (auto [dir, w] : nb[v]) {
      if (alive[w] && --deg[w] <= 1) leaves.push_back(w);
    }
  }
  std::vector<std::int32_t> remap(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    if (alive[v]) {
      remap[v] = static_cast<std::int32_t>(vertices_.size());
      vertices_.push_back(verts[v]);
    }
  }
  const int d = lat.dim();
  lo_.assign(d, lat.half_side());
  hi_.assign(d, -lat.half_side());
  offset_.push_back(0);
  for (std::size_t v = 0; v < n; ++v) {
    if (!alive[v]) continue;
    auto list = nb[v];
    std::sort(list.begin(), list.end());
    for (auto [dir, w] : list) {
      if (!alive[w]) continue;
      adj_.push_back(remap[w]);
      dir_.push_back(dir);
    }
    offset_.push_back(static_cast<std::int64_t>(adj_.size()));
    for (int k = 0; k < d; ++k) {
      int x = lat.coord(verts[v], k);
      lo_[k] = std::min(lo_[k], x);
      hi_[k] = std::max(hi_[k], x);
    }
  }
}

bool CycleGraph::may_wind(const Tube& t, double c) const {
  if (acyclic()) return false;
  const double u = t.u(), v = t.v();
  return lo_[t.axis_i] <= u - c + kClearanceSlack && hi_[t.axis_i] >= u + c - kClearanceSlack &&
         lo_[t.axis_j] <= v - c + kClearanceSlack && hi_[t.axis_j] >= v + c - kClearanceSlack;
}

WindingCertificate CycleGraph::certify(const Tube& t, double c, bool want_witness) const {
  WindingCertificate cert;
  cert.tube = t;
  cert.clearance_min = c;
  if (!may_wind(t, c)) return cert;
  const Lattice& lat = *lat_;
  const std::size_t n = vertices_.size();
  const std::size_t m = adj_.size();
  std::vector<char> ok(m);
  std::vector<std::int8_t> volt(m);
  for (std::size_t v = 0; v < n; ++v) {
    for (auto k = offset_[v]; k < offset_[v + 1]; ++k) {
      ok[k] = edge_clearance(lat, vertices_[v], dir_[k], t) >= c - kClearanceSlack;
      volt[k] = static_cast<std::int8_t>(crossing_voltage(lat, vertices_[v], dir_[k], t));
    }
  }
  // BFS spanning forest of the restricted graph with lifted offsets.
  std::vector<std::int32_t> comp(n, -1);
  std::vector<long long> off(n, 0);
  std::vector<std::int32_t> roots;
  std::vector<long long> comp_gcd;
  std::deque<std::int32_t> queue;
  for (std::size_t r = 0; r < n; ++r) {
    if (comp[r] >= 0) continue;
    bool has_edge = false;
    for (auto k = offset_[r]; k < offset_[r + 1]; ++k) has_edge |= ok[k] != 0;
    if (!has_edge) continue;
    const auto id = static_cast<std::int32_t>(roots.size());
    roots.push_back(static_cast<std::int32_t>(r));
    comp_gcd.push_back(0);
    comp[r] = id;
    queue.push_back(static_cast<std::int32_t>(r));
    while (!queue.empty()) {
      auto u = queue.front();
      queue.pop_front();
      for (auto k = offset_[u]; k < offset_[u + 1]; ++k) {
        if (!ok[k]) continue;
        auto w = adj_[k];
        if (comp[w] < 0) {
          comp[w] = id;
          off[w] = off[u] + volt[k];
          queue.push_back(w);
        }
      }
    }
  }
  std::vector<std::pair<std::int32_t, long long>> discrepancies;
  for (std::size_t u = 0; u < n; ++u) {
    if (comp[u] < 0) continue;
    for (auto k = offset_[u]; k < offset_[u + 1]; ++k) {
      auto w = adj_[k];
      if (!ok[k] || static_cast<std::size_t>(w) < u) continue;
      long long disc = off[u] + volt[k] - off[w];
      if (disc == 0) continue;
      disc = std::llabs(disc);
      comp_gcd[comp[u]] = std::gcd(comp_gcd[comp[u]], disc);
      discrepancies.push_back({comp[u], disc});
    }
  }
  std::int32_t best = -1;
  for (std::size_t k = 0; k < comp_gcd.size(); ++k) {
    if (comp_gcd[k] > 0 && (best < 0 || comp_gcd[k] < comp_gcd[best])) best = static_cast<std::int32_t>(k);
  }
  if (best < 0) return cert;
  cert.index = comp_gcd[best];
  long long max_off = 0;
  for (auto [cid, disc] : discrepancies) {
    if (cid != best) continue;
    cert.offsets.push_back(disc);
    max_off = std::max(max_off, disc);
  }
  std::sort(cert.offsets.begin(), cert.offsets.end());
  cert.offsets.erase(std::unique(cert.offsets.begin(), cert.offsets.end()), cert.offsets.end());
  if (!want_witness) return cert;

  // Shortest path from (root, 0) to (root, index) in the Z-cover of the component.
  std::vector<std::int32_t> members;
  for (std::size_t v = 0; v < n; ++v) {
    if (comp[v] == best) members.push_back(static_cast<std::int32_t>(v));
  }
  std::vector<std::int32_t> pos(n, -1);
  for (std::size_t k = 0; k < members.size(); ++k) pos[members[k]] = static_cast<std::int32_t>(k);
  const std::int32_t root = roots[best];
  const long long target = cert.index;
  std::vector<VertexId> walk;
  for (long long W = std::max(target, max_off);; W *= 2) {
    const long long width = 2 * W + 1;
    const long long states = width * static_cast<long long>(members.size());
    if (states > 400'000'000LL) throw ResourceError("winding witness search exceeds state budget");
    std::vector<std::int64_t> parent(static_cast<std::size_t>(states), -1);
    auto sid = [&](std::int32_t v, long long k) { return pos[v] * width + (k + W); };
    const std::int64_t start = sid(root, 0), goal = sid(root, target);
    parent[start] = start;
    std::deque<std::pair<std::int32_t, long long>> q{{root, 0}};
    bool found = false;
    while (!q.empty() && !found) {
      auto [u, ku] = q.front();
      q.pop_front();
      for (auto k = offset_[u]; k < offset_[u + 1]; ++k) {
        if (!ok[k]) continue;
        long long kw = ku + volt[k];
        if (kw < -W || kw > W) continue;
        auto s = sid(adj_[k], kw);
        if (parent[s] >= 0) continue;
        parent[s] = sid(u, ku);
        if (s == goal) {
          found = true;
          break;
        }
        q.push_back({adj_[k], kw});
      }
    }
    if (!found) continue;
    for (std::int64_t s = goal;; s = parent[s]) {
      walk.push_back(vertices_[members[s / width]]);
      if (s == start) break;
    }
    std::reverse(walk.begin(), walk.end());
    break;
  }
  cert.witness = cyclically_reduce(walk);
  cert.clearance = std::numeric_limits<double>::infinity();
  std::vector<Point> pts;
  pts.reserve(cert.witness.size());
  for (std::size_t k = 0; k < cert.witness.size(); ++k) {
    pts.push_back(lat.point(cert.witness[k]));
    if (k + 1 < cert.witness.size()) {
      int dir = step_between(lat, cert.witness[k], cert.witness[k + 1]);
      cert.clearance = std::min(cert.clearance, edge_clearance(lat, cert.witness[k], dir, t));
    }
  }
  if (path_winding(pts, t) != cert.index || cert.clearance < c - kClearanceSlack) {
    throw ConsistencyError("winding witness fails its re-check");
  }
  cert.simple_witness = first_winding_simple_cycle(lat, cert.witness, t);
  if (cert.simple_witness.empty()) throw ConsistencyError("no simple winding cycle inside the witness");
  return cert;
}

WindingCertificate winding_bfs(const SoupSample& s, const ClusterRecord& c, const Tube& t, double clearance_min) {
  if (c.vertices.empty()) throw DomainError("winding_bfs needs a nonempty cluster");
  Lattice lat(s.box);
  CycleGraph g(lat, c.edges);
  WindingCertificate cert = g.certify(t, clearance_min, true);
  cert.sigma = loop_sigma(s, lat, c.loops, t);
  return cert;
}

std::vector<std::size_t> detect_C_eps(const SoupSample& s, std::vector<ClusterRecord>& clusters,
                                      const TubeFamily& family, const DetectOptions& opt) {
  Lattice lat(s.box);
  const double N = s.box.N;
  const double clearance = family.eps * N / 2.0;
  const double min_diam = 2.0 * family.eps * N;
  std::vector<std::size_t> hits;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    auto& c = clusters[k];
    if (c.diameter + kClearanceSlack < min_diam) continue;
    CycleGraph g(lat, c.edges);
    if (g.acyclic()) continue;
    bool found = false;
    for (std::size_t id = 0; id < family.tubes.size(); ++id) {
      const Tube& t = family.tubes[id];
      if (!g.may_wind(t, clearance)) continue;
      if (!g.certify(t, clearance, false).winds()) continue;
      if (!c.certificate_for(static_cast<int>(id))) {
        WindingCertificate cert = g.certify(t, clearance, true);
        cert.tube_id = static_cast<int>(id);
        cert.sigma = loop_sigma(s, lat, c.loops, t);
        c.certificates.push_back(std::move(cert));
      }
      found = true;
      if (!opt.all_certificates) break;
    }
    if (found) hits.push_back(k);
  }
  return hits;
}

std::vector<BLoop> detect_B_eps(const SoupSample& s, const TubeFamily& family) {
  Lattice lat(s.box);
  const double clearance = family.eps * s.box.N;
  std::vector<BLoop> out;
  for (std::size_t id = 0; id < s.loops.size(); ++id) {
    const auto& loop = s.loops[id];
    if (loop.diameter + kClearanceSlack < 2.0 * clearance) continue;
    CycleGraph g(lat, loop_edges(lat, loop));
    for (std::size_t k = 0; k < family.tubes.size(); ++k) {
      const Tube& t = family.tubes[k];
      if (!g.may_wind(t, clearance) || !g.certify(t, clearance, false).winds()) continue;
      BLoop b;
      b.loop = static_cast<std::int64_t>(id);
      b.certificate = g.certify(t, clearance, true);
      b.certificate.tube_id = static_cast<int>(k);
      b.certificate.sigma = loop_winding(lat, loop, t);
      out.push_back(std::move(b));
      break;
    }
  }
  return out;
}

std::optional<MinimalChain> minimal_chain(const SoupSample& s, const ClusterRecord& c, const Tube& t,
                                          double clearance_min) {
  Lattice lat(s.box);
  std::vector<ChainLink> pieces;
  std::vector<std::vector<EdgeId>> piece_edges;
  for (auto id : c.loops) {
    const auto& loop = s.loops[static_cast<std::size_t>(id)];
    pieces.push_back({ChainLink::Kind::kLoop, id, loop.diameter});
    piece_edges.push_back(loop_edges(lat, loop));
  }
  if (s.has_bridges()) {
    for (EdgeId e : c.edges) {
      if (s.bridges[static_cast<std::size_t>(e)]) {
        pieces.push_back({ChainLink::Kind::kBridge, e, 1});
        piece_edges.push_back({e});
      }
    }
  }
  std::vector<std::size_t> order(pieces.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &x = pieces[a], &y = pieces[b];
    if (x.diameter != y.diameter) return x.diameter > y.diameter;
    if (x.kind != y.kind) return x.kind == ChainLink::Kind::kLoop;
    return x.id < y.id;
  });
  std::vector<char> in(pieces.size(), 1);
  auto winds = [&]() {
    std::vector<EdgeId> edges;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      if (in[k]) edges.insert(edges.end(), piece_edges[k].begin(), piece_edges[k].end());
    }
    CycleGraph g(lat, std::move(edges));
    return g.may_wind(t, clearance_min) && g.certify(t, clearance_min, false).winds();
  };
  if (!winds()) return std::nullopt;

  // Drop blocks of pieces, splitting a block whenever it cannot go as a whole.
  std::function<void(std::size_t, std::size_t)> prune = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) in[order[k]] = 0;
    if (winds()) return;
    for (std::size_t k = lo; k < hi; ++k) in[order[k]] = 1;
    if (hi - lo == 1) return;
    std::size_t mid = lo + (hi - lo) / 2;
    prune(lo, mid);
    prune(mid, hi);
  };
  prune(0, order.size());

  MinimalChain chain;
  std::vector<std::size_t> kept;
  std::vector<EdgeId> edges;
  for (std::size_t k : order) {
    if (!in[k]) continue;
    kept.push_back(k);
    edges.insert(edges.end(), piece_edges[k].begin(), piece_edges[k].end());
  }
  CycleGraph g(lat, edges);
  chain.certificate = g.certify(t, clearance_min, true);
  if (!chain.certificate.winds()) throw ConsistencyError("minimal chain lost its winding cycle");
  std::vector<std::int64_t> chain_loops;
  for (std::size_t k : kept) {
    if (pieces[k].kind == ChainLink::Kind::kLoop) chain_loops.push_back(pieces[k].id);
  }
  chain.certificate.sigma = loop_sigma(s, lat, chain_loops, t);

  // Order along the witness.
  std::vector<std::size_t> placed;
  std::vector<char> used(pieces.size(), 0);
  const auto& w = chain.certificate.witness;
  for (std::size_t p = 0; p + 1 < w.size(); ++p) {
    EdgeId e = lat.edge_of_step(w[p], step_between(lat, w[p], w[p + 1]));
    for (std::size_t k : kept) {
      if (used[k]) continue;
      if (std::binary_search(piece_edges[k].begin(), piece_edges[k].end(), e)) {
        used[k] = 1;
        placed.push_back(k);
      }
    }
  }
  for (std::size_t k : kept) {
    if (!used[k]) placed.push_back(k);
  }
  std::vector<std::vector<VertexId>> verts;
  for (std::size_t k : placed) {
    chain.links.push_back(pieces[k]);
    if (pieces[k].kind == ChainLink::Kind::kLoop) {
      chain.max_loop_diameter = std::max(chain.max_loop_diameter, pieces[k].diameter);
    }
    std::vector<VertexId> vs;
    for (EdgeId e : piece_edges[k]) {
      vs.push_back(lat.edge_lower(e));
      vs.push_back(lat.edge_upper(e));
    }
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    verts.push_back(std::move(vs));
  }
  auto meets = [&](std::size_t a, std::size_t b) {
    std::vector<VertexId> common;
    std::set_intersection(verts[a].begin(), verts[a].end(), verts[b].begin(), verts[b].end(),
                          std::back_inserter(common));
    return !common.empty();
  };
  const std::size_t n = verts.size();
  chain.simple_ring = true;
  if (n == 2) chain.simple_ring = meets(0, 1);
  if (n >= 3) {
    for (std::size_t a = 0; a < n && chain.simple_ring; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        bool ring_neighbours = b == a + 1 || (a == 0 && b == n - 1);
        if (meets(a, b) != ring_neighbours) {
          chain.simple_ring = false;
          break;
        }
      }
    }
  }
  return chain;
}

void write_clusters_ndjson(std::ostream& os, const Lattice& lat, const std::vector<ClusterRecord>& clusters) {
  for (const auto& c : clusters) {
    nlohmann::json j;
    j["id"] = c.id;
    j["diam"] = c.diameter;
    j["n_vertices"] = c.vertices.size();
    j["loops"] = c.loops;
    j["tag"] = to_string(c.tag);
    nlohmann::json certs = nlohmann::json::array();
    for (const auto& cert : c.certificates) {
      nlohmann::json k;
      k["tube_id"] = cert.tube_id;
      k["tube"] = nlohmann::json::parse(to_json(cert.tube));
      k["i"] = cert.index;
      k["sigma"] = cert.sigma;
      k["offsets"] = cert.offsets;
      k["clearance"] = cert.clearance;
      if (!cert.witness.empty()) {
        std::vector<std::uint8_t> dirs;
        for (std::size_t p = 0; p + 1 < cert.witness.size(); ++p) {
          dirs.push_back(static_cast<std::uint8_t>(step_between(lat, cert.witness[p], cert.witness[p + 1])));
        }
        k["witness_root"] = lat.coords(cert.witness.front());
        k["witness_steps"] = encode_steps(dirs);
      }
      certs.push_back(std::move(k));
    }
    j["certificates"] = std::move(certs);
    os << j.dump() << '\n';
  }
}

}  // namespace loopcycle
