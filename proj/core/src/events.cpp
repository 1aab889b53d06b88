#include "loopcycle/events.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <tuple>
#include <unordered_map>

#include <boost/rational.hpp>
#include <nlohmann/json.hpp>

#include "loopcycle/errors.hpp"
#include "loopcycle/union_find.hpp"

namespace loopcycle {

namespace {

using Rational = boost::rational<std::int64_t>;

constexpr std::int64_t kDecimalScale = 1000000000;

Rational exact(double x) {
  return Rational(static_cast<std::int64_t>(std::llround(x * static_cast<double>(kDecimalScale))), kDecimalScale);
}

ExactValue to_exact(const Rational& r) { return ExactValue{r.numerator(), r.denominator()}; }

void check_exponent(double x, const char* name) {
  if (!(x > 0.0 && x <= 1.0)) throw DomainError(std::string("exponent ") + name + " must lie in (0,1]");
}

}  // namespace

std::string ExactValue::str() const {
  return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

ExponentReport check_abc_conditions(const ExponentConfig& cfg) {
  if (cfg.d <= 4) throw DomainError("exponent conditions need d >= 5");
  check_exponent(cfg.a, "a");
  check_exponent(cfg.b, "b");
  check_exponent(cfg.c, "c");
  check_exponent(cfg.alpha, "alpha");
  check_exponent(cfg.beta, "beta");
  check_exponent(cfg.gamma, "gamma");
  check_exponent(cfg.gamma0, "gamma0");

  const Rational a = exact(cfg.a), b = exact(cfg.b), c = exact(cfg.c);
  const std::int64_t d = cfg.d;
  ExponentReport r;
  r.cfg = cfg;
  const Rational nu1 = (a + b) * (d - 2) - (Rational(d) + c * (d - 4));
  const Rational nu2 = a + b - (Rational(1) + Rational(4, d - 2));
  const Rational nu3 = a * (d - 2) + c * (d - 4) - d;
  r.nu1 = to_exact(nu1);
  r.nu2 = to_exact(nu2);
  r.nu3 = to_exact(nu3);
  r.pinching_ok = nu1 > 0;
  r.two_loops_ok = nu2 > 0;
  r.distant_ok = nu3 > 0;
  r.ordered = c < b && b <= a;
  r.beta_ok = exact(cfg.beta) > Rational(4, d - 2);
  r.gamma_ok = exact(cfg.gamma) > Rational(2, d - 4);
  r.gamma0_ok = exact(cfg.gamma0) > Rational(2, d - 4);
  return r;
}

std::string ExponentReport::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = cfg.d;
  j["a"] = cfg.a;
  j["b"] = cfg.b;
  j["c"] = cfg.c;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["gamma0"] = cfg.gamma0;
  for (auto [name, v, ok] : {std::tuple{"nu1", nu1, pinching_ok}, std::tuple{"nu2", nu2, two_loops_ok},
                             std::tuple{"nu3", nu3, distant_ok}}) {
    j[name] = {{"exact", v.str()}, {"value", v.value()}, {"positive", ok}};
  }
  j["ordered"] = ordered;
  j["beta_ok"] = beta_ok;
  j["gamma_ok"] = gamma_ok;
  j["gamma0_ok"] = gamma0_ok;
  j["all_ok"] = all_ok();
  return j.dump();
}

EventScales event_scales(const ExponentConfig& cfg, int N) {
  const double n = N;
  return EventScales{std::pow(n, cfg.a), std::pow(n, cfg.b), std::pow(n, cfg.c)};
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::kPinching: return "pinching";
    case EventKind::kTwoMesoscopic: return "two_mesoscopic";
    default: return "distant_connection";
  }
}

namespace {

// Range min / max of each coordinate over a doubled vertex sequence.
class ArcExtent {
 public:
  ArcExtent(const Lattice& lat, const std::vector<VertexId>& verts) : d_(lat.dim()) {
    const std::size_t n = 2 * verts.size();
    levels_ = 1;
    while ((std::size_t{1} << levels_) <= n) ++levels_;
    lo_.assign(levels_ * n * d_, 0);
    hi_.assign(levels_ * n * d_, 0);
    n_ = n;
    for (std::size_t t = 0; t < n; ++t) {
      VertexId v = verts[t % verts.size()];
      for (int k = 0; k < d_; ++k) lo_[at(0, t, k)] = hi_[at(0, t, k)] = static_cast<std::int16_t>(lat.coord(v, k));
    }
    for (std::size_t l = 1; l < levels_; ++l) {
      const std::size_t half = std::size_t{1} << (l - 1);
      for (std::size_t t = 0; t + (std::size_t{1} << l) <= n; ++t) {
        for (int k = 0; k < d_; ++k) {
          lo_[at(l, t, k)] = std::min(lo_[at(l - 1, t, k)], lo_[at(l - 1, t + half, k)]);
          hi_[at(l, t, k)] = std::max(hi_[at(l - 1, t, k)], hi_[at(l - 1, t + half, k)]);
        }
      }
    }
  }

  // L∞ diameter of the vertices at times first..last (inclusive, doubled index).
  int diameter(std::size_t first, std::size_t last) const {
    const std::size_t len = last - first + 1;
    std::size_t l = 0;
    while ((std::size_t{2} << l) <= len) ++l;
    const std::size_t second = last + 1 - (std::size_t{1} << l);
    int best = 0;
    for (int k = 0; k < d_; ++k) {
      int lo = std::min(lo_[at(l, first, k)], lo_[at(l, second, k)]);
      int hi = std::max(hi_[at(l, first, k)], hi_[at(l, second, k)]);
      best = std::max(best, hi - lo);
    }
    return best;
  }

 private:
  std::size_t at(std::size_t l, std::size_t t, int k) const { return (l * n_ + t) * d_ + k; }
  int d_;
  std::size_t n_ = 0;
  std::size_t levels_ = 0;
  std::vector<std::int16_t> lo_, hi_;
};

// Integer offsets with Euclidean norm below r (a superset; callers recheck),
// or empty when there are more than `cap`.
std::vector<std::vector<int>> ball_offsets(int d, double r, std::size_t cap) {
  std::vector<std::vector<int>> out;
  r += 1e-9;
  const int m = static_cast<int>(std::floor(r));
  if (std::pow(2.0 * m + 1, d) > 64.0 * static_cast<double>(cap)) return out;
  std::vector<int> cur(d, -m);
  while (true) {
    long long n2 = 0;
    for (int x : cur) n2 += static_cast<long long>(x) * x;
    if (std::sqrt(static_cast<double>(n2)) < r) {
      out.push_back(cur);
      if (out.size() > cap) return {};
    }
    int k = 0;
    while (k < d && cur[k] == m) cur[k++] = -m;
    if (k == d) break;
    ++cur[k];
  }
  return out;
}

bool arcs_pinch(const ArcExtent& ext, std::size_t i, std::size_t j, std::size_t L, const EventScales& sc) {
  const double d1 = ext.diameter(i, j);
  const double d2 = ext.diameter(j, i + L);
  return (d1 > sc.Na && d2 > sc.Nb) || (d1 > sc.Nb && d2 > sc.Na);
}

}  // namespace

std::vector<EventWitness> detect_pinching(const SoupSample& s, const ExponentConfig& cfg) {
  Lattice lat(s.box);
  const EventScales sc = event_scales(cfg, s.box.N);
  const double need = std::max(sc.Na, sc.Nb);
  std::vector<EventWitness> out;
  std::vector<std::vector<int>> offsets;
  bool offsets_ready = false;
  for (std::size_t li = 0; li < s.loops.size(); ++li) {
    const auto& loop = s.loops[li];
    if (loop.diameter <= need) continue;
    const auto verts = loop.vertices(lat);
    const std::size_t L = verts.size();
    ArcExtent ext(lat, verts);
    if (!offsets_ready) {
      offsets = ball_offsets(lat.dim(), sc.Nc, 4096);
      offsets_ready = true;
    }
    auto close = [&](std::size_t i, std::size_t j) { return lat.euclidean_distance(verts[i], verts[j]) < sc.Nc; };
    std::optional<std::pair<std::size_t, std::size_t>> hit;
    if (!offsets.empty() && offsets.size() < L) {
      // Spatial hash: visit times per vertex.
      std::unordered_map<VertexId, std::vector<std::size_t>> times;
      for (std::size_t t = 0; t < L; ++t) times[verts[t]].push_back(t);
      std::vector<int> base(lat.dim()), probe(lat.dim());
      std::vector<std::size_t> cand;
      for (std::size_t i = 0; i < L && !hit; ++i) {
        lat.coords(verts[i], base);
        cand.clear();
        for (const auto& off : offsets) {
          for (int k = 0; k < lat.dim(); ++k) probe[k] = base[k] + off[k];
          if (!lat.contains(probe)) continue;
          auto it = times.find(lat.id(probe));
          if (it == times.end()) continue;
          for (std::size_t j : it->second) {
            if (j > i) cand.push_back(j);
          }
        }
        std::sort(cand.begin(), cand.end());
        for (std::size_t j : cand) {
          if (close(i, j) && arcs_pinch(ext, i, j, L, sc)) {
            hit = {i, j};
            break;
          }
        }
      }
    } else {
      for (std::size_t i = 0; i < L && !hit; ++i) {
        for (std::size_t j = i + 1; j < L; ++j) {
          if (close(i, j) && arcs_pinch(ext, i, j, L, sc)) {
            hit = {i, j};
            break;
          }
        }
      }
    }
    if (hit) {
      EventWitness w;
      w.kind = EventKind::kPinching;
      w.loops = {static_cast<std::int64_t>(li)};
      w.points = {verts[hit->first], verts[hit->second]};
      w.times = {static_cast<std::int64_t>(hit->first), static_cast<std::int64_t>(hit->second)};
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<EventWitness> detect_two_mesoscopic(const SoupSample& s, const std::vector<ClusterRecord>& clusters,
                                                const ExponentConfig& cfg) {
  const EventScales sc = event_scales(cfg, s.box.N);
  const double big = std::max(sc.Na, sc.Nb), small = std::min(sc.Na, sc.Nb);
  std::vector<EventWitness> out;
  for (const auto& c : clusters) {
    if (c.loops.size() < 2) continue;
    // Largest member, then the largest other; ties by loop index.
    std::int64_t first = -1, second = -1;
    auto better = [&](std::int64_t x, std::int64_t y) {
      if (y < 0) return true;
      int dx = s.loops[x].diameter, dy = s.loops[y].diameter;
      return dx > dy || (dx == dy && x < y);
    };
    for (std::int64_t l : c.loops) {
      if (better(l, first)) {
        second = first;
        first = l;
      } else if (better(l, second)) {
        second = l;
      }
    }
    if (s.loops[first].diameter > big && s.loops[second].diameter > small) {
      EventWitness w;
      w.kind = EventKind::kTwoMesoscopic;
      w.cluster = c.id;
      w.loops = {first, second};
      out.push_back(std::move(w));
    }
  }
  return out;
}

namespace {

void unite_walk(const Lattice& lat, const RWLoop& loop, UnionFind& uf, std::vector<std::uint8_t>& touched) {
  VertexId v = loop.root;
  for (auto dir : loop.steps) {
    VertexId w = v + dir_sign(dir) * lat.stride(dir_axis(dir));
    uf.unite(static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(w));
    touched[static_cast<std::size_t>(v)] = 1;
    v = w;
  }
}

// Union-find over base roots, for merging the other candidate loops back in.
class RootMerge {
 public:
  std::uint32_t find(std::uint32_t x) {
    auto it = parent_.find(x);
    if (it == parent_.end()) return x;
    std::uint32_t r = find(it->second);
    it->second = r;
    return r;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::unordered_map<std::uint32_t, std::uint32_t> parent_;
};

}  // namespace

std::vector<EventWitness> detect_distant_connection(const SoupSample& s, const ExponentConfig& cfg) {
  Lattice lat(s.box);
  const EventScales sc = event_scales(cfg, s.box.N);
  std::vector<std::size_t> cand;
  for (std::size_t l = 0; l < s.loops.size(); ++l) {
    if (s.loops[l].diameter >= sc.Na && !s.loops[l].steps.empty()) cand.push_back(l);
  }
  std::vector<EventWitness> out;
  if (cand.empty()) return out;

  // Base structure: every loop except the candidates, plus open bridges.
  const auto V = static_cast<std::size_t>(lat.volume());
  UnionFind base(lat.volume());
  std::vector<std::uint8_t> touched(V, 0);
  std::vector<char> is_cand(s.loops.size(), 0);
  for (std::size_t l : cand) is_cand[l] = 1;
  for (std::size_t l = 0; l < s.loops.size(); ++l) {
    if (!is_cand[l]) unite_walk(lat, s.loops[l], base, touched);
  }
  if (s.has_bridges()) {
    for (std::size_t e = 0; e < s.bridges.size(); ++e) {
      if (!s.bridges[e]) continue;
      VertexId a = lat.edge_lower(static_cast<EdgeId>(e)), b = lat.edge_upper(static_cast<EdgeId>(e));
      base.unite(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
      touched[static_cast<std::size_t>(a)] = touched[static_cast<std::size_t>(b)] = 1;
    }
  }
  std::vector<std::vector<VertexId>> cand_verts(cand.size());
  for (std::size_t k = 0; k < cand.size(); ++k) {
    cand_verts[k] = s.loops[cand[k]].vertices(lat);
  }

  for (std::size_t k = 0; k < cand.size(); ++k) {
    RootMerge merge;
    std::unordered_map<VertexId, char> extra_touch;
    for (std::size_t m = 0; m < cand.size(); ++m) {
      if (m == k) continue;
      const auto& vs = cand_verts[m];
      for (std::size_t t = 0; t < vs.size(); ++t) {
        merge.unite(base.find(static_cast<std::uint32_t>(vs[t])),
                    base.find(static_cast<std::uint32_t>(vs[(t + 1) % vs.size()])));
        extra_touch[vs[t]] = 1;
      }
    }
    auto label_of = [&](VertexId v) -> std::int64_t {
      if (!touched[static_cast<std::size_t>(v)] && !extra_touch.count(v)) return -1;
      return merge.find(base.find(static_cast<std::uint32_t>(v)));
    };

    std::vector<VertexId> xs = cand_verts[k];
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    // Per vertex: (label, least neighbour with that label).
    std::vector<std::vector<std::pair<std::int64_t, VertexId>>> nb(xs.size());
    std::map<std::int64_t, std::vector<std::size_t>> by_label;
    for (std::size_t p = 0; p < xs.size(); ++p) {
      std::map<std::int64_t, VertexId> least;
      for (int dir = 0; dir < 2 * lat.dim(); ++dir) {
        VertexId w = lat.step(xs[p], dir);
        if (w == kNoVertex) continue;
        std::int64_t lab = label_of(w);
        if (lab < 0) continue;
        auto [it, fresh] = least.try_emplace(lab, w);
        if (!fresh) it->second = std::min(it->second, w);
      }
      for (auto [lab, w] : least) {
        nb[p].push_back({lab, w});
        by_label[lab].push_back(p);
      }
    }
    auto least_nb = [&](std::size_t p, std::int64_t lab) {
      for (auto [l, w] : nb[p]) {
        if (l == lab) return w;
      }
      return kNoVertex;
    };
    bool found = false;
    for (std::size_t p = 0; p < xs.size() && !found; ++p) {
      // Best (y, x', y') over the labels of x.
      std::tuple<VertexId, VertexId, VertexId> best{std::numeric_limits<VertexId>::max(), 0, 0};
      for (auto [lab, xw] : nb[p]) {
        for (std::size_t q : by_label[lab]) {
          if (q <= p || lat.euclidean_distance(xs[p], xs[q]) < sc.Nc) continue;
          best = std::min(best, std::tuple{xs[q], xw, least_nb(q, lab)});
          break;
        }
      }
      if (std::get<0>(best) != std::numeric_limits<VertexId>::max()) {
        EventWitness w;
        w.kind = EventKind::kDistantConnection;
        w.loops = {static_cast<std::int64_t>(cand[k])};
        w.points = {xs[p], std::get<0>(best), std::get<1>(best), std::get<2>(best)};
        out.push_back(std::move(w));
        found = true;
      }
    }
  }
  return out;
}

void write_witnesses_csv(std::ostream& os, const Lattice& lat, std::uint64_t seed,
                         const std::vector<EventWitness>& witnesses, bool header) {
  if (header) os << "event,seed,N,d,cluster,loops,points\n";
  for (const auto& w : witnesses) {
    os << to_string(w.kind) << ',' << seed << ',' << lat.half_side() << ',' << lat.dim() << ',' << w.cluster << ',';
    for (std::size_t k = 0; k < w.loops.size(); ++k) os << (k ? ";" : "") << w.loops[k];
    os << ',';
    for (std::size_t k = 0; k < w.points.size(); ++k) {
      os << (k ? ";" : "");
      auto c = lat.coords(w.points[k]);
      for (std::size_t i = 0; i < c.size(); ++i) os << (i ? " " : "") << c[i];
    }
    os << '\n';
  }
}

}  // namespace loopcycle
