#include "loopcycle/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "loopcycle/errors.hpp"
#include "loopcycle/parallel.hpp"
#include "loopcycle/rng.hpp"
#include "loopcycle/union_find.hpp"

namespace loopcycle {

const char* const kDeskScaleDisclaimer =
    "desk-scale run: finite-N estimates with confidence intervals; large-N limits are not reproduced here";

namespace {

using json = nlohmann::json;

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

json test_json(const TestResult& t) { return {{"statistic", t.statistic}, {"dof", t.dof}, {"p_value", t.p_value}}; }

json point_json(const Point& p) { return p.coords; }

std::string point_str(const Point& p) {
  std::string s;
  for (std::size_t k = 0; k < p.coords.size(); ++k) {
    if (k) s += ' ';
    s += std::to_string(p.coords[k]);
  }
  return s;
}

double resolve_kappa(double kappa, int d) { return kappa > 0.0 ? kappa : default_kappa(d); }

int min_cluster_diameter(double eps, int N) { return static_cast<int>(std::ceil(2.0 * eps * N - 1e-9)); }

// Sorted distinct vertices of a loop trace.
std::vector<VertexId> trace(const Lattice& lat, const RWLoop& loop) {
  auto v = loop.vertices(lat);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

// ---------------------------------------------------------------- classification

double ClassifierReport::frequency(ClusterTag tag) const {
  if (!k_eps) return 0.0;
  std::int64_t n = tag == ClusterTag::kType1 ? type1 : tag == ClusterTag::kType2 ? type2 : neither;
  return static_cast<double>(n) / static_cast<double>(k_eps);
}

double ClassifierReport::u_deviation() const { return k_eps ? std::abs(frequency(ClusterTag::kType1) - 0.5) : 0.0; }

std::string ClassifierReport::to_json() const {
  json j;
  j["disclaimer"] = kDeskScaleDisclaimer;
  j["N"] = N;
  j["eps"] = cfg.eps;
  j["beta"] = cfg.beta;
  j["gamma0"] = cfg.gamma0;
  j["thresholds"] = {{"N^beta", beta_threshold}, {"N^gamma0", gamma0_threshold}, {"small", small_threshold}};
  j["K_eps"] = k_eps;
  j["counts"] = {{"type1", type1}, {"type2", type2}, {"neither", neither}};
  j["u_deviation"] = u_deviation();
  j["small_loops_only"] = small_loops_only;
  json rows = json::array();
  for (const auto& c : clusters) {
    rows.push_back({{"cluster", c.cluster},
                    {"tag", to_string(c.tag)},
                    {"b_members", c.b_members},
                    {"max_member_diameter", c.max_member_diameter},
                    {"chain_max_diameter", c.chain_max_diameter},
                    {"small_loops_only", c.small_loops_only}});
  }
  j["clusters"] = rows;
  return j.dump();
}

ClassifierReport classify_clusters(const SoupSample& s, const std::vector<ClusterRecord>& clusters,
                                   const std::vector<std::size_t>& hits, const std::vector<BLoop>& b,
                                   const ClassifyConfig& cfg) {
  ClassifierReport r;
  r.N = s.box.N;
  r.cfg = cfg;
  r.beta_threshold = std::pow(static_cast<double>(s.box.N), cfg.beta);
  r.gamma0_threshold = std::pow(static_cast<double>(s.box.N), cfg.gamma0);
  r.small_threshold = cfg.small_fraction * cfg.eps * s.box.N;
  std::set<std::int64_t> b_ids;
  for (const auto& x : b) b_ids.insert(x.loop);

  for (std::size_t pos : hits) {
    const auto& c = clusters.at(pos);
    ClassifiedCluster out;
    out.position = pos;
    out.cluster = c.id;
    int big_non_b = 0;
    out.small_loops_only = true;
    for (auto id : c.loops) {
      const int diam = s.loops[static_cast<std::size_t>(id)].diameter;
      out.max_member_diameter = std::max(out.max_member_diameter, diam);
      if (diam > r.small_threshold) out.small_loops_only = false;
      if (b_ids.count(id)) {
        ++out.b_members;
      } else if (diam > r.beta_threshold) {
        ++big_non_b;
      }
    }
    const bool any_big = out.max_member_diameter > r.beta_threshold;
    if (out.b_members == 1 && big_non_b == 0) {
      out.tag = ClusterTag::kType1;
    } else if (!any_big && !c.certificates.empty()) {
      const auto& cert = c.certificates.front();
      auto chain = minimal_chain(s, c, cert.tube, cert.clearance_min);
      if (chain) out.chain_max_diameter = chain->max_loop_diameter;
      out.tag = chain && chain->max_loop_diameter < r.gamma0_threshold ? ClusterTag::kType2 : ClusterTag::kNeither;
    } else {
      out.tag = ClusterTag::kNeither;
    }
    ++r.k_eps;
    if (out.tag == ClusterTag::kType1) ++r.type1;
    if (out.tag == ClusterTag::kType2) ++r.type2;
    if (out.tag == ClusterTag::kNeither) ++r.neither;
    if (out.small_loops_only) ++r.small_loops_only;
    r.clusters.push_back(out);
  }
  return r;
}

// ---------------------------------------------------------------- replica analysis

ReplicaCounts analyse_replica(const LoopIntensityTable& table, const TubeFamily& family, std::uint64_t seed,
                              const ClassifyConfig& cfg, double kappa) {
  const BoxConfig& box = table.box();
  SoupSample s = sample_soup(table, seed);
  attach_bridges(s, kappa);
  ClusterOptions co;
  co.min_diameter = min_cluster_diameter(family.eps, box.N);
  auto clusters = build_clusters(s, co);
  auto hits = detect_C_eps(s, clusters, family);
  auto b = detect_B_eps(s, family);

  ReplicaCounts rc;
  rc.N = box.N;
  rc.k_eps = static_cast<std::int64_t>(hits.size());
  rc.b_loops = static_cast<std::int64_t>(b.size());
  const double big = family.eps * box.N;
  for (const auto& loop : s.loops) {
    if (loop.diameter + 1e-9 >= big) ++rc.big_loops;
  }
  std::set<std::int64_t> b_ids;
  for (const auto& x : b) b_ids.insert(x.loop);
  std::size_t covered = 0;
  for (std::size_t pos : hits) {
    std::size_t here = 0;
    for (auto id : clusters[pos].loops) here += b_ids.count(id);
    if (here) ++rc.b_clusters;
    covered += here;
  }
  if (covered != b.size()) throw ConsistencyError("a B(eps,N) loop lies outside every C(eps,N) cluster");
  if (rc.k_eps < rc.b_clusters) throw ConsistencyError("K_eps below the number of B-loop clusters");

  auto report = classify_clusters(s, clusters, hits, b, cfg);
  rc.type1 = report.type1;
  rc.type2 = report.type2;
  rc.neither = report.neither;
  return rc;
}

// ---------------------------------------------------------------- doubling

std::string DoublingReport::to_json() const {
  json j;
  j["disclaimer"] = kDeskScaleDisclaimer;
  j["d"] = d;
  j["eps"] = eps;
  j["beta"] = cfg.beta;
  j["gamma0"] = cfg.gamma0;
  j["kappa"] = kappa;
  j["seed"] = seed;
  json rows = json::array();
  for (const auto& r : this->rows) {
    rows.push_back({{"N", r.N},
                    {"replicas", r.replicas},
                    {"family_size", r.family_size},
                    {"K_mean", r.k_mean},
                    {"K_var", r.k_var},
                    {"K_dispersion", r.k_dispersion},
                    {"B_clusters_mean", r.b_mean},
                    {"big_loops_mean", r.big_mean},
                    {"big_loops_dispersion", r.big_dispersion},
                    {"dispersion_null95", interval_json(r.dispersion_null)},
                    {"ratio", r.ratio},
                    {"ratio_se", r.ratio_se},
                    {"ratio_ci95", interval_json(r.ratio_ci95)},
                    {"ratio_ci99", interval_json(r.ratio_ci99)},
                    {"z_vs_two", r.z_vs_two},
                    {"p_vs_two", r.p_vs_two},
                    {"min_excess", r.min_excess},
                    {"type1", r.type1},
                    {"type2", r.type2},
                    {"neither", r.neither}});
  }
  j["rows"] = rows;
  return j.dump(2);
}

std::string DoublingReport::summary_csv() const {
  std::ostringstream os;
  os << "# " << kDeskScaleDisclaimer << "\n";
  os << "N,replicas,family_size,K_mean,K_var,K_dispersion,B_clusters_mean,big_loops_mean,big_loops_dispersion,"
        "ratio,ratio_se,ci95_lo,ci95_hi,ci99_lo,ci99_hi,z_vs_two,p_vs_two,min_excess,type1,type2,neither\n";
  for (const auto& r : rows) {
    os << r.N << ',' << r.replicas << ',' << r.family_size << ',' << num(r.k_mean) << ',' << num(r.k_var) << ','
       << num(r.k_dispersion) << ',' << num(r.b_mean) << ',' << num(r.big_mean) << ',' << num(r.big_dispersion)
       << ',' << num(r.ratio) << ',' << num(r.ratio_se) << ',' << num(r.ratio_ci95.lo) << ','
       << num(r.ratio_ci95.hi) << ',' << num(r.ratio_ci99.lo) << ',' << num(r.ratio_ci99.hi) << ','
       << num(r.z_vs_two) << ',' << num(r.p_vs_two) << ',' << r.min_excess << ',' << r.type1 << ',' << r.type2
       << ',' << r.neither << "\n";
  }
  return os.str();
}

std::string DoublingReport::replicas_csv() const {
  std::ostringstream os;
  os << "N,replica,K_eps,B_clusters,B_loops,big_loops,type1,type2,neither\n";
  for (const auto& r : replicas) {
    os << r.N << ',' << r.replica << ',' << r.k_eps << ',' << r.b_clusters << ',' << r.b_loops << ','
       << r.big_loops << ',' << r.type1 << ',' << r.type2 << ',' << r.neither << "\n";
  }
  return os.str();
}

DoublingReport doubling_experiment(int d, const std::vector<int>& Ns, double eps,
                                   const std::vector<std::int64_t>& replicas, std::uint64_t seed,
                                   const ClassifyConfig& cfg, const RunOptions& opt) {
  if (Ns.size() != replicas.size()) throw DomainError("one replica count per N is required");
  DoublingReport rep;
  rep.d = d;
  rep.eps = eps;
  rep.cfg = cfg;
  rep.cfg.eps = eps;
  rep.kappa = resolve_kappa(opt.kappa, d);
  rep.seed = seed;
  const double z95 = normal_quantile(0.975), z99 = normal_quantile(0.995);
  for (std::size_t k = 0; k < Ns.size(); ++k) {
    BoxConfig box{d, Ns[k]};
    auto table = loop_intensity(box, suggested_lmax(box));
    auto family = tube_family(eps, box);
    const std::uint64_t base = derive_seed(seed, Stream::kEstimator, static_cast<std::uint64_t>(Ns[k]));
    auto counts = run_replicas(replicas[k], opt.threads, [&](std::int64_t r) {
      auto rc = analyse_replica(table, family, replica_seed(base, static_cast<std::uint64_t>(r)), rep.cfg,
                                rep.kappa);
      rc.replica = r;
      return rc;
    });

    DoublingRow row;
    row.N = Ns[k];
    row.replicas = replicas[k];
    row.family_size = static_cast<std::int64_t>(family.tubes.size());
    std::vector<double> K, B, big;
    RunningStats ks;
    row.min_excess = std::numeric_limits<std::int64_t>::max();
    for (const auto& c : counts) {
      K.push_back(static_cast<double>(c.k_eps));
      B.push_back(static_cast<double>(c.b_clusters));
      big.push_back(static_cast<double>(c.big_loops));
      ks.add(static_cast<double>(c.k_eps));
      row.min_excess = std::min(row.min_excess, c.k_eps - c.b_clusters);
      row.type1 += c.type1;
      row.type2 += c.type2;
      row.neither += c.neither;
    }
    if (counts.empty()) row.min_excess = 0;
    row.k_mean = ks.mean();
    row.k_var = ks.variance();
    row.k_dispersion = dispersion_index(K);
    RunningStats bs, gs;
    for (double x : B) bs.add(x);
    for (double x : big) gs.add(x);
    row.b_mean = bs.mean();
    row.big_mean = gs.mean();
    row.big_dispersion = dispersion_index(big);
    row.dispersion_null = counts.size() > 1 ? dispersion_null_interval(static_cast<std::int64_t>(counts.size()))
                                            : Interval{};
    if (counts.size() >= 2) {
      auto rr = ratio_of_means(K, B);
      row.ratio = rr.ratio;
      row.ratio_se = rr.se;
    } else {
      row.ratio = row.ratio_se = std::numeric_limits<double>::quiet_NaN();
    }
    row.ratio_ci95 = {row.ratio - z95 * row.ratio_se, row.ratio + z95 * row.ratio_se};
    row.ratio_ci99 = {row.ratio - z99 * row.ratio_se, row.ratio + z99 * row.ratio_se};
    row.z_vs_two = (row.ratio - 2.0) / row.ratio_se;
    row.p_vs_two = std::isfinite(row.z_vs_two) ? normal_two_sided_p(row.z_vs_two)
                                                : std::numeric_limits<double>::quiet_NaN();
    rep.rows.push_back(row);
    rep.replicas.insert(rep.replicas.end(), counts.begin(), counts.end());
  }
  return rep;
}

// ---------------------------------------------------------------- gamma window

std::string GammaWindowReport::to_json() const {
  json j;
  j["disclaimer"] = kDeskScaleDisclaimer;
  j["d"] = box.d;
  j["N"] = box.N;
  j["eps"] = eps;
  j["beta"] = beta;
  j["replicas"] = replicas;
  j["seed"] = seed;
  j["chain_max_diameters"] = chain_max;
  json rows_j = json::array();
  for (const auto& r : rows) {
    rows_j.push_back({{"gamma0", r.gamma0},
                      {"threshold", r.threshold},
                      {"within", r.within},
                      {"candidates", r.candidates},
                      {"frequency", r.frequency()},
                      {"ci95", interval_json(r.ci)}});
  }
  j["rows"] = rows_j;
  return j.dump(2);
}

std::string GammaWindowReport::to_csv() const {
  std::ostringstream os;
  os << "# " << kDeskScaleDisclaimer << "\n";
  os << "gamma0,threshold,within,candidates,frequency,ci_lo,ci_hi\n";
  for (const auto& r : rows) {
    os << num(r.gamma0) << ',' << num(r.threshold) << ',' << r.within << ',' << r.candidates << ','
       << num(r.frequency()) << ',' << num(r.ci.lo) << ',' << num(r.ci.hi) << "\n";
  }
  return os.str();
}

GammaWindowReport gamma_window_experiment(const BoxConfig& box, double eps, double beta,
                                          const std::vector<double>& gamma0s, std::int64_t replicas,
                                          std::uint64_t seed, const RunOptions& opt) {
  GammaWindowReport rep;
  rep.box = box;
  rep.eps = eps;
  rep.beta = beta;
  rep.replicas = replicas;
  rep.seed = seed;
  auto table = loop_intensity(box, suggested_lmax(box));
  auto family = tube_family(eps, box);
  const double kappa = resolve_kappa(opt.kappa, box.d);
  const double beta_threshold = std::pow(static_cast<double>(box.N), beta);
  auto per = run_replicas(replicas, opt.threads, [&](std::int64_t r) {
    SoupSample s = sample_soup(table, replica_seed(seed, static_cast<std::uint64_t>(r)));
    attach_bridges(s, kappa);
    ClusterOptions co;
    co.min_diameter = min_cluster_diameter(eps, box.N);
    auto clusters = build_clusters(s, co);
    auto hits = detect_C_eps(s, clusters, family);
    std::vector<int> out;
    for (std::size_t pos : hits) {
      const auto& c = clusters[pos];
      int top = 0;
      for (auto id : c.loops) top = std::max(top, s.loops[static_cast<std::size_t>(id)].diameter);
      if (top > beta_threshold) continue;
      const auto& cert = c.certificates.front();
      auto chain = minimal_chain(s, c, cert.tube, cert.clearance_min);
      if (!chain) throw ConsistencyError("winding cluster without a minimal chain");
      out.push_back(chain->max_loop_diameter);
    }
    return out;
  });
  for (const auto& v : per) rep.chain_max.insert(rep.chain_max.end(), v.begin(), v.end());
  for (double g : gamma0s) {
    GammaWindowRow row;
    row.gamma0 = g;
    row.threshold = std::pow(static_cast<double>(box.N), g);
    row.candidates = static_cast<std::int64_t>(rep.chain_max.size());
    for (int m : rep.chain_max) {
      if (m < row.threshold) ++row.within;
    }
    row.ci = wilson_interval(row.within, row.candidates);
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------- hausdorff

std::string to_string(ResampleScope scope) {
  return scope == ResampleScope::kFullBox ? "full_box" : "inside_cluster";
}

ResampleScope resample_scope_from_string(const std::string& s) {
  if (s == "full_box") return ResampleScope::kFullBox;
  if (s == "inside_cluster") return ResampleScope::kInsideCluster;
  throw DomainError("unknown resample scope: " + s);
}

namespace {

[[noreturn]] void rejection_floor(const ClusterRecord& c, std::int64_t attempts, ResampleScope scope) {
  throw RejectionRateError("resampling a cluster of " + std::to_string(c.vertices.size()) + " vertices (" +
                               to_string(scope) + "): no acceptance in " + std::to_string(attempts) +
                               " attempts, rate below " + num(1.0 / static_cast<double>(attempts)),
                           0.0, attempts);
}

std::int64_t attempt_cap(const ResampleOptions& opt) {
  if (!(opt.min_acceptance_rate > 0.0) || opt.min_acceptance_rate > 1.0) {
    throw DomainError("acceptance floor must lie in (0,1]");
  }
  return static_cast<std::int64_t>(std::ceil(1.0 / opt.min_acceptance_rate));
}

Resample resample_inside(const SoupSample& s, const ClusterRecord& c, const LoopIntensityTable& table,
                         std::uint64_t seed, const ResampleOptions& opt) {
  Lattice lat(s.box);
  const int d = lat.dim();
  const double kappa = resolve_kappa(opt.kappa, d);
  RegionSoupSampler region(s.box, c.vertices, table.lmax(), table.alpha());
  const auto& verts = region.region();
  const int n = static_cast<int>(verts.size());
  auto local = [&](VertexId v) {
    auto it = std::lower_bound(verts.begin(), verts.end(), v);
    return (it != verts.end() && *it == v) ? static_cast<int>(it - verts.begin()) : -1;
  };
  // Inside edges (both ends in c) and boundary edges (one end outside).
  struct Edge {
    EdgeId id;
    int a, b;  // local indices, b = -1 on the boundary
    VertexId outside;
  };
  std::vector<Edge> inside, boundary;
  for (int k = 0; k < n; ++k) {
    for (int dir = 0; dir < 2 * d; ++dir) {
      VertexId w = lat.step(verts[k], dir);
      if (w == kNoVertex) continue;
      int j = local(w);
      if (j < 0) {
        boundary.push_back({lat.edge_of_step(verts[k], dir), k, -1, w});
      } else if (j > k) {
        inside.push_back({lat.edge_of_step(verts[k], dir), k, j, kNoVertex});
      }
    }
  }

  const std::int64_t cap = attempt_cap(opt);
  for (std::int64_t attempt = 0; attempt < cap; ++attempt) {
    Rng rng = make_rng(seed, Stream::kResample, static_cast<std::uint64_t>(attempt));
    auto loops = region.sample_loops(rng);
    auto stat = region.sample_stationary(rng);
    std::vector<double> occ = stat;
    std::vector<EdgeId> crossed;
    UnionFind uf(n);
    for (const auto& loop : loops) {
      VertexId v = loop.root;
      for (std::size_t t = 0; t < loop.steps.size(); ++t) {
        occ[static_cast<std::size_t>(local(v))] += loop.holding[t];
        VertexId w = lat.step(v, loop.steps[t]);
        crossed.push_back(lat.edge_of_step(v, loop.steps[t]));
        uf.unite(local(v), local(w));
        v = w;
      }
    }
    std::sort(crossed.begin(), crossed.end());
    crossed.erase(std::unique(crossed.begin(), crossed.end()), crossed.end());
    bool leaks = false;
    for (const auto& e : boundary) {
      double t = kappa * std::sqrt(occ[static_cast<std::size_t>(e.a)] * s.occupation[static_cast<std::size_t>(e.outside)]);
      if (bernoulli_one_minus_exp(t, uniform01(rng))) {
        leaks = true;
        break;
      }
    }
    if (leaks) continue;
    std::vector<EdgeId> open_bridges;
    for (const auto& e : inside) {
      double u = uniform01(rng);
      if (std::binary_search(crossed.begin(), crossed.end(), e.id)) continue;
      double t = kappa * std::sqrt(occ[static_cast<std::size_t>(e.a)] * occ[static_cast<std::size_t>(e.b)]);
      if (bernoulli_one_minus_exp(t, u)) {
        open_bridges.push_back(e.id);
        uf.unite(e.a, e.b);
      }
    }
    if (uf.set_count() != 1) continue;

    Resample out;
    out.attempts = attempt + 1;
    SoupSample& r = out.soup;
    r = s;
    r.loops.clear();
    std::set<std::int64_t> members(c.loops.begin(), c.loops.end());
    for (std::size_t k = 0; k < s.loops.size(); ++k) {
      if (members.count(static_cast<std::int64_t>(k))) continue;
      r.loops.push_back(s.loops[k]);
      r.loops.back().id = static_cast<std::int64_t>(r.loops.size() - 1);
    }
    for (auto& loop : loops) {
      loop.id = static_cast<std::int64_t>(r.loops.size());
      out.cluster_loops.push_back(loop.id);
      r.loops.push_back(std::move(loop));
    }
    if (!r.stationary.empty()) {
      for (int k = 0; k < n; ++k) r.stationary[static_cast<std::size_t>(verts[k])] = stat[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < n; ++k) r.occupation[static_cast<std::size_t>(verts[k])] = occ[static_cast<std::size_t>(k)];
    if (r.has_bridges()) {
      for (const auto& e : inside) r.bridges[static_cast<std::size_t>(e.id)] = false;
      for (const auto& e : boundary) r.bridges[static_cast<std::size_t>(e.id)] = false;
      for (EdgeId e : open_bridges) r.bridges[static_cast<std::size_t>(e)] = true;
    }
    return out;
  }
  rejection_floor(c, cap, ResampleScope::kInsideCluster);
}

Resample resample_full(const SoupSample& s, const ClusterRecord& c, const LoopIntensityTable& table,
                       std::uint64_t seed, const ResampleOptions& opt) {
  Lattice lat(s.box);
  const double kappa = resolve_kappa(opt.kappa, lat.dim());
  const std::int64_t cap = attempt_cap(opt);
  for (std::int64_t attempt = 0; attempt < cap; ++attempt) {
    SoupSample r = sample_soup(table, derive_seed(seed, Stream::kResample, static_cast<std::uint64_t>(attempt)));
    attach_bridges(r, kappa);
    auto labels = cluster_labels(r);
    const auto label = labels[static_cast<std::size_t>(c.vertices.front())];
    bool same = true;
    for (VertexId v : c.vertices) same = same && labels[static_cast<std::size_t>(v)] == label;
    if (!same) continue;
    std::size_t size = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
    if (size != c.vertices.size()) continue;
    Resample out;
    out.attempts = attempt + 1;
    for (std::size_t k = 0; k < r.loops.size(); ++k) {
      if (labels[static_cast<std::size_t>(r.loops[k].root)] == label) {
        out.cluster_loops.push_back(static_cast<std::int64_t>(k));
      }
    }
    out.soup = std::move(r);
    return out;
  }
  rejection_floor(c, cap, ResampleScope::kFullBox);
}

}  // namespace

Resample resample_cluster(const SoupSample& s, const ClusterRecord& c, const LoopIntensityTable& table,
                          std::uint64_t seed, const ResampleOptions& opt) {
  if (c.vertices.empty()) throw PreconditionError("cannot resample an empty cluster");
  if (s.mode != SampleMode::kFull) throw PreconditionError("resampling needs a full soup");
  if (s.occupation.size() != static_cast<std::size_t>(Lattice(s.box).volume())) {
    throw PreconditionError("resampling needs the occupation field");
  }
  if (opt.scope == ResampleScope::kFullBox) return resample_full(s, c, table, seed, opt);
  return resample_inside(s, c, table, seed, opt);
}

std::int64_t largest_b_loop(const SoupSample& s, const std::vector<std::int64_t>& loops, const TubeFamily& family) {
  SoupSample sub;
  sub.box = s.box;
  for (auto id : loops) sub.loops.push_back(s.loops[static_cast<std::size_t>(id)]);
  std::int64_t best = -1;
  int best_diam = -1;
  for (const auto& b : detect_B_eps(sub, family)) {
    auto id = loops[static_cast<std::size_t>(b.loop)];
    int diam = sub.loops[static_cast<std::size_t>(b.loop)].diameter;
    if (diam > best_diam || (diam == best_diam && id < best)) {
      best = id;
      best_diam = diam;
    }
  }
  return best;
}

std::string HausdorffReport::to_json() const {
  json j;
  j["disclaimer"] = kDeskScaleDisclaimer;
  j["d"] = box.d;
  j["N"] = box.N;
  j["eps"] = eps;
  j["beta"] = beta;
  j["scope"] = to_string(scope);
  j["replicas"] = replicas;
  j["seed"] = seed;
  j["attempts"] = attempts;
  j["accepted"] = accepted;
  j["acceptance_rate"] = acceptance_rate();
  j["skipped_large"] = skipped_large;
  j["with_b2"] = with_b2;
  j["tail"] = tail;
  j["tail_frequency"] = with_b2 ? static_cast<double>(tail) / with_b2 : 0.0;
  j["tail_ci95"] = interval_json(tail_ci());
  json rows_j = json::array();
  for (const auto& r : rows) {
    rows_j.push_back({{"replica", r.replica},
                      {"cluster", r.cluster},
                      {"size", r.size},
                      {"attempts", r.attempts},
                      {"has_b2", r.has_b2},
                      {"d_H", r.distance},
                      {"scaled", r.scaled}});
  }
  j["rows"] = rows_j;
  return j.dump(2);
}

std::string HausdorffReport::to_csv() const {
  std::ostringstream os;
  os << "# " << kDeskScaleDisclaimer << "\n";
  os << "# scope=" << to_string(scope) << " attempts=" << attempts << " accepted=" << accepted
     << " rate=" << num(acceptance_rate()) << " skipped_large=" << skipped_large << "\n";
  os << "replica,cluster,size,attempts,has_b2,d_H,scaled\n";
  for (const auto& r : rows) {
    os << r.replica << ',' << r.cluster << ',' << r.size << ',' << r.attempts << ',' << (r.has_b2 ? 1 : 0) << ','
       << num(r.distance) << ',' << num(r.scaled) << "\n";
  }
  return os.str();
}

HausdorffReport hausdorff_experiment(const BoxConfig& box, double eps, double beta, std::int64_t replicas,
                                     std::uint64_t seed, const HausdorffOptions& opt) {
  HausdorffReport rep;
  rep.box = box;
  rep.eps = eps;
  rep.beta = beta;
  rep.scope = opt.resample.scope;
  rep.replicas = replicas;
  rep.seed = seed;
  Lattice lat(box);
  auto table = loop_intensity(box, suggested_lmax(box));
  auto family = tube_family(eps, box);
  const double kappa = resolve_kappa(opt.resample.kappa, box.d);
  const double scale = std::pow(static_cast<double>(box.N), beta);
  struct Out {
    std::vector<HausdorffRow> rows;
    std::int64_t skipped = 0;
  };
  auto per = run_replicas(replicas, opt.threads, [&](std::int64_t r) {
    Out out;
    const std::uint64_t rs = replica_seed(seed, static_cast<std::uint64_t>(r));
    SoupSample s = sample_soup(table, rs);
    attach_bridges(s, kappa);
    ClusterOptions co;
    co.min_diameter = min_cluster_diameter(eps, box.N);
    auto clusters = build_clusters(s, co);
    auto hits = detect_C_eps(s, clusters, family);
    for (std::size_t pos : hits) {
      const auto& c = clusters[pos];
      auto b1 = largest_b_loop(s, c.loops, family);
      if (b1 < 0) continue;
      if (static_cast<std::int64_t>(c.vertices.size()) > opt.max_cluster_vertices) {
        ++out.skipped;
        continue;
      }
      ResampleOptions ro = opt.resample;
      ro.kappa = kappa;
      auto res = resample_cluster(s, c, table, derive_seed(rs, Stream::kResample, pos), ro);
      HausdorffRow row;
      row.replica = r;
      row.cluster = c.id;
      row.size = static_cast<std::int64_t>(c.vertices.size());
      row.attempts = res.attempts;
      auto b2 = largest_b_loop(res.soup, res.cluster_loops, family);
      row.has_b2 = b2 >= 0;
      if (row.has_b2) {
        auto t1 = trace(lat, s.loops[static_cast<std::size_t>(b1)]);
        auto t2 = trace(lat, res.soup.loops[static_cast<std::size_t>(b2)]);
        row.distance = hausdorff_distance(lat, t1, t2);
        row.scaled = row.distance / scale;
      }
      out.rows.push_back(row);
    }
    return out;
  });
  for (const auto& o : per) {
    rep.skipped_large += o.skipped;
    for (const auto& row : o.rows) {
      rep.rows.push_back(row);
      rep.attempts += row.attempts;
      ++rep.accepted;
      if (row.has_b2) {
        ++rep.with_b2;
        if (row.distance > scale) ++rep.tail;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------- point on a big loop

double PointOnLoopRow::se() const {
  if (!replicas) return 0.0;
  double q = p();
  return std::sqrt(q * (1.0 - q) / static_cast<double>(replicas));
}

std::string PointOnLoopReport::to_json() const {
  json j;
  j["disclaimer"] = kDeskScaleDisclaimer;
  j["d"] = d;
  j["a"] = a;
  j["seed"] = seed;
  json rows_j = json::array();
  for (const auto& r : rows) {
    rows_j.push_back({{"N", r.N}, {"threshold", r.threshold}, {"hits", r.hits}, {"replicas", r.replicas},
                      {"p", r.p()}, {"se", r.se()}});
  }
  j["rows"] = rows_j;
  j["slope"] = fit.slope;
  j["slope_se"] = fit.slope_se;
  j["bound_slope"] = bound_slope;
  j["slope_consistent"] = slope_consistent;
  j["alpha_doubling"] = {{"N", doubled.N},
                         {"p_alpha2", doubled.p()},
                         {"se", doubled.se()},
                         {"ratio", alpha_ratio},
                         {"ratio_se", alpha_ratio_se}};
  return j.dump(2);
}

std::string PointOnLoopReport::to_csv() const {
  std::ostringstream os;
  os << "# " << kDeskScaleDisclaimer << "\n";
  os << "# slope=" << num(fit.slope) << " slope_se=" << num(fit.slope_se) << " bound=" << num(bound_slope)
     << " alpha_ratio=" << num(alpha_ratio) << " alpha_ratio_se=" << num(alpha_ratio_se) << "\n";
  os << "N,threshold,hits,replicas,p,se\n";
  for (const auto& r : rows) {
    os << r.N << ',' << num(r.threshold) << ',' << r.hits << ',' << r.replicas << ',' << num(r.p()) << ','
       << num(r.se()) << "\n";
  }
  return os.str();
}

PointOnLoopRow point_on_big_loop(int d, int N, double a, std::int64_t replicas, std::uint64_t seed, double alpha,
                                 int threads) {
  PointOnLoopRow row;
  row.N = N;
  row.threshold = std::pow(static_cast<double>(N), a);
  row.replicas = replicas;
  const int D = static_cast<int>(std::ceil(row.threshold - 1e-9));
  if (D > 2 * N) return row;
  BoxConfig box{d, N};
  Lattice lat(box);
  IntensityOptions io;
  io.alpha = alpha;
  auto table = loop_intensity(box, suggested_lmax(box, 1e-6, alpha), io);
  const VertexId origin = lat.id(std::vector<int>(static_cast<std::size_t>(d), 0));
  auto hit = run_replicas(replicas, threads, [&](std::int64_t r) -> char {
    const std::uint64_t rs = replica_seed(seed, static_cast<std::uint64_t>(r));
    SoupSample s = D <= 1 ? sample_soup(table, rs) : sample_large_loops(table, D, rs);
    for (const auto& loop : s.loops) {
      if (loop.diameter < D) continue;
      for (VertexId v : loop.vertices(lat)) {
        if (v == origin) return 1;
      }
    }
    return 0;
  });
  for (char h : hit) row.hits += h;
  return row;
}

PointOnLoopReport point_on_big_loop_scaling(int d, const std::vector<int>& Ns, double a, std::int64_t replicas,
                                            std::uint64_t seed, int threads) {
  if (Ns.empty()) throw DomainError("point_on_big_loop_scaling needs at least one N");
  PointOnLoopReport rep;
  rep.d = d;
  rep.a = a;
  rep.seed = seed;
  rep.bound_slope = -a * (d - 2);
  std::vector<double> x, y, sig;
  for (int N : Ns) {
    auto row = point_on_big_loop(d, N, a, replicas, derive_seed(seed, Stream::kEstimator, static_cast<std::uint64_t>(N)),
                                 0.5, threads);
    rep.rows.push_back(row);
    if (row.hits > 0 && row.hits < row.replicas) {
      x.push_back(std::log(static_cast<double>(N)));
      y.push_back(std::log(row.p()));
      sig.push_back(row.se() / row.p());
    }
  }
  if (x.size() >= 2) {
    rep.fit = linear_fit(x, y, sig);
    rep.slope_consistent = rep.fit.slope <= rep.bound_slope + 2.0 * rep.fit.slope_se;
  } else {
    rep.fit.slope = rep.fit.slope_se = std::numeric_limits<double>::quiet_NaN();
  }
  const int Nmax = *std::max_element(Ns.begin(), Ns.end());
  rep.doubled = point_on_big_loop(d, Nmax, a, replicas, derive_seed(seed, Stream::kEstimator, 1000003), 1.0, threads);
  const PointOnLoopRow* base = nullptr;
  for (const auto& r : rep.rows) {
    if (r.N == Nmax) base = &r;
  }
  if (base && base->hits > 0 && rep.doubled.hits > 0) {
    rep.alpha_ratio = rep.doubled.p() / base->p();
    rep.alpha_ratio_se = rep.alpha_ratio * std::hypot(base->se() / base->p(), rep.doubled.se() / rep.doubled.p());
  } else {
    rep.alpha_ratio = rep.alpha_ratio_se = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

// ---------------------------------------------------------------- two-point oracle

std::vector<PointPair> calibration_pairs() {
  return {
      {{0, 0, 0}, {1, 0, 0}},
      {{0, 0, 0}, {2, 0, 0}},
      {{0, 0, 0}, {1, 1, 0}},
      {{0, 0, 0}, {2, 2, 2}},
  };
}

std::vector<PointPair> held_out_pairs() {
  return {
      {{0, 0, 0}, {0, 0, 1}},   {{1, 1, 1}, {1, 2, 1}},   {{-1, 0, 2}, {1, 0, 2}},
      {{0, -2, 0}, {0, 1, 0}},  {{-1, -1, 0}, {0, 0, 1}}, {{2, 0, -1}, {0, 1, -1}},
      {{-2, -2, 0}, {0, 0, 0}}, {{-1, 2, 1}, {1, -1, 1}}, {{-2, 0, 0}, {2, 0, 0}},
      {{-1, -1, -1}, {2, 1, 1}},
  };
}

std::string to_string(Backend b) { return b == Backend::kLoop ? "loop_soup" : "gff_cable"; }

double TwoPointRow::se() const {
  if (!replicas) return 0.0;
  return std::sqrt(arcsine * (1.0 - arcsine) / static_cast<double>(replicas));
}

double TwoPointRow::z() const {
  double s = se();
  return s > 0 ? (frequency() - arcsine) / s : 0.0;
}

double TwoPointReport::max_abs_z() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, std::abs(r.z()));
  return m;
}

std::string TwoPointReport::to_json() const {
  json j;
  j["d"] = box.d;
  j["N"] = box.N;
  j["backend"] = to_string(backend);
  j["kappa"] = kappa;
  j["seed"] = seed;
  json rows_j = json::array();
  for (const auto& r : rows) {
    rows_j.push_back({{"x", point_json(r.pair.x)},
                      {"y", point_json(r.pair.y)},
                      {"arcsine", r.arcsine},
                      {"hits", r.hits},
                      {"replicas", r.replicas},
                      {"frequency", r.frequency()},
                      {"se", r.se()},
                      {"z", r.z()}});
  }
  j["rows"] = rows_j;
  j["max_abs_z"] = max_abs_z();
  return j.dump(2);
}

std::string TwoPointReport::to_csv() const {
  std::ostringstream os;
  os << "backend,x,y,arcsine,hits,replicas,frequency,se,z\n";
  for (const auto& r : rows) {
    os << to_string(backend) << ',' << point_str(r.pair.x) << ',' << point_str(r.pair.y) << ',' << num(r.arcsine)
       << ',' << r.hits << ',' << r.replicas << ',' << num(r.frequency()) << ',' << num(r.se()) << ','
       << num(r.z()) << "\n";
  }
  return os.str();
}

namespace {

std::vector<std::pair<VertexId, VertexId>> pair_ids(const Lattice& lat, const std::vector<PointPair>& pairs) {
  std::vector<std::pair<VertexId, VertexId>> out;
  for (const auto& p : pairs) out.emplace_back(lat.id(p.x), lat.id(p.y));
  return out;
}

// Hit bits of every pair for one replica, appended to `out`.
void connect_bits(const std::vector<std::uint32_t>& labels, const std::vector<std::pair<VertexId, VertexId>>& ids,
                  std::vector<char>& out) {
  for (auto [x, y] : ids) out.push_back(labels[static_cast<std::size_t>(x)] == labels[static_cast<std::size_t>(y)]);
}

}  // namespace

TwoPointReport two_point_experiment(const BoxConfig& box, Backend backend, const std::vector<PointPair>& pairs,
                                    double kappa, std::int64_t replicas, std::uint64_t seed, int threads) {
  TwoPointReport rep;
  rep.box = box;
  rep.backend = backend;
  rep.kappa = resolve_kappa(kappa, box.d);
  rep.seed = seed;
  Lattice lat(box);
  GreenTable g(box);
  auto ids = pair_ids(lat, pairs);
  std::vector<std::vector<char>> bits;
  if (backend == Backend::kLoop) {
    auto table = loop_intensity(box, suggested_lmax(box));
    bits = run_replicas(replicas, threads, [&](std::int64_t r) {
      SoupSample s = sample_soup(table, replica_seed(seed, static_cast<std::uint64_t>(r)));
      attach_bridges(s, rep.kappa);
      std::vector<char> out;
      connect_bits(cluster_labels(s), ids, out);
      return out;
    });
  } else {
    GffSampler sampler(box);
    bits = run_replicas(replicas, threads, [&](std::int64_t r) {
      const std::uint64_t rs = replica_seed(seed, static_cast<std::uint64_t>(r));
      auto f = open_edges(sampler.sample(rs), rs, rep.kappa);
      std::vector<char> out;
      connect_bits(sign_cluster_labels(f), ids, out);
      return out;
    });
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    TwoPointRow row;
    row.pair = pairs[k];
    row.arcsine = two_point_arcsine(g, ids[k].first, ids[k].second);
    row.replicas = replicas;
    for (const auto& b : bits) row.hits += b[k];
    rep.rows.push_back(row);
  }
  return rep;
}

std::string KappaCalibration::to_json() const {
  json j;
  j["d"] = box.d;
  j["N"] = box.N;
  j["replicas"] = replicas;
  j["seed"] = seed;
  j["multipliers"] = multipliers;
  j["chi2"] = chi2;
  j["best_multiplier"] = multipliers[best];
  j["kappa"] = kappa();
  return j.dump(2);
}

std::string KappaCalibration::to_csv() const {
  std::ostringstream os;
  os << "multiplier,kappa,chi2,best\n";
  for (std::size_t k = 0; k < multipliers.size(); ++k) {
    os << num(multipliers[k]) << ',' << num(multipliers[k] / box.d) << ',' << num(chi2[k]) << ','
       << (k == best ? 1 : 0) << "\n";
  }
  return os.str();
}

KappaCalibration calibrate_kappa(const BoxConfig& box, const std::vector<PointPair>& pairs,
                                 const std::vector<double>& multipliers, std::int64_t replicas, std::uint64_t seed,
                                 int threads) {
  if (multipliers.empty()) throw DomainError("calibration needs at least one multiplier");
  KappaCalibration cal;
  cal.box = box;
  cal.multipliers = multipliers;
  cal.replicas = replicas;
  cal.seed = seed;
  Lattice lat(box);
  GreenTable g(box);
  auto ids = pair_ids(lat, pairs);
  auto table = loop_intensity(box, suggested_lmax(box));
  GffSampler sampler(box);
  const std::size_t M = multipliers.size(), P = pairs.size();
  // Bits laid out [multiplier][backend][pair]; the same soup and field serve every multiplier.
  auto bits = run_replicas(replicas, threads, [&](std::int64_t r) {
    const std::uint64_t rs = replica_seed(seed, static_cast<std::uint64_t>(r));
    SoupSample s = sample_soup(table, rs);
    auto field = sampler.sample(rs);
    std::vector<char> out;
    out.reserve(M * 2 * P);
    for (double m : multipliers) {
      const double kappa = m / box.d;
      SoupSample sb = s;
      attach_bridges(sb, kappa);
      connect_bits(cluster_labels(sb), ids, out);
      connect_bits(sign_cluster_labels(open_edges(field, rs, kappa)), ids, out);
    }
    return out;
  });
  std::vector<double> p(P);
  for (std::size_t k = 0; k < P; ++k) p[k] = two_point_arcsine(g, ids[k].first, ids[k].second);
  const double n = static_cast<double>(replicas);
  for (std::size_t m = 0; m < M; ++m) {
    double chi2 = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t k = 0; k < P; ++k) {
        double hits = 0.0;
        for (const auto& row : bits) hits += row[(m * 2 + b) * P + k];
        double var = n * p[k] * (1.0 - p[k]);
        chi2 += (hits - n * p[k]) * (hits - n * p[k]) / var;
      }
    }
    cal.chi2.push_back(chi2);
  }
  cal.best = static_cast<std::size_t>(std::min_element(cal.chi2.begin(), cal.chi2.end()) - cal.chi2.begin());
  return cal;
}

double CrossBackendReport::min_p() const {
  double m = count_test.p_value;
  for (const auto& p : pairs) m = std::min(m, p.test.p_value);
  return m;
}

std::string CrossBackendReport::to_json() const {
  json j;
  j["d"] = box.d;
  j["N"] = box.N;
  j["kappa"] = kappa;
  j["replicas"] = replicas;
  j["seed"] = seed;
  j["backends"] = {to_string(Backend::kLoop), to_string(Backend::kGff)};
  j["cluster_count_test"] = test_json(count_test);
  RunningStats a, b;
  for (auto x : loop_counts) a.add(static_cast<double>(x));
  for (auto x : gff_counts) b.add(static_cast<double>(x));
  j["cluster_count_mean"] = {a.mean(), b.mean()};
  json rows = json::array();
  for (const auto& p : pairs) {
    rows.push_back({{"x", point_json(p.pair.x)},
                    {"y", point_json(p.pair.y)},
                    {"loop_hits", p.loop_hits},
                    {"gff_hits", p.gff_hits},
                    {"test", test_json(p.test)}});
  }
  j["two_point"] = rows;
  j["min_p"] = min_p();
  return j.dump(2);
}

std::string CrossBackendReport::to_csv() const {
  std::ostringstream os;
  os << "replica,loop_clusters,gff_clusters\n";
  for (std::size_t r = 0; r < loop_counts.size(); ++r) {
    os << r << ',' << loop_counts[r] << ',' << gff_counts[r] << "\n";
  }
  return os.str();
}

CrossBackendReport cross_backend_experiment(const BoxConfig& box, const std::vector<PointPair>& pairs, double kappa,
                                            std::int64_t replicas, std::uint64_t seed, int threads) {
  CrossBackendReport rep;
  rep.box = box;
  rep.kappa = resolve_kappa(kappa, box.d);
  rep.replicas = replicas;
  rep.seed = seed;
  Lattice lat(box);
  auto ids = pair_ids(lat, pairs);
  auto table = loop_intensity(box, suggested_lmax(box));
  GffSampler sampler(box);
  // The two backends use unrelated seeds so that their samples are independent.
  const std::uint64_t loop_seed = derive_seed(seed, Stream::kLoops), gff_seed = derive_seed(seed, Stream::kGffField);
  struct Out {
    std::int64_t loop_count = 0, gff_count = 0;
    std::vector<char> loop_bits, gff_bits;
  };
  auto per = run_replicas(replicas, threads, [&](std::int64_t r) {
    Out o;
    SoupSample s = sample_soup(table, replica_seed(loop_seed, static_cast<std::uint64_t>(r)));
    attach_bridges(s, rep.kappa);
    auto labels = cluster_labels(s);
    o.loop_count = static_cast<std::int64_t>(std::set<std::uint32_t>(labels.begin(), labels.end()).size());
    connect_bits(labels, ids, o.loop_bits);
    const std::uint64_t gs = replica_seed(gff_seed, static_cast<std::uint64_t>(r));
    auto f = open_edges(sampler.sample(gs), gs, rep.kappa);
    auto gl = sign_cluster_labels(f);
    o.gff_count = static_cast<std::int64_t>(std::set<std::uint32_t>(gl.begin(), gl.end()).size());
    connect_bits(gl, ids, o.gff_bits);
    return o;
  });
  for (const auto& o : per) {
    rep.loop_counts.push_back(o.loop_count);
    rep.gff_counts.push_back(o.gff_count);
  }
  rep.count_test = chi_square_two_sample(rep.loop_counts, rep.gff_counts);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    CrossBackendReport::PairTest t;
    t.pair = pairs[k];
    for (const auto& o : per) {
      t.loop_hits += o.loop_bits[k];
      t.gff_hits += o.gff_bits[k];
    }
    t.test = two_proportion_test(t.loop_hits, replicas, t.gff_hits, replicas);
    rep.pairs.push_back(t);
  }
  return rep;
}

}  // namespace loopcycle
