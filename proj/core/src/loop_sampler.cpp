#include "loopcycle/loop_sampler.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

#include "loopcycle/errors.hpp"
#include "loopcycle/rng.hpp"

namespace loopcycle {

std::map<VertexId, int> RWLoop::visit_counts(const Lattice& lat) const {
  std::map<VertexId, int> m;
  for (VertexId v : vertices(lat)) ++m[v];
  return m;
}

namespace {

void check_tail(const LoopIntensityTable& table, const SamplerOptions& opt) {
  if (table.tail_bound() > opt.max_tail_bound) {
    throw ResourceError("intensity table tail bound " + std::to_string(table.tail_bound()) +
                        " exceeds threshold " + std::to_string(opt.max_tail_bound));
  }
}

SoupSample empty_sample(const LoopIntensityTable& table, std::uint64_t seed, SampleMode mode) {
  SoupSample s;
  s.box = table.box();
  s.seed = seed;
  s.mode = mode;
  s.alpha = table.alpha();
  s.lmax = table.lmax();
  s.tail_bound = table.tail_bound();
  s.table_hash = table.hash();
  return s;
}

void decorate_holding(SoupSample& s) {
  Rng rng = make_rng(s.seed, Stream::kHolding);
  for (auto& loop : s.loops) {
    loop.holding.resize(loop.steps.size());
    for (auto& h : loop.holding) h = exponential1(rng);
  }
}

// Samples `count` loops with L >= lmin from the table's intensity restricted
// to that range; loops with diameter < dmin are dropped.
void draw_loops(const LoopIntensityTable& table, Rng& rng, int lmin, int dmin,
                std::vector<RWLoop>& out) {
  const int nc = table.class_count();
  std::vector<double> w(nc);
  double total = 0.0;
  for (int c = 0; c < nc; ++c) {
    w[c] = static_cast<double>(table.class_size(c)) * table.class_root_mass(c, lmin);
    total += w[c];
  }
  if (!(total > 0.0)) return;
  std::poisson_distribution<long long> count_dist(total);
  long long n = count_dist(rng);
  std::discrete_distribution<int> class_dist(w.begin(), w.end());
  out.reserve(static_cast<std::size_t>(n));
  for (long long k = 0; k < n; ++k) {
    int c = class_dist(rng);
    VertexId root = table.sample_root(c, rng);
    int L = table.sample_length(c, lmin, rng);
    RWLoop loop;
    loop.root = root;
    loop.steps = table.sample_bridge(root, L, rng);
    loop.diameter = walk_diameter(table.lattice(), root, loop.steps);
    if (loop.diameter < dmin) continue;
    loop.id = static_cast<std::int64_t>(out.size());
    out.push_back(std::move(loop));
  }
}

void assert_inside(const Lattice& lat, const std::vector<RWLoop>& loops) {
  const int N = lat.half_side();
  std::vector<int> c(lat.dim());
  for (const auto& loop : loops) {
    lat.coords(loop.root, c);
    for (auto dir : loop.steps) {
      int& x = c[dir_axis(dir)];
      x += dir_sign(dir);
      if (x < -N || x > N) throw ConsistencyError("sampled loop exits the box");
    }
    for (int k = 0; k < lat.dim(); ++k) {
      if (c[k] != lat.coord(loop.root, k)) throw ConsistencyError("sampled loop is not closed");
    }
  }
}

}  // namespace

SoupSample sample_soup(const LoopIntensityTable& table, std::uint64_t seed, const SamplerOptions& opt) {
  check_tail(table, opt);
  SoupSample s = empty_sample(table, seed, SampleMode::kFull);
  const Lattice& lat = table.lattice();
  Rng rng = make_rng(seed, Stream::kLoops);
  draw_loops(table, rng, 2, 0, s.loops);
  assert_inside(lat, s.loops);
  decorate_holding(s);

  // Trivial loops at each vertex contribute Gamma(alpha, 1) occupation.
  Rng srng = make_rng(seed, Stream::kStationary);
  s.stationary.resize(static_cast<std::size_t>(lat.volume()));
  if (table.alpha() == 0.5) {
    std::normal_distribution<double> normal;
    for (auto& x : s.stationary) {
      double z = normal(srng);
      x = 0.5 * z * z;
    }
  } else {
    std::gamma_distribution<double> gamma(table.alpha(), 1.0);
    for (auto& x : s.stationary) x = gamma(srng);
  }
  s.occupation = occupation_field(lat, s.loops, s.stationary);
  return s;
}

SoupSample sample_large_loops(const LoopIntensityTable& table, double diam_cutoff, std::uint64_t seed,
                              const SamplerOptions& opt) {
  if (diam_cutoff < 2.0) throw DomainError("large-loop cutoff must be >= 2");
  check_tail(table, opt);
  SoupSample s = empty_sample(table, seed, SampleMode::kLargeOnly);
  s.diam_cutoff = diam_cutoff;
  const Lattice& lat = table.lattice();
  const int D = static_cast<int>(std::ceil(diam_cutoff - 1e-12));
  if (D <= 2 * table.box().N) {
    Rng rng = make_rng(seed, Stream::kLoops);
    draw_loops(table, rng, 2 * D, D, s.loops);
  }
  assert_inside(lat, s.loops);
  decorate_holding(s);
  s.occupation = occupation_field(lat, s.loops, {});
  return s;
}

SoupSample sample_large_loops(const BoxConfig& box, double diam_cutoff, std::uint64_t seed) {
  auto table = loop_intensity(box, suggested_lmax(box));
  return sample_large_loops(table, diam_cutoff, seed);
}

RegionSoupSampler::RegionSoupSampler(const BoxConfig& box, std::vector<VertexId> region, int lmax, double alpha)
    : lattice_(box), region_(std::move(region)), lmax_(lmax), alpha_(alpha) {
  if (lmax < 2 || lmax % 2) throw DomainError("region sampler needs an even lmax >= 2");
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  std::sort(region_.begin(), region_.end());
  region_.erase(std::unique(region_.begin(), region_.end()), region_.end());
  const int n = static_cast<int>(region_.size()), d2 = 2 * lattice_.dim();
  if (d2 > 16) throw DomainError("region sampler supports d <= 8");
  for (VertexId v : region_) {
    if (v < 0 || v >= lattice_.volume()) throw DomainError("region vertex outside box");
  }
  adj_.assign(static_cast<std::size_t>(n) * d2, -1);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    for (int dir = 0; dir < d2; ++dir) {
      VertexId w = lattice_.step(region_[k], dir);
      if (w == kNoVertex) continue;
      int j = local(w);
      if (j < 0) continue;
      adj_[static_cast<std::size_t>(k) * d2 + dir] = j;
      m(k, j) = 1.0 / d2;
    }
  }
  // Diagonal of M^L from the spectral decomposition of the symmetric kernel.
  const int half = lmax / 2;
  return_.assign(static_cast<std::size_t>(n) * half, 0.0);
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::ArrayXd mu2 = es.eigenvalues().array().square();
    Eigen::MatrixXd u2 = es.eigenvectors().array().square().matrix();
    Eigen::ArrayXd pw = mu2;
    for (int l = 1; l <= half; ++l) {
      Eigen::VectorXd diag = u2 * pw.matrix();
      for (int k = 0; k < n; ++k) {
        return_[static_cast<std::size_t>(k) * half + l - 1] = std::max(0.0, diag(k));
      }
      pw *= mu2;
    }
  }
  cum_.resize(return_.size());
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int l = 1; l <= half; ++l) {
      acc += alpha_ * return_[static_cast<std::size_t>(k) * half + l - 1] / (2.0 * l);
      cum_[static_cast<std::size_t>(k) * half + l - 1] = acc;
    }
  }
}

int RegionSoupSampler::local(VertexId v) const {
  auto it = std::lower_bound(region_.begin(), region_.end(), v);
  if (it == region_.end() || *it != v) return -1;
  return static_cast<int>(it - region_.begin());
}

double RegionSoupSampler::lambda(VertexId x, int L) const {
  int k = local(x);
  if (k < 0 || L < 2 || L > lmax_ || L % 2) return 0.0;
  return alpha_ * return_[static_cast<std::size_t>(k) * (lmax_ / 2) + L / 2 - 1] / L;
}

std::vector<std::uint8_t> RegionSoupSampler::sample_bridge(int root, int L, Rng& rng) const {
  const int n = static_cast<int>(region_.size()), d2 = 2 * lattice_.dim();
  // h[m][j] ∝ number of m-step region paths from j to the root; rescaled per m.
  std::vector<std::vector<double>> h(static_cast<std::size_t>(L));
  h[0].assign(n, 0.0);
  h[0][root] = 1.0;
  for (int m = 1; m < L; ++m) {
    auto& cur = h[m];
    const auto& prev = h[m - 1];
    cur.assign(n, 0.0);
    double top = 0.0;
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int dir = 0; dir < d2; ++dir) {
        int j = adj_[static_cast<std::size_t>(k) * d2 + dir];
        if (j >= 0) acc += prev[j];
      }
      cur[k] = acc;
      top = std::max(top, acc);
    }
    if (top > 0.0) {
      for (auto& x : cur) x /= top;
    }
  }
  std::vector<std::uint8_t> steps;
  steps.reserve(L);
  int at = root;
  for (int t = 0; t < L; ++t) {
    const auto& next = h[static_cast<std::size_t>(L - t - 1)];
    double w[16] = {};
    double total = 0.0;
    for (int dir = 0; dir < d2; ++dir) {
      int j = adj_[static_cast<std::size_t>(at) * d2 + dir];
      w[dir] = j >= 0 ? next[j] : 0.0;
      total += w[dir];
    }
    if (!(total > 0.0)) throw ConsistencyError("region bridge has no continuation");
    double u = uniform01(rng) * total;
    int dir = 0;
    while (dir + 1 < d2 && (u -= w[dir]) >= 0.0) ++dir;
    while (w[dir] == 0.0) --dir;
    steps.push_back(static_cast<std::uint8_t>(dir));
    at = adj_[static_cast<std::size_t>(at) * d2 + dir];
  }
  if (at != root) throw ConsistencyError("region bridge did not close");
  return steps;
}

std::vector<RWLoop> RegionSoupSampler::sample_loops(Rng& rng) const {
  std::vector<RWLoop> out;
  const double total = total_mass();
  if (!(total > 0.0)) return out;
  std::poisson_distribution<long long> count_dist(total);
  const long long count = count_dist(rng);
  const int half = lmax_ / 2;
  for (long long c = 0; c < count; ++c) {
    double u = uniform01(rng) * total;
    auto pos = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin());
    pos = std::min(pos, cum_.size() - 1);
    int k = static_cast<int>(pos / half), L = 2 * static_cast<int>(pos % half + 1);
    RWLoop loop;
    loop.id = static_cast<std::int64_t>(out.size());
    loop.root = region_[k];
    loop.steps = sample_bridge(k, L, rng);
    loop.diameter = walk_diameter(lattice_, loop.root, loop.steps);
    loop.holding.resize(loop.steps.size());
    for (auto& x : loop.holding) x = exponential1(rng);
    out.push_back(std::move(loop));
  }
  return out;
}

std::vector<double> RegionSoupSampler::sample_stationary(Rng& rng) const {
  std::vector<double> out(region_.size());
  std::gamma_distribution<double> gamma(alpha_, 1.0);
  for (auto& x : out) x = gamma(rng);
  return out;
}

long long loop_index(const Lattice& lat, const RWLoop& loop, const Tube& t) {
  return closed_walk_index(lat, loop.root, loop.steps, t);
}

long long loop_winding(const Lattice& lat, const RWLoop& loop, const Tube& t) {
  return std::llabs(loop_index(lat, loop, t));
}

std::vector<double> occupation_field(const Lattice& lat, const std::vector<RWLoop>& loops,
                                     const std::vector<double>& stationary) {
  std::vector<double> occ(static_cast<std::size_t>(lat.volume()), 0.0);
  if (!stationary.empty()) occ = stationary;
  for (const auto& loop : loops) {
    if (loop.holding.size() != loop.steps.size()) throw PreconditionError("loop lacks holding times");
    VertexId v = loop.root;
    for (std::size_t k = 0; k < loop.steps.size(); ++k) {
      occ[static_cast<std::size_t>(v)] += loop.holding[k];
      int dir = loop.steps[k];
      v += dir_sign(dir) * lat.stride(dir_axis(dir));
    }
  }
  return occ;
}

std::vector<double> occupation_field(const SoupSample& s) {
  return occupation_field(Lattice(s.box), s.loops, s.stationary);
}

EdgeBits crossed_edges(const Lattice& lat, const std::vector<RWLoop>& loops) {
  EdgeBits bits(static_cast<std::size_t>(lat.edge_slots()), false);
  for (const auto& loop : loops) {
    VertexId v = loop.root;
    for (auto dir : loop.steps) {
      bits[static_cast<std::size_t>(lat.edge_of_step(v, dir))] = true;
      v += dir_sign(dir) * lat.stride(dir_axis(dir));
    }
  }
  return bits;
}

bool bernoulli_one_minus_exp(double t, double u) {
  if (t <= 0.0) return false;
  // 1 - e^{-t} lies in [t - t^2/2, t]; resolve most draws without exp.
  if (u >= t) return false;
  if (u < t - 0.5 * t * t) return true;
  return u < -std::expm1(-t);
}

void attach_bridges(SoupSample& s, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  Lattice lat(s.box);
  if (s.occupation.size() != static_cast<std::size_t>(lat.volume())) {
    throw PreconditionError("attach_bridges needs the occupation field");
  }
  EdgeBits crossed = crossed_edges(lat, s.loops);
  s.bridges.assign(static_cast<std::size_t>(lat.edge_slots()), false);
  s.kappa = kappa;
  std::vector<double> root_occ(s.occupation.size());
  for (std::size_t k = 0; k < root_occ.size(); ++k) root_occ[k] = std::sqrt(s.occupation[k]);
  Rng rng = make_rng(s.seed, Stream::kBridges);
  const std::int64_t V = lat.volume(), side = lat.side();
  const int d = lat.dim();
  for (int axis = 0; axis < d; ++axis) {
    const std::int64_t st = lat.stride(axis), block = st * side;
    for (std::int64_t base = 0; base < V; base += block) {
      for (std::int64_t c = 0; c + 1 < side; ++c) {
        for (std::int64_t low = 0; low < st; ++low) {
          const std::int64_t a = base + c * st + low;
          const std::size_t e = static_cast<std::size_t>(a * d + axis);
          double u = uniform01(rng);
          if (crossed[e]) continue;
          double t = kappa * root_occ[static_cast<std::size_t>(a)] * root_occ[static_cast<std::size_t>(a + st)];
          if (bernoulli_one_minus_exp(t, u)) s.bridges[e] = true;
        }
      }
    }
  }
}

void write_loops_ndjson(std::ostream& os, const Lattice& lat, const std::vector<RWLoop>& loops) {
  for (const auto& loop : loops) {
    nlohmann::json j;
    j["id"] = loop.id;
    j["root"] = lat.coords(loop.root);
    j["steps"] = encode_steps(loop.steps);
    j["L"] = loop.length();
    j["diam"] = loop.diameter;
    os << j.dump() << '\n';
  }
}

std::vector<RWLoop> read_loops_ndjson(std::istream& is, const Lattice& lat) {
  std::vector<RWLoop> loops;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    RWLoop loop;
    loop.id = j.at("id").get<std::int64_t>();
    loop.root = lat.id(j.at("root").get<std::vector<int>>());
    loop.steps = decode_steps(j.at("steps").get<std::string>(), lat.dim());
    loop.diameter = walk_diameter(lat, loop.root, loop.steps);
    if (loop.length() != j.at("L").get<int>() || loop.diameter != j.at("diam").get<int>()) {
      throw DomainError("loop record is inconsistent");
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

}  // namespace loopcycle
