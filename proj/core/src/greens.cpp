#include "loopcycle/greens.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "loopcycle/digest.hpp"
#include "loopcycle/errors.hpp"

namespace loopcycle {

void apply_killed_laplacian(const Lattice& lat, const std::vector<double>& x, std::vector<double>& y) {
  const std::int64_t V = lat.volume();
  const std::int64_t side = lat.side();
  const double h = 1.0 / (2.0 * lat.dim());
  y.assign(x.begin(), x.end());
  for (int axis = 0; axis < lat.dim(); ++axis) {
    const std::int64_t s = lat.stride(axis);
    const std::int64_t block = s * side;
    for (std::int64_t base = 0; base < V; base += block) {
      for (std::int64_t c = 0; c + 1 < side; ++c) {
        const std::int64_t off = base + c * s;
        double* yl = y.data() + off;
        double* yu = y.data() + off + s;
        const double* xl = x.data() + off;
        const double* xu = x.data() + off + s;
        for (std::int64_t low = 0; low < s; ++low) {
          yl[low] -= h * xu[low];
          yu[low] -= h * xl[low];
        }
      }
    }
  }
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

GreenColumn green_column(const Lattice& lat, VertexId source, const CgOptions& opt) {
  if (source < 0 || source >= lat.volume()) throw DomainError("green_column source outside box");
  const std::size_t n = static_cast<std::size_t>(lat.volume());
  GreenColumn col;
  col.source = source;
  col.values.assign(n, 0.0);
  std::vector<double> r(n, 0.0), p(n), ap(n);
  r[static_cast<std::size_t>(source)] = 1.0;
  int iters = 0;
  // Outer loop restarts CG from the true residual until it meets the tolerance.
  for (int restart = 0; restart < 8; ++restart) {
    p = r;
    double rr = dot(r, r);
    while (std::sqrt(rr) > opt.tolerance && iters < opt.max_iterations) {
      apply_killed_laplacian(lat, p, ap);
      double alpha = rr / dot(p, ap);
      for (std::size_t k = 0; k < n; ++k) {
        col.values[k] += alpha * p[k];
        r[k] -= alpha * ap[k];
      }
      double rr_new = dot(r, r);
      double beta = rr_new / rr;
      rr = rr_new;
      for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * p[k];
      ++iters;
    }
    apply_killed_laplacian(lat, col.values, ap);
    for (std::size_t k = 0; k < n; ++k) r[k] = -ap[k];
    r[static_cast<std::size_t>(source)] += 1.0;
    col.relative_residual = std::sqrt(dot(r, r));
    if (col.relative_residual <= opt.tolerance || iters >= opt.max_iterations) break;
  }
  col.iterations = iters;
  if (col.relative_residual > opt.tolerance) {
    std::ostringstream os;
    os << "conjugate gradient did not converge: relative residual " << col.relative_residual
       << " after " << iters << " iterations";
    throw ConvergenceError(os.str(), col.relative_residual, iters);
  }
  return col;
}

GreenColumn green_column(const BoxConfig& box, const Point& y, const CgOptions& opt) {
  Lattice lat(box);
  if (y.cable || !lat.contains(y.coords)) throw DomainError("green_column source outside box");
  return green_column(lat, lat.id(y), opt);
}

GreenTable::GreenTable(BoxConfig box, CgOptions opt) : lattice_(box), opt_(opt) {}

std::shared_ptr<const GreenColumn> GreenTable::column(VertexId y) const {
  {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(y);
    if (it != cache_.end()) return it->second;
  }
  auto col = std::make_shared<const GreenColumn>(green_column(lattice_, y, opt_));
  std::lock_guard lock(mutex_);
  return cache_.emplace(y, std::move(col)).first->second;
}

double GreenTable::operator()(VertexId x, VertexId y) const {
  if (x < 0 || x >= lattice_.volume()) throw DomainError("point outside box");
  return column(y)->values[static_cast<std::size_t>(x)];
}

double GreenTable::value(const Point& x, const Point& y) const {
  return (*this)(lattice_.id(x), lattice_.id(y));
}

double two_point_arcsine(const GreenTable& g, VertexId x, VertexId y) {
  double gxy = g(x, y);
  double r = gxy / std::sqrt(g(x, x) * g(y, y));
  if (r > 1.0 + 1e-12 || r < -1.0 - 1e-12) throw NumericError("arcsine argument outside [-1,1]");
  r = std::clamp(r, -1.0, 1.0);
  return 2.0 / std::numbers::pi * std::asin(r);
}

double two_point_arcsine(const GreenTable& g, const Point& x, const Point& y) {
  return two_point_arcsine(g, g.lattice().id(x), g.lattice().id(y));
}

void write_green_column_csv(std::ostream& os, const Lattice& lat, const GreenColumn& col) {
  os.precision(17);
  std::vector<int> c(lat.dim());
  for (VertexId v = 0; v < lat.volume(); ++v) {
    lat.coords(v, c);
    for (int k = 0; k < lat.dim(); ++k) os << c[k] << ',';
    os << col.values[static_cast<std::size_t>(v)] << '\n';
  }
}

double spectral_radius(const BoxConfig& box) {
  validate(box);
  if (box.N == 0) return 0.0;
  return std::cos(std::numbers::pi / (2.0 * box.N + 2.0));
}

double tail_mass_bound(const BoxConfig& box, int lmax, double alpha) {
  double rho = spectral_radius(box);
  if (rho == 0.0) return 0.0;
  int l0 = lmax + 2 - (lmax % 2);
  double log_term = l0 * std::log(rho) - std::log(static_cast<double>(l0)) - std::log1p(-rho * rho);
  return static_cast<double>(vertex_count(box)) * alpha * std::exp(log_term);
}

int suggested_lmax(const BoxConfig& box, double tail_target, double alpha) {
  int lmax = 2;
  while (tail_mass_bound(box, lmax, alpha) > tail_target) {
    lmax += 2;
    if (lmax > 10'000'000) throw ResourceError("no feasible lmax for the requested tail bound");
  }
  return lmax;
}

namespace {

std::int64_t binomial_count(int n, int k) {
  if (k < 0 || k > n) return 0;
  long double r = 1.0L;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<std::int64_t>(std::llround(static_cast<double>(r)));
}

std::size_t tri_index(int A, int k) {
  return static_cast<std::size_t>(A) * (A + 1) / 2 + static_cast<std::size_t>(k);
}

void enumerate_tuples(int d, int N, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == d) {
    out.push_back(cur);
    return;
  }
  int start = cur.empty() ? 0 : cur.back();
  for (int a = start; a <= N; ++a) {
    cur.push_back(a);
    enumerate_tuples(d, N, cur, out);
    cur.pop_back();
  }
}

}  // namespace

LoopIntensityTable loop_intensity(const BoxConfig& box, int lmax, const IntensityOptions& opt) {
  validate(box);
  if (lmax < 2 || lmax % 2 != 0) throw DomainError("lmax must be even and >= 2");
  if (!(opt.alpha > 0.0)) throw DomainError("alpha must be positive");
  const int d = box.d, N = box.N;
  const int half = lmax / 2;
  const int width = 2 * N + 1;

  std::int64_t n_classes = binomial_count(N + d, d);
  std::int64_t n_suffix = 0;
  for (int m = 1; m <= d; ++m) n_suffix += binomial_count(N + m, m);
  double bytes = 8.0 * ((n_suffix + n_classes) * (half + 1.0) +
                        (d - 1.0) * (half + 1.0) * (half + 2.0) / 2.0 +
                        (N + 1.0) * (lmax + 1.0) * width);
  if (bytes > static_cast<double>(opt.memory_budget_bytes)) {
    std::ostringstream os;
    os << "loop intensity table exceeds memory budget: |Lambda|=" << vertex_count(box)
       << ", Lmax=" << lmax << ", needs " << bytes << " bytes";
    throw ResourceError(os.str());
  }

  LoopIntensityTable t(box);
  t.alpha_ = opt.alpha;
  t.lmax_ = lmax;
  t.half_ = half;
  t.tail_bound_ = tail_mass_bound(box, lmax, opt.alpha);

  // 1D killed walk on [-N,N] started at a >= 0.
  t.walk1d_.assign(N + 1, std::vector<double>(static_cast<std::size_t>(lmax + 1) * width, 0.0));
  for (int a = 0; a <= N; ++a) {
    auto& f = t.walk1d_[a];
    f[a + N] = 1.0;
    for (int r = 0; r < lmax; ++r) {
      const double* cur = f.data() + static_cast<std::size_t>(r) * width;
      double* nxt = f.data() + static_cast<std::size_t>(r + 1) * width;
      for (int y = 0; y < width; ++y) {
        double s = 0.0;
        if (y > 0) s += cur[y - 1];
        if (y + 1 < width) s += cur[y + 1];
        nxt[y] = 0.5 * s;
      }
    }
  }

  // Binomial weights C(L,l) (1/m)^l (1-1/m)^(L-l) over even L, l.
  std::vector<double> lfact(static_cast<std::size_t>(lmax) + 1);
  for (int k = 0; k <= lmax; ++k) lfact[k] = std::lgamma(k + 1.0);
  t.binom_.assign(d + 1, {});
  for (int m = 2; m <= d; ++m) {
    auto& b = t.binom_[m];
    b.resize(tri_index(half, half) + 1);
    double lp = std::log(1.0 / m), lq = std::log1p(-1.0 / m);
    for (int A = 0; A <= half; ++A) {
      for (int k = 0; k <= A; ++k) {
        int L = 2 * A, l = 2 * k;
        b[tri_index(A, k)] = std::exp(lfact[L] - lfact[l] - lfact[L - l] + l * lp + (L - l) * lq);
      }
    }
  }

  auto q = [&](int a, int A) { return t.walk1d_[a][static_cast<std::size_t>(2 * A) * width + a + N]; };

  std::vector<std::vector<int>> tuples;
  std::vector<int> cur;
  enumerate_tuples(d, N, cur, tuples);

  std::map<std::vector<int>, int> suffix_index;
  // Builds (or reuses) the table S for a sorted suffix.
  std::function<int(const std::vector<int>&)> build_suffix = [&](const std::vector<int>& s) -> int {
    auto it = suffix_index.find(s);
    if (it != suffix_index.end()) return it->second;
    std::vector<double> S(static_cast<std::size_t>(half) + 1, 0.0);
    const int m = static_cast<int>(s.size());
    if (m == 1) {
      for (int A = 0; A <= half; ++A) S[A] = q(s[0], A);
    } else {
      int rest = build_suffix(std::vector<int>(s.begin() + 1, s.end()));
      const auto& R = t.suffix_tables_[rest];
      const auto& b = t.binom_[m];
      std::vector<double> qa(static_cast<std::size_t>(half) + 1);
      for (int A = 0; A <= half; ++A) qa[A] = q(s[0], A);
      for (int A = 0; A <= half; ++A) {
        double acc = 0.0;
        const double* brow = b.data() + tri_index(A, 0);
        for (int k = 0; k <= A; ++k) acc += brow[k] * qa[k] * R[A - k];
        S[A] = acc;
      }
    }
    int idx = static_cast<int>(t.suffix_tables_.size());
    t.suffix_tables_.push_back(std::move(S));
    suffix_index.emplace(s, idx);
    return idx;
  };

  std::vector<double> factorial(d + 1, 1.0);
  for (int k = 1; k <= d; ++k) factorial[k] = factorial[k - 1] * k;

  t.mass_by_length_.assign(static_cast<std::size_t>(half) + 1, 0.0);
  t.classes_.reserve(tuples.size());
  for (const auto& tup : tuples) {
    LoopIntensityTable::RootClass rc;
    rc.tuple = tup;
    rc.suffix.resize(d);
    for (int pos = d - 1; pos >= 0; --pos) {
      rc.suffix[pos] = build_suffix(std::vector<int>(tup.begin() + pos, tup.end()));
    }
    double arrangements = factorial[d];
    int nonzero = 0;
    for (int k = 0; k < d;) {
      int j = k;
      while (j < d && tup[j] == tup[k]) ++j;
      arrangements /= factorial[j - k];
      k = j;
    }
    for (int a : tup) nonzero += (a != 0);
    rc.size = static_cast<std::int64_t>(std::llround(arrangements)) << nonzero;
    const auto& S = t.suffix_tables_[rc.suffix[0]];
    rc.cum_lambda.assign(static_cast<std::size_t>(half) + 1, 0.0);
    for (int A = 1; A <= half; ++A) {
      double lam = opt.alpha * S[A] / (2.0 * A);
      rc.cum_lambda[A] = rc.cum_lambda[A - 1] + lam;
      t.mass_by_length_[A] += static_cast<double>(rc.size) * lam;
    }
    t.class_index_.emplace(t.key_of(tup), static_cast<int>(t.classes_.size()));
    t.classes_.push_back(std::move(rc));
  }
  for (int A = 1; A <= half; ++A) t.total_mass_ += t.mass_by_length_[A];

  Sha256 h;
  h.update_pod(box.d);
  h.update_pod(box.N);
  h.update_pod(t.alpha_);
  h.update_pod(t.lmax_);
  for (const auto& rc : t.classes_) h.update(rc.cum_lambda.data(), rc.cum_lambda.size() * sizeof(double));
  t.hash_ = h.hex();
  return t;
}

std::int64_t LoopIntensityTable::key_of(const std::vector<int>& sorted_tuple) const {
  std::int64_t key = 0;
  for (int a : sorted_tuple) key = key * (box().N + 1) + a;
  return key;
}

int LoopIntensityTable::class_of(VertexId x) const {
  std::vector<int> c = lattice_.coords(x);
  for (auto& a : c) a = std::abs(a);
  std::sort(c.begin(), c.end());
  return class_index_.at(key_of(c));
}

double LoopIntensityTable::return_probability(VertexId x, int L) const {
  if (L < 0 || L % 2 != 0 || L > lmax_) return 0.0;
  return suffix_table(class_of(x), 0)[L / 2];
}

double LoopIntensityTable::lambda(VertexId x, int L) const {
  if (L < 2 || L % 2 != 0 || L > lmax_) return 0.0;
  return alpha_ * return_probability(x, L) / L;
}

double LoopIntensityTable::lambda(const Point& x, int L) const { return lambda(lattice_.id(x), L); }

double LoopIntensityTable::mass_at_length(int L) const {
  if (L < 2 || L % 2 != 0 || L > lmax_) return 0.0;
  return mass_by_length_[L / 2];
}

double LoopIntensityTable::mass_from_length(int lmin) const {
  double s = 0.0;
  for (int A = std::max(1, (lmin + 1) / 2); A <= half_; ++A) s += mass_by_length_[A];
  return s;
}

double LoopIntensityTable::class_root_mass(int c, int lmin) const {
  const auto& cum = classes_[c].cum_lambda;
  int A0 = std::max(1, (lmin + 1) / 2);
  if (A0 > half_) return 0.0;
  return cum[half_] - cum[A0 - 1];
}

double LoopIntensityTable::walk_1d(int a, int r, int y) const {
  const int N = box().N;
  if (a < 0 || a > N || r < 0 || r > lmax_ || y < -N || y > N) return 0.0;
  return walk1d_[a][static_cast<std::size_t>(r) * (2 * N + 1) + y + N];
}

double LoopIntensityTable::binom_weight(int m, int L, int l) const {
  return binom_[m][tri_index(L / 2, l / 2)];
}

VertexId LoopIntensityTable::sample_root(int c, Rng& rng) const {
  std::vector<int> coords = classes_[c].tuple;
  const int d = static_cast<int>(coords.size());
  for (int k = d - 1; k > 0; --k) {
    std::uniform_int_distribution<int> pick(0, k);
    std::swap(coords[k], coords[pick(rng)]);
  }
  for (auto& a : coords) {
    if (a != 0 && (rng() >> 63)) a = -a;
  }
  return lattice_.id(coords);
}

int LoopIntensityTable::sample_length(int c, int lmin, Rng& rng) const {
  const auto& cum = classes_[c].cum_lambda;
  int A0 = std::max(1, (lmin + 1) / 2);
  if (A0 > half_) throw DomainError("sample_length: no lengths above lmin");
  double base = cum[A0 - 1];
  double total = cum[half_] - base;
  if (!(total > 0.0)) throw DomainError("sample_length: zero mass above lmin");
  double u = base + uniform01(rng) * total;
  auto it = std::upper_bound(cum.begin() + A0, cum.end(), u);
  int A = (it == cum.end()) ? half_ : static_cast<int>(it - cum.begin());
  return 2 * A;
}

std::vector<std::uint8_t> LoopIntensityTable::sample_bridge(VertexId x, int L, Rng& rng) const {
  if (L < 2 || L % 2 != 0 || L > lmax_) throw DomainError("bridge length must be even in [2, lmax]");
  const int d = box().d, N = box().N;
  const int width = 2 * N + 1;
  std::vector<int> coords = lattice_.coords(x);
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](int i, int j) { return std::abs(coords[i]) < std::abs(coords[j]); });
  std::vector<int> tup(d);
  for (int k = 0; k < d; ++k) tup[k] = std::abs(coords[perm[k]]);
  const int c = class_index_.at(key_of(tup));
  if (!(suffix_table(c, 0)[L / 2] > 0.0)) throw DomainError("no killed bridge of this length exists");

  // Per-coordinate step counts.
  std::vector<int> counts(d, 0);
  int R = L / 2;
  for (int pos = 0; pos + 1 < d && R > 0; ++pos) {
    const int m = d - pos;
    const auto& next = suffix_table(c, pos + 1);
    const double target = uniform01(rng) * suffix_table(c, pos)[R];
    double acc = 0.0;
    int chosen = -1, last_positive = -1;
    const double* qa = walk1d_[tup[pos]].data() + tup[pos] + N;
    for (int k = 0; k <= R; ++k) {
      double w = binom_weight(m, 2 * R, 2 * k) * qa[static_cast<std::size_t>(2 * k) * width] * next[R - k];
      if (w > 0.0) last_positive = k;
      acc += w;
      if (acc > target) {
        chosen = k;
        break;
      }
    }
    if (chosen < 0) chosen = last_positive;
    if (chosen < 0) throw ConsistencyError("bridge composition has zero weight");
    counts[pos] = 2 * chosen;
    R -= chosen;
  }
  counts[d - 1] += 2 * R;

  // One-dimensional killed bridges.
  std::vector<std::vector<std::int8_t>> moves(d);
  for (int pos = 0; pos < d; ++pos) {
    const int l = counts[pos];
    if (l == 0) continue;
    const int a = tup[pos];
    const auto& f = walk1d_[a];
    int y = a;
    moves[pos].reserve(l);
    for (int step = 0; step < l; ++step) {
      int r = l - step;
      double here = f[static_cast<std::size_t>(r) * width + y + N];
      double up = (y + 1 <= N) ? f[static_cast<std::size_t>(r - 1) * width + y + 1 + N] : 0.0;
      double p_up = 0.5 * up / here;
      int s = uniform01(rng) < p_up ? 1 : -1;
      y += s;
      moves[pos].push_back(static_cast<std::int8_t>(s));
    }
    if (y != a) throw ConsistencyError("1D bridge did not return");
    if (coords[perm[pos]] < 0) {
      for (auto& s : moves[pos]) s = static_cast<std::int8_t>(-s);
    }
  }

  // Uniform interleaving of coordinate labels.
  std::vector<std::uint8_t> labels;
  labels.reserve(L);
  for (int pos = 0; pos < d; ++pos) labels.insert(labels.end(), counts[pos], static_cast<std::uint8_t>(pos));
  for (int k = L - 1; k > 0; --k) {
    std::uniform_int_distribution<int> pick(0, k);
    std::swap(labels[k], labels[pick(rng)]);
  }
  std::vector<std::uint8_t> steps(L);
  std::vector<int> used(d, 0);
  for (int k = 0; k < L; ++k) {
    int pos = labels[k];
    int s = moves[pos][used[pos]++];
    steps[k] = static_cast<std::uint8_t>(make_dir(perm[pos], s));
  }
  return steps;
}

std::string LoopIntensityTable::header_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"dims\":" << box().d << ",\"N\":" << box().N << ",\"Lmax\":" << lmax_
     << ",\"alpha\":" << alpha_ << ",\"tail_bound\":" << tail_bound_ << ",\"hash\":\"" << hash_
     << "\",\"layout\":\"class-major\",\"dtype\":\"float64-le\",\"lengths\":[";
  for (int A = 1; A <= half_; ++A) os << (A > 1 ? "," : "") << 2 * A;
  os << "],\"classes\":[";
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    os << (c ? "," : "") << "{\"abs_coords\":[";
    for (std::size_t k = 0; k < classes_[c].tuple.size(); ++k) os << (k ? "," : "") << classes_[c].tuple[k];
    os << "],\"roots\":" << classes_[c].size << "}";
  }
  os << "]}";
  return os.str();
}

void LoopIntensityTable::write_binary(std::ostream& os) const {
  for (const auto& rc : classes_) {
    for (int A = 1; A <= half_; ++A) {
      double lam = rc.cum_lambda[A] - rc.cum_lambda[A - 1];
      os.write(reinterpret_cast<const char*>(&lam), sizeof(double));
    }
  }
}

MassEstimate mass_large_loops(const LoopIntensityTable& table, double diam_cutoff,
                              std::int64_t samples, std::uint64_t seed) {
  if (diam_cutoff < 1.0) throw DomainError("diam_cutoff must be >= 1");
  MassEstimate est;
  const int D = static_cast<int>(std::ceil(diam_cutoff - 1e-12));
  if (D > 2 * table.box().N) return est;
  const int lmin = 2 * D;
  double total = table.mass_from_length(lmin);
  if (!(total > 0.0)) return est;
  std::vector<double> w(table.class_count());
  for (int c = 0; c < table.class_count(); ++c) {
    w[c] = static_cast<double>(table.class_size(c)) * table.class_root_mass(c, lmin);
  }
  std::discrete_distribution<int> pick(w.begin(), w.end());
  Rng rng = make_rng(seed, Stream::kEstimator);
  std::int64_t hits = 0;
  for (std::int64_t k = 0; k < samples; ++k) {
    int c = pick(rng);
    VertexId x = table.sample_root(c, rng);
    int L = table.sample_length(c, lmin, rng);
    auto steps = table.sample_bridge(x, L, rng);
    if (walk_diameter(table.lattice(), x, steps) >= D) ++hits;
  }
  double f = samples > 0 ? static_cast<double>(hits) / static_cast<double>(samples) : 0.0;
  est.value = total * f;
  est.standard_error = samples > 0 ? total * std::sqrt(f * (1.0 - f) / static_cast<double>(samples)) : 0.0;
  est.samples = samples;
  return est;
}

}  // namespace loopcycle
