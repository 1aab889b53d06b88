#include "loopcycle/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "loopcycle/errors.hpp"

namespace loopcycle {

namespace {

constexpr const char* kPlusLetters = "RUFGHIJKMNOPQSTVWXYZ";
constexpr const char* kMinusLetters = "LDBghijkmnopqstvwxyz";
constexpr int kMaxLetterAxes = 20;

bool is_half_integer(double x) {
  double twice = 2.0 * x;
  return std::abs(twice - std::round(twice)) < 1e-12 &&
         (static_cast<long long>(std::llround(twice)) % 2 != 0);
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

void validate(const BoxConfig& box) {
  if (box.d < 3) throw DomainError("box dimension must be at least 3");
  if (box.N < 0) throw DomainError("box half-side must be nonnegative");
  double logv = box.d * std::log(2.0 * box.N + 1.0);
  if (logv > std::log(static_cast<double>(std::numeric_limits<std::int64_t>::max()) / box.d)) {
    throw DomainError("box vertex count overflows the 64-bit index space");
  }
}

std::int64_t vertex_count(const BoxConfig& box) {
  validate(box);
  std::int64_t v = 1;
  for (int k = 0; k < box.d; ++k) v *= 2 * box.N + 1;
  return v;
}

std::vector<double> Point::position() const {
  std::vector<double> x(coords.begin(), coords.end());
  if (cable) x[cable->axis] += cable->fraction;
  return x;
}

char step_letter(int dir) {
  int axis = dir_axis(dir);
  if (axis < 0 || axis >= kMaxLetterAxes) throw DomainError("no step letter for this axis");
  return dir_sign(dir) > 0 ? kPlusLetters[axis] : kMinusLetters[axis];
}

int step_from_letter(char c) {
  for (int a = 0; a < kMaxLetterAxes; ++a) {
    if (kPlusLetters[a] == c) return make_dir(a, 1);
    if (kMinusLetters[a] == c) return make_dir(a, -1);
  }
  throw DomainError(std::string("unknown step letter '") + c + "'");
}

std::string encode_steps(std::span<const std::uint8_t> dirs) {
  std::string s;
  s.reserve(dirs.size());
  for (auto dir : dirs) s.push_back(step_letter(dir));
  return s;
}

std::vector<std::uint8_t> decode_steps(const std::string& s, int d) {
  std::vector<std::uint8_t> dirs;
  dirs.reserve(s.size());
  for (char c : s) {
    int dir = step_from_letter(c);
    if (dir_axis(dir) >= d) throw DomainError("step letter exceeds dimension");
    dirs.push_back(static_cast<std::uint8_t>(dir));
  }
  return dirs;
}

Lattice::Lattice(BoxConfig box) : box_(box) {
  volume_ = vertex_count(box);
  side_ = 2 * box.N + 1;
  strides_.resize(box.d);
  std::int64_t s = 1;
  for (int k = 0; k < box.d; ++k) {
    strides_[k] = s;
    s *= side_;
  }
}

bool Lattice::contains(std::span<const int> coords) const {
  if (static_cast<int>(coords.size()) != box_.d) return false;
  return std::all_of(coords.begin(), coords.end(),
                     [&](int c) { return c >= -box_.N && c <= box_.N; });
}

bool Lattice::contains(const Point& p) const {
  if (!contains(p.coords)) return false;
  if (!p.cable) return true;
  const auto& c = *p.cable;
  if (c.axis < 0 || c.axis >= box_.d || !(c.fraction > 0.0 && c.fraction < 1.0)) return false;
  return p.coords[c.axis] + 1 <= box_.N;
}

VertexId Lattice::id(std::span<const int> coords) const {
  if (!contains(coords)) throw DomainError("point outside box");
  VertexId v = 0;
  for (int k = 0; k < box_.d; ++k) v += static_cast<VertexId>(coords[k] + box_.N) * strides_[k];
  return v;
}

std::vector<int> Lattice::coords(VertexId v) const {
  std::vector<int> c(box_.d);
  coords(v, c);
  return c;
}

void Lattice::coords(VertexId v, std::span<int> out) const {
  for (int k = 0; k < box_.d; ++k) {
    out[k] = static_cast<int>(v % side_) - box_.N;
    v /= side_;
  }
}

VertexId Lattice::step(VertexId v, int dir) const {
  int axis = dir_axis(dir);
  int c = coord(v, axis);
  if (dir_sign(dir) > 0) return c < box_.N ? v + strides_[axis] : kNoVertex;
  return c > -box_.N ? v - strides_[axis] : kNoVertex;
}

EdgeId Lattice::edge_of_step(VertexId v, int dir) const {
  int axis = dir_axis(dir);
  VertexId lower = dir_sign(dir) > 0 ? v : v - strides_[axis];
  return edge_id(lower, axis);
}

bool Lattice::edge_valid(EdgeId e) const {
  if (e < 0 || e >= edge_slots()) return false;
  return coord(edge_lower(e), edge_axis(e)) < box_.N;
}

int Lattice::linf_distance(VertexId a, VertexId b) const {
  int m = 0;
  for (int k = 0; k < box_.d; ++k) m = std::max(m, std::abs(coord(a, k) - coord(b, k)));
  return m;
}

double Lattice::euclidean_distance(VertexId a, VertexId b) const {
  double s = 0.0;
  for (int k = 0; k < box_.d; ++k) {
    double dx = coord(a, k) - coord(b, k);
    s += dx * dx;
  }
  return std::sqrt(s);
}

int Lattice::diameter(std::span<const VertexId> vertices) const {
  if (vertices.empty()) return 0;
  int best = 0;
  std::vector<int> c(box_.d);
  std::vector<int> lo(box_.d, std::numeric_limits<int>::max());
  std::vector<int> hi(box_.d, std::numeric_limits<int>::min());
  for (VertexId v : vertices) {
    coords(v, c);
    for (int k = 0; k < box_.d; ++k) {
      lo[k] = std::min(lo[k], c[k]);
      hi[k] = std::max(hi[k], c[k]);
    }
  }
  for (int k = 0; k < box_.d; ++k) best = std::max(best, hi[k] - lo[k]);
  return best;
}

int Lattice::boundary_distance(VertexId v) const {
  int m = box_.N;
  for (int k = 0; k < box_.d; ++k) m = std::min(m, box_.N - std::abs(coord(v, k)));
  return m;
}

std::vector<Point> neighbors(const Point& p, const BoxConfig& box) {
  Lattice lat(box);
  if (p.cable || !lat.contains(p.coords)) throw DomainError("point outside box");
  std::vector<Point> out;
  for (int k = 0; k < box.d; ++k) {
    for (int s : {1, -1}) {
      Point q = p;
      q.coords[k] += s;
      if (lat.contains(q.coords)) out.push_back(std::move(q));
    }
  }
  return out;
}

Tube Tube::make(int i, int j, double u, double v) {
  if (!is_half_integer(u) || !is_half_integer(v)) {
    throw DomainError("tube anchors must be half-integers");
  }
  Tube t;
  t.axis_i = i;
  t.axis_j = j;
  t.twice_u = static_cast<int>(std::llround(2.0 * u));
  t.twice_v = static_cast<int>(std::llround(2.0 * v));
  return t;
}

void validate(const Tube& t, int d) {
  if (!(0 <= t.axis_i && t.axis_i < t.axis_j && t.axis_j < d)) {
    throw DomainError("tube axes must satisfy 0 <= i < j < d");
  }
  if (t.twice_u % 2 == 0 || t.twice_v % 2 == 0) {
    throw DomainError("tube anchors must be half-integers");
  }
}

std::string to_json(const Tube& t) {
  return "{\"axes\":[" + std::to_string(t.axis_i) + "," + std::to_string(t.axis_j) +
         "],\"anchor\":[" + format_double(t.u()) + "," + format_double(t.v()) + "]}";
}

namespace {

int family_pitch(double eps, int N) {
  return std::max(1, static_cast<int>(std::floor(eps * N / 4.0)));
}

std::vector<int> anchor_grid(int N, int pitch) {
  std::vector<int> twice;
  for (int t = -2 * N + 1; t <= 2 * N - 1; t += 2 * pitch) twice.push_back(t);
  return twice;
}

void check_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0,1)");
}

}  // namespace

TubeFamily tube_family(double eps, const BoxConfig& box) {
  check_eps(eps);
  validate(box);
  TubeFamily f;
  f.eps = eps;
  f.xi = eps / 4.0;
  f.pitch = family_pitch(eps, box.N);
  auto grid = anchor_grid(box.N, f.pitch);
  for (int i = 0; i < box.d; ++i) {
    for (int j = i + 1; j < box.d; ++j) {
      for (int tu : grid) {
        for (int tv : grid) f.tubes.push_back(Tube{i, j, tu, tv});
      }
    }
  }
  return f;
}

std::int64_t tube_family_size(double eps, const BoxConfig& box) {
  check_eps(eps);
  validate(box);
  if (box.N == 0) return 0;
  std::int64_t per_axis = (2 * box.N - 1) / family_pitch(eps, box.N) + 1;
  return per_axis * per_axis * box.d * (box.d - 1) / 2;
}

std::string to_json(const TubeFamily& f) {
  std::string s = "{\"eps\":" + format_double(f.eps) + ",\"xi\":" + format_double(f.xi) +
                  ",\"pitch\":" + std::to_string(f.pitch) + ",\"tubes\":[";
  for (std::size_t k = 0; k < f.tubes.size(); ++k) {
    if (k) s += ",";
    s += to_json(f.tubes[k]);
  }
  return s + "]}";
}

namespace {

void check_tube_dim(const Tube& t, int d) {
  if (t.axis_j >= d || t.axis_i < 0 || t.axis_i >= t.axis_j) {
    throw DomainError("tube axes incompatible with point dimension");
  }
}

}  // namespace

double dist_to_tube(const Point& p, const Tube& t) {
  check_tube_dim(t, p.dim());
  auto x = p.position();
  return std::hypot(x[t.axis_i] - t.u(), x[t.axis_j] - t.v());
}

double dist_to_tube(const Lattice& lat, VertexId v, const Tube& t) {
  return std::hypot(lat.coord(v, t.axis_i) - t.u(), lat.coord(v, t.axis_j) - t.v());
}

double edge_clearance(const Lattice& lat, VertexId v, int dir, const Tube& t) {
  int axis = dir_axis(dir);
  double xi = lat.coord(v, t.axis_i) - t.u();
  double xj = lat.coord(v, t.axis_j) - t.v();
  if (axis != t.axis_i && axis != t.axis_j) return std::hypot(xi, xj);
  double s = dir_sign(dir);
  // Segment from (xi,xj) moving one unit along the edge axis.
  double& moving = (axis == t.axis_i) ? xi : xj;
  double other = (axis == t.axis_i) ? xj : xi;
  double a = moving, b = moving + s;
  double lo = std::min(a, b), hi = std::max(a, b);
  double closest = (lo <= 0.0 && 0.0 <= hi) ? 0.0 : (hi < 0.0 ? hi : lo);
  return std::hypot(closest, other);
}

double winding_increment(const Point& a, const Point& b, const Tube& t) {
  if (a.dim() != b.dim()) throw DomainError("points of different dimension");
  check_tube_dim(t, a.dim());
  auto pa = a.position();
  auto pb = b.position();
  int differing = 0;
  double delta = 0.0;
  for (int k = 0; k < a.dim(); ++k) {
    if (pa[k] != pb[k]) {
      ++differing;
      delta = std::abs(pa[k] - pb[k]);
    }
  }
  if (differing > 1 || delta > 1.0 + 1e-12) {
    throw DomainError("winding_increment needs adjacent cable points");
  }
  double ax = pa[t.axis_i] - t.u(), ay = pa[t.axis_j] - t.v();
  double bx = pb[t.axis_i] - t.u(), by = pb[t.axis_j] - t.v();
  if ((ax == 0.0 && ay == 0.0) || (bx == 0.0 && by == 0.0)) {
    throw DomainError("point lies on the tube");
  }
  double dtheta = std::atan2(by, bx) - std::atan2(ay, ax);
  const double pi = std::numbers::pi;
  while (dtheta > pi) dtheta -= 2.0 * pi;
  while (dtheta <= -pi) dtheta += 2.0 * pi;
  return dtheta / (2.0 * pi);
}

int path_winding(std::span<const Point> path, const Tube& t) {
  if (path.empty() || !(path.front() == path.back())) {
    throw DomainError("path_winding requires a closed path");
  }
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) total += winding_increment(path[k], path[k + 1], t);
  double r = std::round(total);
  if (std::abs(total - r) > 1e-9) throw NumericError("accumulated winding is not an integer");
  return static_cast<int>(r);
}

int crossing_voltage(const Lattice& lat, VertexId from, int dir, const Tube& t) {
  return crossing_voltage(lat.coord(from, t.axis_i), lat.coord(from, t.axis_j), dir_axis(dir),
                          dir_sign(dir), t);
}

long long closed_walk_index(const Lattice& lat, VertexId start, std::span<const std::uint8_t> dirs,
                            const Tube& t) {
  long long w = 0;
  int ci = lat.coord(start, t.axis_i);
  int cj = lat.coord(start, t.axis_j);
  for (auto dir : dirs) {
    int axis = dir_axis(dir), s = dir_sign(dir);
    w += crossing_voltage(ci, cj, axis, s, t);
    if (axis == t.axis_i) ci += s;
    if (axis == t.axis_j) cj += s;
  }
  return w;
}

int walk_diameter(const Lattice& lat, VertexId start, std::span<const std::uint8_t> dirs) {
  int d = lat.dim();
  std::vector<int> c = lat.coords(start), lo = c, hi = c;
  for (auto dir : dirs) {
    int a = dir_axis(dir);
    c[a] += dir_sign(dir);
    lo[a] = std::min(lo[a], c[a]);
    hi[a] = std::max(hi[a], c[a]);
  }
  int best = 0;
  for (int k = 0; k < d; ++k) best = std::max(best, hi[k] - lo[k]);
  return best;
}

std::vector<VertexId> walk_vertices(const Lattice& lat, VertexId start,
                                    std::span<const std::uint8_t> dirs) {
  std::vector<VertexId> out;
  out.reserve(dirs.size());
  VertexId v = start;
  for (auto dir : dirs) {
    out.push_back(v);
    v += dir_sign(dir) * lat.stride(dir_axis(dir));
  }
  if (dirs.empty()) out.push_back(start);
  return out;
}

namespace {

template <class DistFn>
double hausdorff_impl(std::size_t na, std::size_t nb, DistFn dist) {
  if (na == 0 || nb == 0) throw DomainError("hausdorff distance of an empty set");
  double best = 0.0;
  auto directed = [&](bool swap) {
    std::size_t n1 = swap ? nb : na, n2 = swap ? na : nb;
    for (std::size_t x = 0; x < n1; ++x) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t y = 0; y < n2 && m > best; ++y) {
        m = std::min(m, swap ? dist(y, x) : dist(x, y));
      }
      best = std::max(best, m);
    }
  };
  directed(false);
  directed(true);
  return best;
}

}  // namespace

double hausdorff_distance(std::span<const Point> a, std::span<const Point> b) {
  std::vector<std::vector<double>> pa, pb;
  for (const auto& p : a) pa.push_back(p.position());
  for (const auto& p : b) pb.push_back(p.position());
  return hausdorff_impl(pa.size(), pb.size(), [&](std::size_t x, std::size_t y) {
    if (pa[x].size() != pb[y].size()) throw DomainError("points of different dimension");
    double s = 0.0;
    for (std::size_t k = 0; k < pa[x].size(); ++k) s += (pa[x][k] - pb[y][k]) * (pa[x][k] - pb[y][k]);
    return std::sqrt(s);
  });
}

double hausdorff_distance(const Lattice& lat, std::span<const VertexId> a,
                          std::span<const VertexId> b) {
  return hausdorff_impl(a.size(), b.size(),
                        [&](std::size_t x, std::size_t y) { return lat.euclidean_distance(a[x], b[y]); });
}

}  // namespace loopcycle
