#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace loopcycle {

using VertexId = std::int64_t;
using EdgeId = std::int64_t;
inline constexpr VertexId kNoVertex = -1;

struct BoxConfig {
  int d = 3;
  int N = 1;
  bool operator==(const BoxConfig&) const = default;
};

// Throws DomainError when d < 3, N < 0 or the vertex count overflows.
void validate(const BoxConfig& box);
std::int64_t vertex_count(const BoxConfig& box);

// Position strictly inside the edge from `coords` to `coords + e_axis`.
struct CablePosition {
  int axis = 0;
  double fraction = 0.5;
  bool operator==(const CablePosition&) const = default;
};

struct Point {
  std::vector<int> coords;
  std::optional<CablePosition> cable;

  Point() = default;
  Point(std::initializer_list<int> c) : coords(c) {}
  explicit Point(std::vector<int> c) : coords(std::move(c)) {}
  Point(std::vector<int> c, CablePosition pos) : coords(std::move(c)), cable(pos) {}

  int dim() const { return static_cast<int>(coords.size()); }
  std::vector<double> position() const;
  bool operator==(const Point&) const = default;
};

// Direction codes: 2*axis for +e_axis, 2*axis+1 for -e_axis.
inline constexpr int dir_axis(int dir) { return dir >> 1; }
inline constexpr int dir_sign(int dir) { return (dir & 1) ? -1 : 1; }
inline constexpr int dir_opposite(int dir) { return dir ^ 1; }
inline constexpr int make_dir(int axis, int sign) { return 2 * axis + (sign < 0 ? 1 : 0); }

// Letter code for steps in loop dumps: R/L, U/D, F/B for the first three axes,
// then uppercase (+) / lowercase (-) letters.
char step_letter(int dir);
int step_from_letter(char c);
std::string encode_steps(std::span<const std::uint8_t> dirs);
std::vector<std::uint8_t> decode_steps(const std::string& s, int d);

// Index arithmetic on Λ_N = [-N,N]^d.
class Lattice {
 public:
  explicit Lattice(BoxConfig box);

  const BoxConfig& box() const { return box_; }
  int dim() const { return box_.d; }
  int half_side() const { return box_.N; }
  std::int64_t side() const { return side_; }
  std::int64_t volume() const { return volume_; }
  std::int64_t edge_slots() const { return volume_ * box_.d; }
  std::int64_t stride(int axis) const { return strides_[axis]; }

  bool contains(std::span<const int> coords) const;
  bool contains(const Point& p) const;
  VertexId id(std::span<const int> coords) const;
  VertexId id(const Point& p) const { return id(p.coords); }
  std::vector<int> coords(VertexId v) const;
  void coords(VertexId v, std::span<int> out) const;
  int coord(VertexId v, int axis) const {
    return static_cast<int>((v / strides_[axis]) % side_) - box_.N;
  }
  Point point(VertexId v) const { return Point(coords(v)); }

  // Neighbor in direction dir, or kNoVertex when it leaves the box.
  VertexId step(VertexId v, int dir) const;
  // Undirected edge id of the step (v, dir); the lower endpoint owns the id.
  EdgeId edge_of_step(VertexId v, int dir) const;
  EdgeId edge_id(VertexId lower, int axis) const { return lower * box_.d + axis; }
  VertexId edge_lower(EdgeId e) const { return e / box_.d; }
  int edge_axis(EdgeId e) const { return static_cast<int>(e % box_.d); }
  VertexId edge_upper(EdgeId e) const { return edge_lower(e) + strides_[edge_axis(e)]; }
  // True when both endpoints of the edge slot lie in the box.
  bool edge_valid(EdgeId e) const;

  int linf_distance(VertexId a, VertexId b) const;
  double euclidean_distance(VertexId a, VertexId b) const;
  // L∞ diameter of a vertex set (max coordinate extent).
  int diameter(std::span<const VertexId> vertices) const;
  // Smallest L∞ distance from v to the outside of the box, minus one.
  int boundary_distance(VertexId v) const;

 private:
  BoxConfig box_;
  std::int64_t side_ = 0;
  std::int64_t volume_ = 0;
  std::vector<std::int64_t> strides_;
};

std::vector<Point> neighbors(const Point& p, const BoxConfig& box);

// Codimension-2 tube {x : (x_i, x_j) = (u, v)} with half-integer anchors,
// stored as twice the anchor so that winding arithmetic stays exact.
struct Tube {
  int axis_i = 0;
  int axis_j = 1;
  int twice_u = 1;
  int twice_v = 1;

  static Tube make(int i, int j, double u, double v);
  double u() const { return 0.5 * twice_u; }
  double v() const { return 0.5 * twice_v; }
  bool operator==(const Tube&) const = default;
};

void validate(const Tube& t, int d);
std::string to_json(const Tube& t);

struct TubeFamily {
  double eps = 0.5;
  double xi = 0.125;
  int pitch = 1;
  std::vector<Tube> tubes;
};

// Axis-aligned tubes, anchors on a half-integer grid of pitch max(1, floor(eps*N/4)).
TubeFamily tube_family(double eps, const BoxConfig& box);
std::int64_t tube_family_size(double eps, const BoxConfig& box);
std::string to_json(const TubeFamily& f);

double dist_to_tube(const Point& p, const Tube& t);
double dist_to_tube(const Lattice& lat, VertexId v, const Tube& t);
// Distance from the whole unit segment of step (v, dir) to the tube.
double edge_clearance(const Lattice& lat, VertexId v, int dir, const Tube& t);

// Signed angle in turns swept around the tube between two adjacent cable points.
double winding_increment(const Point& a, const Point& b, const Tube& t);
// Closed path given with path.front() == path.back().
int path_winding(std::span<const Point> path, const Tube& t);

// Exact route: +1 / -1 when the step crosses the ray {x_i > u, x_j = v}
// counterclockwise / clockwise, else 0.
inline int crossing_voltage(int from_i, int from_j, int axis, int sign, const Tube& t) {
  if (axis != t.axis_j || 2 * from_i < t.twice_u) return 0;
  if (sign > 0) return (2 * from_j + 1 == t.twice_v) ? 1 : 0;
  return (2 * from_j - 1 == t.twice_v) ? -1 : 0;
}
int crossing_voltage(const Lattice& lat, VertexId from, int dir, const Tube& t);
// L∞ diameter of the vertices visited by a walk.
int walk_diameter(const Lattice& lat, VertexId start, std::span<const std::uint8_t> dirs);
// Vertices visited at times 0..n-1 of a closed walk of n steps.
std::vector<VertexId> walk_vertices(const Lattice& lat, VertexId start,
                                    std::span<const std::uint8_t> dirs);

long long closed_walk_index(const Lattice& lat, VertexId start, std::span<const std::uint8_t> dirs,
                            const Tube& t);

double hausdorff_distance(std::span<const Point> a, std::span<const Point> b);
double hausdorff_distance(const Lattice& lat, std::span<const VertexId> a,
                          std::span<const VertexId> b);

}  // namespace loopcycle
