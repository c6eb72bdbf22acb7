#pragma once

// Planar vectors, 2x2 matrices, convex sets and cones.

#include <cmath>
#include <span>
#include <vector>

namespace hjsing {

struct Vec2 {
  double x1 = 0.0;
  double x2 = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double a, double b) : x1(a), x2(b) {}

  constexpr Vec2& operator+=(Vec2 o) {
    x1 += o.x1;
    x2 += o.x2;
    return *this;
  }
  constexpr Vec2& operator-=(Vec2 o) {
    x1 -= o.x1;
    x2 -= o.x2;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x1 *= s;
    x2 *= s;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return a -= b; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x1, -a.x2}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr Vec2 operator/(Vec2 a, double s) {
    return {a.x1 / s, a.x2 / s};
  }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x1 * b.x1 + a.x2 * b.x2; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x1 * b.x2 - a.x2 * b.x1; }
inline double norm(Vec2 a) { return std::hypot(a.x1, a.x2); }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline bool is_finite(Vec2 a) {
  return std::isfinite(a.x1) && std::isfinite(a.x2);
}
// Counterclockwise rotation by 90 degrees.
constexpr Vec2 perp(Vec2 a) { return {-a.x2, a.x1}; }
Vec2 normalized(Vec2 a);

// Row-major 2x2 matrix.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

  constexpr Vec2 operator*(Vec2 v) const {
    return {a11 * v.x1 + a12 * v.x2, a21 * v.x1 + a22 * v.x2};
  }
  constexpr Mat2 operator*(const Mat2& b) const {
    return {a11 * b.a11 + a12 * b.a21, a11 * b.a12 + a12 * b.a22,
            a21 * b.a11 + a22 * b.a21, a21 * b.a12 + a22 * b.a22};
  }
  friend constexpr Mat2 operator+(const Mat2& a, const Mat2& b) {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
  }
  friend constexpr Mat2 operator*(double s, const Mat2& a) {
    return {s * a.a11, s * a.a12, s * a.a21, s * a.a22};
  }
  constexpr double det() const { return a11 * a22 - a12 * a21; }
  constexpr double trace() const { return a11 + a22; }
  constexpr Mat2 transpose() const { return {a11, a21, a12, a22}; }
  Mat2 inverse() const;
  bool is_symmetric(double tol = 1e-12) const;
  // Eigenvalues of the symmetric part, ascending.
  double min_eigenvalue() const;
  double max_eigenvalue() const;
  bool is_spd(double tol = 0.0) const { return is_symmetric() && min_eigenvalue() > tol; }
  double operator_norm() const;
};

Vec2 solve(const Mat2& m, Vec2 rhs);

// Axis-aligned working region.
struct Box2 {
  Vec2 lo;
  Vec2 hi;

  bool contains(Vec2 x, double slack = 0.0) const {
    return x.x1 >= lo.x1 - slack && x.x1 <= hi.x1 + slack &&
           x.x2 >= lo.x2 - slack && x.x2 <= hi.x2 + slack;
  }
  Vec2 center() const { return 0.5 * (lo + hi); }
  double diameter() const { return distance(lo, hi); }
  static Box2 around(Vec2 c, double half_width) {
    return {c - Vec2{half_width, half_width}, c + Vec2{half_width, half_width}};
  }
};

enum class SetKind { point, segment, polygon };

// Compact convex subset of the plane stored by its extreme points.
// Polygons are counterclockwise with vertices in strictly convex position;
// collinear inputs collapse to a segment, coincident inputs to a point.
class ConvexSet2D {
 public:
  static constexpr double kMergeTol = 1e-12;

  ConvexSet2D() : ConvexSet2D(Vec2{}) {}
  explicit ConvexSet2D(Vec2 p) : kind_(SetKind::point), pts_{p} {}
  static ConvexSet2D segment(Vec2 a, Vec2 b);
  // Convex hull of a nonempty point cloud, normalized as described above.
  static ConvexSet2D hull_of(std::span<const Vec2> pts,
                             double tol = kMergeTol);

  SetKind kind() const { return kind_; }
  int dimension() const { return static_cast<int>(kind_); }
  const std::vector<Vec2>& extreme_points() const { return pts_; }
  std::size_t size() const { return pts_.size(); }

  double distance_to(Vec2 q) const;
  // Distance from q to the relative boundary (endpoints of a segment,
  // edges of a polygon, the point itself).
  double relative_boundary_distance(Vec2 q) const;
  bool contains(Vec2 q, double tol = 1e-12) const;
  // True when q lies in the relative interior with clearance > tol.
  bool in_relative_interior(Vec2 q, double tol) const;
  Vec2 centroid() const;
  double diameter() const;

  // Edges as (start, end) pairs; a segment has one edge, a point none.
  std::vector<std::pair<Vec2, Vec2>> edges() const;

 private:
  ConvexSet2D(SetKind k, std::vector<Vec2> pts)
      : kind_(k), pts_(std::move(pts)) {}

  SetKind kind_;
  std::vector<Vec2> pts_;
};

// Three-valued membership answer: `indeterminate` is raised when the query
// point is within the boundary band, where the boolean is not trustworthy.
struct HullMembership {
  bool inside = false;
  bool indeterminate = false;
  double boundary_distance = 0.0;
};

inline constexpr double kBoundaryBand = 1e-10;

HullMembership hull_contains(const ConvexSet2D& s, Vec2 q,
                             double band = kBoundaryBand);
HullMembership hull_contains_origin(const ConvexSet2D& s,
                                    double band = kBoundaryBand);

Vec2 project_onto_segment(Vec2 a, Vec2 b, Vec2 q);
Vec2 project_onto_convex(const ConvexSet2D& s, Vec2 q);

// Exact minimizer of 0.5<Q p, p> + <g, p> over the set, Q symmetric
// positive definite.
Vec2 minimize_quadratic_on_convex(const ConvexSet2D& s, const Mat2& q, Vec2 g);

enum class ConeSign { plus, minus, both };

// {y : <y - vertex, axis> >= rho |y - vertex|} (plus), its mirror (minus)
// or their union (both).
struct ConeSpec {
  Vec2 vertex;
  Vec2 axis;
  double rho = 0.5;
  ConeSign sign = ConeSign::plus;
};

// Validates |axis| = 1 and 0 < rho < 1.
ConeSpec make_cone(Vec2 vertex, Vec2 axis, double rho, ConeSign sign);
bool cone_contains(const ConeSpec& c, Vec2 y);
// Signed slack <y - v, ±axis> - rho |y - v|; nonnegative iff y is in the cone.
double cone_margin(const ConeSpec& c, Vec2 y);
// Cosine slack: margin divided by |y - v|; zero at the vertex.
double cone_cosine_margin(const ConeSpec& c, Vec2 y);
// The two boundary ray directions of a one-sided cone.
std::pair<Vec2, Vec2> cone_edge_directions(const ConeSpec& c);

}  // namespace hjsing
