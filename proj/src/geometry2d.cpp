#include "hjsing/geometry2d.hpp"

#include <algorithm>
#include <limits>

#include "hjsing/errors.hpp"

namespace hjsing {

Vec2 normalized(Vec2 a) {
  const double n = norm(a);
  if (n == 0.0) throw PreconditionError("cannot normalize the zero vector");
  return a / n;
}

Mat2 Mat2::inverse() const {
  const double d = det();
  const double scale = std::max({std::abs(a11), std::abs(a12), std::abs(a21),
                                 std::abs(a22), 1e-300});
  if (std::abs(d) <= 1e-14 * scale * scale) {
    throw NumericalError("singular 2x2 matrix", d);
  }
  return {a22 / d, -a12 / d, -a21 / d, a11 / d};
}

bool Mat2::is_symmetric(double tol) const {
  const double scale = std::max({std::abs(a12), std::abs(a21), 1.0});
  return std::abs(a12 - a21) <= tol * scale;
}

namespace {
std::pair<double, double> sym_eigen(const Mat2& m) {
  const double b = 0.5 * (m.a12 + m.a21);
  const double half_tr = 0.5 * (m.a11 + m.a22);
  const double r = std::hypot(0.5 * (m.a11 - m.a22), b);
  return {half_tr - r, half_tr + r};
}
}  // namespace

double Mat2::min_eigenvalue() const { return sym_eigen(*this).first; }
double Mat2::max_eigenvalue() const { return sym_eigen(*this).second; }

double Mat2::operator_norm() const {
  const Mat2 ata = transpose() * (*this);
  return std::sqrt(std::max(0.0, ata.max_eigenvalue()));
}

Vec2 solve(const Mat2& m, Vec2 rhs) { return m.inverse() * rhs; }

// ---------------------------------------------------------------------------
// ConvexSet2D

ConvexSet2D ConvexSet2D::segment(Vec2 a, Vec2 b) {
  const std::vector<Vec2> pts{a, b};
  return hull_of(pts);
}

ConvexSet2D ConvexSet2D::hull_of(std::span<const Vec2> input, double tol) {
  if (input.empty()) throw PreconditionError("convex hull of an empty set");
  double scale = 1.0;
  for (const Vec2& p : input) {
    if (!is_finite(p)) throw PreconditionError("non-finite point in hull input");
    scale = std::max(scale, std::max(std::abs(p.x1), std::abs(p.x2)));
  }
  const double merge = tol * scale;

  std::vector<Vec2> pts(input.begin(), input.end());
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
    return a.x1 < b.x1 || (a.x1 == b.x1 && a.x2 < b.x2);
  });
  std::vector<Vec2> uniq;
  for (const Vec2& p : pts) {
    bool dup = false;
    for (const Vec2& q : uniq) {
      if (distance(p, q) <= merge) {
        dup = true;
        break;
      }
    }
    if (!dup) uniq.push_back(p);
  }
  if (uniq.size() == 1) return ConvexSet2D(uniq.front());

  // Andrew's monotone chain; near-collinear turns are dropped.
  const double turn_tol = tol * scale * scale;
  auto turn = [](Vec2 o, Vec2 a, Vec2 b) { return cross(a - o, b - o); };
  std::vector<Vec2> hull(2 * uniq.size());
  std::size_t k = 0;
  for (const Vec2& p : uniq) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= turn_tol) --k;
    hull[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = uniq.size() - 1; i-- > 0;) {
    while (k >= lower && turn(hull[k - 2], hull[k - 1], uniq[i]) <= turn_tol) --k;
    hull[k++] = uniq[i];
  }
  hull.resize(k - 1);

  if (hull.size() <= 2) {
    // Collinear cloud: keep the two farthest points.
    Vec2 a = uniq.front(), b = uniq.back();
    double best = -1.0;
    for (std::size_t i = 0; i < uniq.size(); ++i) {
      for (std::size_t j = i + 1; j < uniq.size(); ++j) {
        const double d = distance(uniq[i], uniq[j]);
        if (d > best) {
          best = d;
          a = uniq[i];
          b = uniq[j];
        }
      }
    }
    return ConvexSet2D(SetKind::segment, {a, b});
  }
  return ConvexSet2D(SetKind::polygon, std::move(hull));
}

std::vector<std::pair<Vec2, Vec2>> ConvexSet2D::edges() const {
  std::vector<std::pair<Vec2, Vec2>> out;
  switch (kind_) {
    case SetKind::point:
      break;
    case SetKind::segment:
      out.emplace_back(pts_[0], pts_[1]);
      break;
    case SetKind::polygon:
      for (std::size_t i = 0; i < pts_.size(); ++i) {
        out.emplace_back(pts_[i], pts_[(i + 1) % pts_.size()]);
      }
      break;
  }
  return out;
}

Vec2 project_onto_segment(Vec2 a, Vec2 b, Vec2 q) {
  const Vec2 d = b - a;
  const double len2 = norm2(d);
  if (len2 == 0.0) return a;
  const double s = std::clamp(dot(q - a, d) / len2, 0.0, 1.0);
  return a + s * d;
}

namespace {
bool polygon_contains_strict(const std::vector<Vec2>& poly, Vec2 q) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % poly.size()];
    if (cross(b - a, q - a) < 0.0) return false;
  }
  return true;
}
}  // namespace

double ConvexSet2D::distance_to(Vec2 q) const {
  switch (kind_) {
    case SetKind::point:
      return distance(q, pts_[0]);
    case SetKind::segment:
      return distance(q, project_onto_segment(pts_[0], pts_[1], q));
    case SetKind::polygon:
      if (polygon_contains_strict(pts_, q)) return 0.0;
      return relative_boundary_distance(q);
  }
  return 0.0;
}

double ConvexSet2D::relative_boundary_distance(Vec2 q) const {
  switch (kind_) {
    case SetKind::point:
      return distance(q, pts_[0]);
    case SetKind::segment:
      return std::min(distance(q, pts_[0]), distance(q, pts_[1]));
    case SetKind::polygon: {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [a, b] : edges()) {
        best = std::min(best, distance(q, project_onto_segment(a, b, q)));
      }
      return best;
    }
  }
  return 0.0;
}

bool ConvexSet2D::contains(Vec2 q, double tol) const {
  return distance_to(q) <= tol;
}

bool ConvexSet2D::in_relative_interior(Vec2 q, double tol) const {
  if (kind_ == SetKind::point) return distance(q, pts_[0]) <= tol;
  return contains(q, tol) && relative_boundary_distance(q) > tol;
}

Vec2 ConvexSet2D::centroid() const {
  Vec2 c;
  for (const Vec2& p : pts_) c += p;
  return c / static_cast<double>(pts_.size());
}

double ConvexSet2D::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < pts_.size(); ++i) {
    for (std::size_t j = i + 1; j < pts_.size(); ++j) {
      d = std::max(d, distance(pts_[i], pts_[j]));
    }
  }
  return d;
}

HullMembership hull_contains(const ConvexSet2D& s, Vec2 q, double band) {
  HullMembership m;
  const double d = s.distance_to(q);
  m.inside = d <= band;
  m.boundary_distance = m.inside ? s.relative_boundary_distance(q) : d;
  m.indeterminate = m.boundary_distance < band;
  return m;
}

HullMembership hull_contains_origin(const ConvexSet2D& s, double band) {
  return hull_contains(s, Vec2{}, band);
}

Vec2 project_onto_convex(const ConvexSet2D& s, Vec2 q) {
  const auto& pts = s.extreme_points();
  switch (s.kind()) {
    case SetKind::point:
      return pts[0];
    case SetKind::segment:
      return project_onto_segment(pts[0], pts[1], q);
    case SetKind::polygon: {
      if (polygon_contains_strict(pts, q)) return q;
      Vec2 best = pts[0];
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto& [a, b] : s.edges()) {
        const Vec2 c = project_onto_segment(a, b, q);
        const double d = distance(c, q);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      return best;
    }
  }
  return q;
}

Vec2 minimize_quadratic_on_convex(const ConvexSet2D& s, const Mat2& q_in,
                                  Vec2 g) {
  const Mat2 q{q_in.a11, 0.5 * (q_in.a12 + q_in.a21),
               0.5 * (q_in.a12 + q_in.a21), q_in.a22};
  const auto& pts = s.extreme_points();
  if (s.kind() == SetKind::point) return pts[0];
  auto f = [&](Vec2 p) { return 0.5 * dot(q * p, p) + dot(g, p); };
  if (s.kind() == SetKind::polygon) {
    const Vec2 free = -solve(q, g);
    if (polygon_contains_strict(pts, free)) return free;
  }
  Vec2 best = pts[0];
  double best_f = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : s.edges()) {
    const Vec2 d = b - a;
    const double curv = dot(q * d, d);
    double lam = curv > 0.0 ? -dot(q * a + g, d) / curv : 0.0;
    lam = std::clamp(lam, 0.0, 1.0);
    const Vec2 p = a + lam * d;
    const double fp = f(p);
    if (fp < best_f) {
      best_f = fp;
      best = p;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Cones

ConeSpec make_cone(Vec2 vertex, Vec2 axis, double rho, ConeSign sign) {
  if (std::abs(norm(axis) - 1.0) > 1e-12) {
    throw PreconditionError("cone axis must be a unit vector");
  }
  if (!(rho > 0.0 && rho < 1.0)) {
    throw PreconditionError("cone amplitude must lie in (0, 1)");
  }
  return {vertex, axis, rho, sign};
}

double cone_margin(const ConeSpec& c, Vec2 y) {
  const Vec2 d = y - c.vertex;
  const double along = dot(d, c.axis);
  const double r = c.rho * norm(d);
  switch (c.sign) {
    case ConeSign::plus:
      return along - r;
    case ConeSign::minus:
      return -along - r;
    case ConeSign::both:
      return std::abs(along) - r;
  }
  return 0.0;
}

bool cone_contains(const ConeSpec& c, Vec2 y) { return cone_margin(c, y) >= 0.0; }

double cone_cosine_margin(const ConeSpec& c, Vec2 y) {
  const double len = distance(y, c.vertex);
  if (len == 0.0) return 0.0;
  return cone_margin(c, y) / len;
}

std::pair<Vec2, Vec2> cone_edge_directions(const ConeSpec& c) {
  const Vec2 axis = c.sign == ConeSign::minus ? -c.axis : c.axis;
  const double s = std::sqrt(1.0 - c.rho * c.rho);
  const Vec2 n = perp(axis);
  return {c.rho * axis + s * n, c.rho * axis - s * n};
}

}  // namespace hjsing
