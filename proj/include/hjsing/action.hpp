#pragma once

// Fundamental solution A_t(x, y), minimal curves, and the Lax-Oleinik
// evolutions of negative (inf) and positive (sup) type.

#include <optional>
#include <vector>

#include "hjsing/geometry2d.hpp"
#include "hjsing/hamiltonian.hpp"

namespace hjsing {

// Piecewise-linear curve on a uniform time grid of [t0, t1].
struct CurveDiscretization {
  std::vector<Vec2> nodes;  // N + 1 points
  double t0 = 0.0;
  double t1 = 1.0;
  double action_value = 0.0;  // composite midpoint sum of L
};

// Composite midpoint sum of L along the interpolant of `nodes`.
double discrete_action(const Lagrangian& l, const std::vector<Vec2>& nodes,
                       double t0, double t1);

// Gradient of the discrete action with respect to the interior nodes,
// divided by the step (a discrete Euler-Lagrange residual). Endpoints are 0.
std::vector<Vec2> euler_lagrange_residual(const Lagrangian& l,
                                          const CurveDiscretization& c);

struct ShootingInfo {
  bool attempted = false;
  bool converged = false;
  double residual = 0.0;  // |x(t) - y| at the end of the shot
  Vec2 p0;                // initial momentum
  double action = 0.0;    // int L along the Hamiltonian trajectory
  int iterations = 0;
};

struct ActionResult {
  double value = 0.0;
  CurveDiscretization minimizer;
  bool converged = false;
  double residual = 0.0;       // gradient norm of the discrete problem
  double el_residual = 0.0;    // max discrete Euler-Lagrange residual
  ShootingInfo shooting;
};

inline constexpr double kActionGradientTol = 1e-9;
inline constexpr double kShootingTol = 1e-10;

// Discrete minimization by L-BFGS from the straight line, then Newton
// shooting on the initial momentum. `value` is the shooting action when the
// shot converges and the discrete minimum otherwise. `nodes` is the number
// of intervals N.
ActionResult fundamental_solution(const Hamiltonian& h, double t, Vec2 x, Vec2 y,
                                  int nodes = 32);

// Cheap A_t(x, y) used inside the Lax-Oleinik searches: closed form
// t L((y - x)/t) when H does not depend on x, a discrete minimum with
// `nodes` intervals otherwise.
class ActionEvaluator {
 public:
  ActionEvaluator(Hamiltonian h, double t, int nodes = 8);
  double operator()(Vec2 x, Vec2 y) const;
  // Action of the straight segment; an upper bound for A_t.
  double straight(Vec2 x, Vec2 y) const;
  double time() const { return t_; }

 private:
  Lagrangian l_;
  double t_;
  int nodes_;
};

struct LaxOleinikOptions {
  int grid_resolution = 64;
  double t0 = 0.1;                 // largest admissible t for the sup evolution
  double uniqueness_gap = 1e-7;
  double cluster_radius = 1e-5;
  int action_nodes = 8;            // for position-dependent H
};

struct LaxOleinikNeg {
  double value = 0.0;
  Vec2 argmin;
  bool boundary_hit = false;  // the minimizer sits on the search-box boundary
};

// inf_y { u0(y) + A_t(y, x) } over the search box.
LaxOleinikNeg lax_oleinik_neg(const Hamiltonian& h, const ScalarField& u0, double t,
                              Vec2 x, const Box2& search,
                              const LaxOleinikOptions& opt = {});

struct LaxOleinikPos {
  double value = 0.0;
  Vec2 argmax;
  bool unique = true;
  bool boundary_hit = false;
  double gap = 0.0;  // value gap to the runner-up cluster (inf if none)
  std::vector<Vec2> candidates;  // cluster representatives, best first
};

// sup_y { u0(y) - A_t(x, y) } over the search box. Requires t in (0, t0]
// and a box containing the ball B(x, lambda t) when lambda is given.
LaxOleinikPos lax_oleinik_pos(const Hamiltonian& h, const ScalarField& u0, double t,
                              Vec2 x, const Box2& search,
                              const LaxOleinikOptions& opt = {},
                              std::optional<double> lambda = std::nullopt);

// Search box B(x, lambda t) padded by 5%.
Box2 lax_oleinik_box(Vec2 x, double t, double lambda);

// Largest ratio (1/2 f(a) + 1/2 f(b) - f(m)) * 8 / |a - b|^2 over sampled
// pairs in B(x, radius) for f = -A_t(x, .), i.e. an empirical semiconcavity
// constant. The construction needs it finite and of order 1/t.
double concavity_spot_check(const Hamiltonian& h, double t, Vec2 x, double radius,
                            int samples = 64, unsigned seed = 1);

}  // namespace hjsing
