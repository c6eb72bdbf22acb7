#pragma once

// Singular curves: strict, mollified, generalized and intrinsic
// characteristics, the Lip0 validator and the appendix gap.

#include <optional>
#include <string>
#include <vector>

#include "hjsing/action.hpp"
#include "hjsing/hamiltonian.hpp"
#include "hjsing/solution.hpp"

namespace hjsing {

enum class ArcKind { strict, mollified, generalized, intrinsic };
const char* arc_kind_name(ArcKind k);

struct ArcDiagnostics {
  double max_snap_displacement = 0.0;
  double max_branch_gap = 0.0;       // |u_i - u_j| of the leading pair after snapping
  int lambda_clamped = 0;            // steps whose lambda root left [0, 1]
  int longest_clamp_run = 0;
  bool lambda_persistent = false;    // a clamp run longer than 10 steps
  double initial_velocity_error = 0.0;
  bool initial_velocity_flag = false;
  int nonunique_samples = 0;         // intrinsic: maximizer not unique
  int boundary_samples = 0;          // intrinsic: maximizer on the search boundary
  bool converged = true;             // mollified: schedule converged
  double schedule_gap = 0.0;         // mollified: max |X_n - X_{n-1}|
  std::vector<std::string> notes;
};

struct SingularArc {
  ArcKind kind = ArcKind::strict;
  std::vector<double> times;
  std::vector<Vec2> points;
  std::vector<Vec2> covectors;  // empty for intrinsic arcs
  std::vector<Vec2> velocities;
  std::vector<double> lambdas;  // NaN where not applicable
  std::vector<bool> singular;
  std::vector<double> omega;    // running sup of |v - v(0)|
  double lip = 0.0;
  bool truncated = false;
  std::string reason;
  ArcDiagnostics diagnostics;

  std::size_t size() const { return points.size(); }
  bool has_covectors() const { return !covectors.empty(); }
  // Piecewise-linear position at time t (clamped to the sampled range).
  Vec2 at(double t) const;
};

struct StrictOptions {
  double snap_tol = 1e-10;        // target branch-value gap after snapping
  double snap_curvature = 100.0;  // snap displacement must stay below this * dt^2
  int snap_iterations = 3;
};

// Explicit stepping along H_p(x, p_min) with a Newton snap back onto the
// tie set of the two leading branches. Requires a min_of_smooth solution
// and a singular, noncritical start.
SingularArc propagate_strict(const Hamiltonian& h, const SolutionRep& u, Vec2 x0, double T,
                             double dt, const StrictOptions& opt = {});

struct MollifiedOptions {
  double moll_tol = 1e-4;
};

// Softmin u_eps = -eps log sum exp(-u_i / eps) and its gradient.
double softmin(const MinOfSmooth& u, Vec2 x, double eps);
Vec2 softmin_gradient(const MinOfSmooth& u, Vec2 x, double eps);

// Integrates x' = H_p(x, D u_eps(x)) for every eps of the schedule and
// returns the Richardson-extrapolated limit of the last two.
SingularArc propagate_strict_mollified(const Hamiltonian& h, const SolutionRep& u, Vec2 x0,
                                       double T, double dt,
                                       const std::vector<double>& eps_schedule,
                                       const MollifiedOptions& opt = {});

// A single smooth integration at fixed eps (no extrapolation).
SingularArc integrate_mollified(const Hamiltonian& h, const MinOfSmooth& u, Vec2 x0,
                                double T, double dt, double eps);

struct GeneralizedOptions {
  StrictOptions snap;
  double init_tol = 1e-6;
  int clamp_persistence = 10;
};

SingularArc propagate_generalized(const Hamiltonian& h, const SolutionRep& u, Vec2 x0,
                                  double T, double dt, const GeneralizedOptions& opt = {});

struct IntrinsicOptions {
  double lambda = 2.0;  // search radius factor, lambda0 + 1
  LaxOleinikOptions lax_oleinik;
  double singular_tol = 1e-6;
  double init_tol = 0.02;
};

// z(t) = argmax_y u(y) - A_t(x0, y) at each grid time, always from x0.
SingularArc propagate_intrinsic(const Hamiltonian& h, const SolutionRep& u, Vec2 x0,
                                const std::vector<double>& t_grid,
                                const IntrinsicOptions& opt = {});

struct ConditionResult {
  std::string name;
  bool pass = false;
  bool informative = false;  // reported, not part of the verdict
  double margin = 0.0;
  std::string detail;
};

struct Lip0Options {
  double c_tol = 0.02;         // |v(0) - H_p(x0, p_min)|
  double early_window = 0.05;  // fraction of the horizon used for (D)
  double d_tol = 0.1;          // omega over the window, relative to |v(0)|
  int fit_samples = 5;
};

struct Lip0Report {
  Vec2 v0;  // least-squares right velocity at 0
  std::vector<double> omega;
  ConditionResult a, b, c, d;
  bool pass = false;
};

// Conditions (A)-(D). (B) and (C) need the Hamiltonian and solution.
Lip0Report validate_lip0(const SingularArc& arc, const Hamiltonian* h = nullptr,
                         const SolutionRep* u = nullptr, const Lip0Options& opt = {});

struct AppendixGap {
  double mu = 0.0;
  Vec2 argmin;           // p attaining the minimum of alpha + beta
  double directional = 0.0;  // du/dv by the min formula
  bool p_bar_in_face = false;
};

// mu = min over D+u(x) of alpha(p) + beta(x, p) with
// alpha(p) = <p, v> - du/dv(x) and beta(x, p) = <p - p_bar, H_p(x, p) - H_p(x, p_bar)>.
AppendixGap appendix_gap(const Hamiltonian& h, const SolutionRep& u, Vec2 x, Vec2 v_bar,
                         Vec2 p_bar);

}  // namespace hjsing
