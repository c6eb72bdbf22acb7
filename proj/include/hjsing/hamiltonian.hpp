#pragma once

// Tonelli Hamiltonians H(x, p) on the plane, their Lagrangians and the
// Hamiltonian flow.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hjsing/expression.hpp"
#include "hjsing/geometry2d.hpp"

namespace hjsing {

using ScalarField = std::function<double(Vec2)>;
using VectorField = std::function<Vec2(Vec2)>;
using MatrixField = std::function<Mat2(Vec2)>;

enum class HamiltonianFamily { mechanical, quadratic_form, custom };

struct PhasePoint {
  Vec2 x;
  Vec2 p;
};

// Step used by the central finite differences that stand in for derivatives
// a caller did not supply.
inline constexpr double kFiniteDifferenceStep = 1e-6;

class Hamiltonian {
 public:
  class Model;

  // Coefficients of H(x, .) = 0.5 <Q p, p> + <g, p> + c when H is quadratic
  // in the momentum.
  struct Quadratic {
    Mat2 q;
    Vec2 g;
    double c = 0.0;
  };

  explicit Hamiltonian(std::shared_ptr<const Model> model);

  double operator()(Vec2 x, Vec2 p) const;
  Vec2 grad_p(Vec2 x, Vec2 p) const;
  Vec2 grad_x(Vec2 x, Vec2 p) const;
  Mat2 hess_p(Vec2 x, Vec2 p) const;

  HamiltonianFamily family() const;
  // Lower bound on the eigenvalues of H_pp over the working region.
  double convexity_modulus() const;
  bool quadratic_in_p() const;
  // Exact only when quadratic_in_p().
  Quadratic quadratic(Vec2 x) const;
  // True when H does not depend on x (the action is then a function of
  // y - x alone and straight lines are minimal).
  bool position_independent() const;
  const std::string& description() const;

  // Largest discrepancy between the model's derivatives and a Richardson
  // extrapolated central difference at (x, p).
  double derivative_discrepancy(Vec2 x, Vec2 p) const;

 private:
  std::shared_ptr<const Model> model_;
};

struct MechanicalSpec {
  MatrixField a;  // symmetric positive definite on the working region
  ScalarField v;
  // Optional exact derivatives: d/dx1 and d/dx2 of A, and grad V.
  std::optional<std::array<MatrixField, 2>> da;
  std::optional<VectorField> dv;
  Box2 region{{-10.0, -10.0}, {10.0, 10.0}};
  bool constant_a = false;
  bool constant_v = false;
};

// H(x, p) = 0.5 <A(x) p, p> + V(x). Rejects non-SPD samples of A.
Hamiltonian make_mechanical(MechanicalSpec spec);
// Convenience overload for constant A and V.
Hamiltonian make_mechanical(const Mat2& a, double v);

// H(x, p) = 0.5 <A p, p> + <b, p> + c with constant coefficients.
Hamiltonian make_quadratic_form(const Mat2& a, Vec2 b, double c);

struct CustomSpec {
  std::function<double(Vec2, Vec2)> value;
  std::function<Vec2(Vec2, Vec2)> grad_p;  // optional
  std::function<Vec2(Vec2, Vec2)> grad_x;  // optional
  std::function<Mat2(Vec2, Vec2)> hess_p;  // optional
  Box2 region{{-10.0, -10.0}, {10.0, 10.0}};
  double momentum_bound = 4.0;  // |p| range sampled for the convexity modulus
  bool position_independent = false;
  std::string description = "custom";
};

// Missing derivatives are replaced by central differences with step
// kFiniteDifferenceStep. Throws if H_pp is not positive definite on samples.
Hamiltonian make_custom(CustomSpec spec);

// H given by an expression in x1, x2, p1, p2; derivatives are symbolic.
Hamiltonian make_custom_expression(const std::string& text,
                                   Box2 region = {{-10.0, -10.0}, {10.0, 10.0}},
                                   double momentum_bound = 4.0);

// L(x, v) = sup_p <p, v> - H(x, p).
class Lagrangian {
 public:
  explicit Lagrangian(Hamiltonian h) : h_(std::move(h)) {}

  double operator()(Vec2 x, Vec2 v) const;
  // L_v(x, v), i.e. the momentum p with H_p(x, p) = v.
  Vec2 grad_v(Vec2 x, Vec2 v) const;
  Vec2 grad_x(Vec2 x, Vec2 v) const;
  const Hamiltonian& hamiltonian() const { return h_; }

 private:
  Hamiltonian h_;
};

// Closed form for quadratic families, damped Newton otherwise. The Newton
// path throws NumericalError (carrying the last residual) after 100
// iterations without reaching |H_p(x, p) - v| < 1e-10.
Lagrangian legendre(const Hamiltonian& h);
Vec2 momentum_for_velocity(const Hamiltonian& h, Vec2 x, Vec2 v);

// Fixed-step RK4 integration of x' = H_p, p' = -H_x. Negative duration
// integrates backward. Returns all steps including the start.
std::vector<PhasePoint> flow(const Hamiltonian& h, PhasePoint start,
                             double duration, double dt);

// Same trajectory together with the running action int L dt, accumulated
// in the direction of increasing time (positive for either sign of
// duration when L > 0).
struct FlowWithAction {
  std::vector<PhasePoint> states;
  std::vector<double> times;
  std::vector<double> action;  // action[k] = |int_{t_0}^{t_k} L dt| signed by time order
};
FlowWithAction flow_with_action(const Hamiltonian& h, PhasePoint start,
                                double duration, double dt);

}  // namespace hjsing
