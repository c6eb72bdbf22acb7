#include "hjsing/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hjsing/errors.hpp"

namespace hjsing {

class Hamiltonian::Model {
 public:
  virtual ~Model() = default;
  virtual double value(Vec2 x, Vec2 p) const = 0;
  virtual Vec2 grad_p(Vec2 x, Vec2 p) const = 0;
  virtual Vec2 grad_x(Vec2 x, Vec2 p) const = 0;
  virtual Mat2 hess_p(Vec2 x, Vec2 p) const = 0;
  virtual bool quadratic_in_p() const { return false; }
  virtual Quadratic quadratic(Vec2) const {
    throw PreconditionError("Hamiltonian is not quadratic in p");
  }

  HamiltonianFamily family = HamiltonianFamily::custom;
  double nu = 0.0;
  bool position_independent = false;
  std::string description;
};

namespace {

constexpr Vec2 kE1{1.0, 0.0};
constexpr Vec2 kE2{0.0, 1.0};

template <typename F>
Vec2 central_gradient(const F& f, Vec2 at, double h) {
  return {(f(at + h * kE1) - f(at - h * kE1)) / (2.0 * h),
          (f(at + h * kE2) - f(at - h * kE2)) / (2.0 * h)};
}

template <typename F>
Vec2 richardson_gradient(const F& f, Vec2 at) {
  constexpr double h = 1e-3;
  const Vec2 coarse = central_gradient(f, at, h);
  const Vec2 fine = central_gradient(f, at, 0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

std::vector<Vec2> region_samples(const Box2& box, int n) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
      const double b = n == 1 ? 0.5 : static_cast<double>(j) / (n - 1);
      out.push_back({box.lo.x1 + a * (box.hi.x1 - box.lo.x1),
                     box.lo.x2 + b * (box.hi.x2 - box.lo.x2)});
    }
  }
  return out;
}

class QuadraticFormModel final : public Hamiltonian::Model {
 public:
  QuadraticFormModel(const Mat2& a, Vec2 b, double c) : a_(a), b_(b), c_(c) {
    if (!a.is_spd()) {
      throw PreconditionError("quadratic_form: A must be symmetric positive definite");
    }
    family = HamiltonianFamily::quadratic_form;
    nu = a.min_eigenvalue();
    position_independent = true;
    description = "quadratic_form";
  }
  double value(Vec2, Vec2 p) const override {
    return 0.5 * dot(a_ * p, p) + dot(b_, p) + c_;
  }
  Vec2 grad_p(Vec2, Vec2 p) const override { return a_ * p + b_; }
  Vec2 grad_x(Vec2, Vec2) const override { return {}; }
  Mat2 hess_p(Vec2, Vec2) const override { return a_; }
  bool quadratic_in_p() const override { return true; }
  Hamiltonian::Quadratic quadratic(Vec2) const override { return {a_, b_, c_}; }

 private:
  Mat2 a_;
  Vec2 b_;
  double c_;
};

class MechanicalModel final : public Hamiltonian::Model {
 public:
  explicit MechanicalModel(MechanicalSpec spec) : spec_(std::move(spec)) {
    if (!spec_.a || !spec_.v) {
      throw PreconditionError("mechanical: A and V fields are required");
    }
    family = HamiltonianFamily::mechanical;
    position_independent = spec_.constant_a && spec_.constant_v;
    description = "mechanical";
    double lo = std::numeric_limits<double>::infinity();
    for (const Vec2& x : region_samples(spec_.region, 9)) {
      const Mat2 a = spec_.a(x);
      if (!a.is_symmetric(1e-10) || !(a.min_eigenvalue() > 0.0)) {
        throw PreconditionError("mechanical: A(x) is not symmetric positive definite at a sample point");
      }
      lo = std::min(lo, a.min_eigenvalue());
    }
    nu = lo;
  }

  double value(Vec2 x, Vec2 p) const override {
    return 0.5 * dot(spec_.a(x) * p, p) + spec_.v(x);
  }
  Vec2 grad_p(Vec2 x, Vec2 p) const override { return spec_.a(x) * p; }
  Vec2 grad_x(Vec2 x, Vec2 p) const override {
    if (spec_.constant_a && spec_.constant_v) return {};
    Mat2 d1, d2;
    if (spec_.da) {
      d1 = (*spec_.da)[0](x);
      d2 = (*spec_.da)[1](x);
    } else if (!spec_.constant_a) {
      const double h = kFiniteDifferenceStep;
      d1 = (1.0 / (2.0 * h)) * (spec_.a(x + h * kE1) + (-1.0) * spec_.a(x - h * kE1));
      d2 = (1.0 / (2.0 * h)) * (spec_.a(x + h * kE2) + (-1.0) * spec_.a(x - h * kE2));
    }
    Vec2 dv;
    if (spec_.dv) {
      dv = (*spec_.dv)(x);
    } else if (!spec_.constant_v) {
      dv = central_gradient(spec_.v, x, kFiniteDifferenceStep);
    }
    return {0.5 * dot(d1 * p, p) + dv.x1, 0.5 * dot(d2 * p, p) + dv.x2};
  }
  Mat2 hess_p(Vec2 x, Vec2) const override { return spec_.a(x); }
  bool quadratic_in_p() const override { return true; }
  Hamiltonian::Quadratic quadratic(Vec2 x) const override {
    return {spec_.a(x), {}, spec_.v(x)};
  }

 private:
  MechanicalSpec spec_;
};

class CustomModel final : public Hamiltonian::Model {
 public:
  explicit CustomModel(CustomSpec spec) : spec_(std::move(spec)) {
    if (!spec_.value) throw PreconditionError("custom Hamiltonian needs a value function");
    family = HamiltonianFamily::custom;
    position_independent = spec_.position_independent;
    description = spec_.description;
    double lo = std::numeric_limits<double>::infinity();
    const double r = spec_.momentum_bound;
    for (const Vec2& x : region_samples(spec_.region, 5)) {
      for (const Vec2& p : region_samples(Box2{{-r, -r}, {r, r}}, 7)) {
        const Mat2 hpp = hess_p(x, p);
        lo = std::min(lo, hpp.min_eigenvalue());
      }
    }
    if (!(lo > 0.0)) {
      throw PreconditionError("custom Hamiltonian is not strictly convex in p on the sampled region");
    }
    nu = lo;
  }

  double value(Vec2 x, Vec2 p) const override { return spec_.value(x, p); }
  Vec2 grad_p(Vec2 x, Vec2 p) const override {
    if (spec_.grad_p) return spec_.grad_p(x, p);
    return central_gradient([&](Vec2 q) { return spec_.value(x, q); }, p,
                            kFiniteDifferenceStep);
  }
  Vec2 grad_x(Vec2 x, Vec2 p) const override {
    if (spec_.grad_x) return spec_.grad_x(x, p);
    if (spec_.position_independent) return {};
    return central_gradient([&](Vec2 y) { return spec_.value(y, p); }, x,
                            kFiniteDifferenceStep);
  }
  Mat2 hess_p(Vec2 x, Vec2 p) const override {
    if (spec_.hess_p) return spec_.hess_p(x, p);
    // Differences of the momentum gradient; a wider step keeps the nested
    // difference above round-off when grad_p itself is numerical.
    const double h = spec_.grad_p ? kFiniteDifferenceStep : 1e-4;
    const Vec2 c1 = (grad_p(x, p + h * kE1) - grad_p(x, p - h * kE1)) / (2.0 * h);
    const Vec2 c2 = (grad_p(x, p + h * kE2) - grad_p(x, p - h * kE2)) / (2.0 * h);
    const double off = 0.5 * (c1.x2 + c2.x1);
    return {c1.x1, off, off, c2.x2};
  }

 private:
  CustomSpec spec_;
};

}  // namespace

Hamiltonian::Hamiltonian(std::shared_ptr<const Model> model)
    : model_(std::move(model)) {}

double Hamiltonian::operator()(Vec2 x, Vec2 p) const { return model_->value(x, p); }
Vec2 Hamiltonian::grad_p(Vec2 x, Vec2 p) const { return model_->grad_p(x, p); }
Vec2 Hamiltonian::grad_x(Vec2 x, Vec2 p) const { return model_->grad_x(x, p); }
Mat2 Hamiltonian::hess_p(Vec2 x, Vec2 p) const { return model_->hess_p(x, p); }
HamiltonianFamily Hamiltonian::family() const { return model_->family; }
double Hamiltonian::convexity_modulus() const { return model_->nu; }
bool Hamiltonian::quadratic_in_p() const { return model_->quadratic_in_p(); }
Hamiltonian::Quadratic Hamiltonian::quadratic(Vec2 x) const { return model_->quadratic(x); }
bool Hamiltonian::position_independent() const { return model_->position_independent; }
const std::string& Hamiltonian::description() const { return model_->description; }

double Hamiltonian::derivative_discrepancy(Vec2 x, Vec2 p) const {
  const Vec2 rx = richardson_gradient([&](Vec2 y) { return model_->value(y, p); }, x);
  const Vec2 rp = richardson_gradient([&](Vec2 q) { return model_->value(x, q); }, p);
  return std::max(norm(rx - grad_x(x, p)), norm(rp - grad_p(x, p)));
}

Hamiltonian make_mechanical(MechanicalSpec spec) {
  return Hamiltonian(std::make_shared<MechanicalModel>(std::move(spec)));
}

Hamiltonian make_mechanical(const Mat2& a, double v) {
  MechanicalSpec spec;
  spec.a = [a](Vec2) { return a; };
  spec.v = [v](Vec2) { return v; };
  spec.constant_a = true;
  spec.constant_v = true;
  return make_mechanical(std::move(spec));
}

Hamiltonian make_quadratic_form(const Mat2& a, Vec2 b, double c) {
  return Hamiltonian(std::make_shared<QuadraticFormModel>(a, b, c));
}

Hamiltonian make_custom(CustomSpec spec) {
  return Hamiltonian(std::make_shared<CustomModel>(std::move(spec)));
}

Hamiltonian make_custom_expression(const std::string& text, Box2 region,
                                   double momentum_bound) {
  const Expression h = Expression::parse(text);
  const Expression hp1 = h.derivative(Var::p1);
  const Expression hp2 = h.derivative(Var::p2);
  const Expression hx1 = h.derivative(Var::x1);
  const Expression hx2 = h.derivative(Var::x2);
  const Expression h11 = hp1.derivative(Var::p1);
  const Expression h12 = hp1.derivative(Var::p2);
  const Expression h22 = hp2.derivative(Var::p2);
  auto vars = [](Vec2 x, Vec2 p) { return VarValues{x.x1, x.x2, p.x1, p.x2}; };
  CustomSpec spec;
  spec.value = [=](Vec2 x, Vec2 p) { return h.eval(vars(x, p)); };
  spec.grad_p = [=](Vec2 x, Vec2 p) {
    const VarValues v = vars(x, p);
    return Vec2{hp1.eval(v), hp2.eval(v)};
  };
  spec.grad_x = [=](Vec2 x, Vec2 p) {
    const VarValues v = vars(x, p);
    return Vec2{hx1.eval(v), hx2.eval(v)};
  };
  spec.hess_p = [=](Vec2 x, Vec2 p) {
    const VarValues v = vars(x, p);
    const double off = h12.eval(v);
    return Mat2{h11.eval(v), off, off, h22.eval(v)};
  };
  spec.region = region;
  spec.momentum_bound = momentum_bound;
  spec.position_independent = !h.depends_on(Var::x1) && !h.depends_on(Var::x2);
  spec.description = "custom-expression: " + text;
  return make_custom(std::move(spec));
}

// ---------------------------------------------------------------------------
// Legendre transform

Vec2 momentum_for_velocity(const Hamiltonian& h, Vec2 x, Vec2 v) {
  if (h.quadratic_in_p()) {
    const auto q = h.quadratic(x);
    return solve(q.q, v - q.g);
  }
  // Minimize the convex function H(x, p) - <p, v>; its gradient is H_p - v.
  Vec2 p = solve(h.hess_p(x, Vec2{}), v - h.grad_p(x, Vec2{}));
  auto objective = [&](Vec2 q) { return h(x, q) - dot(q, v); };
  double residual = norm(h.grad_p(x, p) - v);
  for (int it = 0; it < 100; ++it) {
    if (residual < 1e-10) return p;
    const Vec2 r = h.grad_p(x, p) - v;
    const Vec2 step = solve(h.hess_p(x, p), r);
    double alpha = 1.0;
    const double f0 = objective(p);
    Vec2 trial = p - step;
    while (alpha > 1e-8 && !(objective(trial) <= f0 + 1e-14 * std::abs(f0))) {
      alpha *= 0.5;
      trial = p - alpha * step;
    }
    p = trial;
    residual = norm(h.grad_p(x, p) - v);
  }
  if (residual < 1e-10) return p;
  throw NumericalError("Legendre transform: Newton did not converge in 100 iterations", residual);
}

double Lagrangian::operator()(Vec2 x, Vec2 v) const {
  if (h_.quadratic_in_p()) {
    const auto q = h_.quadratic(x);
    const Vec2 w = v - q.g;
    return 0.5 * dot(solve(q.q, w), w) - q.c;
  }
  const Vec2 p = momentum_for_velocity(h_, x, v);
  return dot(p, v) - h_(x, p);
}

Vec2 Lagrangian::grad_v(Vec2 x, Vec2 v) const { return momentum_for_velocity(h_, x, v); }

Vec2 Lagrangian::grad_x(Vec2 x, Vec2 v) const {
  if (h_.position_independent()) return {};
  return -h_.grad_x(x, momentum_for_velocity(h_, x, v));
}

Lagrangian legendre(const Hamiltonian& h) { return Lagrangian(h); }

// ---------------------------------------------------------------------------
// Flow

namespace {

struct State {
  Vec2 x, p;
  double s = 0.0;  // accumulated action
};

State rhs(const Hamiltonian& h, const State& y) {
  const Vec2 hp = h.grad_p(y.x, y.p);
  return {hp, -h.grad_x(y.x, y.p), dot(y.p, hp) - h(y.x, y.p)};
}

State axpy(const State& y, double a, const State& k) {
  return {y.x + a * k.x, y.p + a * k.p, y.s + a * k.s};
}

FlowWithAction integrate(const Hamiltonian& h, PhasePoint start,
                         double duration, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("flow: dt must be positive");
  if (!std::isfinite(duration)) throw PreconditionError("flow: non-finite duration");
  const double ratio = std::abs(duration) / dt;
  if (ratio > 1e7) throw PreconditionError("flow: more than 1e7 steps requested");
  const auto n = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
  FlowWithAction out;
  out.states.reserve(n + 1);
  out.times.reserve(n + 1);
  out.action.reserve(n + 1);
  State y{start.x, start.p, 0.0};
  out.states.push_back(start);
  out.times.push_back(0.0);
  out.action.push_back(0.0);
  if (n == 0) return out;
  const double step = duration / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const State k1 = rhs(h, y);
    const State k2 = rhs(h, axpy(y, 0.5 * step, k1));
    const State k3 = rhs(h, axpy(y, 0.5 * step, k2));
    const State k4 = rhs(h, axpy(y, step, k3));
    State next = y;
    next.x += (step / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    next.p += (step / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
    next.s += (step / 6.0) * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s);
    const double t = static_cast<double>(k + 1) * step;
    if (!is_finite(next.x) || !is_finite(next.p) || !std::isfinite(next.s)) {
      throw NumericalError("flow: state blew up at t = " + std::to_string(t), t);
    }
    y = next;
    out.states.push_back({y.x, y.p});
    out.times.push_back(t);
    out.action.push_back(duration < 0.0 ? -y.s : y.s);
  }
  return out;
}

}  // namespace

std::vector<PhasePoint> flow(const Hamiltonian& h, PhasePoint start,
                             double duration, double dt) {
  return integrate(h, start, duration, dt).states;
}

FlowWithAction flow_with_action(const Hamiltonian& h, PhasePoint start,
                                double duration, double dt) {
  return integrate(h, start, duration, dt);
}

}  // namespace hjsing
