#pragma once

// Semiconcave solutions u, their superdifferentials, singular-point
// classification and the energy-minimizing covector.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hjsing/action.hpp"
#include "hjsing/geometry2d.hpp"
#include "hjsing/hamiltonian.hpp"

namespace hjsing {

struct Branch {
  std::string name;
  ScalarField value;
  VectorField gradient;
  MatrixField hessian;  // may be empty; then estimated by differences
};

// Branch from an expression in x1, x2 with symbolic derivatives.
Branch branch_from_expression(const std::string& text);

enum class SolutionKind { min_of_smooth, lax_oleinik_value };

struct Superdiff2D {
  ConvexSet2D set;
  std::vector<Vec2> reachable;      // D*u(x), extreme points of `set`
  std::vector<std::size_t> active;  // active branch indices (min_of_smooth)
  int sing_class = 0;               // affine dimension of `set`
  bool heuristic = false;           // reachable set found by multi-start search
};

class SolutionRep {
 public:
  virtual ~SolutionRep() = default;
  virtual SolutionKind kind() const = 0;
  virtual double value(Vec2 x) const = 0;
  virtual Superdiff2D superdiff(Vec2 x) const = 0;
  virtual double semiconcavity_constant() const = 0;
  virtual const Box2& region() const = 0;

 protected:
  void require_in_region(Vec2 x) const;
};

inline constexpr double kActiveTol = 1e-9;

// u = min_i u_i over smooth branches.
class MinOfSmooth final : public SolutionRep {
 public:
  // When `c` is omitted the semiconcavity constant is 1.1 times the largest
  // sampled branch-Hessian norm on the region; a supplied `c` below the
  // sampled bound is rejected.
  MinOfSmooth(std::vector<Branch> branches, Box2 region,
              std::optional<double> c = std::nullopt, double active_tol = kActiveTol);

  SolutionKind kind() const override { return SolutionKind::min_of_smooth; }
  double value(Vec2 x) const override;
  Superdiff2D superdiff(Vec2 x) const override;
  double semiconcavity_constant() const override { return c_; }
  const Box2& region() const override { return region_; }

  const std::vector<Branch>& branches() const { return branches_; }
  double active_tol() const { return active_tol_; }
  // Indices with u_i(x) <= min + tol, ascending.
  std::vector<std::size_t> active_branches(Vec2 x, double tol) const;
  Mat2 branch_hessian(std::size_t i, Vec2 x) const;

 private:
  std::vector<Branch> branches_;
  Box2 region_;
  double c_ = 0.0;
  double active_tol_;
};

// u = T_t u0 evaluated pointwise; values are memoized.
class LaxOleinikValue final : public SolutionRep {
 public:
  LaxOleinikValue(Hamiltonian h, ScalarField u0, double t, Box2 region, double lambda,
                  double c, unsigned seed = 1, LaxOleinikOptions opt = {});

  SolutionKind kind() const override { return SolutionKind::lax_oleinik_value; }
  double value(Vec2 x) const override;
  Superdiff2D superdiff(Vec2 x) const override;
  double semiconcavity_constant() const override { return c_; }
  const Box2& region() const override { return region_; }

  static constexpr int kMultiStarts = 16;
  static constexpr double kClusterRadius = 1e-4;

 private:
  Box2 search_box(Vec2 x) const;

  Hamiltonian h_;
  ScalarField u0_;
  double t_;
  Box2 region_;
  double lambda_;
  double c_;
  unsigned seed_;
  LaxOleinikOptions opt_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<double, double>, double> cache_;
};

double value(const SolutionRep& u, Vec2 x);
Superdiff2D superdiff(const SolutionRep& u, Vec2 x);
bool is_singular(const SolutionRep& u, Vec2 x);
// Singularity with a caller-chosen tie tolerance (min_of_smooth only; other
// representations fall back to the default test).
bool is_singular(const SolutionRep& u, Vec2 x, double tol);
int sing_class(const SolutionRep& u, Vec2 x);

struct EnergySelection {
  Vec2 p_min;
  double value = 0.0;
  bool interior = false;  // relative interior of D+u (a singleton counts)
};

inline constexpr double kInteriorTol = 1e-9;

EnergySelection energy_argmin(const Hamiltonian& h, const ConvexSet2D& set, Vec2 x);
EnergySelection energy_argmin(const Hamiltonian& h, const SolutionRep& u, Vec2 x);

struct CriticalityTest {
  bool critical = false;
  bool indeterminate = false;
  double boundary_distance = 0.0;
};

inline constexpr int kCriticalEdgeSamples = 32;

// 0 in co H_p(x, D+u(x)), using extreme points plus edge samples.
CriticalityTest criticality(const Hamiltonian& h, const ConvexSet2D& set, Vec2 x,
                            int edge_samples = kCriticalEdgeSamples);
CriticalityTest criticality(const Hamiltonian& h, const SolutionRep& u, Vec2 x);
bool is_critical(const Hamiltonian& h, const SolutionRep& u, Vec2 x);

// Backward flow from (x, p_star) for time r. p_star must be a reachable
// gradient within 1e-6.
FlowWithAction backward_calibrated(const Hamiltonian& h, const SolutionRep& u, Vec2 x,
                                   Vec2 p_star, double r, double dt);

struct DirectionalDerivative {
  double value = 0.0;     // min over D+u(x) of <p, v>
  double quotient = 0.0;  // (u(x + lambda v) - u(x)) / lambda
  bool warning = false;   // the two disagree by more than 1e-3
};

DirectionalDerivative directional_superderivative(const SolutionRep& u, Vec2 x, Vec2 v);

ConvexSet2D exposed_face(const ConvexSet2D& set, Vec2 v);
ConvexSet2D exposed_face(const SolutionRep& u, Vec2 x, Vec2 v);

// Largest |H(x, Du_i(x))| over the sample points and the branches active
// there.
double max_branch_pde_residual(const Hamiltonian& h, const MinOfSmooth& u,
                               const std::vector<Vec2>& points);

}  // namespace hjsing
