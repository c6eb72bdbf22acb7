#pragma once

// Small unconstrained optimizers shared by the action and solution modules.

#include <functional>
#include <vector>

#include "hjsing/geometry2d.hpp"

namespace hjsing {

// f(x, grad) returns the objective and fills grad (same size as x).
using ObjectiveWithGradient =
    std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct LbfgsResult {
  std::vector<double> x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;  // grad_norm < gtol
};

// Limited-memory BFGS with Armijo backtracking.
LbfgsResult lbfgs_minimize(const ObjectiveWithGradient& f, std::vector<double> x0,
                           double gtol, int max_iter = 500, int memory = 8);

struct NelderMeadResult {
  Vec2 x;
  double f = 0.0;
  int evaluations = 0;
};

// Derivative-free minimization in the plane; restarts from the incumbent
// until a restart no longer improves. Works on kinked objectives.
NelderMeadResult nelder_mead_2d(const std::function<double(Vec2)>& f, Vec2 start,
                                double initial_step, double tol = 1e-10,
                                int max_restarts = 6);

// Minimizer of a unimodal function on [a, b].
double golden_section(const std::function<double(double)>& f, double a, double b,
                      double tol = 1e-12);

}  // namespace hjsing
