#pragma once

// Verifiers for the uniqueness results: injectivity, cone confinement,
// calibrated cones, reparametrization matching, strict uniqueness and the
// K_delta exclusion diagnostic.

#include <map>
#include <string>
#include <vector>

#include "hjsing/characteristics.hpp"

namespace hjsing {

struct Witness {
  std::string label;
  double s = 0.0;
  double t = 0.0;
  double value = 0.0;
};

// One verifier verdict. status is "pass", "fail" or "informative".
struct CheckEntry {
  std::string name;
  std::string status = "fail";
  double margin = 0.0;
  std::vector<Witness> witnesses;
  std::map<std::string, double> params;
  std::string detail;

  bool passed() const { return status == "pass"; }
};

// Right velocity at 0: the recorded selection when present, otherwise the
// least-squares estimate of validate_lip0.
Vec2 initial_velocity(const SingularArc& arc);

struct InjectivityResult {
  double t0 = 0.0;  // certified injectivity horizon
  CheckEntry entry;
};

InjectivityResult check_injectivity(const SingularArc& arc);

struct ConeReport {
  double s_rho = 0.0;
  double tau_rho = 0.0;
  std::vector<double> sigma_rho;  // per arc2 sample up to tau_rho (index-aligned)
  CheckEntry a, b1, b2;
  bool pass = false;
};

ConeReport check_cone_lemma(const SingularArc& arc1, const SingularArc& arc2, double rho);

struct CalibratedConeOptions {
  int samples = 12;        // arc samples s tested in [0, horizon]
  double ray_dt = 1e-3;    // step of the backward calibrated flows
  double calibration_tol = 1e-5;
  bool swap_gradients = false;  // deliberately inverted cones
};

struct CalibratedConeReport {
  double delta_achieved = 0.0;
  int calibration_failures = 0;
  CheckEntry entry;
};

CalibratedConeReport check_calibrated_cones(const Hamiltonian& h, const SolutionRep& u,
                                            const SingularArc& arc, double delta_target,
                                            double r1, double horizon,
                                            const CalibratedConeOptions& opt = {});

struct ReparamOptions {
  double match_tol_rel = 1e-4;  // match tolerance relative to the diameter of arc1
  int lip_min_gap = 4;          // Lipschitz pairs at least this many spacings apart
  double velocity_tol = 1e-6;
};

struct ReparamResult {
  std::vector<double> s;    // arc1 times on the matched prefix
  std::vector<double> phi;  // matched arc2 times
  double residual = 0.0;    // max |x2(phi(s)) - x1(s)| on [0, sigma]
  double sigma = 0.0;
  double match_tol = 0.0;
  bool monotone = false;
  bool unique = true;
  double lip_phi = 0.0;
  double lip_phi_inv = 0.0;
  double min_slope = 0.0;         // on the omega-small prefix
  double omega_small_horizon = 0.0;
  double bilip_margin = 0.0;      // worst slack of the lower bound on |phi(s1) - phi(s0)|
  double identity_deviation = 0.0;
  double velocity_mismatch = 0.0;
  std::vector<Witness> witnesses;

  double operator()(double s) const;  // piecewise-linear phi
};

ReparamResult match_reparam(const SingularArc& arc1, const SingularArc& arc2,
                            const ReparamOptions& opt = {});

// max |psi(phi(s)) - s| over the common domain of phi = match(a, b) and
// psi = match(b, a).
double composition_residual(const ReparamResult& phi, const ReparamResult& psi);

CheckEntry reparam_entry(const std::string& name, const ReparamResult& r,
                         double slope_slack = 0.05);

struct StrictUniquenessOptions {
  std::vector<double> eps_schedule{1e-2, 1e-3, 1e-4};
  bool corollary = true;         // full horizon; otherwise the first local_fraction of T
  double local_fraction = 0.25;
  double extrapolation_tol = 1e-6;
  double exact_floor = 1e-12;    // deviations below this count as exact agreement
  double min_order = 1.0;
  MollifiedOptions mollified;
  StrictOptions strict;
};

struct StrictUniquenessReport {
  std::vector<double> dts;
  std::vector<SingularArc> arcs;
  SingularArc mollified;
  std::vector<double> consecutive_deviation;  // |X(dt_i) - X(dt_{i+1})|
  std::vector<double> oracle_deviation;       // |X(dt_i) - mollified|
  double observed_order = 0.0;
  double constant_c = 0.0;
  double extrapolated_deviation = 0.0;
  double horizon_checked = 0.0;
  bool noncritical_throughout = true;
  CheckEntry entry;
};

StrictUniquenessReport check_strict_uniqueness(const Hamiltonian& h, const SolutionRep& u,
                                               Vec2 x0, double T, std::vector<double> dts,
                                               const StrictUniquenessOptions& opt = {});

struct KDeltaOptions {
  std::vector<double> eps_schedule{1e-2, 1e-3, 1e-4};
  double dt = 1e-3;
  double tau = 0.005;  // exclusion is asserted for t > 3 tau
};

struct KDeltaResult {
  AppendixGap gap;
  double c1 = 0.0;
  double delta = 0.0;
  double worst_margin = 0.0;  // min over eps and t > 3 tau of dist to K_delta boundary
  CheckEntry entry;
};

// K_delta = union over t' in (0, T) of B(x_bar + t' v_bar, delta t'), with
// delta = mu / (12 (C1 + |p_bar|)). Mollified arcs from x_bar must stay
// outside it for t > 3 tau.
KDeltaResult check_kdelta_exclusion(const Hamiltonian& h, const SolutionRep& u, Vec2 x_bar,
                                    Vec2 v_bar, Vec2 p_bar, double T,
                                    const KDeltaOptions& opt = {});

}  // namespace hjsing
