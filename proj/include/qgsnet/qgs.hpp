#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "qgsnet/rng.hpp"

namespace qgsnet::qgs {

/// Residual map y -> r(y) with an optional analytic Jacobian. When no
/// Jacobian is supplied, a central finite-difference fallback is used.
struct ResidualMap {
  int dim_in = 0;
  int dim_out = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jac;  // optional

  bool empty() const { return dim_out == 0; }
};

/// A constraint-satisfaction problem in least-squares form: find x with
/// h(x) = 0, where inequality constraints have already been absorbed via
/// squared slack variables. `gradient`, when set, evaluates J(x)^T h(x)
/// without forming the full Jacobian; large training systems rely on it.
struct ConstraintSystem {
  int dim_x = 0;
  int dim_h = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;  // optional fused J^T h
  std::vector<std::pair<int, int>> slack_map;  // inequality row -> slack index
};

struct QgsSettings {
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  double grad_tol = 1e-8;
  double max_time = 1e4;
  int target_minima = 1;
  int max_attempts = 0;  // 0 means 10 * target_minima
  double escape_eps = 0.5;
  double backward_horizon = 5.0;
  double dedup_dist = 1e-4;  // scaled by sqrt(dim_x) when comparing points
  std::uint64_t seed = 0;

  int effective_max_attempts() const {
    return max_attempts > 0 ? max_attempts : 10 * target_minima;
  }
  void validate() const;
};

enum class Stability { stable, unstable, undetermined };

std::string to_string(Stability s);
Stability stability_from_string(const std::string& s);

struct Equilibrium {
  Eigen::VectorXd point;
  double cost = 0.0;
  double grad_norm = 0.0;
  Stability stability = Stability::undetermined;
  double leading_eigenvalue = 0.0;
  Eigen::VectorXd leading_eigenvector;  // cached for escape; not serialized
};

/// Equilibria found so far, sorted ascending by cost.
struct MinimaSet {
  std::vector<Equilibrium> items;
  int attempts_used = 0;
};

struct EvaluationError : std::runtime_error {
  explicit EvaluationError(int component_index)
      : std::runtime_error("non-finite residual component " +
                           std::to_string(component_index)),
        component(component_index) {}
  int component;
};

struct NoConvergence : std::runtime_error {
  NoConvergence(std::string msg, Equilibrium best_point)
      : std::runtime_error(std::move(msg)), best(std::move(best_point)) {}
  Equilibrium best;  // lowest gradient norm reached before giving up
};

struct NumericalBlowup : std::runtime_error {
  explicit NumericalBlowup(std::string msg) : std::runtime_error(std::move(msg)) {}
};

struct NoMinimaFound : std::runtime_error {
  explicit NoMinimaFound(std::string msg) : std::runtime_error(std::move(msg)) {}
};

/// Rewrites {C_I(y) < 0, C_E(y) = 0} as the square system
/// h(y, s) = [C_I(y) + s^2; C_E(y)] over the augmented vector x = (y, s).
/// Either map may be empty, but not both.
ConstraintSystem add_slack(const ResidualMap& inequalities,
                           const ResidualMap& equalities);

/// f(x) = 0.5 * ||h(x)||^2. Throws EvaluationError on non-finite components.
double cost(const ConstraintSystem& sys, const Eigen::VectorXd& x);

/// Right-hand side of the gradient flow: -J(x)^T h(x) = -grad f(x).
Eigen::VectorXd field(const ConstraintSystem& sys, const Eigen::VectorXd& x);

/// Called after each accepted integrator step; used by trajectory tests.
using StepObserver = std::function<void(double t, const Eigen::VectorXd& x)>;

/// Integrates the gradient flow from x0 with an adaptive embedded
/// Runge-Kutta 5(4) pair until ||grad f|| < grad_tol. Classifies the
/// endpoint's stability from the leading eigenvalue of the field Jacobian
/// (dense for small systems, matrix-free power iteration for large ones).
Equilibrium integrate_forward(const ConstraintSystem& sys,
                              const Eigen::VectorXd& x0,
                              const QgsSettings& settings,
                              const StepObserver& observer = {});

/// Proposes new start points that may lie outside the current stability
/// region: perturb the equilibrium, integrate the time-reversed flow
/// x' = +grad f(x) for backward_horizon, then push the endpoint past the
/// boundary along the travel direction. Diverging reverse trajectories are
/// dropped, so the result may be empty.
std::vector<Eigen::VectorXd> escape(const ConstraintSystem& sys,
                                    const Equilibrium& eq,
                                    const QgsSettings& settings, Rng& rng);

/// Alternates forward integration and escape until target_minima distinct
/// non-repelling equilibria are collected or the attempt budget runs out.
/// Deterministic for a fixed seed.
MinimaSet enumerate_minima(const ConstraintSystem& sys,
                           const Eigen::VectorXd& x0,
                           const QgsSettings& settings);

/// Leading (largest real part) eigenvalue and eigenvector of the field
/// Jacobian at x, via central finite differences. Exposed for escape and
/// the stability tests.
std::pair<double, Eigen::VectorXd> leading_field_eigenpair(
    const ConstraintSystem& sys, const Eigen::VectorXd& x, std::uint64_t seed);

}  // namespace qgsnet::qgs
