#include "qgsnet/qgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <Eigen/Eigenvalues>

namespace qgsnet::qgs {

namespace {

constexpr int kDenseEigenDim = 64;
constexpr double kMachEps = std::numeric_limits<double>::epsilon();

Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, int dim_out) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd J(dim_out, n);
  Eigen::VectorXd xp = x, xm = x;
  for (int j = 0; j < n; ++j) {
    const double eps = std::sqrt(kMachEps) * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + eps;
    xm[j] = x[j] - eps;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * eps);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return J;
}

void check_residual_finite(const Eigen::VectorXd& h) {
  if (h.allFinite()) return;
  for (int i = 0; i < h.size(); ++i) {
    if (!std::isfinite(h[i])) throw EvaluationError(i);
  }
}

Eigen::VectorXd eval_gradient(const ConstraintSystem& sys,
                              const Eigen::VectorXd& x) {
  if (sys.gradient) {
    Eigen::VectorXd g = sys.gradient(x);
    if (!g.allFinite()) {
      check_residual_finite(sys.residual(x));
      throw EvaluationError(-1);
    }
    return g;
  }
  Eigen::VectorXd h = sys.residual(x);
  check_residual_finite(h);
  return sys.jacobian(x).transpose() * h;
}

// Dormand-Prince 5(4) coefficients.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                 a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                 a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
// b - b_hat, for the embedded error estimate.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

struct FlowResult {
  Eigen::VectorXd x;
  double t = 0.0;
  bool reached_grad_tol = false;
  double grad_norm = 0.0;
  Eigen::VectorXd best_x;      // lowest gradient norm seen
  double best_grad_norm = 0.0;
  long steps_accepted = 0;
};

/// Adaptive RK5(4) integration of x' = F(x) up to t_end. When
/// stop_on_grad is set, stops as soon as ||F(x)|| < grad_tol (the flow is
/// a gradient flow, so ||F|| is the gradient norm).
FlowResult integrate_flow(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F,
    const Eigen::VectorXd& x0, double t_end, const QgsSettings& s,
    bool stop_on_grad, const StepObserver& observer) {
  const int n = static_cast<int>(x0.size());
  const double norm_cap = 1e7 * (1.0 + x0.norm());
  const long max_steps = 50'000'000;  // safety valve, far beyond normal use

  Eigen::VectorXd x = x0;
  Eigen::VectorXd k1 = F(x);
  if (!k1.allFinite()) throw NumericalBlowup("non-finite field at start");

  FlowResult out;
  out.best_x = x;
  out.best_grad_norm = k1.norm();
  out.grad_norm = out.best_grad_norm;
  if (stop_on_grad && out.grad_norm < s.grad_tol) {
    out.x = x;
    out.reached_grad_tol = true;
    return out;
  }

  // Initial step from the scaled magnitudes of x0 and F(x0).
  double d0 = x.norm() / std::sqrt(double(n));
  double d1 = k1.norm() / std::sqrt(double(n));
  double h = (d0 > 1e-10 && d1 > 1e-10) ? 0.01 * d0 / d1 : 1e-6;
  h = std::min(h, t_end);

  Eigen::VectorXd k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), xt(n), xn(n);
  double t = 0.0;
  int consecutive_rejects = 0;

  while (t < t_end) {
    if (out.steps_accepted > max_steps)
      throw NumericalBlowup("step budget exhausted");
    h = std::min(h, t_end - t);

    xt.noalias() = x + h * (a21 * k1);
    k2 = F(xt);
    xt.noalias() = x + h * (a31 * k1 + a32 * k2);
    k3 = F(xt);
    xt.noalias() = x + h * (a41 * k1 + a42 * k2 + a43 * k3);
    k4 = F(xt);
    xt.noalias() = x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    k5 = F(xt);
    xt.noalias() = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    k6 = F(xt);
    xn.noalias() = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7 = F(xn);

    if (!xn.allFinite() || !k7.allFinite() || xn.norm() > norm_cap)
      throw NumericalBlowup("state diverged during integration");

    // Scaled RMS error of the embedded 4th-order solution.
    double err = 0.0;
    for (int i = 0; i < n; ++i) {
      const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                             e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc =
          s.abs_tol + s.rel_tol * std::max(std::abs(x[i]), std::abs(xn[i]));
      err += (ei / sc) * (ei / sc);
    }
    err = std::sqrt(err / n);

    if (err <= 1.0) {
      t += h;
      x.swap(xn);
      k1.swap(k7);  // first-same-as-last
      ++out.steps_accepted;
      consecutive_rejects = 0;
      if (observer) observer(t, x);

      const double gn = k1.norm();
      if (gn < out.best_grad_norm) {
        out.best_grad_norm = gn;
        out.best_x = x;
      }
      if (stop_on_grad && gn < s.grad_tol) {
        out.x = x;
        out.t = t;
        out.grad_norm = gn;
        out.reached_grad_tol = true;
        return out;
      }
      h *= std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 1.0, 5.0);
    } else {
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
      if (++consecutive_rejects > 60 || h < 1e-14 * std::max(1.0, t)) {
        break;  // step size collapsed; report the best point seen
      }
    }
  }

  out.x = x;
  out.t = t;
  out.grad_norm = k1.norm();
  return out;
}

bool near_any(const std::vector<Equilibrium>& items, const Eigen::VectorXd& p,
              double dist) {
  for (const auto& it : items) {
    if ((it.point - p).norm() < dist) return true;
  }
  return false;
}

}  // namespace

void QgsSettings::validate() const {
  if (!(abs_tol > 0) || !(rel_tol > 0) || !(grad_tol > 0))
    throw std::invalid_argument("integrator and gradient tolerances must be positive");
  if (!(max_time > 0)) throw std::invalid_argument("max_time must be positive");
  if (target_minima < 1) throw std::invalid_argument("target_minima must be >= 1");
  if (max_attempts < 0) throw std::invalid_argument("max_attempts must be >= 0");
  if (escape_eps < 0) throw std::invalid_argument("escape_eps must be >= 0");
  if (backward_horizon < 0)
    throw std::invalid_argument("backward_horizon must be >= 0");
  if (!(dedup_dist > 0)) throw std::invalid_argument("dedup_dist must be positive");
}

std::string to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    default: return "undetermined";
  }
}

Stability stability_from_string(const std::string& s) {
  if (s == "stable") return Stability::stable;
  if (s == "unstable") return Stability::unstable;
  if (s == "undetermined") return Stability::undetermined;
  throw std::invalid_argument("unknown stability tag: " + s);
}

ConstraintSystem add_slack(const ResidualMap& inequalities,
                           const ResidualMap& equalities) {
  const int l = inequalities.empty() ? 0 : inequalities.dim_out;
  const int e = equalities.empty() ? 0 : equalities.dim_out;
  if (l == 0 && e == 0)
    throw std::invalid_argument("add_slack: no constraints given");
  if (l > 0 && e > 0 && inequalities.dim_in != equalities.dim_in)
    throw std::invalid_argument("add_slack: input dimensions disagree");

  const int dim_y = l > 0 ? inequalities.dim_in : equalities.dim_in;
  const int dim_x = dim_y + l;
  const int dim_h = l + e;

  auto ineq_eval = inequalities.eval;
  auto eq_eval = equalities.eval;
  auto ineq_jac = inequalities.jac;
  auto eq_jac = equalities.jac;

  ConstraintSystem sys;
  sys.dim_x = dim_x;
  sys.dim_h = dim_h;
  sys.residual = [=](const Eigen::VectorXd& x) {
    Eigen::VectorXd h(dim_h);
    const Eigen::VectorXd y = x.head(dim_y);
    if (l > 0) {
      const Eigen::VectorXd s = x.tail(l);
      h.head(l) = ineq_eval(y) + s.cwiseProduct(s);
    }
    if (e > 0) h.tail(e) = eq_eval(y);
    return h;
  };
  sys.jacobian = [=](const Eigen::VectorXd& x) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(dim_h, dim_x);
    const Eigen::VectorXd y = x.head(dim_y);
    if (l > 0) {
      J.topLeftCorner(l, dim_y) =
          ineq_jac ? ineq_jac(y) : fd_jacobian(ineq_eval, y, l);
      const Eigen::VectorXd s = x.tail(l);
      for (int i = 0; i < l; ++i) J(i, dim_y + i) = 2.0 * s[i];
    }
    if (e > 0)
      J.bottomLeftCorner(e, dim_y) =
          eq_jac ? eq_jac(y) : fd_jacobian(eq_eval, y, e);
    return J;
  };
  for (int i = 0; i < l; ++i) sys.slack_map.emplace_back(i, dim_y + i);
  return sys;
}

double cost(const ConstraintSystem& sys, const Eigen::VectorXd& x) {
  if (x.size() != sys.dim_x)
    throw std::invalid_argument("cost: x has wrong dimension");
  Eigen::VectorXd h = sys.residual(x);
  check_residual_finite(h);
  return 0.5 * h.squaredNorm();
}

Eigen::VectorXd field(const ConstraintSystem& sys, const Eigen::VectorXd& x) {
  if (x.size() != sys.dim_x)
    throw std::invalid_argument("field: x has wrong dimension");
  return -eval_gradient(sys, x);
}

std::pair<double, Eigen::VectorXd> leading_field_eigenpair(
    const ConstraintSystem& sys, const Eigen::VectorXd& x,
    std::uint64_t seed) {
  const int n = sys.dim_x;
  auto F = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return -eval_gradient(sys, p);
  };

  if (n <= kDenseEigenDim) {
    Eigen::MatrixXd Jf = fd_jacobian(F, x, n);
    Eigen::EigenSolver<Eigen::MatrixXd> es(Jf);
    int lead = 0;
    for (int i = 1; i < n; ++i) {
      if (es.eigenvalues()[i].real() > es.eigenvalues()[lead].real()) lead = i;
    }
    Eigen::VectorXd v = es.eigenvectors().col(lead).real();
    const double vn = v.norm();
    if (vn > 1e-12) v /= vn;
    return {es.eigenvalues()[lead].real(), v};
  }

  // Matrix-free path for large systems: the field Jacobian of a gradient
  // flow is symmetric, so a shifted power iteration finds the algebraically
  // largest eigenvalue from the dominant-magnitude one.
  const double eps = std::sqrt(kMachEps) * (1.0 + x.norm());
  auto matvec = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return (F(x + eps * v) - F(x - eps * v)) / (2.0 * eps);
  };

  Rng rng = Rng::stream(seed, 0x51ab1e);
  Eigen::VectorXd v = rng.unit_vector(n);
  double lam = 0.0;
  for (int it = 0; it < 32; ++it) {
    Eigen::VectorXd w = matvec(v);
    lam = v.dot(w);
    const double wn = w.norm();
    if (wn < 1e-14) return {0.0, v};
    v = w / wn;
  }
  if (lam >= 0.0) return {lam, v};

  const double shift = std::abs(lam) * 1.05;
  Eigen::VectorXd u = rng.unit_vector(n);
  for (int it = 0; it < 48; ++it) {
    Eigen::VectorXd w = matvec(u) + shift * u;
    const double wn = w.norm();
    if (wn < 1e-14) break;
    u = w / wn;
  }
  return {u.dot(matvec(u)), u};
}

Equilibrium integrate_forward(const ConstraintSystem& sys,
                              const Eigen::VectorXd& x0,
                              const QgsSettings& settings,
                              const StepObserver& observer) {
  settings.validate();
  if (x0.size() != sys.dim_x)
    throw std::invalid_argument("integrate_forward: x0 has wrong dimension");
  if (!x0.allFinite())
    throw std::invalid_argument("integrate_forward: x0 must be finite");

  auto F = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return -eval_gradient(sys, p);
  };
  FlowResult r =
      integrate_flow(F, x0, settings.max_time, settings, true, observer);

  if (!r.reached_grad_tol) {
    Equilibrium best;
    best.point = r.best_x;
    best.cost = cost(sys, r.best_x);
    best.grad_norm = r.best_grad_norm;
    best.stability = Stability::undetermined;
    throw NoConvergence("gradient norm still " + std::to_string(r.grad_norm) +
                            " after max_time",
                        std::move(best));
  }

  Equilibrium eq;
  eq.point = r.x;
  eq.cost = cost(sys, r.x);
  eq.grad_norm = r.grad_norm;
  auto [lead, vec] = leading_field_eigenpair(sys, r.x, settings.seed);
  eq.leading_eigenvalue = lead;
  eq.leading_eigenvector = vec;
  if (lead < -settings.grad_tol)
    eq.stability = Stability::stable;
  else if (lead > settings.grad_tol)
    eq.stability = Stability::unstable;
  else
    eq.stability = Stability::undetermined;
  return eq;
}

std::vector<Eigen::VectorXd> escape(const ConstraintSystem& sys,
                                    const Equilibrium& eq,
                                    const QgsSettings& settings, Rng& rng) {
  settings.validate();
  const int n = sys.dim_x;
  auto reverse_field = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return eval_gradient(sys, p);
  };

  std::vector<Eigen::VectorXd> directions;
  Eigen::VectorXd lead_vec = eq.leading_eigenvector;
  if (lead_vec.size() != n)
    lead_vec = leading_field_eigenpair(sys, eq.point, settings.seed).second;
  if (lead_vec.size() == n && lead_vec.norm() > 0.5) {
    directions.push_back(lead_vec);
    directions.push_back(-lead_vec);
  }
  const int max_candidates = std::min(settings.effective_max_attempts(), 6);
  while (static_cast<int>(directions.size()) < max_candidates)
    directions.push_back(rng.unit_vector(n));

  std::vector<Eigen::VectorXd> candidates;
  for (const auto& d : directions) {
    Eigen::VectorXd start = eq.point + settings.escape_eps * d;
    FlowResult r;
    try {
      r = integrate_flow(reverse_field, start, settings.backward_horizon,
                         settings, false, {});
    } catch (const NumericalBlowup&) {
      continue;  // diverging reverse trajectory; not fatal
    } catch (const EvaluationError&) {
      continue;
    }
    // Push past the stability boundary along the direction of travel.
    Eigen::VectorXd travel = r.x - eq.point;
    const double tn = travel.norm();
    Eigen::VectorXd dhat = tn > 1e-12 ? Eigen::VectorXd(travel / tn) : d;
    candidates.push_back(r.x + settings.escape_eps * dhat);
  }
  return candidates;
}

MinimaSet enumerate_minima(const ConstraintSystem& sys,
                           const Eigen::VectorXd& x0,
                           const QgsSettings& settings) {
  settings.validate();
  if (x0.size() != sys.dim_x)
    throw std::invalid_argument("enumerate_minima: x0 has wrong dimension");
  if (!x0.allFinite())
    throw std::invalid_argument("enumerate_minima: x0 must be finite");

  const double dedup = settings.dedup_dist * std::sqrt(double(sys.dim_x));
  const int max_att = settings.effective_max_attempts();
  Rng restart_rng = Rng::stream(settings.seed, 0x7e57a7);

  MinimaSet out;
  std::deque<Eigen::VectorXd> pending;
  pending.push_back(x0);
  bool any_converged = false;

  while (out.attempts_used < max_att &&
         static_cast<int>(out.items.size()) < settings.target_minima) {
    if (pending.empty()) {
      // Escapes dried up; fall back to a fresh start around x0.
      const double radius = settings.escape_eps * (1.0 + 0.5 * out.attempts_used);
      pending.push_back(x0 + radius * restart_rng.normal_vector(sys.dim_x));
    }
    Eigen::VectorXd start = std::move(pending.front());
    pending.pop_front();
    const int attempt_index = out.attempts_used++;

    Equilibrium eq;
    try {
      eq = integrate_forward(sys, start, settings);
    } catch (const NoConvergence&) {
      continue;
    } catch (const NumericalBlowup&) {
      continue;
    }
    any_converged = true;

    if (eq.stability != Stability::unstable &&
        !near_any(out.items, eq.point, dedup)) {
      out.items.push_back(eq);
      if (static_cast<int>(out.items.size()) >= settings.target_minima) break;
    }
    if (out.attempts_used >= max_att) break;

    Rng esc_rng = Rng::stream(settings.seed, 0xe5c000 + attempt_index);
    auto cands = escape(sys, eq, settings, esc_rng);
    for (auto& c : cands) {
      pending.push_back(std::move(c));
      if (pending.size() > 24) pending.pop_front();
    }
  }

  std::stable_sort(out.items.begin(), out.items.end(),
                   [](const Equilibrium& a, const Equilibrium& b) {
                     return a.cost < b.cost;
                   });
  if (out.items.empty()) {
    throw NoMinimaFound(any_converged
                            ? "all converged equilibria were repelling"
                            : "no forward integration converged");
  }
  return out;
}

}  // namespace qgsnet::qgs
