#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qgsnet/qgs.hpp"
#include "qgsnet/serialize.hpp"

using namespace qgsnet;
using qgs::ConstraintSystem;
using qgs::QgsSettings;
using qgs::ResidualMap;

namespace {

ConstraintSystem system_from(int dim_x, int dim_h,
                             std::function<Eigen::VectorXd(const Eigen::VectorXd&)> r,
                             std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> j) {
  ConstraintSystem sys;
  sys.dim_x = dim_x;
  sys.dim_h = dim_h;
  sys.residual = std::move(r);
  sys.jacobian = std::move(j);
  return sys;
}

// h(x) = x - target, identity Jacobian.
ConstraintSystem shifted_identity(const Eigen::VectorXd& target) {
  const int n = static_cast<int>(target.size());
  return system_from(
      n, n, [target](const Eigen::VectorXd& x) { return x - target; },
      [n](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(n, n); });
}

// h(x) = (x1^2 + x2^2 - 1, x1 - x2); feasible points (+-sqrt(2)/2, +-sqrt(2)/2).
ConstraintSystem circle_line() {
  return system_from(
      2, 2,
      [](const Eigen::VectorXd& x) {
        Eigen::VectorXd h(2);
        h << x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1];
        return h;
      },
      [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd J(2, 2);
        J << 2.0 * x[0], 2.0 * x[1], 1.0, -1.0;
        return J;
      });
}

// Inconsistent pair h(x) = (x^2, x - 1); stationary points solve 2x^3+x-1=0.
ConstraintSystem infeasible_pair() {
  return system_from(
      1, 2,
      [](const Eigen::VectorXd& x) {
        Eigen::VectorXd h(2);
        h << x[0] * x[0], x[0] - 1.0;
        return h;
      },
      [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd J(2, 1);
        J << 2.0 * x[0], 1.0;
        return J;
      });
}

// h(x) = (x^2 - 1)/sqrt(2), so f(x) = (x^2-1)^2/4: the double well.
ConstraintSystem double_well() {
  const double s = 1.0 / std::sqrt(2.0);
  return system_from(
      1, 1,
      [s](const Eigen::VectorXd& x) {
        Eigen::VectorXd h(1);
        h << s * (x[0] * x[0] - 1.0);
        return h;
      },
      [s](const Eigen::VectorXd& x) {
        Eigen::MatrixXd J(1, 1);
        J << s * 2.0 * x[0];
        return J;
      });
}

double bisect_root(const std::function<double(double)>& g, double lo, double hi) {
  REQUIRE(g(lo) * g(hi) < 0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(lo) * g(mid) <= 0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST_CASE("add_slack turns one inequality into a squared-slack equality") {
  ResidualMap ineq{1, 1,
                   [](const Eigen::VectorXd& y) { return vec1(y[0] - 1.0); },
                   nullptr};
  ConstraintSystem sys = qgs::add_slack(ineq, {});
  CHECK(sys.dim_x == 2);
  CHECK(sys.dim_h == 1);
  REQUIRE(sys.slack_map.size() == 1);
  CHECK(sys.slack_map[0] == std::pair<int, int>{0, 1});
  CHECK(sys.residual(vec2(0.0, 1.0))[0] == doctest::Approx(0.0));
  CHECK(qgs::cost(sys, vec2(0.0, 1.0)) == doctest::Approx(0.0));
}

TEST_CASE("add_slack with equalities only is the identity transform") {
  ResidualMap eq{1, 1, [](const Eigen::VectorXd& y) { return y; }, nullptr};
  ConstraintSystem sys = qgs::add_slack({}, eq);
  CHECK(sys.dim_x == 1);
  CHECK(sys.dim_h == 1);
  CHECK(sys.slack_map.empty());
  CHECK(sys.residual(vec1(0.7))[0] == doctest::Approx(0.7));
}

TEST_CASE("add_slack mixes inequalities and equalities") {
  ResidualMap ineq{1, 2,
                   [](const Eigen::VectorXd& y) {
                     return vec2(-y[0], y[0] - 2.0);
                   },
                   nullptr};
  ResidualMap eq{1, 1,
                 [](const Eigen::VectorXd& y) { return vec1(y[0] - 1.0); },
                 nullptr};
  ConstraintSystem sys = qgs::add_slack(ineq, eq);
  CHECK(sys.dim_x == 3);
  CHECK(sys.dim_h == 3);
  Eigen::VectorXd x(3);
  x << 1.0, 1.0, 1.0;  // y = 1, s = (1, 1)
  CHECK(sys.residual(x).norm() == doctest::Approx(0.0));
}

TEST_CASE("add_slack rejects the empty problem") {
  CHECK_THROWS_AS(qgs::add_slack({}, {}), std::invalid_argument);
}

TEST_CASE("cost evaluates half the squared residual norm") {
  ConstraintSystem identity = shifted_identity(Eigen::VectorXd::Zero(1));
  CHECK(qgs::cost(identity, vec1(0.0)) == doctest::Approx(0.0));

  ConstraintSystem two = shifted_identity(Eigen::VectorXd::Zero(2));
  CHECK(qgs::cost(two, vec2(3.0, 4.0)) == doctest::Approx(12.5));

  CHECK(qgs::cost(circle_line(), vec2(1.0, 0.0)) == doctest::Approx(0.5));
}

TEST_CASE("cost names the offending component on non-finite residuals") {
  ConstraintSystem sys = system_from(
      1, 2,
      [](const Eigen::VectorXd& x) {
        Eigen::VectorXd h(2);
        h << x[0], 1.0 / x[0];
        return h;
      },
      [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(2, 1); });
  try {
    qgs::cost(sys, vec1(0.0));
    FAIL("expected EvaluationError");
  } catch (const qgs::EvaluationError& e) {
    CHECK(e.component == 1);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("field is minus the gradient") {
  ConstraintSystem sys = shifted_identity(vec2(1.0, -2.0));
  Eigen::VectorXd f0 = qgs::field(sys, vec2(0.0, 0.0));
  CHECK(f0[0] == doctest::Approx(1.0));
  CHECK(f0[1] == doctest::Approx(-2.0));
  CHECK(qgs::field(sys, vec2(1.0, -2.0)).norm() == doctest::Approx(0.0));

  ConstraintSystem sq = system_from(
      1, 1,
      [](const Eigen::VectorXd& x) { return vec1(x[0] * x[0]); },
      [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd J(1, 1);
        J << 2.0 * x[0];
        return J;
      });
  CHECK(qgs::field(sq, vec1(1.0))[0] == doctest::Approx(-2.0));
}

TEST_CASE("integrate_forward reaches the feasible point of a linear flow") {
  ConstraintSystem sys = shifted_identity(Eigen::VectorXd::Zero(1));
  QgsSettings s;
  qgs::Equilibrium eq = qgs::integrate_forward(sys, vec1(5.0), s);
  CHECK(std::abs(eq.point[0]) < 1e-6);
  CHECK(eq.cost < 1e-12);
  CHECK(eq.grad_norm < s.grad_tol);
  CHECK(eq.stability == qgs::Stability::stable);
}

TEST_CASE("integrate_forward solves the circle-line intersection") {
  QgsSettings s;
  qgs::Equilibrium eq = qgs::integrate_forward(circle_line(), vec2(1.0, 0.0), s);
  const double r = std::sqrt(2.0) / 2.0;
  CHECK(std::abs(std::abs(eq.point[0]) - r) < 1e-4);
  CHECK(std::abs(std::abs(eq.point[1]) - r) < 1e-4);
  CHECK(eq.point[0] * eq.point[1] > 0);  // same sign: on the line x1 = x2
  CHECK(eq.cost < 1e-10);
}

TEST_CASE("integrate_forward finds the least-squares balance of an infeasible pair") {
  // Stationary points of f = 0.5 (x^4 + (x-1)^2) solve 2x^3 + x - 1 = 0.
  const double root =
      bisect_root([](double x) { return 2.0 * x * x * x + x - 1.0; }, 0.0, 1.0);
  CHECK(root == doctest::Approx(0.5898).epsilon(1e-3));

  QgsSettings s;
  qgs::Equilibrium eq = qgs::integrate_forward(infeasible_pair(), vec1(0.0), s);
  CHECK(std::abs(eq.point[0] - root) < 1e-6);
  CHECK(eq.cost > 0.1);
  CHECK(eq.stability == qgs::Stability::stable);
}

TEST_CASE("integrate_forward reports NoConvergence with the best point") {
  ConstraintSystem sys = shifted_identity(Eigen::VectorXd::Zero(1));
  QgsSettings s;
  s.max_time = 1e-6;  // far too short to converge from a distant start
  try {
    qgs::integrate_forward(sys, vec1(100.0), s);
    FAIL("expected NoConvergence");
  } catch (const qgs::NoConvergence& e) {
    CHECK(e.best.point.size() == 1);
    CHECK(e.best.grad_norm <= 100.0 + 1e-9);
  }
}

TEST_CASE("escape pushes candidates beyond the perturbation radius") {
  ConstraintSystem sys = shifted_identity(Eigen::VectorXd::Zero(1));
  QgsSettings s;
  s.escape_eps = 0.1;
  qgs::Equilibrium eq = qgs::integrate_forward(sys, vec1(2.0), s);
  Rng rng(1);
  auto candidates = qgs::escape(sys, eq, s, rng);
  REQUIRE(!candidates.empty());
  for (const auto& c : candidates) CHECK(std::abs(c[0]) > 0.1);
}

TEST_CASE("escape from one well reaches the other side of a double well") {
  ConstraintSystem sys = double_well();
  QgsSettings s;  // escape_eps = 0.5
  qgs::Equilibrium eq = qgs::integrate_forward(sys, vec1(0.8), s);
  REQUIRE(eq.point[0] == doctest::Approx(1.0).epsilon(1e-4));
  Rng rng(3);
  auto candidates = qgs::escape(sys, eq, s, rng);
  REQUIRE(!candidates.empty());
  bool crossed = false;
  for (const auto& c : candidates) crossed = crossed || c[0] < 0.0;
  CHECK(crossed);
}

TEST_CASE("escape with zero eps is a documented no-op") {
  ConstraintSystem sys = shifted_identity(Eigen::VectorXd::Zero(1));
  QgsSettings s;
  s.escape_eps = 0.0;
  qgs::Equilibrium eq = qgs::integrate_forward(sys, vec1(1.0), s);
  Rng rng(9);
  auto candidates = qgs::escape(sys, eq, s, rng);
  for (const auto& c : candidates)
    CHECK(std::abs(c[0] - eq.point[0]) < 1e-5);
}

TEST_CASE("enumerate_minima finds the unique minimum of a linear system") {
  ConstraintSystem sys = shifted_identity(Eigen::VectorXd::Zero(1));
  QgsSettings s;
  s.target_minima = 1;
  qgs::MinimaSet set = qgs::enumerate_minima(sys, vec1(4.0), s);
  REQUIRE(set.items.size() == 1);
  CHECK(std::abs(set.items[0].point[0]) < 1e-6);
  CHECK(set.attempts_used >= 1);
}

TEST_CASE("enumerate_minima discovers both wells") {
  // Oracle: dense grid descent of f(x) = (x^2-1)^2/4 over [-3, 3] finds
  // exactly two local minima, at -1 and +1.
  std::vector<double> oracle_minima;
  {
    auto f = [](double x) {
      const double d = x * x - 1.0;
      return 0.25 * d * d;
    };
    const int n = 6001;
    const double lo = -3.0, hi = 3.0, step = (hi - lo) / (n - 1);
    for (int i = 1; i + 1 < n; ++i) {
      const double x = lo + i * step;
      if (f(x) < f(x - step) && f(x) < f(x + step))
        oracle_minima.push_back(x);
    }
  }
  REQUIRE(oracle_minima.size() == 2);
  CHECK(oracle_minima[0] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(oracle_minima[1] == doctest::Approx(1.0).epsilon(1e-3));

  ConstraintSystem sys = double_well();
  QgsSettings s;
  s.target_minima = 2;
  s.seed = 17;
  qgs::MinimaSet set = qgs::enumerate_minima(sys, vec1(0.3), s);
  REQUIRE(set.items.size() == 2);
  std::vector<double> found = {set.items[0].point[0], set.items[1].point[0]};
  std::sort(found.begin(), found.end());
  CHECK(found[0] == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(found[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("enumerate_minima finds both circle-line intersections") {
  QgsSettings s;
  s.target_minima = 2;
  s.seed = 5;
  qgs::MinimaSet set = qgs::enumerate_minima(circle_line(), vec2(1.0, 0.0), s);
  REQUIRE(set.items.size() == 2);
  const double r = std::sqrt(2.0) / 2.0;
  std::vector<double> xs = {set.items[0].point[0], set.items[1].point[0]};
  std::sort(xs.begin(), xs.end());
  CHECK(xs[0] == doctest::Approx(-r).epsilon(1e-4));
  CHECK(xs[1] == doctest::Approx(r).epsilon(1e-4));
}

TEST_CASE("property: field matches finite differences of cost") {
  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const int m = 1 + static_cast<int>(rng.below(4));
    Eigen::MatrixXd A(m, n);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
      b[i] = rng.normal();
      for (int j = 0; j < n; ++j) A(i, j) = rng.normal();
    }
    // h_k(x) = tanh(a_k . x) + b_k with analytic Jacobian rows.
    ConstraintSystem sys = system_from(
        n, m,
        [A, b, m](const Eigen::VectorXd& x) {
          Eigen::VectorXd h = (A * x).array().tanh();
          return Eigen::VectorXd(h + b);
        },
        [A, m, n](const Eigen::VectorXd& x) {
          Eigen::VectorXd t = (A * x).array().tanh();
          Eigen::MatrixXd J(m, n);
          for (int i = 0; i < m; ++i) J.row(i) = (1.0 - t[i] * t[i]) * A.row(i);
          return J;
        });

    const Eigen::VectorXd x = rng.normal_vector(n);
    const Eigen::VectorXd f = qgs::field(sys, x);
    Eigen::VectorXd fd(n);
    Eigen::VectorXd xp = x, xm = x;
    for (int j = 0; j < n; ++j) {
      const double eps = 1e-6 * (1.0 + std::abs(x[j]));
      xp[j] = x[j] + eps;
      xm[j] = x[j] - eps;
      fd[j] = -(qgs::cost(sys, xp) - qgs::cost(sys, xm)) / (2.0 * eps);
      xp[j] = x[j];
      xm[j] = x[j];
    }
    const double scale = std::max(1.0, fd.norm());
    CHECK((f - fd).norm() / scale < 1e-5);
  }
}

TEST_CASE("property: cost is non-increasing along accepted steps") {
  QgsSettings s;
  for (auto [sys, start] : {std::pair{circle_line(), vec2(1.7, -0.4)},
                            std::pair{infeasible_pair(), vec1(2.0)}}) {
    double prev = qgs::cost(sys, start);
    qgs::integrate_forward(sys, start, s,
                           [&](double, const Eigen::VectorXd& x) {
                             const double c = qgs::cost(sys, x);
                             CHECK(c <= prev + 10.0 * s.abs_tol);
                             prev = c;
                           });
  }
}

TEST_CASE("property: near-zero cost implies a feasible point") {
  QgsSettings s;
  qgs::Equilibrium eq = qgs::integrate_forward(circle_line(), vec2(0.9, 0.2), s);
  if (eq.cost < s.grad_tol * s.grad_tol) {
    const Eigen::VectorXd h = circle_line().residual(eq.point);
    CHECK(h.cwiseAbs().maxCoeff() < std::sqrt(2.0) * s.grad_tol);
  }
}

TEST_CASE("property: enumeration is deterministic at the serialization layer") {
  QgsSettings s;
  s.target_minima = 2;
  s.seed = 99;
  auto run = [&] {
    qgs::MinimaSet set = qgs::enumerate_minima(double_well(), vec1(0.4), s);
    return serialize::to_json(set, s).dump();
  };
  CHECK(run() == run());
}

TEST_CASE("property: pairwise distances respect the dedup threshold") {
  QgsSettings s;
  s.target_minima = 4;
  s.max_attempts = 12;
  s.seed = 31;
  qgs::MinimaSet set = qgs::enumerate_minima(double_well(), vec1(0.25), s);
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    for (std::size_t j = i + 1; j < set.items.size(); ++j) {
      CHECK((set.items[i].point - set.items[j].point).norm() >= s.dedup_dist);
    }
    if (i + 1 < set.items.size())
      CHECK(set.items[i].cost <= set.items[i + 1].cost);
  }
}

TEST_CASE("property: slacks certify feasibility of interior points") {
  Rng rng(808);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 1 + static_cast<int>(rng.below(3));
    Eigen::VectorXd y0 = rng.normal_vector(dim);
    // Inequalities y_i - (y0_i + margin_i) < 0 are strictly satisfied at y0.
    Eigen::VectorXd margin(dim);
    for (int i = 0; i < dim; ++i) margin[i] = 0.5 + rng.uniform();
    Eigen::VectorXd ub = y0 + margin;
    ResidualMap ineq{dim, dim,
                     [ub](const Eigen::VectorXd& y) {
                       return Eigen::VectorXd(y - ub);
                     },
                     nullptr};
    ConstraintSystem sys = qgs::add_slack(ineq, {});
    Eigen::VectorXd x(2 * dim);
    x.head(dim) = y0;
    for (int i = 0; i < dim; ++i) x[dim + i] = std::sqrt(margin[i]);
    CHECK(qgs::cost(sys, x) < 1e-18);
  }
}
