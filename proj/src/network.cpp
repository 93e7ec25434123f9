#include "qgsnet/network.hpp"

#include <cmath>
#include <stdexcept>

namespace qgsnet::network {

namespace {

struct ParamLayout {
  int q, m, n;
  explicit ParamLayout(const NetworkShape& s) : q(s.q), m(s.hidden), n(s.n) {}
  int v_index(int row, int col) const { return col * q + row; }
  int w_index(int row, int col) const { return q * m + row * n + col; }
  int p_index(int j) const { return q * m + m * n + j; }
};

void check_sample(const SequenceSample& sample, const NetworkShape& shape) {
  if (sample.inputs.empty())
    throw std::invalid_argument("sample '" + sample.id + "' has no input steps");
  for (const auto& u : sample.inputs) {
    if (u.size() != shape.n)
      throw std::invalid_argument("sample '" + sample.id +
                                  "' input dimension mismatch");
  }
  if (sample.target.size() != shape.q)
    throw std::invalid_argument("sample '" + sample.id +
                                "' target dimension mismatch");
}

bool all_single_step(std::span<const SequenceSample> samples) {
  for (const auto& s : samples) {
    if (s.inputs.size() != 1) return false;
  }
  return true;
}

}  // namespace

void NetworkShape::validate() const {
  if (n < 1 || hidden < 1 || q < 1)
    throw std::invalid_argument("network shape dimensions must be >= 1");
}

Parameters Parameters::zeros(const NetworkShape& s) {
  s.validate();
  return {Eigen::MatrixXd::Zero(s.hidden, s.n),
          Eigen::MatrixXd::Zero(s.q, s.hidden),
          Eigen::VectorXd::Zero(s.hidden)};
}

Eigen::VectorXd StatePolicy::initial_state(int hidden) const {
  if (z0.size() == 0) return Eigen::VectorXd::Zero(hidden);
  if (z0.size() != hidden)
    throw std::invalid_argument("state policy z0 dimension mismatch");
  return z0;
}

double activation(double x) { return std::tanh(x); }

std::pair<Eigen::VectorXd, Eigen::VectorXd> step(const Parameters& params,
                                                 const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& z_prev) {
  const NetworkShape shape = params.shape();
  if (u.size() != shape.n || z_prev.size() != shape.hidden ||
      params.p.size() != shape.hidden)
    throw std::invalid_argument("step: dimension mismatch");
  Eigen::VectorXd z =
      (params.W * u + params.p.cwiseProduct(z_prev)).array().tanh();
  Eigen::VectorXd y = params.V * z;
  return {std::move(z), std::move(y)};
}

double sse(const Parameters& params, std::span<const SequenceSample> samples,
           const StatePolicy& policy) {
  const Eigen::VectorXd r = residuals(params, samples, policy);
  return r.squaredNorm();
}

Eigen::VectorXd residuals(const Parameters& params,
                          std::span<const SequenceSample> samples,
                          const StatePolicy& policy) {
  const NetworkShape shape = params.shape();
  Eigen::VectorXd out(shape.q * static_cast<int>(samples.size()));
  Eigen::VectorXd z = policy.initial_state(shape.hidden);
  int row = 0;
  for (const auto& sample : samples) {
    check_sample(sample, shape);
    if (policy.mode == StateMode::reset_per_sample)
      z = policy.initial_state(shape.hidden);
    Eigen::VectorXd y;
    for (const auto& u : sample.inputs) {
      auto [z_next, y_next] = step(params, u, z);
      z = std::move(z_next);
      y = std::move(y_next);
    }
    out.segment(row, shape.q) = y - sample.target;
    row += shape.q;
  }
  return out;
}

Eigen::MatrixXd residual_jacobian(const Parameters& params,
                                  std::span<const SequenceSample> samples,
                                  const StatePolicy& policy) {
  const NetworkShape shape = params.shape();
  const ParamLayout idx(shape);
  const int np = shape.param_count();
  const int m = shape.hidden;

  Eigen::MatrixXd J =
      Eigen::MatrixXd::Zero(shape.q * static_cast<int>(samples.size()), np);
  Eigen::VectorXd z = policy.initial_state(m);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, np);  // dz/dx
  int row = 0;

  for (const auto& sample : samples) {
    check_sample(sample, shape);
    if (policy.mode == StateMode::reset_per_sample) {
      z = policy.initial_state(m);
      S.setZero();
    }
    for (const auto& u : sample.inputs) {
      Eigen::VectorXd z_prev = z;
      Eigen::VectorXd a = params.W * u + params.p.cwiseProduct(z_prev);
      z = a.array().tanh();

      // T = d(pre-activation)/dx, then S = diag(1 - z^2) T.
      Eigen::MatrixXd T = params.p.asDiagonal() * S;
      for (int j = 0; j < m; ++j) {
        for (int c = 0; c < shape.n; ++c) T(j, idx.w_index(j, c)) += u[c];
        T(j, idx.p_index(j)) += z_prev[j];
      }
      S = (1.0 - z.array().square()).matrix().asDiagonal() * T;
    }
    // Output block: d(V z - y)/dx = V S plus the direct V derivative.
    J.block(row, 0, shape.q, np) = params.V * S;
    for (int i = 0; i < m; ++i) {
      for (int r = 0; r < shape.q; ++r) J(row + r, idx.v_index(r, i)) += z[i];
    }
    row += shape.q;
  }
  return J;
}

void residuals_and_gradient(const Parameters& params,
                            std::span<const SequenceSample> samples,
                            const StatePolicy& policy,
                            Eigen::VectorXd* residuals_out,
                            Eigen::VectorXd* gradient_out) {
  const NetworkShape shape = params.shape();
  const ParamLayout idx(shape);
  const int np = shape.param_count();
  const int m = shape.hidden;
  const int q = shape.q;
  const int N = static_cast<int>(samples.size());

  if (policy.mode == StateMode::reset_per_sample && all_single_step(samples)) {
    // Batched path: one GEMM per term instead of a per-sample loop.
    Eigen::MatrixXd U(shape.n, N);
    Eigen::MatrixXd Y(q, N);
    for (int i = 0; i < N; ++i) {
      check_sample(samples[i], shape);
      U.col(i) = samples[i].inputs[0];
      Y.col(i) = samples[i].target;
    }
    const Eigen::VectorXd z0 = policy.initial_state(m);
    Eigen::MatrixXd Z = (params.W * U).colwise() + params.p.cwiseProduct(z0);
    Z = Z.array().tanh();
    Eigen::MatrixXd E = params.V * Z - Y;

    if (residuals_out) {
      residuals_out->resize(q * N);
      Eigen::Map<Eigen::MatrixXd>(residuals_out->data(), q, N) = E;
    }
    if (gradient_out) {
      gradient_out->resize(np);
      Eigen::MatrixXd GV = E * Z.transpose();
      Eigen::MatrixXd D =
          (params.V.transpose() * E).array() * (1.0 - Z.array().square());
      Eigen::MatrixXd GW = D * U.transpose();
      Eigen::VectorXd Gp = z0.cwiseProduct(D.rowwise().sum());
      Eigen::Map<Eigen::MatrixXd>(gradient_out->data(), q, m) = GV;
      for (int j = 0; j < m; ++j)
        gradient_out->segment(q * m + j * shape.n, shape.n) = GW.row(j);
      gradient_out->segment(q * m + m * shape.n, m) = Gp;
    }
    return;
  }

  // Generic path: forward sensitivity recursion, accumulating J^T r on the
  // fly so the full Jacobian is never formed.
  if (residuals_out) residuals_out->resize(q * N);
  if (gradient_out) gradient_out->setZero(np);

  Eigen::VectorXd z = policy.initial_state(m);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, np);
  int row = 0;
  for (const auto& sample : samples) {
    check_sample(sample, shape);
    if (policy.mode == StateMode::reset_per_sample) {
      z = policy.initial_state(m);
      S.setZero();
    }
    for (const auto& u : sample.inputs) {
      Eigen::VectorXd z_prev = z;
      Eigen::VectorXd a = params.W * u + params.p.cwiseProduct(z_prev);
      z = a.array().tanh();
      Eigen::MatrixXd T = params.p.asDiagonal() * S;
      for (int j = 0; j < m; ++j) {
        for (int c = 0; c < shape.n; ++c) T(j, idx.w_index(j, c)) += u[c];
        T(j, idx.p_index(j)) += z_prev[j];
      }
      S = (1.0 - z.array().square()).matrix().asDiagonal() * T;
    }
    Eigen::VectorXd e = params.V * z - sample.target;
    if (residuals_out) residuals_out->segment(row, q) = e;
    if (gradient_out) {
      gradient_out->noalias() += S.transpose() * (params.V.transpose() * e);
      for (int i = 0; i < m; ++i) {
        for (int r = 0; r < q; ++r)
          (*gradient_out)[idx.v_index(r, i)] += e[r] * z[i];
      }
    }
    row += q;
  }
}

Eigen::VectorXd flatten(const Parameters& params) {
  const NetworkShape shape = params.shape();
  Eigen::VectorXd x(shape.param_count());
  Eigen::Map<Eigen::MatrixXd>(x.data(), shape.q, shape.hidden) = params.V;
  for (int j = 0; j < shape.hidden; ++j)
    x.segment(shape.q * shape.hidden + j * shape.n, shape.n) = params.W.row(j);
  x.segment(shape.q * shape.hidden + shape.hidden * shape.n, shape.hidden) =
      params.p;
  return x;
}

Parameters unflatten(const Eigen::VectorXd& x, const NetworkShape& shape) {
  shape.validate();
  if (x.size() != shape.param_count())
    throw std::invalid_argument("unflatten: parameter vector length mismatch");
  Parameters p;
  p.V = Eigen::Map<const Eigen::MatrixXd>(x.data(), shape.q, shape.hidden);
  p.W.resize(shape.hidden, shape.n);
  for (int j = 0; j < shape.hidden; ++j)
    p.W.row(j) =
        x.segment(shape.q * shape.hidden + j * shape.n, shape.n).transpose();
  p.p = x.segment(shape.q * shape.hidden + shape.hidden * shape.n, shape.hidden);
  return p;
}

Eigen::MatrixXd forward_batch(const Parameters& params,
                              const Eigen::MatrixXd& U,
                              const StatePolicy& policy) {
  const NetworkShape shape = params.shape();
  if (U.rows() != shape.n)
    throw std::invalid_argument("forward_batch: input dimension mismatch");
  const Eigen::VectorXd z0 = policy.initial_state(shape.hidden);
  Eigen::MatrixXd Z =
      ((params.W * U).colwise() + params.p.cwiseProduct(z0)).array().tanh();
  return params.V * Z;
}

}  // namespace qgsnet::network
