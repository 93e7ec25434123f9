#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace qgsnet::network {

struct NetworkShape {
  int n = 1;       // inputs
  int hidden = 1;  // hidden nodes
  int q = 1;       // outputs

  int param_count() const { return hidden * n + q * hidden + hidden; }
  void validate() const;
  bool operator==(const NetworkShape&) const = default;
};

/// Weights of the three-layer partially recurrent network: input weights W
/// (hidden x n), output weights V (q x hidden) and the diagonal self
/// recurrence p (hidden).
struct Parameters {
  Eigen::MatrixXd W;
  Eigen::MatrixXd V;
  Eigen::VectorXd p;

  NetworkShape shape() const {
    return {static_cast<int>(W.cols()), static_cast<int>(W.rows()),
            static_cast<int>(V.rows())};
  }
  static Parameters zeros(const NetworkShape& s);
};

/// One labelled sequence: inputs u(1..K) and the target applied at the
/// final step. Classification datasets use single-step sequences.
struct SequenceSample {
  std::vector<Eigen::VectorXd> inputs;
  Eigen::VectorXd target;
  std::string id;
};

enum class StateMode { reset_per_sample, chained };

struct StatePolicy {
  StateMode mode = StateMode::reset_per_sample;
  Eigen::VectorXd z0;  // empty means the zero vector

  Eigen::VectorXd initial_state(int hidden) const;
};

/// Hidden-layer activation.
double activation(double x);

/// One time step: z = tanh(W u + p .* z_prev), y = V z.
std::pair<Eigen::VectorXd, Eigen::VectorXd> step(const Parameters& params,
                                                 const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& z_prev);

/// Sum of squared errors between final-step outputs and targets.
double sse(const Parameters& params, std::span<const SequenceSample> samples,
           const StatePolicy& policy);

/// Stacked residuals y_hat(i) - y(i), q components per sample in sample
/// order. 0.5 * ||residuals||^2 == 0.5 * sse.
Eigen::VectorXd residuals(const Parameters& params,
                          std::span<const SequenceSample> samples,
                          const StatePolicy& policy);

/// Analytic Jacobian of the stacked residuals with respect to the
/// flattened parameter vector, including the recurrent state sensitivity
/// (which carries across samples in chained mode).
Eigen::MatrixXd residual_jacobian(const Parameters& params,
                                  std::span<const SequenceSample> samples,
                                  const StatePolicy& policy);

/// Residuals and the fused J^T r in one pass, without forming the full
/// Jacobian. This is the training hot path.
void residuals_and_gradient(const Parameters& params,
                            std::span<const SequenceSample> samples,
                            const StatePolicy& policy,
                            Eigen::VectorXd* residuals_out,
                            Eigen::VectorXd* gradient_out);

/// Flatten order: columns of V, then rows of W, then p.
Eigen::VectorXd flatten(const Parameters& params);
Parameters unflatten(const Eigen::VectorXd& x, const NetworkShape& shape);

/// Network outputs for a batch of single-step inputs (columns of U).
Eigen::MatrixXd forward_batch(const Parameters& params,
                              const Eigen::MatrixXd& U,
                              const StatePolicy& policy);

}  // namespace qgsnet::network
