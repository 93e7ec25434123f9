#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qgsnet/network.hpp"
#include "qgsnet/qgs.hpp"

namespace qgsnet::training {

struct TrainConfig {
  double init_sigma = 0.5;         // stddev of the normal initializer
  double bound = 10.0;             // |x_i| <= bound for every parameter
  int target_minima = 15;
  double validation_fraction = 0.2;
  // When positive, the equilibrium threshold becomes
  // max(grad_tol, grad_tol_fraction * ||grad f(x0)||), which keeps the
  // stopping rule attainable across dataset scales. Zero uses the
  // absolute grad_tol from the solver settings unchanged.
  double grad_tol_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::uint64_t digest() const;
};

/// Genetic-algorithm baseline. Roulette selection on scaled fitness,
/// scattered (uniform-mask) crossover and a Gaussian mutation whose scale
/// shrinks linearly over the generations. The reference configuration uses
/// a population of 10000; the default here is scaled down to desk size.
struct GaConfig {
  int population_size = 200;
  int generations = 120;
  int elitism = 4;
  double mutation_sigma = 0.3;
  double bound = 10.0;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  std::uint64_t digest() const;
};

/// Plain batch gradient descent with momentum on half the SSE.
struct EbpConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 500;
  double bound = 10.0;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  std::uint64_t digest() const;
};

struct Provenance {
  std::string method;  // "qgs" | "ga" | "ebp"
  std::uint64_t config_digest = 0;
  std::uint64_t seed = 0;
  int minima_count = 0;
};

struct TrainedModel {
  network::Parameters parameters;
  network::NetworkShape shape;
  double selected_minimum_cost = 0.0;
  double validation_accuracy = 0.0;
  Provenance provenance;
};

struct DegenerateSplit : std::runtime_error {
  explicit DegenerateSplit(std::string msg) : std::runtime_error(std::move(msg)) {}
};

struct Diverged : std::runtime_error {
  explicit Diverged(std::string msg) : std::runtime_error(std::move(msg)) {}
};

/// Assembles the training constraint system: the network residuals as
/// equalities plus two bound inequalities per parameter, each with its own
/// squared slack. Layout: x = (theta, slacks), h = (network rows, bound
/// rows). The fused gradient path never forms the full Jacobian.
qgs::ConstraintSystem build_training_system(
    const network::NetworkShape& shape,
    std::span<const network::SequenceSample> samples,
    const network::StatePolicy& policy, const TrainConfig& config);

/// Trains by enumerating minima of the training system and picking the one
/// with the best accuracy on a stratified validation slice (ties broken by
/// lower cost, then discovery order). The constraints cover the full
/// training set; the validation slice is used only to rank minima.
std::pair<TrainedModel, qgs::MinimaSet> train_qgs(
    std::span<const network::SequenceSample> samples,
    const network::NetworkShape& shape, const TrainConfig& config,
    const qgs::QgsSettings& settings,
    const network::StatePolicy& policy = {},
    qgs::QgsSettings* effective_settings = nullptr);

TrainedModel train_ebp(std::span<const network::SequenceSample> samples,
                       const network::NetworkShape& shape,
                       const EbpConfig& config,
                       const network::StatePolicy& policy = {});

/// `initial_population` (optional) seeds the first generation; remaining
/// slots are filled with normal draws. `best_sse_history` (optional)
/// receives the elite sse after every generation.
TrainedModel train_ga(std::span<const network::SequenceSample> samples,
                      const network::NetworkShape& shape,
                      const GaConfig& config,
                      const network::StatePolicy& policy = {},
                      std::span<const Eigen::VectorXd> initial_population = {},
                      std::vector<double>* best_sse_history = nullptr);

/// argmax class index of each sample's final-step output.
std::vector<int> predict_labels(const network::Parameters& params,
                                std::span<const network::SequenceSample> samples,
                                const network::StatePolicy& policy);

/// Stratified validation indices: roughly `fraction` of each class,
/// at least one sample per class. Throws DegenerateSplit when a class
/// cannot be represented.
std::vector<int> validation_indices(
    std::span<const network::SequenceSample> samples, double fraction,
    std::uint64_t seed);

double accuracy_on(const network::Parameters& params,
                   std::span<const network::SequenceSample> samples,
                   std::span<const int> indices,
                   const network::StatePolicy& policy);

}  // namespace qgsnet::training
