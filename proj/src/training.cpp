#include "qgsnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "qgsnet/digest.hpp"
#include "qgsnet/rng.hpp"

namespace qgsnet::training {

namespace {

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

int class_of(const network::SequenceSample& s) { return argmax(s.target); }

std::map<int, std::vector<int>> by_class(
    std::span<const network::SequenceSample> samples) {
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i)
    groups[class_of(samples[i])].push_back(i);
  return groups;
}

std::uint64_t digest_fields(const std::string& tag,
                            std::initializer_list<double> vals) {
  std::ostringstream os;
  os << tag;
  os.precision(17);
  for (double v : vals) os << ';' << v;
  return fnv1a64(os.str());
}

Eigen::VectorXd clamp_abs(Eigen::VectorXd x, double bound) {
  return x.cwiseMax(-bound).cwiseMin(bound);
}

struct TrainingData {
  network::NetworkShape shape;
  std::vector<network::SequenceSample> samples;
  network::StatePolicy policy;
  double bound;
  int np;
};

}  // namespace

void TrainConfig::validate() const {
  if (!(init_sigma > 0)) throw std::invalid_argument("init_sigma must be positive");
  if (!(bound > 0)) throw std::invalid_argument("bound must be positive");
  if (target_minima < 1) throw std::invalid_argument("target_minima must be >= 1");
  if (!(validation_fraction > 0) || !(validation_fraction < 1))
    throw std::invalid_argument("validation_fraction must be in (0, 1)");
  if (grad_tol_fraction < 0)
    throw std::invalid_argument("grad_tol_fraction must be >= 0");
}

std::uint64_t TrainConfig::digest() const {
  return digest_fields("train", {init_sigma, bound, double(target_minima),
                                 validation_fraction, grad_tol_fraction,
                                 double(seed)});
}

void GaConfig::validate() const {
  if (population_size < 4) throw std::invalid_argument("population_size must be >= 4");
  if (generations < 1) throw std::invalid_argument("generations must be >= 1");
  if (elitism < 0 || elitism >= population_size)
    throw std::invalid_argument("elitism must be in [0, population_size)");
  if (mutation_sigma < 0) throw std::invalid_argument("mutation_sigma must be >= 0");
  if (!(bound > 0)) throw std::invalid_argument("bound must be positive");
}

std::uint64_t GaConfig::digest() const {
  return digest_fields("ga", {double(population_size), double(generations),
                              double(elitism), mutation_sigma, bound,
                              validation_fraction, double(seed)});
}

void EbpConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (momentum < 0 || momentum >= 1)
    throw std::invalid_argument("momentum must be in [0, 1)");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(bound > 0)) throw std::invalid_argument("bound must be positive");
}

std::uint64_t EbpConfig::digest() const {
  return digest_fields("ebp", {learning_rate, momentum, double(epochs), bound,
                               validation_fraction, double(seed)});
}

std::vector<int> validation_indices(
    std::span<const network::SequenceSample> samples, double fraction,
    std::uint64_t seed) {
  auto groups = by_class(samples);
  std::vector<int> val;
  for (auto& [cls, members] : groups) {
    // Deterministic per-class shuffle.
    Rng rng = Rng::stream(seed, 0xa11 + static_cast<std::uint64_t>(cls));
    for (int i = static_cast<int>(members.size()) - 1; i > 0; --i)
      std::swap(members[i], members[rng.below(i + 1)]);
    const int n = static_cast<int>(members.size());
    int k = static_cast<int>(std::lround(fraction * n));
    k = std::clamp(k, 1, n);
    val.insert(val.end(), members.begin(), members.begin() + k);
  }
  std::sort(val.begin(), val.end());
  for (const auto& [cls, members] : groups) {
    const bool present = std::any_of(val.begin(), val.end(), [&](int i) {
      return class_of(samples[i]) == cls;
    });
    if (!present)
      throw DegenerateSplit("validation split lacks class " + std::to_string(cls));
  }
  return val;
}

std::vector<int> predict_labels(const network::Parameters& params,
                                std::span<const network::SequenceSample> samples,
                                const network::StatePolicy& policy) {
  std::vector<int> out;
  out.reserve(samples.size());
  const int m = params.shape().hidden;
  Eigen::VectorXd z = policy.initial_state(m);
  for (const auto& sample : samples) {
    if (policy.mode == network::StateMode::reset_per_sample)
      z = policy.initial_state(m);
    Eigen::VectorXd y;
    for (const auto& u : sample.inputs) {
      auto [zn, yn] = network::step(params, u, z);
      z = std::move(zn);
      y = std::move(yn);
    }
    out.push_back(argmax(y));
  }
  return out;
}

double accuracy_on(const network::Parameters& params,
                   std::span<const network::SequenceSample> samples,
                   std::span<const int> indices,
                   const network::StatePolicy& policy) {
  if (indices.empty()) return 0.0;
  // Chained mode needs the full pass in dataset order for correct state.
  std::vector<int> labels = predict_labels(params, samples, policy);
  int correct = 0;
  for (int i : indices) {
    if (labels[i] == class_of(samples[i])) ++correct;
  }
  return double(correct) / double(indices.size());
}

qgs::ConstraintSystem build_training_system(
    const network::NetworkShape& shape,
    std::span<const network::SequenceSample> samples,
    const network::StatePolicy& policy, const TrainConfig& config) {
  shape.validate();
  config.validate();
  if (samples.empty())
    throw std::invalid_argument("build_training_system: no samples");

  auto data = std::make_shared<TrainingData>();
  data->shape = shape;
  data->samples.assign(samples.begin(), samples.end());
  data->policy = policy;
  data->bound = config.bound;
  data->np = shape.param_count();
  for (const auto& s : data->samples) {
    for (const auto& u : s.inputs)
      if (!u.allFinite())
        throw std::invalid_argument("sample '" + s.id + "' has non-finite inputs");
    if (!s.target.allFinite())
      throw std::invalid_argument("sample '" + s.id + "' has non-finite target");
  }

  const int np = data->np;
  const int net_rows = shape.q * static_cast<int>(samples.size());
  qgs::ConstraintSystem sys;
  sys.dim_x = np + 2 * np;
  sys.dim_h = net_rows + 2 * np;

  sys.residual = [data, net_rows, np](const Eigen::VectorXd& x) {
    Eigen::VectorXd h(net_rows + 2 * np);
    const network::Parameters params =
        network::unflatten(x.head(np), data->shape);
    h.head(net_rows) = network::residuals(params, data->samples, data->policy);
    for (int i = 0; i < np; ++i) {
      const double shi = x[np + 2 * i];
      const double slo = x[np + 2 * i + 1];
      h[net_rows + 2 * i] = x[i] - data->bound + shi * shi;
      h[net_rows + 2 * i + 1] = -x[i] - data->bound + slo * slo;
    }
    return h;
  };

  sys.jacobian = [data, net_rows, np](const Eigen::VectorXd& x) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(net_rows + 2 * np, 3 * np);
    const network::Parameters params =
        network::unflatten(x.head(np), data->shape);
    J.topLeftCorner(net_rows, np) =
        network::residual_jacobian(params, data->samples, data->policy);
    for (int i = 0; i < np; ++i) {
      J(net_rows + 2 * i, i) = 1.0;
      J(net_rows + 2 * i, np + 2 * i) = 2.0 * x[np + 2 * i];
      J(net_rows + 2 * i + 1, i) = -1.0;
      J(net_rows + 2 * i + 1, np + 2 * i + 1) = 2.0 * x[np + 2 * i + 1];
    }
    return J;
  };

  sys.gradient = [data, np](const Eigen::VectorXd& x) {
    const network::Parameters params =
        network::unflatten(x.head(np), data->shape);
    Eigen::VectorXd g_net;
    network::residuals_and_gradient(params, data->samples, data->policy,
                                    nullptr, &g_net);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * np);
    g.head(np) = g_net;
    for (int i = 0; i < np; ++i) {
      const double shi = x[np + 2 * i];
      const double slo = x[np + 2 * i + 1];
      const double hhi = x[i] - data->bound + shi * shi;
      const double hlo = -x[i] - data->bound + slo * slo;
      g[i] += hhi - hlo;
      g[np + 2 * i] = 2.0 * shi * hhi;
      g[np + 2 * i + 1] = 2.0 * slo * hlo;
    }
    return g;
  };

  for (int i = 0; i < 2 * np; ++i) sys.slack_map.emplace_back(i, np + i);
  return sys;
}

std::pair<TrainedModel, qgs::MinimaSet> train_qgs(
    std::span<const network::SequenceSample> samples,
    const network::NetworkShape& shape, const TrainConfig& config,
    const qgs::QgsSettings& settings, const network::StatePolicy& policy,
    qgs::QgsSettings* effective_settings) {
  config.validate();
  if (by_class(samples).size() < 2)
    throw std::invalid_argument("train_qgs: need at least 2 classes");

  qgs::QgsSettings qs = settings;
  qs.target_minima = config.target_minima;
  qs.seed = config.seed;

  qgs::ConstraintSystem sys =
      build_training_system(shape, samples, policy, config);
  const int np = shape.param_count();

  Rng init_rng = Rng::stream(config.seed, 0x1417);
  Eigen::VectorXd x0(sys.dim_x);
  x0.head(np) = init_rng.normal_vector(np, config.init_sigma);
  x0.tail(2 * np).setConstant(std::sqrt(config.bound));

  if (config.grad_tol_fraction > 0) {
    qs.grad_tol = std::max(qs.grad_tol,
                           config.grad_tol_fraction * qgs::field(sys, x0).norm());
  }
  if (effective_settings) *effective_settings = qs;

  qgs::MinimaSet minima = qgs::enumerate_minima(sys, x0, qs);

  const std::vector<int> val_idx =
      validation_indices(samples, config.validation_fraction, config.seed);

  int best = -1;
  double best_acc = -1.0;
  std::vector<double> accs(minima.items.size());
  for (std::size_t i = 0; i < minima.items.size(); ++i) {
    const network::Parameters params = network::unflatten(
        clamp_abs(minima.items[i].point.head(np), config.bound), shape);
    accs[i] = accuracy_on(params, samples, val_idx, policy);
    // Items come sorted by cost, so strict improvement realizes the
    // accuracy -> cost -> discovery-order tie break.
    if (accs[i] > best_acc) {
      best_acc = accs[i];
      best = static_cast<int>(i);
    }
  }

  TrainedModel model;
  model.shape = shape;
  model.parameters = network::unflatten(
      clamp_abs(minima.items[best].point.head(np), config.bound), shape);
  model.selected_minimum_cost = minima.items[best].cost;
  model.validation_accuracy = best_acc;
  model.provenance = {"qgs", config.digest(), config.seed,
                      static_cast<int>(minima.items.size())};
  return {std::move(model), std::move(minima)};
}

TrainedModel train_ebp(std::span<const network::SequenceSample> samples,
                       const network::NetworkShape& shape,
                       const EbpConfig& config,
                       const network::StatePolicy& policy) {
  config.validate();
  shape.validate();
  if (samples.empty()) throw std::invalid_argument("train_ebp: no samples");

  const int np = shape.param_count();
  Rng init_rng = Rng::stream(config.seed, 0x1417);
  Eigen::VectorXd x = init_rng.normal_vector(np, 0.5);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(np);

  double initial_sse = -1.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const network::Parameters params = network::unflatten(x, shape);
    Eigen::VectorXd r, g;
    network::residuals_and_gradient(params, samples, policy, &r, &g);
    const double current = r.squaredNorm();
    if (initial_sse < 0) initial_sse = current;
    if (current > 1e6 * std::max(initial_sse, 1e-30))
      throw Diverged("sse grew to " + std::to_string(current));
    velocity = config.momentum * velocity - config.learning_rate * g;
    x = clamp_abs(x + velocity, config.bound);
  }

  TrainedModel model;
  model.shape = shape;
  model.parameters = network::unflatten(x, shape);
  {
    Eigen::VectorXd r =
        network::residuals(model.parameters, samples, policy);
    model.selected_minimum_cost = 0.5 * r.squaredNorm();
  }
  const std::vector<int> val_idx =
      validation_indices(samples, config.validation_fraction, config.seed);
  model.validation_accuracy =
      accuracy_on(model.parameters, samples, val_idx, policy);
  model.provenance = {"ebp", config.digest(), config.seed, 0};
  return model;
}

TrainedModel train_ga(std::span<const network::SequenceSample> samples,
                      const network::NetworkShape& shape,
                      const GaConfig& config,
                      const network::StatePolicy& policy,
                      std::span<const Eigen::VectorXd> initial_population,
                      std::vector<double>* best_sse_history) {
  config.validate();
  shape.validate();
  if (samples.empty()) throw std::invalid_argument("train_ga: no samples");

  const int np = shape.param_count();
  const int pop = config.population_size;
  Rng init_rng = Rng::stream(config.seed, 0x6a);

  std::vector<Eigen::VectorXd> population(pop);
  for (int i = 0; i < pop; ++i) {
    if (i < static_cast<int>(initial_population.size())) {
      if (initial_population[i].size() != np)
        throw std::invalid_argument("initial population member has wrong size");
      population[i] = clamp_abs(initial_population[i], config.bound);
    } else {
      population[i] = clamp_abs(init_rng.normal_vector(np, 0.5), config.bound);
    }
  }

  auto sse_of = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r;
    network::residuals_and_gradient(network::unflatten(x, shape), samples,
                                    policy, &r, nullptr);
    return r.squaredNorm();
  };

  std::vector<double> fitness_sse(pop);
  for (int i = 0; i < pop; ++i) fitness_sse[i] = sse_of(population[i]);

  for (int gen = 0; gen < config.generations; ++gen) {
    Rng rng = Rng::stream(config.seed, 0x9e0 + gen);

    std::vector<int> order(pop);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return fitness_sse[a] < fitness_sse[b];
    });

    // Roulette weights from fitness scaled to [0, 1] (lower sse is fitter).
    const double worst = fitness_sse[order.back()];
    const double best = fitness_sse[order.front()];
    const double span = std::max(worst - best, 1e-30);
    std::vector<double> cumulative(pop);
    double acc = 0.0;
    for (int i = 0; i < pop; ++i) {
      acc += (worst - fitness_sse[i]) / span + 1e-3;
      cumulative[i] = acc;
    }
    auto pick = [&]() {
      const double r = rng.uniform(0.0, acc);
      const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
      return static_cast<int>(it - cumulative.begin());
    };

    const double mut_scale =
        config.mutation_sigma * (1.0 - double(gen) / config.generations) +
        0.01 * config.mutation_sigma;

    std::vector<Eigen::VectorXd> next;
    next.reserve(pop);
    for (int e = 0; e < config.elitism; ++e)
      next.push_back(population[order[e]]);
    while (static_cast<int>(next.size()) < pop) {
      const Eigen::VectorXd& a = population[pick()];
      const Eigen::VectorXd& b = population[pick()];
      Eigen::VectorXd child(np);
      for (int i = 0; i < np; ++i)
        child[i] = rng.uniform() < 0.5 ? a[i] : b[i];
      for (int i = 0; i < np; ++i) {
        if (rng.uniform() < 0.15) child[i] += mut_scale * rng.normal();
      }
      next.push_back(clamp_abs(std::move(child), config.bound));
    }
    population = std::move(next);
    for (int i = 0; i < pop; ++i) fitness_sse[i] = sse_of(population[i]);
    if (best_sse_history)
      best_sse_history->push_back(
          *std::min_element(fitness_sse.begin(), fitness_sse.end()));
  }

  const std::vector<int> val_idx =
      validation_indices(samples, config.validation_fraction, config.seed);
  int best_idx = 0;
  double best_acc = -1.0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i < pop; ++i) {
    const double acc_i = accuracy_on(network::unflatten(population[i], shape),
                                     samples, val_idx, policy);
    if (acc_i > best_acc || (acc_i == best_acc && fitness_sse[i] < best_sse)) {
      best_acc = acc_i;
      best_sse = fitness_sse[i];
      best_idx = i;
    }
  }

  TrainedModel model;
  model.shape = shape;
  model.parameters = network::unflatten(population[best_idx], shape);
  model.selected_minimum_cost = 0.5 * fitness_sse[best_idx];
  model.validation_accuracy = best_acc;
  model.provenance = {"ga", config.digest(), config.seed, 0};
  return model;
}

}  // namespace qgsnet::training
