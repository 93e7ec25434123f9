#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qgsnet/classify.hpp"
#include "qgsnet/datagen.hpp"
#include "qgsnet/network.hpp"
#include "qgsnet/qgs.hpp"
#include "qgsnet/serialize.hpp"
#include "qgsnet/training.hpp"

namespace py = pybind11;
using namespace qgsnet;

namespace {

std::vector<network::SequenceSample> samples_from_arrays(
    const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  if (X.rows() != Y.rows())
    throw std::invalid_argument("X and Y must have the same number of rows");
  std::vector<network::SequenceSample> samples(X.rows());
  for (int i = 0; i < X.rows(); ++i) {
    samples[i].inputs.push_back(X.row(i).transpose());
    samples[i].target = Y.row(i).transpose();
    samples[i].id = "row" + std::to_string(i);
  }
  return samples;
}

network::StatePolicy policy_from(const std::string& mode) {
  network::StatePolicy p;
  if (mode == "reset_per_sample")
    p.mode = network::StateMode::reset_per_sample;
  else if (mode == "chained")
    p.mode = network::StateMode::chained;
  else
    throw std::invalid_argument("mode must be reset_per_sample or chained");
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Constraint-satisfaction trained event classifiers";

  // ---- gradient-flow solver ----
  py::class_<qgs::QgsSettings>(m, "QgsSettings")
      .def(py::init<>())
      .def_readwrite("abs_tol", &qgs::QgsSettings::abs_tol)
      .def_readwrite("rel_tol", &qgs::QgsSettings::rel_tol)
      .def_readwrite("grad_tol", &qgs::QgsSettings::grad_tol)
      .def_readwrite("max_time", &qgs::QgsSettings::max_time)
      .def_readwrite("target_minima", &qgs::QgsSettings::target_minima)
      .def_readwrite("max_attempts", &qgs::QgsSettings::max_attempts)
      .def_readwrite("escape_eps", &qgs::QgsSettings::escape_eps)
      .def_readwrite("backward_horizon", &qgs::QgsSettings::backward_horizon)
      .def_readwrite("dedup_dist", &qgs::QgsSettings::dedup_dist)
      .def_readwrite("seed", &qgs::QgsSettings::seed);

  py::class_<qgs::Equilibrium>(m, "Equilibrium")
      .def_readonly("point", &qgs::Equilibrium::point)
      .def_readonly("cost", &qgs::Equilibrium::cost)
      .def_readonly("grad_norm", &qgs::Equilibrium::grad_norm)
      .def_readonly("leading_eigenvalue", &qgs::Equilibrium::leading_eigenvalue)
      .def_property_readonly("stability", [](const qgs::Equilibrium& e) {
        return qgs::to_string(e.stability);
      });

  py::class_<qgs::MinimaSet>(m, "MinimaSet")
      .def_readonly("items", &qgs::MinimaSet::items)
      .def_readonly("attempts_used", &qgs::MinimaSet::attempts_used);

  py::class_<qgs::ConstraintSystem>(m, "ConstraintSystem")
      .def_readonly("dim_x", &qgs::ConstraintSystem::dim_x)
      .def_readonly("dim_h", &qgs::ConstraintSystem::dim_h);

  m.def(
      "make_system",
      [](int dim_x, int dim_h,
         std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual,
         std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian) {
        qgs::ResidualMap eq{dim_x, dim_h, std::move(residual),
                            std::move(jacobian)};
        return qgs::add_slack({}, eq);
      },
      py::arg("dim_x"), py::arg("dim_h"), py::arg("residual"),
      py::arg("jacobian") = nullptr,
      "Equality-constrained system from Python callables (finite-difference "
      "Jacobian when none is given)");

  m.def("qgs_cost", &qgs::cost);
  m.def("qgs_field", &qgs::field);
  m.def(
      "integrate_forward",
      [](const qgs::ConstraintSystem& sys, const Eigen::VectorXd& x0,
         const qgs::QgsSettings& settings) {
        return qgs::integrate_forward(sys, x0, settings);
      },
      py::arg("system"), py::arg("x0"), py::arg("settings"));
  m.def("enumerate_minima", &qgs::enumerate_minima, py::arg("system"),
        py::arg("x0"), py::arg("settings"));

  // ---- network ----
  py::class_<network::NetworkShape>(m, "NetworkShape")
      .def(py::init<int, int, int>(), py::arg("n"), py::arg("hidden"),
           py::arg("q"))
      .def_readonly("n", &network::NetworkShape::n)
      .def_readonly("hidden", &network::NetworkShape::hidden)
      .def_readonly("q", &network::NetworkShape::q)
      .def("param_count", &network::NetworkShape::param_count);

  py::class_<network::Parameters>(m, "Parameters")
      .def(py::init([](Eigen::MatrixXd W, Eigen::MatrixXd V, Eigen::VectorXd p) {
             return network::Parameters{std::move(W), std::move(V), std::move(p)};
           }),
           py::arg("W"), py::arg("V"), py::arg("p"))
      .def_readwrite("W", &network::Parameters::W)
      .def_readwrite("V", &network::Parameters::V)
      .def_readwrite("p", &network::Parameters::p);

  m.def("activation", &network::activation);
  m.def("step", &network::step, py::arg("params"), py::arg("u"),
        py::arg("z_prev"));
  m.def(
      "network_sse",
      [](const network::Parameters& params, const Eigen::MatrixXd& X,
         const Eigen::MatrixXd& Y, const std::string& mode) {
        const auto samples = samples_from_arrays(X, Y);
        return network::sse(params, samples, policy_from(mode));
      },
      py::arg("params"), py::arg("X"), py::arg("Y"),
      py::arg("mode") = "reset_per_sample");
  m.def(
      "network_residuals",
      [](const network::Parameters& params, const Eigen::MatrixXd& X,
         const Eigen::MatrixXd& Y, const std::string& mode) {
        const auto samples = samples_from_arrays(X, Y);
        return network::residuals(params, samples, policy_from(mode));
      },
      py::arg("params"), py::arg("X"), py::arg("Y"),
      py::arg("mode") = "reset_per_sample");
  m.def(
      "network_residual_jacobian",
      [](const network::Parameters& params, const Eigen::MatrixXd& X,
         const Eigen::MatrixXd& Y, const std::string& mode) {
        const auto samples = samples_from_arrays(X, Y);
        return network::residual_jacobian(params, samples, policy_from(mode));
      },
      py::arg("params"), py::arg("X"), py::arg("Y"),
      py::arg("mode") = "reset_per_sample");
  m.def("flatten_params", &network::flatten);
  m.def("unflatten_params", &network::unflatten, py::arg("x"), py::arg("shape"));

  // ---- training ----
  py::class_<training::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("init_sigma", &training::TrainConfig::init_sigma)
      .def_readwrite("bound", &training::TrainConfig::bound)
      .def_readwrite("target_minima", &training::TrainConfig::target_minima)
      .def_readwrite("validation_fraction",
                     &training::TrainConfig::validation_fraction)
      .def_readwrite("grad_tol_fraction", &training::TrainConfig::grad_tol_fraction)
      .def_readwrite("seed", &training::TrainConfig::seed);

  py::class_<training::GaConfig>(m, "GaConfig")
      .def(py::init<>())
      .def_readwrite("population_size", &training::GaConfig::population_size)
      .def_readwrite("generations", &training::GaConfig::generations)
      .def_readwrite("elitism", &training::GaConfig::elitism)
      .def_readwrite("mutation_sigma", &training::GaConfig::mutation_sigma)
      .def_readwrite("bound", &training::GaConfig::bound)
      .def_readwrite("seed", &training::GaConfig::seed);

  py::class_<training::EbpConfig>(m, "EbpConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &training::EbpConfig::learning_rate)
      .def_readwrite("momentum", &training::EbpConfig::momentum)
      .def_readwrite("epochs", &training::EbpConfig::epochs)
      .def_readwrite("bound", &training::EbpConfig::bound)
      .def_readwrite("seed", &training::EbpConfig::seed);

  py::class_<training::TrainedModel>(m, "TrainedModel")
      .def_readonly("parameters", &training::TrainedModel::parameters)
      .def_readonly("selected_minimum_cost",
                    &training::TrainedModel::selected_minimum_cost)
      .def_readonly("validation_accuracy",
                    &training::TrainedModel::validation_accuracy)
      .def_property_readonly("method", [](const training::TrainedModel& t) {
        return t.provenance.method;
      });

  m.def(
      "train_qgs",
      [](const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int hidden,
         const training::TrainConfig& config, const qgs::QgsSettings& settings) {
        const auto samples = samples_from_arrays(X, Y);
        const network::NetworkShape shape{static_cast<int>(X.cols()), hidden,
                                          static_cast<int>(Y.cols())};
        return training::train_qgs(samples, shape, config, settings);
      },
      py::arg("X"), py::arg("Y"), py::arg("hidden"), py::arg("config"),
      py::arg("settings"));
  m.def(
      "train_ebp",
      [](const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int hidden,
         const training::EbpConfig& config) {
        const auto samples = samples_from_arrays(X, Y);
        const network::NetworkShape shape{static_cast<int>(X.cols()), hidden,
                                          static_cast<int>(Y.cols())};
        return training::train_ebp(samples, shape, config);
      },
      py::arg("X"), py::arg("Y"), py::arg("hidden"), py::arg("config"));
  m.def(
      "train_ga",
      [](const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int hidden,
         const training::GaConfig& config) {
        const auto samples = samples_from_arrays(X, Y);
        const network::NetworkShape shape{static_cast<int>(X.cols()), hidden,
                                          static_cast<int>(Y.cols())};
        return training::train_ga(samples, shape, config);
      },
      py::arg("X"), py::arg("Y"), py::arg("hidden"), py::arg("config"));

  // ---- data generation ----
  py::class_<datagen::ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("loading_levels", &datagen::ScenarioConfig::loading_levels)
      .def_readwrite("load_change_percents",
                     &datagen::ScenarioConfig::load_change_percents)
      .def_readwrite("experiments_per_class",
                     &datagen::ScenarioConfig::experiments_per_class)
      .def_readwrite("train_quota", &datagen::ScenarioConfig::train_quota)
      .def_readwrite("noise_variance", &datagen::ScenarioConfig::noise_variance)
      .def_readwrite("active_pmus", &datagen::ScenarioConfig::active_pmus)
      .def_readwrite("reporting_rate", &datagen::ScenarioConfig::reporting_rate)
      .def_readwrite("w_pre", &datagen::ScenarioConfig::w_pre)
      .def_readwrite("w_dur", &datagen::ScenarioConfig::w_dur)
      .def_readwrite("gain_table", &datagen::ScenarioConfig::gain_table)
      .def_readwrite("seed", &datagen::ScenarioConfig::seed);

  py::class_<datagen::Dataset>(m, "Dataset")
      .def_property_readonly("features",
                             [](const datagen::Dataset& ds) {
                               Eigen::MatrixXd F(ds.events.size(),
                                                 ds.feature_dim());
                               for (std::size_t i = 0; i < ds.events.size(); ++i)
                                 F.row(i) = ds.events[i].features.transpose();
                               return F;
                             })
      .def_property_readonly("labels",
                             [](const datagen::Dataset& ds) {
                               std::vector<int> labels(ds.events.size());
                               for (std::size_t i = 0; i < ds.events.size(); ++i)
                                 labels[i] = ds.events[i].class_id;
                               return labels;
                             })
      .def_property_readonly("ids",
                             [](const datagen::Dataset& ds) {
                               std::vector<std::string> ids(ds.events.size());
                               for (std::size_t i = 0; i < ds.events.size(); ++i)
                                 ids[i] = ds.events[i].id;
                               return ids;
                             })
      .def_readonly("train_idx", &datagen::Dataset::train_idx)
      .def_readonly("eval_idx", &datagen::Dataset::eval_idx);

  m.def("default_gain_table", &datagen::default_gain_table);
  m.def("build_dataset", &datagen::build_dataset, py::arg("config"));

  // ---- two-stage classification ----
  py::class_<classify::TwoStageConfig>(m, "TwoStageConfig")
      .def(py::init<>())
      .def_readwrite("hidden1", &classify::TwoStageConfig::hidden1)
      .def_readwrite("hidden2", &classify::TwoStageConfig::hidden2)
      .def_readwrite("stage2_classes", &classify::TwoStageConfig::stage2_classes)
      .def_readwrite("train", &classify::TwoStageConfig::train)
      .def_readwrite("qgs_settings", &classify::TwoStageConfig::qgs_settings)
      .def_readwrite("ga", &classify::TwoStageConfig::ga)
      .def_readwrite("ebp", &classify::TwoStageConfig::ebp)
      .def_readwrite("seed", &classify::TwoStageConfig::seed)
      .def_property(
          "trainer",
          [](const classify::TwoStageConfig& c) { return to_string(c.trainer); },
          [](classify::TwoStageConfig& c, const std::string& s) {
            c.trainer = classify::trainer_from_string(s);
          });

  py::class_<classify::TwoStageModel>(m, "TwoStageModel")
      .def_readonly("stage1", &classify::TwoStageModel::stage1)
      .def_readonly("stage2", &classify::TwoStageModel::stage2)
      .def_readonly("stage2_classes", &classify::TwoStageModel::stage2_classes)
      .def("to_json", [](const classify::TwoStageModel& m2) {
        return serialize::to_json(m2).dump(2);
      });

  m.def("two_stage_from_json", [](const std::string& text) {
    return serialize::two_stage_from_json(serialize::json::parse(text));
  });
  m.def(
      "train_two_stage",
      [](const datagen::Dataset& ds, const classify::TwoStageConfig& config) {
        return classify::train_two_stage(ds.events, ds.train_idx, ds.layout,
                                         config)
            .model;
      },
      py::arg("dataset"), py::arg("config"));
  m.def("predict", &classify::predict, py::arg("model"), py::arg("features"));
  m.def(
      "evaluate",
      [](const classify::TwoStageModel& model, const datagen::Dataset& ds,
         bool eval_split) {
        const auto& idx = eval_split ? ds.eval_idx : ds.train_idx;
        auto [acc, cm] = classify::evaluate(model, ds.events, idx);
        return py::make_tuple(acc, Eigen::MatrixXi(cm.counts));
      },
      py::arg("model"), py::arg("dataset"), py::arg("eval_split") = true);

  py::register_exception<qgs::NoMinimaFound>(m, "NoMinimaFound");
  py::register_exception<qgs::NoConvergence>(m, "NoConvergence");
  py::register_exception<training::Diverged>(m, "Diverged");
}
