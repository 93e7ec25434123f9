#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qgsnet/classify.hpp"
#include "qgsnet/datagen.hpp"
#include "qgsnet/digest.hpp"
#include "qgsnet/serialize.hpp"

namespace fs = std::filesystem;
using namespace qgsnet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitTrainer = 4;
constexpr int kExitSweepFailed = 5;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> trainer;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON run configuration");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "override the top-level seed");
  cmd->add_option("--jobs", o.jobs, "worker parallelism for sweeps")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--trainer", o.trainer, "trainer: qgs|ga|ebp");
}

serialize::RunConfig load_config(const CommonOpts& o) {
  serialize::json j = serialize::json::object();
  if (!o.config_path.empty()) j = serialize::read_json_file(o.config_path);
  serialize::RunConfig cfg = serialize::run_config_from_json(j);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.derive_seeds();
  }
  if (o.trainer)
    cfg.two_stage.trainer = classify::trainer_from_string(*o.trainer);
  return cfg;
}

datagen::Dataset load_dataset(const std::string& data_dir) {
  return serialize::dataset_from_files(fs::path(data_dir) / "features.csv",
                                       fs::path(data_dir) / "manifest.json");
}

void write_json(const fs::path& path, const serialize::json& j) {
  serialize::write_text_file(path, j.dump(2) + "\n");
}

int run_generate(const CommonOpts& opts) {
  serialize::RunConfig cfg = load_config(opts);
  datagen::Dataset ds = datagen::build_dataset(cfg.dataset);
  const std::string features = serialize::features_csv(ds);
  const std::uint64_t digest = fnv1a64(features);

  serialize::write_text_file(fs::path(opts.out_dir) / "features.csv", features);
  write_json(fs::path(opts.out_dir) / "manifest.json",
             serialize::manifest_json(ds, digest));
  if (ds.config.emit_raw_streams) {
    serialize::write_text_file(fs::path(opts.out_dir) / "raw_streams.csv",
                               serialize::raw_streams_csv(ds));
  }
  std::cout << "events: " << ds.events.size() << " (train "
            << ds.train_idx.size() << ", eval " << ds.eval_idx.size() << ")\n"
            << "feature_dim: " << ds.feature_dim() << "\n"
            << "dataset digest: " << digest_hex(digest) << "\n";
  return 0;
}

int run_train(const CommonOpts& opts, const std::string& data_dir,
              const std::string& resume_path) {
  serialize::RunConfig cfg = load_config(opts);
  datagen::Dataset ds = load_dataset(data_dir);

  if (!resume_path.empty()) {
    classify::TwoStageModel prev =
        serialize::two_stage_from_json(serialize::read_json_file(resume_path));
    if (prev.layout_digest != ds.layout.digest()) {
      std::cerr << "error: resume model feature digest "
                << digest_hex(prev.layout_digest)
                << " does not match dataset layout digest "
                << digest_hex(ds.layout.digest()) << "\n";
      return kExitConfig;
    }
  }

  classify::TrainOutput out =
      classify::train_two_stage(ds.events, ds.train_idx, ds.layout, cfg.two_stage);
  write_json(fs::path(opts.out_dir) / "model.json",
             serialize::to_json(out.model));
  if (cfg.two_stage.trainer == classify::Trainer::qgs) {
    write_json(fs::path(opts.out_dir) / "stage1_minima.json",
               serialize::to_json(out.stage1_minima, out.stage1_settings));
    write_json(fs::path(opts.out_dir) / "stage2_minima.json",
               serialize::to_json(out.stage2_minima, out.stage2_settings));
  }
  std::cout << "stage1 validation accuracy: "
            << out.model.stage1.validation_accuracy << "\n"
            << "stage2 validation accuracy: "
            << out.model.stage2.validation_accuracy << "\n";
  return 0;
}

int run_evaluate(const CommonOpts& opts, const std::string& model_path,
                 const std::string& data_dir) {
  datagen::Dataset ds = load_dataset(data_dir);
  classify::TwoStageModel model =
      serialize::two_stage_from_json(serialize::read_json_file(model_path));
  if (model.layout_digest != ds.layout.digest()) {
    std::cerr << "error: model feature digest " << digest_hex(model.layout_digest)
              << " does not match dataset layout digest "
              << digest_hex(ds.layout.digest()) << "\n";
    return kExitConfig;
  }
  if (ds.eval_idx.empty()) {
    std::cerr << "error: empty evaluation set\n";
    return kExitConfig;
  }
  auto [accuracy, cm] = classify::evaluate(model, ds.events, ds.eval_idx);
  serialize::write_text_file(fs::path(opts.out_dir) / "confusion.csv",
                             serialize::confusion_csv(cm));
  serialize::json summary{{"schema_version", serialize::kSchemaVersion},
                          {"accuracy", accuracy},
                          {"total", cm.total()},
                          {"correct", cm.correct()},
                          {"confusion_digest", digest_hex(cm.digest())}};
  write_json(fs::path(opts.out_dir) / "summary.json", summary);
  std::cout << "accuracy: " << accuracy << " (" << cm.correct() << "/"
            << cm.total() << ")\n";
  return 0;
}

int run_sweep(const CommonOpts& opts, std::string axis_name) {
  serialize::RunConfig cfg = load_config(opts);
  if (axis_name.empty()) axis_name = cfg.sweep_axis;
  const classify::SweepAxis axis = classify::sweep_axis_from_string(axis_name);

  classify::SweepBase base{cfg.dataset, cfg.two_stage, cfg.boost_rounds,
                           cfg.boost_batch_per_class};
  classify::SweepReport report =
      classify::sweep(axis, base, cfg.two_stage.trainer, opts.jobs);

  serialize::write_text_file(
      fs::path(opts.out_dir) / ("sweep_" + axis_name + ".csv"),
      serialize::sweep_report_csv(report));
  write_json(fs::path(opts.out_dir) / ("sweep_" + axis_name + ".json"),
             serialize::sweep_report_json(report));

  int succeeded = 0;
  for (const auto& p : report.points) {
    std::cout << axis_name << "=" << p.setting << ": ";
    if (p.failed) {
      std::cout << "FAILED (" << p.error << ")";
    } else {
      std::cout << "accuracy " << p.accuracy;
      ++succeeded;
    }
    std::cout << " [" << p.runtime_seconds << " s]\n";
  }
  return succeeded > 0 ? 0 : kExitSweepFailed;
}

int run_boost(const CommonOpts& opts, const std::string& data_dir) {
  serialize::RunConfig cfg = load_config(opts);
  datagen::Dataset ds = load_dataset(data_dir);

  classify::TwoStageModel model =
      classify::train_two_stage(ds.events, ds.train_idx, ds.layout, cfg.two_stage)
          .model;
  std::vector<datagen::EventRecord> train_events;
  for (int i : ds.train_idx) train_events.push_back(ds.events[i]);

  auto batch_source = [&](int round) {
    datagen::ScenarioConfig batch_cfg = ds.config;
    batch_cfg.experiments_per_class = cfg.boost_batch_per_class;
    batch_cfg.train_quota = cfg.boost_batch_per_class;
    batch_cfg.seed = Rng::mix(ds.config.seed, 0xb0057 + round);
    return datagen::build_dataset(batch_cfg).events;
  };
  classify::BoostResult result =
      classify::boost(model, std::move(train_events), ds.layout, batch_source,
                      cfg.boost_rounds, cfg.two_stage);

  write_json(fs::path(opts.out_dir) / "boosted_model.json",
             serialize::to_json(result.model));
  serialize::json report{{"schema_version", serialize::kSchemaVersion},
                         {"rounds", cfg.boost_rounds},
                         {"round_accuracies", result.round_accuracies},
                         {"train_sizes", result.train_sizes},
                         {"final_accuracy", result.final_accuracy}};
  write_json(fs::path(opts.out_dir) / "boost_report.json", report);
  std::cout << "final accuracy: " << result.final_accuracy << "\n";
  return 0;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const serialize::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const serialize::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const datagen::InsufficientData& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qgs::NoMinimaFound& e) {
    std::cerr << "trainer error: " << e.what() << "\n";
    return kExitTrainer;
  } catch (const training::Diverged& e) {
    std::cerr << "trainer error: " << e.what() << "\n";
    return kExitTrainer;
  } catch (const training::DegenerateSplit& e) {
    std::cerr << "trainer error: " << e.what() << "\n";
    return kExitTrainer;
  } catch (const classify::MissingClass& e) {
    std::cerr << "trainer error: " << e.what() << "\n";
    return kExitTrainer;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event classification with gradient-flow trained networks"};
  app.require_subcommand(1);

  CommonOpts gen_opts;
  CLI::App* generate = app.add_subcommand("generate", "generate a dataset");
  add_common(generate, gen_opts);

  CommonOpts train_opts;
  std::string train_data, resume_path;
  CLI::App* train = app.add_subcommand("train", "train a two-stage model");
  add_common(train, train_opts);
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--resume", resume_path,
                    "existing model whose feature layout must match");

  CommonOpts eval_opts;
  std::string eval_model, eval_data;
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a model");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--model", eval_model, "model JSON path")->required();
  evaluate->add_option("--data", eval_data, "dataset directory")->required();

  CommonOpts sweep_opts;
  std::string sweep_axis;
  CLI::App* sweep = app.add_subcommand("sweep", "run a sensitivity sweep");
  add_common(sweep, sweep_opts);
  sweep->add_option("--axis", sweep_axis,
                    "reporting_rate|noise|pmu_count|boosting|trainer");

  CommonOpts boost_opts;
  std::string boost_data;
  CLI::App* boost = app.add_subcommand("boost", "boosting retrain rounds");
  add_common(boost, boost_opts);
  boost->add_option("--data", boost_data, "dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (generate->parsed()) return guarded([&] { return run_generate(gen_opts); });
  if (train->parsed())
    return guarded([&] { return run_train(train_opts, train_data, resume_path); });
  if (evaluate->parsed())
    return guarded([&] { return run_evaluate(eval_opts, eval_model, eval_data); });
  if (sweep->parsed())
    return guarded([&] { return run_sweep(sweep_opts, sweep_axis); });
  if (boost->parsed())
    return guarded([&] { return run_boost(boost_opts, boost_data); });
  return 1;
}
