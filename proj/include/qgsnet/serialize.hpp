#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "qgsnet/classify.hpp"
#include "qgsnet/datagen.hpp"
#include "qgsnet/qgs.hpp"
#include "qgsnet/training.hpp"

namespace qgsnet::serialize {

using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

struct ConfigError : std::runtime_error {
  explicit ConfigError(std::string msg) : std::runtime_error(std::move(msg)) {}
};

struct IoError : std::runtime_error {
  explicit IoError(std::string msg) : std::runtime_error(std::move(msg)) {}
};

/// Shortest decimal string that round-trips to the same binary64 value.
std::string format_double(double v);

/// Rejects keys outside `allowed`, reporting the full field path.
void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& path);

json to_json(const qgs::QgsSettings& s);
qgs::QgsSettings qgs_settings_from_json(const json& j, const std::string& path);

json to_json(const qgs::MinimaSet& set, const qgs::QgsSettings& settings);
qgs::MinimaSet minima_from_json(const json& j);

json to_json(const training::TrainedModel& model,
             std::uint64_t feature_digest,
             const std::string& state_policy = "reset_per_sample");
training::TrainedModel trained_model_from_json(const json& j);

json to_json(const classify::TwoStageModel& model);
classify::TwoStageModel two_stage_from_json(const json& j);

json to_json(const datagen::ScenarioConfig& config, bool include_gain_table);
datagen::ScenarioConfig scenario_from_json(const json& j, const std::string& path);

json manifest_json(const datagen::Dataset& ds, std::uint64_t dataset_digest);

std::string features_csv(const datagen::Dataset& ds);
std::string raw_streams_csv(const datagen::Dataset& ds);
datagen::Dataset dataset_from_files(const std::filesystem::path& features_path,
                                    const std::filesystem::path& manifest_path);

std::string confusion_csv(const classify::ConfusionMatrix& cm);
json confusion_json(const classify::ConfusionMatrix& cm);

json sweep_report_json(const classify::SweepReport& report);
std::string sweep_report_csv(const classify::SweepReport& report);

/// Top-level run configuration shared by every CLI command. Missing keys
/// take defaults; unknown keys are rejected. The single seed is split into
/// per-subsystem streams.
struct RunConfig {
  std::uint64_t seed = 1;
  datagen::ScenarioConfig dataset;
  classify::TwoStageConfig two_stage;
  std::string sweep_axis = "noise";
  int boost_rounds = 3;
  int boost_batch_per_class = 20;

  void derive_seeds();  // applies the seed split to the subsystem configs
};

RunConfig run_config_from_json(const json& j);
json to_json(const RunConfig& config);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);
json read_json_file(const std::filesystem::path& path);

}  // namespace qgsnet::serialize
