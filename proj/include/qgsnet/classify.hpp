#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qgsnet/datagen.hpp"
#include "qgsnet/training.hpp"

namespace qgsnet::classify {

enum class Trainer { qgs, ga, ebp };

std::string to_string(Trainer t);
Trainer trainer_from_string(const std::string& s);

/// Per-feature affine input scaling fitted on the training split. Keeps
/// the hidden-layer pre-activations in the responsive range of tanh for
/// high-dimensional feature vectors.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
  static Standardizer fit(std::span<const datagen::EventRecord> events,
                          std::span<const int> indices);
};

struct TwoStageConfig {
  int hidden1 = 8;
  int hidden2 = 6;
  Trainer trainer = Trainer::qgs;
  std::vector<int> stage2_classes = {5, 6, 7, 8, 9};
  training::TrainConfig train;
  qgs::QgsSettings qgs_settings;
  training::GaConfig ga;
  training::EbpConfig ebp;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Router network over the direct classes plus one grouped output,
/// followed by a second network that resolves the grouped classes.
struct TwoStageModel {
  training::TrainedModel stage1;
  training::TrainedModel stage2;
  Standardizer scaler;
  std::vector<int> stage2_classes;
  std::uint64_t layout_digest = 0;

  /// Stage-1 output slots in class order, with the grouped slot keyed by
  /// its smallest class id. Returns -1 for the grouped slot's class.
  std::vector<int> stage1_slot_classes() const;
};

struct ConfusionMatrix {
  Eigen::MatrixXi counts{
      Eigen::MatrixXi::Zero(datagen::kNumClasses, datagen::kNumClasses)};

  void add(int target_class, int predicted_class);
  long total() const;
  long correct() const;
  double accuracy() const;
  Eigen::VectorXi row_totals() const;
  /// Row-normalized percentages (rows with no events stay zero).
  Eigen::MatrixXd row_percentages() const;
  std::uint64_t digest() const;
};

struct MissingClass : std::runtime_error {
  explicit MissingClass(std::string msg) : std::runtime_error(std::move(msg)) {}
};

struct TrainOutput {
  TwoStageModel model;
  qgs::MinimaSet stage1_minima;  // populated by the qgs trainer
  qgs::MinimaSet stage2_minima;
  qgs::QgsSettings stage1_settings;  // as applied (seed and thresholds resolved)
  qgs::QgsSettings stage2_settings;
};

int predict(const TwoStageModel& model, const Eigen::VectorXd& features);

std::pair<double, ConfusionMatrix> evaluate(
    const TwoStageModel& model, std::span<const datagen::EventRecord> events,
    std::span<const int> indices);

/// Confusion accounting from precomputed labels; used by reports and tests.
std::pair<double, ConfusionMatrix> evaluate_predictions(
    std::span<const int> targets, std::span<const int> predictions);

TrainOutput train_two_stage(std::span<const datagen::EventRecord> events,
                            std::span<const int> train_idx,
                            const datagen::FeatureLayout& layout,
                            const TwoStageConfig& config);

/// Supplier of labelled evaluation batches; batch(r) for rounds 0..rounds-1
/// feeds boosting, batch(rounds) is the untouched final test set.
using BatchSource = std::function<std::vector<datagen::EventRecord>(int round)>;

struct BoostResult {
  TwoStageModel model;
  double final_accuracy = 0.0;
  std::vector<double> round_accuracies;
  std::vector<int> train_sizes;  // size after each round's append
};

BoostResult boost(const TwoStageModel& initial,
                  std::vector<datagen::EventRecord> train_events,
                  const datagen::FeatureLayout& layout, const BatchSource& source,
                  int rounds, const TwoStageConfig& config);

enum class SweepAxis { reporting_rate, noise, pmu_count, boosting, trainer };

std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);
std::vector<std::string> sweep_axis_names();

struct SweepPoint {
  std::string setting;
  double accuracy = 0.0;
  double runtime_seconds = 0.0;
  std::uint64_t confusion_digest = 0;
  ConfusionMatrix confusion;
  bool failed = false;
  std::string error;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::noise;
  std::vector<SweepPoint> points;
};

struct SweepBase {
  datagen::ScenarioConfig scenario;
  TwoStageConfig two_stage;
  int boost_rounds = 3;
  int boost_batch_per_class = 20;
};

/// Regenerates data and retrains per sweep point. Per-point failures are
/// recorded on the point instead of aborting the sweep. `jobs` bounds
/// worker parallelism (the trainer axis runs sequentially because later
/// points match the first point's wall-clock budget).
SweepReport sweep(SweepAxis axis, const SweepBase& base, Trainer trainer,
                  int jobs = 1);

/// Reference accuracies reported for the corresponding study axes,
/// attached to reports as annotations.
std::vector<std::pair<std::string, double>> reference_accuracies(SweepAxis a);

}  // namespace qgsnet::classify
