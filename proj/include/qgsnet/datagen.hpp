#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qgsnet/rng.hpp"

namespace qgsnet::datagen {

enum class EventKind { cap_switch, oltc_switch, load_change, reconfiguration };

std::string to_string(EventKind kind);

/// Event class ids 1..13: 1-4 capacitor switching at locations 1-4,
/// 5-8 tap-changer switching at locations 1-4, 9 abrupt load change,
/// 10-13 feeder reconfiguration at locations 1-4.
struct EventClass {
  int id = 1;
  EventKind kind = EventKind::cap_switch;
  int location = 1;

  static EventClass from_id(int id);
};

constexpr int kNumClasses = 13;
constexpr int kNumPmus = 4;

/// One second of synchronized channels for a single PMU: voltage magnitude
/// (pu), voltage angle (deg), current magnitude (pu), current angle (deg).
struct PmuChannels {
  Eigen::VectorXd vm, va, im, ia;
};

struct PmuStream {
  std::vector<int> pmu_ids;            // ascending, subset of 1..4
  std::vector<PmuChannels> channels;   // parallel to pmu_ids
  int reporting_rate = 60;             // samples/second
  int duration = 60;                   // samples
  int pre_start = 0;
  int event_start = 30;
  int event_end = 59;
};

struct FeatureLayout {
  int w_pre = 10;
  int w_dur = 10;
  std::vector<int> active_pmus = {1, 2, 3, 4};
  bool raw_uses_voltage = false;  // raw windows from current channels by default

  int per_pmu() const { return 2 * (w_pre + w_dur) + 4 * (w_pre + w_dur - 1); }
  int feature_count() const {
    return per_pmu() * static_cast<int>(active_pmus.size());
  }
  std::uint64_t digest() const;
  void validate() const;
};

struct ScenarioConfig {
  std::vector<double> loading_levels = {50,  60,  70,  80,  90,
                                        100, 110, 120, 130, 140};
  std::vector<double> load_change_percents = {-25, -20, -15, -10, -5,
                                              5,   10,  15,  20,  25};
  int experiments_per_class = 910;
  int train_quota = 100;
  double noise_variance = 0.0;
  std::vector<int> active_pmus = {1, 2, 3, 4};
  int reporting_rate = 60;
  int w_pre = 10;
  int w_dur = 10;
  bool raw_uses_voltage = false;
  bool emit_raw_streams = false;
  Eigen::MatrixXd gain_table;  // 13 x 4; empty selects the default table
  std::uint64_t seed = 0;

  FeatureLayout layout() const {
    return {w_pre, w_dur, active_pmus, raw_uses_voltage};
  }
  Eigen::MatrixXd effective_gain_table() const;
  void validate() const;
};

struct EventRecord {
  std::string id;
  int class_id = 0;
  Eigen::VectorXd features;
};

struct Dataset {
  std::vector<EventRecord> events;
  std::vector<int> train_idx;
  std::vector<int> eval_idx;
  ScenarioConfig config;
  FeatureLayout layout;

  int feature_dim() const {
    return events.empty() ? layout.feature_count()
                          : static_cast<int>(events.front().features.size());
  }
};

struct InsufficientData : std::runtime_error {
  explicit InsufficientData(std::string msg) : std::runtime_error(std::move(msg)) {}
};

/// Per-(class, pmu) response magnitudes emulating the electrical distance
/// between event location and measuring device. Rows are pairwise distinct.
Eigen::MatrixXd default_gain_table();

/// Synthesizes one second of steady-state channels for every active PMU
/// with the class's signature injected mid-record. `change_percent` only
/// affects abrupt-load-change events (signed percentage).
PmuStream generate_event(const EventClass& event_class, double loading_percent,
                         double change_percent, Rng& rng,
                         const ScenarioConfig& config);

/// Multiplicative Gaussian noise relative to each reported value;
/// variance 0 returns the input unchanged.
PmuStream add_noise(const PmuStream& stream, double variance, Rng& rng);

/// Raw current windows around the event onset plus consecutive-difference
/// channels for all four quantities, concatenated across PMUs.
Eigen::VectorXd extract_features(const PmuStream& stream,
                                 const FeatureLayout& layout);

/// Deterministic stream for experiment k of a class: grid point selection,
/// loading jitter past the grid size, signature synthesis and noise, all
/// from per-event substreams of the config seed.
PmuStream stream_for_event(const ScenarioConfig& config, int class_id, int k);

/// Generates the full labelled corpus over the scenario grid and splits it
/// into train_quota training events per class plus an evaluation remainder.
Dataset build_dataset(const ScenarioConfig& config);

}  // namespace qgsnet::datagen
