#include "qgsnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "qgsnet/digest.hpp"

namespace qgsnet::datagen {

namespace {

// Per-kind channel response coefficients: multipliers applied to the
// (class, pmu) gain for voltage magnitude (pu), voltage angle (deg),
// current magnitude (pu) and current angle (deg).
struct ChannelCoeffs {
  double vm, va, im, ia;
};

ChannelCoeffs coeffs_for(EventKind kind) {
  switch (kind) {
    case EventKind::cap_switch: return {-0.050, 0.90, 0.100, 2.00};
    case EventKind::oltc_switch: return {0.040, -0.70, 0.080, -1.60};
    case EventKind::load_change: return {-0.012, -0.25, 0.060, 0.90};
    case EventKind::reconfiguration: return {0.035, 1.30, -0.090, 2.60};
  }
  throw std::logic_error("unhandled event kind");
}

// Temporal envelope in [0, 1] for sample t (relative to event_start).
double envelope(EventKind kind, int t, int dip_n, int hold_n, int trans_n) {
  if (t < 0) return 0.0;
  switch (kind) {
    case EventKind::cap_switch:
      return t < dip_n ? 1.0 : 0.0;
    case EventKind::oltc_switch:
      return t < hold_n ? 1.0 : 0.0;
    case EventKind::load_change:
      return 1.0;
    case EventKind::reconfiguration:
      return t < trans_n ? double(t + 1) / double(trans_n) : 1.0;
  }
  return 0.0;
}

}  // namespace

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::cap_switch: return "cap_switch";
    case EventKind::oltc_switch: return "oltc_switch";
    case EventKind::load_change: return "load_change";
    case EventKind::reconfiguration: return "reconfiguration";
  }
  return "unknown";
}

EventClass EventClass::from_id(int id) {
  if (id < 1 || id > kNumClasses)
    throw std::invalid_argument("event class id must be in 1..13");
  if (id <= 4) return {id, EventKind::cap_switch, id};
  if (id <= 8) return {id, EventKind::oltc_switch, id - 4};
  if (id == 9) return {id, EventKind::load_change, 1};
  return {id, EventKind::reconfiguration, id - 9};
}

void FeatureLayout::validate() const {
  if (w_pre < 1 || w_dur < 1)
    throw std::invalid_argument("window lengths must be >= 1");
  if (active_pmus.empty())
    throw std::invalid_argument("active_pmus must be nonempty");
  for (std::size_t i = 0; i < active_pmus.size(); ++i) {
    if (active_pmus[i] < 1 || active_pmus[i] > kNumPmus)
      throw std::invalid_argument("active PMU ids must be in 1..4");
    if (i > 0 && active_pmus[i] <= active_pmus[i - 1])
      throw std::invalid_argument("active_pmus must be strictly ascending");
  }
}

std::uint64_t FeatureLayout::digest() const {
  std::ostringstream os;
  os << "layout;" << w_pre << ';' << w_dur << ';' << raw_uses_voltage;
  for (int p : active_pmus) os << ';' << p;
  return fnv1a64(os.str());
}

void ScenarioConfig::validate() const {
  if (loading_levels.empty())
    throw std::invalid_argument("loading_levels must be nonempty");
  for (double l : loading_levels)
    if (!(l > 0)) throw std::invalid_argument("loading levels must be positive");
  if (load_change_percents.empty())
    throw std::invalid_argument("load_change_percents must be nonempty");
  if (experiments_per_class < 1)
    throw std::invalid_argument("experiments_per_class must be >= 1");
  if (train_quota < 1) throw std::invalid_argument("train_quota must be >= 1");
  if (noise_variance < 0)
    throw std::invalid_argument("noise_variance must be >= 0");
  if (reporting_rate != 60 && reporting_rate != 120)
    throw std::invalid_argument("reporting_rate must be 60 or 120");
  layout().validate();
  if (gain_table.size() != 0 &&
      (gain_table.rows() != kNumClasses || gain_table.cols() != kNumPmus))
    throw std::invalid_argument("gain_table must be 13x4");
  if (gain_table.size() != 0 && !gain_table.allFinite())
    throw std::invalid_argument("gain_table must be finite");
}

Eigen::MatrixXd ScenarioConfig::effective_gain_table() const {
  return gain_table.size() == 0 ? default_gain_table() : gain_table;
}

Eigen::MatrixXd default_gain_table() {
  Eigen::MatrixXd g(kNumClasses, kNumPmus);
  auto fill_located = [&](int first_class, double base, double attenuation) {
    for (int loc = 1; loc <= 4; ++loc) {
      for (int pmu = 1; pmu <= 4; ++pmu) {
        g(first_class - 1 + loc - 1, pmu - 1) =
            base * std::pow(attenuation, std::abs(loc - pmu));
      }
    }
  };
  fill_located(1, 1.30, 0.50);   // capacitor switching
  fill_located(5, 1.10, 0.50);   // tap-changer switching
  g.row(8) << 0.60, 0.68, 0.76, 0.84;  // load change, network-wide
  fill_located(10, 1.45, 0.55);  // reconfiguration
  return g;
}

PmuStream generate_event(const EventClass& event_class, double loading_percent,
                         double change_percent, Rng& rng,
                         const ScenarioConfig& config) {
  config.validate();
  if (!(loading_percent > 0))
    throw std::invalid_argument("loading_percent must be positive");

  const int rate = config.reporting_rate;
  const int duration = rate;  // one second of samples
  const double load = loading_percent / 100.0;
  const Eigen::MatrixXd gains = config.effective_gain_table();

  PmuStream stream;
  stream.reporting_rate = rate;
  stream.duration = duration;
  stream.pre_start = 0;
  stream.event_start = rate / 2;
  stream.event_end = duration - 1;

  const int dip_n = static_cast<int>(std::lround(0.01667 * rate));
  const int trans_n = static_cast<int>(std::lround(0.083 * rate));
  const int hold_n =
      static_cast<int>(std::lround(rate * rng.uniform(0.030, 0.200)));

  const ChannelCoeffs cc = coeffs_for(event_class.kind);
  // Load changes scale with the signed percentage; other kinds have a
  // fixed actuation size.
  const double kind_scale = event_class.kind == EventKind::load_change
                                ? change_percent / 10.0
                                : 1.0;

  for (int pmu : config.active_pmus) {
    const double g = gains(event_class.id - 1, pmu - 1);
    const double amp = g * load * kind_scale;
    const double j = pmu - 1;

    PmuChannels ch;
    ch.vm.setConstant(duration, 1.02 - 0.004 * j - 0.03 * (load - 1.0));
    ch.va.setConstant(duration, -1.5 * j - 2.0 * (load - 1.0));
    ch.im.setConstant(duration, (0.45 + 0.12 * j) * load);
    ch.ia.setConstant(duration, -12.0 - 2.5 * j + 3.0 * (load - 1.0));

    for (int t = stream.event_start; t < duration; ++t) {
      const double s =
          envelope(event_class.kind, t - stream.event_start, dip_n, hold_n,
                   trans_n);
      if (s == 0.0) continue;
      ch.vm[t] += cc.vm * amp * s;
      ch.va[t] += cc.va * amp * s;
      ch.im[t] += cc.im * amp * s;
      ch.ia[t] += cc.ia * amp * s;
    }
    stream.pmu_ids.push_back(pmu);
    stream.channels.push_back(std::move(ch));
  }
  return stream;
}

PmuStream add_noise(const PmuStream& stream, double variance, Rng& rng) {
  if (variance < 0) throw std::invalid_argument("noise variance must be >= 0");
  if (variance == 0.0) return stream;
  const double sigma = std::sqrt(variance);
  PmuStream noisy = stream;
  for (auto& ch : noisy.channels) {
    for (Eigen::VectorXd* v : {&ch.vm, &ch.va, &ch.im, &ch.ia}) {
      for (int t = 0; t < v->size(); ++t)
        (*v)[t] *= 1.0 + sigma * rng.normal();
    }
  }
  return noisy;
}

Eigen::VectorXd extract_features(const PmuStream& stream,
                                 const FeatureLayout& layout) {
  layout.validate();
  const int lo = stream.event_start - layout.w_pre;
  const int hi = stream.event_start + layout.w_dur;  // exclusive
  if (lo < stream.pre_start || hi > stream.duration ||
      hi - 1 > stream.event_end)
    throw std::invalid_argument("feature window exceeds stream bounds");

  const int window = layout.w_pre + layout.w_dur;
  Eigen::VectorXd out(layout.feature_count());
  int pos = 0;

  for (int pmu : layout.active_pmus) {
    const auto it = std::find(stream.pmu_ids.begin(), stream.pmu_ids.end(), pmu);
    if (it == stream.pmu_ids.end())
      throw std::invalid_argument("stream lacks PMU " + std::to_string(pmu));
    const PmuChannels& ch =
        stream.channels[it - stream.pmu_ids.begin()];

    const auto& raw_mag = layout.raw_uses_voltage ? ch.vm : ch.im;
    const auto& raw_ang = layout.raw_uses_voltage ? ch.va : ch.ia;
    out.segment(pos, window) = raw_mag.segment(lo, window);
    pos += window;
    out.segment(pos, window) = raw_ang.segment(lo, window);
    pos += window;
    for (const Eigen::VectorXd* v : {&ch.vm, &ch.va, &ch.im, &ch.ia}) {
      out.segment(pos, window - 1) =
          v->segment(lo + 1, window - 1) - v->segment(lo, window - 1);
      pos += window - 1;
    }
  }
  return out;
}

PmuStream stream_for_event(const ScenarioConfig& config, int class_id, int k) {
  const EventClass ec = EventClass::from_id(class_id);

  // Scenario grid: loading levels, crossed with change percentages for
  // load-change events. Cycled with loading jitter past the grid size.
  std::vector<std::pair<double, double>> grid;
  if (ec.kind == EventKind::load_change) {
    for (double l : config.loading_levels)
      for (double p : config.load_change_percents) grid.emplace_back(l, p);
  } else {
    for (double l : config.loading_levels) grid.emplace_back(l, 0.0);
  }

  Rng rng = Rng::stream(config.seed,
                        static_cast<std::uint64_t>(class_id) * 0x100000u + k);
  auto [loading, percent] = grid[k % grid.size()];
  if (k >= static_cast<int>(grid.size()))
    loading *= 1.0 + rng.uniform(-0.02, 0.02);

  PmuStream stream = generate_event(ec, loading, percent, rng, config);
  if (config.noise_variance > 0) {
    Rng noise_rng = Rng::stream(
        config.seed,
        0xA05Eu + static_cast<std::uint64_t>(class_id) * 0x100000u + k);
    stream = add_noise(stream, config.noise_variance, noise_rng);
  }
  return stream;
}

Dataset build_dataset(const ScenarioConfig& config) {
  config.validate();
  const FeatureLayout layout = config.layout();
  if (config.experiments_per_class < config.train_quota)
    throw InsufficientData("experiments_per_class (" +
                           std::to_string(config.experiments_per_class) +
                           ") is below the training quota (" +
                           std::to_string(config.train_quota) + ")");

  Dataset ds;
  ds.config = config;
  ds.config.gain_table = config.effective_gain_table();
  ds.layout = layout;

  for (int class_id = 1; class_id <= kNumClasses; ++class_id) {
    for (int k = 0; k < config.experiments_per_class; ++k) {
      PmuStream stream = stream_for_event(config, class_id, k);
      std::ostringstream id;
      id << 'c' << (class_id < 10 ? "0" : "") << class_id << "_e";
      id.fill('0');
      id.width(6);
      id << k;
      ds.events.push_back({id.str(), class_id, extract_features(stream, layout)});
    }
  }

  // Stratified split: train_quota per class, remainder for evaluation.
  for (int class_id = 1; class_id <= kNumClasses; ++class_id) {
    std::vector<int> members;
    for (int i = 0; i < static_cast<int>(ds.events.size()); ++i)
      if (ds.events[i].class_id == class_id) members.push_back(i);
    Rng rng = Rng::stream(config.seed, 0x5317u + class_id);
    for (int i = static_cast<int>(members.size()) - 1; i > 0; --i)
      std::swap(members[i], members[rng.below(i + 1)]);
    for (int i = 0; i < static_cast<int>(members.size()); ++i) {
      (i < config.train_quota ? ds.train_idx : ds.eval_idx).push_back(members[i]);
    }
  }
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.eval_idx.begin(), ds.eval_idx.end());

  // Class mean separation check; distinct gain rows guarantee this.
  const int dim = ds.feature_dim();
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(dim, kNumClasses);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(kNumClasses);
  for (const auto& e : ds.events) {
    means.col(e.class_id - 1) += e.features;
    counts[e.class_id - 1] += 1.0;
  }
  for (int c = 0; c < kNumClasses; ++c) means.col(c) /= counts[c];
  const double tol = 10.0 * std::numeric_limits<double>::epsilon();
  for (int a = 0; a < kNumClasses; ++a) {
    for (int b = a + 1; b < kNumClasses; ++b) {
      if ((means.col(a) - means.col(b)).cwiseAbs().maxCoeff() <= tol)
        throw std::logic_error("class means " + std::to_string(a + 1) + " and " +
                               std::to_string(b + 1) + " are not separated");
    }
  }
  return ds;
}

}  // namespace qgsnet::datagen
