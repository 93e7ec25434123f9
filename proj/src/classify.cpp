#include "qgsnet/classify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "qgsnet/digest.hpp"

namespace qgsnet::classify {

namespace {

using datagen::EventRecord;
using datagen::kNumClasses;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

int argmax_col(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Eigen::VectorXd one_hot(int dim, int index) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  v[index] = 1.0;
  return v;
}

network::SequenceSample make_sample(const Eigen::VectorXd& input,
                                    const Eigen::VectorXd& target,
                                    std::string id) {
  network::SequenceSample s;
  s.inputs.push_back(input);
  s.target = target;
  s.id = std::move(id);
  return s;
}

training::TrainedModel run_trainer(
    const std::vector<network::SequenceSample>& samples,
    const network::NetworkShape& shape, const TwoStageConfig& config,
    std::uint64_t stage_seed, qgs::MinimaSet* minima_out,
    qgs::QgsSettings* settings_out) {
  switch (config.trainer) {
    case Trainer::qgs: {
      training::TrainConfig tc = config.train;
      tc.seed = stage_seed;
      qgs::QgsSettings qs = config.qgs_settings;
      qs.seed = stage_seed;
      auto [model, minima] =
          training::train_qgs(samples, shape, tc, qs, {}, settings_out);
      if (minima_out) *minima_out = std::move(minima);
      return model;
    }
    case Trainer::ga: {
      training::GaConfig gc = config.ga;
      gc.seed = stage_seed;
      return training::train_ga(samples, shape, gc);
    }
    case Trainer::ebp: {
      training::EbpConfig ec = config.ebp;
      ec.seed = stage_seed;
      return training::train_ebp(samples, shape, ec);
    }
  }
  throw std::logic_error("unhandled trainer");
}

}  // namespace

std::string to_string(Trainer t) {
  switch (t) {
    case Trainer::qgs: return "qgs";
    case Trainer::ga: return "ga";
    case Trainer::ebp: return "ebp";
  }
  return "unknown";
}

Trainer trainer_from_string(const std::string& s) {
  if (s == "qgs") return Trainer::qgs;
  if (s == "ga") return Trainer::ga;
  if (s == "ebp") return Trainer::ebp;
  throw std::invalid_argument("unknown trainer '" + s + "' (expected qgs|ga|ebp)");
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& f) const {
  if (f.size() != mean.size())
    throw std::invalid_argument("feature dimension does not match the scaler");
  return (f - mean).cwiseProduct(scale);
}

Standardizer Standardizer::fit(std::span<const EventRecord> events,
                               std::span<const int> indices) {
  if (indices.empty()) throw std::invalid_argument("cannot fit scaler on nothing");
  const int dim = static_cast<int>(events[indices[0]].features.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (int i : indices) mean += events[i].features;
  mean /= double(indices.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (int i : indices) {
    const Eigen::VectorXd d = events[i].features - mean;
    var += d.cwiseProduct(d);
  }
  var /= double(indices.size());
  // 1/(std * sqrt(dim)) keeps ||scaled feature|| near one.
  const double dim_norm = std::sqrt(double(dim));
  Standardizer s;
  s.mean = std::move(mean);
  s.scale.resize(dim);
  for (int i = 0; i < dim; ++i)
    s.scale[i] = 1.0 / (std::max(std::sqrt(var[i]), 1e-8) * dim_norm);
  return s;
}

void TwoStageConfig::validate() const {
  if (hidden1 < 1 || hidden2 < 1)
    throw std::invalid_argument("hidden sizes must be >= 1");
  if (stage2_classes.size() < 2)
    throw std::invalid_argument("stage2_classes needs at least two classes");
  std::set<int> seen;
  for (int c : stage2_classes) {
    if (c < 1 || c > kNumClasses)
      throw std::invalid_argument("stage2 class ids must be in 1..13");
    if (!seen.insert(c).second)
      throw std::invalid_argument("stage2_classes must be distinct");
  }
  if (static_cast<int>(stage2_classes.size()) >= kNumClasses)
    throw std::invalid_argument("stage2 cannot contain every class");
}

std::vector<int> TwoStageModel::stage1_slot_classes() const {
  std::vector<std::pair<int, int>> keyed;  // (sort key, class or -1)
  const std::set<int> grouped(stage2_classes.begin(), stage2_classes.end());
  for (int c = 1; c <= kNumClasses; ++c)
    if (!grouped.count(c)) keyed.emplace_back(c, c);
  keyed.emplace_back(*std::min_element(stage2_classes.begin(),
                                       stage2_classes.end()),
                     -1);
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> slots;
  slots.reserve(keyed.size());
  for (auto& [key, cls] : keyed) slots.push_back(cls);
  return slots;
}

void ConfusionMatrix::add(int target_class, int predicted_class) {
  if (target_class < 1 || target_class > kNumClasses || predicted_class < 1 ||
      predicted_class > kNumClasses)
    throw std::invalid_argument("class ids must be in 1..13");
  counts(target_class - 1, predicted_class - 1) += 1;
}

long ConfusionMatrix::total() const { return counts.sum(); }

long ConfusionMatrix::correct() const { return counts.trace(); }

double ConfusionMatrix::accuracy() const {
  const long t = total();
  return t == 0 ? 0.0 : double(correct()) / double(t);
}

Eigen::VectorXi ConfusionMatrix::row_totals() const {
  return counts.rowwise().sum();
}

Eigen::MatrixXd ConfusionMatrix::row_percentages() const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(kNumClasses, kNumClasses);
  for (int r = 0; r < kNumClasses; ++r) {
    const double rt = counts.row(r).sum();
    if (rt > 0) p.row(r) = counts.row(r).cast<double>() * (100.0 / rt);
  }
  return p;
}

std::uint64_t ConfusionMatrix::digest() const {
  std::ostringstream os;
  for (int r = 0; r < kNumClasses; ++r)
    for (int c = 0; c < kNumClasses; ++c) os << counts(r, c) << ',';
  return fnv1a64(os.str());
}

int predict(const TwoStageModel& model, const Eigen::VectorXd& features) {
  const Eigen::VectorXd scaled = model.scaler.apply(features);
  const network::StatePolicy policy;
  const Eigen::VectorXd z_prev =
      policy.initial_state(model.stage1.shape.hidden);
  auto [z1, y1] = network::step(model.stage1.parameters, scaled, z_prev);
  const std::vector<int> slots = model.stage1_slot_classes();
  const int slot = argmax_col(y1);
  if (slots[slot] != -1) return slots[slot];

  const Eigen::VectorXd z2_prev =
      policy.initial_state(model.stage2.shape.hidden);
  auto [z2, y2] = network::step(model.stage2.parameters, scaled, z2_prev);
  std::vector<int> grouped = model.stage2_classes;
  std::sort(grouped.begin(), grouped.end());
  return grouped[argmax_col(y2)];
}

std::pair<double, ConfusionMatrix> evaluate(
    const TwoStageModel& model, std::span<const EventRecord> events,
    std::span<const int> indices) {
  if (indices.empty()) throw std::invalid_argument("empty evaluation set");
  ConfusionMatrix cm;
  for (int i : indices)
    cm.add(events[i].class_id, predict(model, events[i].features));
  return {cm.accuracy(), cm};
}

std::pair<double, ConfusionMatrix> evaluate_predictions(
    std::span<const int> targets, std::span<const int> predictions) {
  if (targets.size() != predictions.size())
    throw std::invalid_argument("targets and predictions differ in length");
  if (targets.empty()) throw std::invalid_argument("empty evaluation set");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < targets.size(); ++i)
    cm.add(targets[i], predictions[i]);
  return {cm.accuracy(), cm};
}

TrainOutput train_two_stage(std::span<const EventRecord> events,
                            std::span<const int> train_idx,
                            const datagen::FeatureLayout& layout,
                            const TwoStageConfig& config) {
  config.validate();
  if (train_idx.empty()) throw std::invalid_argument("empty training set");

  std::set<int> present;
  for (int i : train_idx) present.insert(events[i].class_id);
  for (int c = 1; c <= kNumClasses; ++c) {
    if (!present.count(c))
      throw MissingClass("training set lacks class " + std::to_string(c));
  }

  TrainOutput out;
  out.model.stage2_classes = config.stage2_classes;
  std::sort(out.model.stage2_classes.begin(), out.model.stage2_classes.end());
  out.model.layout_digest = layout.digest();
  out.model.scaler = Standardizer::fit(events, train_idx);

  const std::vector<int> slots = out.model.stage1_slot_classes();
  const int q1 = static_cast<int>(slots.size());
  auto slot_of = [&](int class_id) {
    const std::set<int> grouped(out.model.stage2_classes.begin(),
                                out.model.stage2_classes.end());
    for (int s = 0; s < q1; ++s) {
      if (slots[s] == class_id) return s;
      if (slots[s] == -1 && grouped.count(class_id)) return s;
    }
    throw std::logic_error("class not mapped to a stage-1 slot");
  };

  const int n = static_cast<int>(events[train_idx[0]].features.size());

  std::vector<network::SequenceSample> stage1_samples;
  stage1_samples.reserve(train_idx.size());
  for (int i : train_idx) {
    stage1_samples.push_back(
        make_sample(out.model.scaler.apply(events[i].features),
                    one_hot(q1, slot_of(events[i].class_id)), events[i].id));
  }
  out.model.stage1 =
      run_trainer(stage1_samples, {n, config.hidden1, q1}, config,
                  Rng::mix(config.seed, 1), &out.stage1_minima,
                  &out.stage1_settings);

  const int q2 = static_cast<int>(out.model.stage2_classes.size());
  std::vector<network::SequenceSample> stage2_samples;
  for (int i : train_idx) {
    const auto it =
        std::find(out.model.stage2_classes.begin(),
                  out.model.stage2_classes.end(), events[i].class_id);
    if (it == out.model.stage2_classes.end()) continue;
    const int k = static_cast<int>(it - out.model.stage2_classes.begin());
    stage2_samples.push_back(make_sample(
        out.model.scaler.apply(events[i].features), one_hot(q2, k),
        events[i].id));
  }
  out.model.stage2 =
      run_trainer(stage2_samples, {n, config.hidden2, q2}, config,
                  Rng::mix(config.seed, 2), &out.stage2_minima,
                  &out.stage2_settings);
  return out;
}

BoostResult boost(const TwoStageModel& initial,
                  std::vector<EventRecord> train_events,
                  const datagen::FeatureLayout& layout, const BatchSource& source,
                  int rounds, const TwoStageConfig& config) {
  if (rounds < 1) throw std::invalid_argument("boost needs rounds >= 1");

  BoostResult result;
  result.model = initial;
  for (int r = 0; r < rounds; ++r) {
    const std::vector<EventRecord> batch = source(r);
    int appended = 0;
    int correct = 0;
    for (const auto& e : batch) {
      if (predict(result.model, e.features) == e.class_id) {
        ++correct;
      } else {
        train_events.push_back(e);
        ++appended;
      }
    }
    result.round_accuracies.push_back(
        batch.empty() ? 0.0 : double(correct) / double(batch.size()));
    result.train_sizes.push_back(static_cast<int>(train_events.size()));
    if (appended > 0) {
      std::vector<int> idx(train_events.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
      result.model = train_two_stage(train_events, idx, layout, config).model;
    }
  }

  const std::vector<EventRecord> final_batch = source(rounds);
  if (!final_batch.empty()) {
    int correct = 0;
    for (const auto& e : final_batch)
      if (predict(result.model, e.features) == e.class_id) ++correct;
    result.final_accuracy = double(correct) / double(final_batch.size());
  }
  return result;
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::reporting_rate: return "reporting_rate";
    case SweepAxis::noise: return "noise";
    case SweepAxis::pmu_count: return "pmu_count";
    case SweepAxis::boosting: return "boosting";
    case SweepAxis::trainer: return "trainer";
  }
  return "unknown";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  for (SweepAxis a : {SweepAxis::reporting_rate, SweepAxis::noise,
                      SweepAxis::pmu_count, SweepAxis::boosting,
                      SweepAxis::trainer}) {
    if (to_string(a) == s) return a;
  }
  std::string names;
  for (const auto& n : sweep_axis_names()) names += (names.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown sweep axis '" + s + "' (valid: " + names + ")");
}

std::vector<std::string> sweep_axis_names() {
  return {"reporting_rate", "noise", "pmu_count", "boosting", "trainer"};
}

std::vector<std::pair<std::string, double>> reference_accuracies(SweepAxis a) {
  switch (a) {
    case SweepAxis::reporting_rate:
      return {{"60", 96.0}, {"120", 96.66}};
    case SweepAxis::noise:
      return {{"0.005", 95.33}, {"0.01", 93.11}, {"0.02", 90.22}, {"0.05", 83.77}};
    case SweepAxis::pmu_count:
      return {{"1", 64.66}, {"2", 83.11}, {"3", 92.22}, {"4", 96.0}};
    case SweepAxis::boosting:
      return {{"normal", 96.0}, {"boosting", 96.44}};
    case SweepAxis::trainer:
      return {{"qgs", 83.77}, {"ga", 77.33}, {"ebp", 70.44}};
  }
  return {};
}

namespace {

struct PointSpec {
  std::string setting;
  datagen::ScenarioConfig scenario;
  TwoStageConfig two_stage;
  bool use_boost = false;
};

SweepPoint run_point(const PointSpec& spec, const SweepBase& base) {
  SweepPoint point;
  point.setting = spec.setting;
  const double t0 = now_seconds();
  try {
    datagen::Dataset ds = datagen::build_dataset(spec.scenario);
    if (spec.use_boost) {
      std::vector<EventRecord> train_events;
      for (int i : ds.train_idx) train_events.push_back(ds.events[i]);
      TwoStageModel model =
          train_two_stage(ds.events, ds.train_idx, ds.layout, spec.two_stage)
              .model;
      auto batch_source = [&](int round) {
        datagen::ScenarioConfig batch_cfg = spec.scenario;
        batch_cfg.experiments_per_class = base.boost_batch_per_class;
        batch_cfg.train_quota = base.boost_batch_per_class;
        batch_cfg.seed = Rng::mix(spec.scenario.seed, 0xb0057 + round);
        return datagen::build_dataset(batch_cfg).events;
      };
      BoostResult br = boost(model, std::move(train_events), ds.layout,
                             batch_source, base.boost_rounds, spec.two_stage);
      point.accuracy = br.final_accuracy;
      // Confusion on the final batch for the report.
      ConfusionMatrix cm;
      for (const auto& e : batch_source(base.boost_rounds))
        cm.add(e.class_id, predict(br.model, e.features));
      point.confusion = cm;
    } else {
      TwoStageModel model =
          train_two_stage(ds.events, ds.train_idx, ds.layout, spec.two_stage)
              .model;
      auto [acc, cm] = evaluate(model, ds.events, ds.eval_idx);
      point.accuracy = acc;
      point.confusion = cm;
    }
    point.confusion_digest = point.confusion.digest();
  } catch (const std::exception& e) {
    point.failed = true;
    point.error = e.what();
  }
  point.runtime_seconds = now_seconds() - t0;
  return point;
}

template <typename F>
double timed(F&& f) {
  const double t0 = now_seconds();
  f();
  return now_seconds() - t0;
}

}  // namespace

SweepReport sweep(SweepAxis axis, const SweepBase& base, Trainer trainer,
                  int jobs) {
  SweepReport report;
  report.axis = axis;
  std::vector<PointSpec> specs;

  auto make_spec = [&](std::string setting) {
    PointSpec s;
    s.setting = std::move(setting);
    s.scenario = base.scenario;
    s.two_stage = base.two_stage;
    s.two_stage.trainer = trainer;
    return s;
  };

  switch (axis) {
    case SweepAxis::reporting_rate:
      for (int rate : {60, 120}) {
        PointSpec s = make_spec(std::to_string(rate));
        s.scenario.reporting_rate = rate;
        // Hidden sizes used for the reporting-rate study.
        s.two_stage.hidden1 = 10;
        s.two_stage.hidden2 = 4;
        specs.push_back(std::move(s));
      }
      break;
    case SweepAxis::noise:
      for (double var : {0.005, 0.01, 0.02, 0.05}) {
        std::ostringstream os;
        os << var;
        PointSpec s = make_spec(os.str());
        s.scenario.noise_variance = var;
        specs.push_back(std::move(s));
      }
      break;
    case SweepAxis::pmu_count: {
      const std::vector<std::vector<int>> sets = {
          {4}, {3, 4}, {2, 3, 4}, {1, 2, 3, 4}};
      for (const auto& pmus : sets) {
        PointSpec s = make_spec(std::to_string(pmus.size()));
        s.scenario.active_pmus = pmus;
        specs.push_back(std::move(s));
      }
      break;
    }
    case SweepAxis::boosting:
      for (bool boosted : {false, true}) {
        PointSpec s = make_spec(boosted ? "boosting" : "normal");
        s.use_boost = boosted;
        specs.push_back(std::move(s));
      }
      break;
    case SweepAxis::trainer: {
      // Comparison runs at high measurement noise with wall-clock budgets
      // matched to the qgs run; handled sequentially below.
      PointSpec q = make_spec("qgs");
      q.scenario.noise_variance = 0.05;
      q.two_stage.trainer = Trainer::qgs;
      SweepPoint qgs_point = run_point(q, base);
      report.points.push_back(qgs_point);

      datagen::Dataset ds = datagen::build_dataset(q.scenario);
      const double budget = std::max(qgs_point.runtime_seconds, 1.0);

      for (Trainer t : {Trainer::ga, Trainer::ebp}) {
        PointSpec s = make_spec(to_string(t));
        s.scenario.noise_variance = 0.05;
        s.two_stage.trainer = t;

        // Calibrate the iteration count to the qgs wall-clock budget.
        if (t == Trainer::ga) {
          TwoStageConfig probe = s.two_stage;
          probe.ga.generations = 2;
          const double dt = timed([&] {
            train_two_stage(ds.events, ds.train_idx, ds.layout, probe);
          });
          const double per_gen = std::max(dt / 2.0, 1e-4);
          s.two_stage.ga.generations = std::clamp(
              static_cast<int>(0.8 * budget / per_gen), 4, 100000);
        } else {
          TwoStageConfig probe = s.two_stage;
          probe.ebp.epochs = 20;
          const double dt = timed([&] {
            train_two_stage(ds.events, ds.train_idx, ds.layout, probe);
          });
          const double per_epoch = std::max(dt / 20.0, 1e-6);
          s.two_stage.ebp.epochs = std::clamp(
              static_cast<int>(0.8 * budget / per_epoch), 50, 2000000);
        }
        report.points.push_back(run_point(s, base));
      }
      return report;
    }
  }

  report.points.resize(specs.size());
  if (jobs <= 1 || specs.size() <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i)
      report.points[i] = run_point(specs[i], base);
    return report;
  }

  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= specs.size()) return;
        i = next++;
      }
      SweepPoint p = run_point(specs[i], base);
      std::lock_guard lock(mu);
      report.points[i] = std::move(p);
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min<int>(jobs, static_cast<int>(specs.size()));
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return report;
}

}  // namespace qgsnet::classify
