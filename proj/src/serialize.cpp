#include "qgsnet/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qgsnet/digest.hpp"

namespace qgsnet::serialize {

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw ConfigError(path + " must be an array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ConfigError(path + " must hold numbers");
    v[static_cast<int>(i)] = arr[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, const std::string& path) {
  if (!rows.is_array() || rows.empty())
    throw ConfigError(path + " must be a nonempty array of rows");
  const std::size_t cols = rows[0].size();
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || rows[r].size() != cols)
      throw ConfigError(path + " rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c].get<double>();
  }
  return m;
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("invalid value for '") + key + "'");
  }
}

std::vector<int> int_list(const json& obj, const char* key,
                          std::vector<int> fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw ConfigError(path + "." + key + " must be an array");
  std::vector<int> out;
  for (const auto& v : arr) {
    if (!v.is_number_integer()) throw ConfigError(path + "." + key + " must hold integers");
    out.push_back(v.get<int>());
  }
  return out;
}

std::vector<double> double_list(const json& obj, const char* key,
                                std::vector<double> fallback,
                                const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw ConfigError(path + "." + key + " must be an array");
  std::vector<double> out;
  for (const auto& v : arr) {
    if (!v.is_number()) throw ConfigError(path + "." + key + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

int expect_version(const json& j, const char* what) {
  if (!j.contains("schema_version"))
    throw ConfigError(std::string(what) + " is missing schema_version");
  const int v = j.at("schema_version").get<int>();
  if (v != kSchemaVersion)
    throw ConfigError(std::string(what) + " has unsupported schema_version " +
                      std::to_string(v));
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, ptr);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key))
      throw ConfigError("unknown key '" + path + "." + key + "'");
  }
}

json to_json(const qgs::QgsSettings& s) {
  return json{{"abs_tol", s.abs_tol},
              {"rel_tol", s.rel_tol},
              {"grad_tol", s.grad_tol},
              {"max_time", s.max_time},
              {"target_minima", s.target_minima},
              {"max_attempts", s.max_attempts},
              {"escape_eps", s.escape_eps},
              {"backward_horizon", s.backward_horizon},
              {"dedup_dist", s.dedup_dist},
              {"seed", s.seed}};
}

qgs::QgsSettings qgs_settings_from_json(const json& j, const std::string& path) {
  check_keys(j,
             {"abs_tol", "rel_tol", "grad_tol", "max_time", "target_minima",
              "max_attempts", "escape_eps", "backward_horizon", "dedup_dist",
              "seed"},
             path);
  qgs::QgsSettings s;
  s.abs_tol = get_or(j, "abs_tol", s.abs_tol);
  s.rel_tol = get_or(j, "rel_tol", s.rel_tol);
  s.grad_tol = get_or(j, "grad_tol", s.grad_tol);
  s.max_time = get_or(j, "max_time", s.max_time);
  s.target_minima = get_or(j, "target_minima", s.target_minima);
  s.max_attempts = get_or(j, "max_attempts", s.max_attempts);
  s.escape_eps = get_or(j, "escape_eps", s.escape_eps);
  s.backward_horizon = get_or(j, "backward_horizon", s.backward_horizon);
  s.dedup_dist = get_or(j, "dedup_dist", s.dedup_dist);
  s.seed = get_or(j, "seed", s.seed);
  return s;
}

json to_json(const qgs::MinimaSet& set, const qgs::QgsSettings& settings) {
  json items = json::array();
  for (const auto& eq : set.items) {
    items.push_back(json{{"point", vector_to_json(eq.point)},
                         {"cost", eq.cost},
                         {"grad_norm", eq.grad_norm},
                         {"stability", qgs::to_string(eq.stability)},
                         {"leading_eigenvalue", eq.leading_eigenvalue}});
  }
  return json{{"schema_version", kSchemaVersion},
              {"settings", to_json(settings)},
              {"items", std::move(items)},
              {"attempts_used", set.attempts_used}};
}

qgs::MinimaSet minima_from_json(const json& j) {
  expect_version(j, "minima file");
  qgs::MinimaSet set;
  set.attempts_used = get_or(j, "attempts_used", 0);
  for (const auto& item : j.at("items")) {
    qgs::Equilibrium eq;
    eq.point = vector_from_json(item.at("point"), "items.point");
    eq.cost = item.at("cost").get<double>();
    eq.grad_norm = item.at("grad_norm").get<double>();
    eq.stability = qgs::stability_from_string(item.at("stability").get<std::string>());
    eq.leading_eigenvalue = get_or(item, "leading_eigenvalue", 0.0);
    set.items.push_back(std::move(eq));
  }
  return set;
}

json to_json(const training::TrainedModel& model, std::uint64_t feature_digest,
             const std::string& state_policy) {
  return json{
      {"schema_version", kSchemaVersion},
      {"shape",
       {{"n", model.shape.n}, {"m", model.shape.hidden}, {"q", model.shape.q}}},
      {"x", vector_to_json(network::flatten(model.parameters))},
      {"state_policy", state_policy},
      {"feature_config_digest", digest_hex(feature_digest)},
      {"training",
       {{"method", model.provenance.method},
        {"config_digest", digest_hex(model.provenance.config_digest)},
        {"seed", model.provenance.seed},
        {"minima_count", model.provenance.minima_count},
        {"validation_accuracy", model.validation_accuracy},
        {"selected_minimum_cost", model.selected_minimum_cost}}}};
}

training::TrainedModel trained_model_from_json(const json& j) {
  expect_version(j, "model file");
  training::TrainedModel model;
  const json& shape = j.at("shape");
  model.shape = {shape.at("n").get<int>(), shape.at("m").get<int>(),
                 shape.at("q").get<int>()};
  model.parameters = network::unflatten(
      vector_from_json(j.at("x"), "model.x"), model.shape);
  const json& tr = j.at("training");
  model.provenance.method = tr.at("method").get<std::string>();
  model.provenance.config_digest =
      std::stoull(tr.at("config_digest").get<std::string>(), nullptr, 16);
  model.provenance.seed = tr.at("seed").get<std::uint64_t>();
  model.provenance.minima_count = tr.at("minima_count").get<int>();
  model.validation_accuracy = tr.at("validation_accuracy").get<double>();
  model.selected_minimum_cost = get_or(tr, "selected_minimum_cost", 0.0);
  return model;
}

json to_json(const classify::TwoStageModel& model) {
  json stage2_classes = json::array();
  for (int c : model.stage2_classes) stage2_classes.push_back(c);
  return json{{"schema_version", kSchemaVersion},
              {"layout_digest", digest_hex(model.layout_digest)},
              {"stage2_classes", std::move(stage2_classes)},
              {"scaler",
               {{"mean", vector_to_json(model.scaler.mean)},
                {"scale", vector_to_json(model.scaler.scale)}}},
              {"stage1", to_json(model.stage1, model.layout_digest)},
              {"stage2", to_json(model.stage2, model.layout_digest)}};
}

classify::TwoStageModel two_stage_from_json(const json& j) {
  expect_version(j, "two-stage model file");
  classify::TwoStageModel model;
  model.layout_digest =
      std::stoull(j.at("layout_digest").get<std::string>(), nullptr, 16);
  for (const auto& c : j.at("stage2_classes"))
    model.stage2_classes.push_back(c.get<int>());
  model.scaler.mean = vector_from_json(j.at("scaler").at("mean"), "scaler.mean");
  model.scaler.scale =
      vector_from_json(j.at("scaler").at("scale"), "scaler.scale");
  model.stage1 = trained_model_from_json(j.at("stage1"));
  model.stage2 = trained_model_from_json(j.at("stage2"));
  return model;
}

json to_json(const datagen::ScenarioConfig& config, bool include_gain_table) {
  json j{{"loading_levels", config.loading_levels},
         {"load_change_percents", config.load_change_percents},
         {"experiments_per_class", config.experiments_per_class},
         {"train_quota", config.train_quota},
         {"noise_variance", config.noise_variance},
         {"active_pmus", config.active_pmus},
         {"reporting_rate", config.reporting_rate},
         {"w_pre", config.w_pre},
         {"w_dur", config.w_dur},
         {"raw_uses_voltage", config.raw_uses_voltage},
         {"emit_raw_streams", config.emit_raw_streams},
         {"seed", config.seed}};
  if (include_gain_table && config.gain_table.size() != 0)
    j["gain_table"] = matrix_to_json(config.gain_table);
  return j;
}

datagen::ScenarioConfig scenario_from_json(const json& j,
                                           const std::string& path) {
  check_keys(j,
             {"loading_levels", "load_change_percents", "experiments_per_class",
              "train_quota", "noise_variance", "active_pmus", "reporting_rate",
              "w_pre", "w_dur", "raw_uses_voltage", "emit_raw_streams",
              "gain_table", "seed"},
             path);
  datagen::ScenarioConfig c;
  c.loading_levels = double_list(j, "loading_levels", c.loading_levels, path);
  c.load_change_percents =
      double_list(j, "load_change_percents", c.load_change_percents, path);
  c.experiments_per_class =
      get_or(j, "experiments_per_class", c.experiments_per_class);
  c.train_quota = get_or(j, "train_quota", c.train_quota);
  c.noise_variance = get_or(j, "noise_variance", c.noise_variance);
  c.active_pmus = int_list(j, "active_pmus", c.active_pmus, path);
  c.reporting_rate = get_or(j, "reporting_rate", c.reporting_rate);
  c.w_pre = get_or(j, "w_pre", c.w_pre);
  c.w_dur = get_or(j, "w_dur", c.w_dur);
  c.raw_uses_voltage = get_or(j, "raw_uses_voltage", c.raw_uses_voltage);
  c.emit_raw_streams = get_or(j, "emit_raw_streams", c.emit_raw_streams);
  c.seed = get_or(j, "seed", c.seed);
  if (j.contains("gain_table"))
    c.gain_table = matrix_from_json(j.at("gain_table"), path + ".gain_table");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

json manifest_json(const datagen::Dataset& ds, std::uint64_t dataset_digest) {
  json train_ids = json::array();
  json eval_ids = json::array();
  for (int i : ds.train_idx) train_ids.push_back(ds.events[i].id);
  for (int i : ds.eval_idx) eval_ids.push_back(ds.events[i].id);
  return json{{"schema_version", kSchemaVersion},
              {"digest", digest_hex(dataset_digest)},
              {"config", to_json(ds.config, false)},
              {"gain_table", matrix_to_json(ds.config.effective_gain_table())},
              {"layout_digest", digest_hex(ds.layout.digest())},
              {"feature_count", ds.feature_dim()},
              {"split",
               {{"train_ids", std::move(train_ids)},
                {"eval_ids", std::move(eval_ids)}}}};
}

std::string features_csv(const datagen::Dataset& ds) {
  std::ostringstream os;
  const int dim = ds.feature_dim();
  os << "event_id,class";
  for (int i = 0; i < dim; ++i) os << ",f_" << i;
  os << '\n';
  for (const auto& e : ds.events) {
    os << e.id << ',' << e.class_id;
    for (int i = 0; i < dim; ++i) os << ',' << format_double(e.features[i]);
    os << '\n';
  }
  return os.str();
}

std::string raw_streams_csv(const datagen::Dataset& ds) {
  std::ostringstream os;
  os << "event_id,pmu,channel,sample,value\n";
  std::map<int, int> per_class_counter;
  for (const auto& e : ds.events) {
    const int k = per_class_counter[e.class_id]++;
    const datagen::PmuStream stream =
        datagen::stream_for_event(ds.config, e.class_id, k);
    for (std::size_t p = 0; p < stream.pmu_ids.size(); ++p) {
      const auto& ch = stream.channels[p];
      const std::pair<const char*, const Eigen::VectorXd*> channels[] = {
          {"vm", &ch.vm}, {"va", &ch.va}, {"im", &ch.im}, {"ia", &ch.ia}};
      for (const auto& [name, values] : channels) {
        for (int t = 0; t < values->size(); ++t) {
          os << e.id << ',' << stream.pmu_ids[p] << ',' << name << ',' << t
             << ',' << format_double((*values)[t]) << '\n';
        }
      }
    }
  }
  return os.str();
}

datagen::Dataset dataset_from_files(const std::filesystem::path& features_path,
                                    const std::filesystem::path& manifest_path) {
  const json manifest = read_json_file(manifest_path);
  expect_version(manifest, "manifest");

  datagen::Dataset ds;
  ds.config = scenario_from_json(manifest.at("config"), "manifest.config");
  if (manifest.contains("gain_table"))
    ds.config.gain_table =
        matrix_from_json(manifest.at("gain_table"), "manifest.gain_table");
  ds.layout = ds.config.layout();

  const std::string text = read_text_file(features_path);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw IoError("features file is empty");
  const int dim = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 1;
  if (dim < 1) throw IoError("features header is malformed");

  std::map<std::string, int> index_of;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    datagen::EventRecord rec;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    const char* comma = std::find(p, end, ',');
    rec.id.assign(p, comma);
    p = comma + 1;
    comma = std::find(p, end, ',');
    auto [ptr, ec] = std::from_chars(p, comma, rec.class_id);
    if (ec != std::errc{}) throw IoError("bad class id in features row");
    rec.features.resize(dim);
    for (int i = 0; i < dim; ++i) {
      p = comma + 1;
      comma = std::find(p, end, ',');
      auto [fptr, fec] = std::from_chars(p, comma, rec.features[i]);
      if (fec != std::errc{}) throw IoError("bad feature value in row " + rec.id);
    }
    index_of[rec.id] = static_cast<int>(ds.events.size());
    ds.events.push_back(std::move(rec));
  }

  auto resolve = [&](const json& ids, std::vector<int>& out) {
    for (const auto& id : ids) {
      const auto it = index_of.find(id.get<std::string>());
      if (it == index_of.end())
        throw IoError("manifest references unknown event id " +
                      id.get<std::string>());
      out.push_back(it->second);
    }
  };
  resolve(manifest.at("split").at("train_ids"), ds.train_idx);
  resolve(manifest.at("split").at("eval_ids"), ds.eval_idx);
  return ds;
}

std::string confusion_csv(const classify::ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "# counts\n";
  os << "target\\predicted";
  for (int c = 1; c <= datagen::kNumClasses; ++c) os << ',' << c;
  os << '\n';
  for (int r = 0; r < datagen::kNumClasses; ++r) {
    os << (r + 1);
    for (int c = 0; c < datagen::kNumClasses; ++c) os << ',' << cm.counts(r, c);
    os << '\n';
  }
  os << "# row_percentages\n";
  os << "target\\predicted";
  for (int c = 1; c <= datagen::kNumClasses; ++c) os << ',' << c;
  os << '\n';
  const Eigen::MatrixXd pct = cm.row_percentages();
  for (int r = 0; r < datagen::kNumClasses; ++r) {
    os << (r + 1);
    for (int c = 0; c < datagen::kNumClasses; ++c)
      os << ',' << format_double(pct(r, c)) << '%';
    os << '\n';
  }
  return os.str();
}

json confusion_json(const classify::ConfusionMatrix& cm) {
  json rows = json::array();
  for (int r = 0; r < datagen::kNumClasses; ++r) {
    json row = json::array();
    for (int c = 0; c < datagen::kNumClasses; ++c) row.push_back(cm.counts(r, c));
    rows.push_back(std::move(row));
  }
  return json{{"counts", std::move(rows)},
              {"total", cm.total()},
              {"correct", cm.correct()},
              {"accuracy", cm.accuracy()},
              {"digest", digest_hex(cm.digest())}};
}

json sweep_report_json(const classify::SweepReport& report) {
  json points = json::array();
  for (const auto& p : report.points) {
    json jp{{"setting", p.setting},
            {"accuracy", p.accuracy},
            {"runtime_seconds", p.runtime_seconds},
            {"failed", p.failed}};
    if (p.failed) {
      jp["error"] = p.error;
    } else {
      jp["confusion"] = confusion_json(p.confusion);
    }
    points.push_back(std::move(jp));
  }
  json refs = json::array();
  for (const auto& [setting, acc] : classify::reference_accuracies(report.axis))
    refs.push_back(json{{"setting", setting}, {"accuracy_percent", acc}});
  return json{{"schema_version", kSchemaVersion},
              {"axis", classify::to_string(report.axis)},
              {"points", std::move(points)},
              {"reference_accuracies_percent", std::move(refs)}};
}

std::string sweep_report_csv(const classify::SweepReport& report) {
  std::ostringstream os;
  os << "setting,accuracy,runtime_seconds,failed,error\n";
  for (const auto& p : report.points) {
    std::string err = p.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << p.setting << ',' << format_double(p.accuracy) << ','
       << format_double(p.runtime_seconds) << ',' << (p.failed ? 1 : 0) << ','
       << err << '\n';
  }
  return os.str();
}

void RunConfig::derive_seeds() {
  dataset.seed = Rng::mix(seed, 0xd474);
  two_stage.seed = Rng::mix(seed, 0x7e57);
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j,
             {"seed", "dataset", "two_stage", "trainer", "train", "qgs", "ga",
              "ebp", "sweep", "boost"},
             "config");
  RunConfig c;
  c.seed = get_or(j, "seed", c.seed);
  if (j.contains("dataset"))
    c.dataset = scenario_from_json(j.at("dataset"), "config.dataset");

  if (j.contains("two_stage")) {
    const json& ts = j.at("two_stage");
    check_keys(ts, {"hidden1", "hidden2", "stage2_classes"}, "config.two_stage");
    c.two_stage.hidden1 = get_or(ts, "hidden1", c.two_stage.hidden1);
    c.two_stage.hidden2 = get_or(ts, "hidden2", c.two_stage.hidden2);
    c.two_stage.stage2_classes = int_list(ts, "stage2_classes",
                                          c.two_stage.stage2_classes,
                                          "config.two_stage");
  }
  if (j.contains("trainer"))
    c.two_stage.trainer =
        classify::trainer_from_string(j.at("trainer").get<std::string>());

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t,
               {"init_sigma", "bound", "target_minima", "validation_fraction",
                "grad_tol_fraction"},
               "config.train");
    auto& tc = c.two_stage.train;
    tc.init_sigma = get_or(t, "init_sigma", tc.init_sigma);
    tc.bound = get_or(t, "bound", tc.bound);
    tc.target_minima = get_or(t, "target_minima", tc.target_minima);
    tc.validation_fraction =
        get_or(t, "validation_fraction", tc.validation_fraction);
    tc.grad_tol_fraction = get_or(t, "grad_tol_fraction", tc.grad_tol_fraction);
  }
  if (j.contains("qgs"))
    c.two_stage.qgs_settings = qgs_settings_from_json(j.at("qgs"), "config.qgs");

  if (j.contains("ga")) {
    const json& g = j.at("ga");
    check_keys(g,
               {"population_size", "generations", "elitism", "mutation_sigma",
                "bound", "validation_fraction"},
               "config.ga");
    auto& gc = c.two_stage.ga;
    gc.population_size = get_or(g, "population_size", gc.population_size);
    gc.generations = get_or(g, "generations", gc.generations);
    gc.elitism = get_or(g, "elitism", gc.elitism);
    gc.mutation_sigma = get_or(g, "mutation_sigma", gc.mutation_sigma);
    gc.bound = get_or(g, "bound", gc.bound);
    gc.validation_fraction =
        get_or(g, "validation_fraction", gc.validation_fraction);
  }
  if (j.contains("ebp")) {
    const json& e = j.at("ebp");
    check_keys(e,
               {"learning_rate", "momentum", "epochs", "bound",
                "validation_fraction"},
               "config.ebp");
    auto& ec = c.two_stage.ebp;
    ec.learning_rate = get_or(e, "learning_rate", ec.learning_rate);
    ec.momentum = get_or(e, "momentum", ec.momentum);
    ec.epochs = get_or(e, "epochs", ec.epochs);
    ec.bound = get_or(e, "bound", ec.bound);
    ec.validation_fraction =
        get_or(e, "validation_fraction", ec.validation_fraction);
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"axis"}, "config.sweep");
    c.sweep_axis = get_or<std::string>(s, "axis", c.sweep_axis);
  }
  if (j.contains("boost")) {
    const json& b = j.at("boost");
    check_keys(b, {"rounds", "batch_events_per_class"}, "config.boost");
    c.boost_rounds = get_or(b, "rounds", c.boost_rounds);
    c.boost_batch_per_class =
        get_or(b, "batch_events_per_class", c.boost_batch_per_class);
  }

  c.derive_seeds();
  try {
    c.two_stage.validate();
    c.two_stage.train.validate();
    c.two_stage.qgs_settings.validate();
    c.two_stage.ga.validate();
    c.two_stage.ebp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

json to_json(const RunConfig& config) {
  json ts{{"hidden1", config.two_stage.hidden1},
          {"hidden2", config.two_stage.hidden2},
          {"stage2_classes", config.two_stage.stage2_classes}};
  const auto& tc = config.two_stage.train;
  const auto& gc = config.two_stage.ga;
  const auto& ec = config.two_stage.ebp;
  return json{
      {"seed", config.seed},
      {"dataset", to_json(config.dataset, true)},
      {"two_stage", std::move(ts)},
      {"trainer", classify::to_string(config.two_stage.trainer)},
      {"train",
       {{"init_sigma", tc.init_sigma},
        {"bound", tc.bound},
        {"target_minima", tc.target_minima},
        {"validation_fraction", tc.validation_fraction},
        {"grad_tol_fraction", tc.grad_tol_fraction}}},
      {"qgs", to_json(config.two_stage.qgs_settings)},
      {"ga",
       {{"population_size", gc.population_size},
        {"generations", gc.generations},
        {"elitism", gc.elitism},
        {"mutation_sigma", gc.mutation_sigma},
        {"bound", gc.bound},
        {"validation_fraction", gc.validation_fraction}}},
      {"ebp",
       {{"learning_rate", ec.learning_rate},
        {"momentum", ec.momentum},
        {"epochs", ec.epochs},
        {"bound", ec.bound},
        {"validation_fraction", ec.validation_fraction}}},
      {"sweep", {{"axis", config.sweep_axis}}},
      {"boost",
       {{"rounds", config.boost_rounds},
        {"batch_events_per_class", config.boost_batch_per_class}}}};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw ConfigError("invalid JSON in " + path.string());
  return j;
}

}  // namespace qgsnet::serialize
