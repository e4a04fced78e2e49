#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ckd/anneal_select.hpp"
#include "ckd/baselines.hpp"
#include "ckd/error.hpp"
#include "ckd/evaluate.hpp"
#include "ckd/explain.hpp"
#include "ckd/ingest.hpp"
#include "ckd/io.hpp"
#include "ckd/model_io.hpp"
#include "ckd/oblivious_boost.hpp"
#include "ckd/outlier_cuckoo.hpp"
#include "ckd/preprocess.hpp"
#include "ckd/resample.hpp"
#include "ckd/rng.hpp"
#include "ckd/toml.hpp"

namespace ckd {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::string dataset_path;
  std::string dataset_format = "arff";
  std::string target = "class";

  std::uint64_t master_seed = 1;
  std::string out_dir = "out";
  bool leakage_safe = false;

  std::size_t impute_k = 5;

  bool cuckoo_enabled = true;
  CuckooConfig cuckoo;  // seed is derived from master_seed at run time

  bool anova_enabled = true;
  double anova_alpha = 0.05;

  bool sa_enabled = true;
  SAConfig sa;  // seed derived at run time

  double test_fraction = 0.2;

  bool smote_enabled = true;
  std::size_t smote_target = 450;
  std::size_t smote_k = 5;

  std::size_t cv_folds = 5;
  std::size_t logreg_epochs = 300;
  std::size_t mlp_epochs = 120;
  double mlp_l2 = 0.01;
  std::size_t rf_min_leaf = 1;
  std::size_t boost_iterations = 200;
  double boost_l2_leaf_reg = 3.0;
  std::size_t boost_border_count = 32;

  GridSpec grid_logreg;
  GridSpec grid_mlp;
  GridSpec grid_rf;
  GridSpec grid_boost;

  void validate() const {
    require(!dataset_path.empty(), "config", "dataset.path is required");
    parse_format(dataset_format);
    require(impute_k >= 1, "config", "impute.k must be >= 1");
    cuckoo.validate();
    require(anova_alpha > 0.0 && anova_alpha <= 1.0, "config",
            "anova.alpha must be in (0,1]");
    sa.validate();
    require(test_fraction > 0.0 && test_fraction < 1.0, "config",
            "split.test_fraction must be in (0,1)");
    require(cv_folds >= 2, "config", "cv.folds must be >= 2");
    require(boost_border_count >= 1, "config", "models.boost.border_count must be >= 1");
    auto check_grid = [](const GridSpec& g, const std::string& family,
                         const std::set<std::string>& allowed) {
      require(!g.params.empty(), "config", "grid." + family + " must not be empty");
      for (const auto& [key, values] : g.params) {
        require(allowed.count(key) == 1, "config",
                "grid." + family + " has unknown hyperparameter '" + key + "'");
        require(!values.empty(), "config",
                "grid." + family + "." + key + " must list at least one value");
      }
    };
    check_grid(grid_logreg, "logreg", {"l2", "lr"});
    check_grid(grid_mlp, "mlp", {"hidden", "lr"});
    check_grid(grid_rf, "rf", {"trees", "depth"});
    check_grid(grid_boost, "boost", {"learning_rate", "depth"});
  }
};

inline PipelineConfig default_config() {
  PipelineConfig c;
  c.grid_logreg.params = {{"l2", {0.001, 0.01, 0.1}}, {"lr", {0.01, 0.1}}};
  c.grid_mlp.params = {{"hidden", {16, 32, 64}}, {"lr", {0.001, 0.01}}};
  c.grid_rf.params = {{"trees", {100, 200}}, {"depth", {6, 10, -1}}};  // -1 = no limit
  c.grid_boost.params = {{"learning_rate", {0.005, 0.01, 0.05}}, {"depth", {6, 8}}};
  return c;
}

namespace detail {

inline json grid_to_json(const GridSpec& g) {
  json j = json::object();
  for (const auto& [key, values] : g.params) j[key] = values;
  return j;
}

inline GridSpec grid_from_json(const json& j, const std::string& where) {
  GridSpec g;
  require(j.is_object(), "config", where + " must be a table of value lists");
  for (const auto& [key, values] : j.items()) {
    require(values.is_array(), "config", where + "." + key + " must be an array");
    g.params[key] = values.get<std::vector<double>>();
  }
  return g;
}

// Strict JSON object reader: reject any key outside the allowed set.
class JsonScope {
public:
  JsonScope(const json& j, std::string where, const std::set<std::string>& allowed)
      : j_(j), where_(std::move(where)) {
    require(j_.is_object(), "config", where_ + " must be an object");
    for (const auto& [key, value] : j_.items())
      require(allowed.count(key) == 1, "config",
              where_ + " has unknown key '" + key + "'");
  }
  bool has(const std::string& key) const { return j_.contains(key); }
  const json& at(const std::string& key) const {
    require(has(key), "config", where_ + " is missing key '" + key + "'");
    return j_.at(key);
  }
  template <typename T>
  void opt(const std::string& key, T& target) const {
    if (has(key)) target = j_.at(key).get<T>();
  }

private:
  const json& j_;
  std::string where_;
};

}  // namespace detail

inline json config_to_json(const PipelineConfig& c) {
  json j;
  j["dataset"] = {{"path", c.dataset_path},
                  {"format", c.dataset_format},
                  {"target", c.target}};
  j["run"] = {{"master_seed", c.master_seed},
              {"out_dir", c.out_dir},
              {"leakage_safe", c.leakage_safe}};
  j["impute"] = {{"k", c.impute_k}};
  j["cuckoo"] = {{"enabled", c.cuckoo_enabled},
                 {"n_nests", c.cuckoo.n_nests},
                 {"pa", c.cuckoo.pa},
                 {"levy_beta", c.cuckoo.levy_beta},
                 {"step_scale", c.cuckoo.step_scale},
                 {"max_iter", c.cuckoo.max_iter},
                 {"penalty_weight", c.cuckoo.penalty_weight}};
  j["anova"] = {{"enabled", c.anova_enabled}, {"alpha", c.anova_alpha}};
  j["sa"] = {{"enabled", c.sa_enabled},
             {"t0", c.sa.t0},
             {"cooling", c.sa.cooling},
             {"max_iter", c.sa.max_iter},
             {"feature_penalty", c.sa.feature_penalty},
             {"probe_folds", c.sa.probe_folds}};
  j["split"] = {{"test_fraction", c.test_fraction}};
  j["smote"] = {{"enabled", c.smote_enabled},
                {"target_per_class", c.smote_target},
                {"k_neighbors", c.smote_k}};
  j["cv"] = {{"folds", c.cv_folds}};
  j["models"] = {{"logreg", {{"epochs", c.logreg_epochs}}},
                 {"mlp", {{"epochs", c.mlp_epochs}, {"l2", c.mlp_l2}}},
                 {"rf", {{"min_leaf", c.rf_min_leaf}}},
                 {"boost",
                  {{"iterations", c.boost_iterations},
                   {"l2_leaf_reg", c.boost_l2_leaf_reg},
                   {"border_count", c.boost_border_count}}}};
  j["grid"] = {{"logreg", detail::grid_to_json(c.grid_logreg)},
               {"mlp", detail::grid_to_json(c.grid_mlp)},
               {"rf", detail::grid_to_json(c.grid_rf)},
               {"boost", detail::grid_to_json(c.grid_boost)}};
  return j;
}

inline PipelineConfig config_from_json(const json& j) {
  PipelineConfig c = default_config();
  const detail::JsonScope root(j, "config",
                               {"dataset", "run", "impute", "cuckoo", "anova", "sa",
                                "split", "smote", "cv", "models", "grid"});
  {
    const detail::JsonScope s(root.at("dataset"), "dataset",
                              {"path", "format", "target"});
    c.dataset_path = s.at("path").get<std::string>();
    s.opt("format", c.dataset_format);
    s.opt("target", c.target);
  }
  if (root.has("run")) {
    const detail::JsonScope s(root.at("run"), "run",
                              {"master_seed", "out_dir", "leakage_safe"});
    s.opt("master_seed", c.master_seed);
    s.opt("out_dir", c.out_dir);
    s.opt("leakage_safe", c.leakage_safe);
  }
  if (root.has("impute")) {
    const detail::JsonScope s(root.at("impute"), "impute", {"k"});
    s.opt("k", c.impute_k);
  }
  if (root.has("cuckoo")) {
    const detail::JsonScope s(root.at("cuckoo"), "cuckoo",
                              {"enabled", "n_nests", "pa", "levy_beta", "step_scale",
                               "max_iter", "penalty_weight"});
    s.opt("enabled", c.cuckoo_enabled);
    s.opt("n_nests", c.cuckoo.n_nests);
    s.opt("pa", c.cuckoo.pa);
    s.opt("levy_beta", c.cuckoo.levy_beta);
    s.opt("step_scale", c.cuckoo.step_scale);
    s.opt("max_iter", c.cuckoo.max_iter);
    s.opt("penalty_weight", c.cuckoo.penalty_weight);
  }
  if (root.has("anova")) {
    const detail::JsonScope s(root.at("anova"), "anova", {"enabled", "alpha"});
    s.opt("enabled", c.anova_enabled);
    s.opt("alpha", c.anova_alpha);
  }
  if (root.has("sa")) {
    const detail::JsonScope s(root.at("sa"), "sa",
                              {"enabled", "t0", "cooling", "max_iter",
                               "feature_penalty", "probe_folds"});
    s.opt("enabled", c.sa_enabled);
    s.opt("t0", c.sa.t0);
    s.opt("cooling", c.sa.cooling);
    s.opt("max_iter", c.sa.max_iter);
    s.opt("feature_penalty", c.sa.feature_penalty);
    s.opt("probe_folds", c.sa.probe_folds);
  }
  if (root.has("split")) {
    const detail::JsonScope s(root.at("split"), "split", {"test_fraction"});
    s.opt("test_fraction", c.test_fraction);
  }
  if (root.has("smote")) {
    const detail::JsonScope s(root.at("smote"), "smote",
                              {"enabled", "target_per_class", "k_neighbors"});
    s.opt("enabled", c.smote_enabled);
    s.opt("target_per_class", c.smote_target);
    s.opt("k_neighbors", c.smote_k);
  }
  if (root.has("cv")) {
    const detail::JsonScope s(root.at("cv"), "cv", {"folds"});
    s.opt("folds", c.cv_folds);
  }
  if (root.has("models")) {
    const detail::JsonScope s(root.at("models"), "models",
                              {"logreg", "mlp", "rf", "boost"});
    if (s.has("logreg")) {
      const detail::JsonScope m(s.at("logreg"), "models.logreg", {"epochs"});
      m.opt("epochs", c.logreg_epochs);
    }
    if (s.has("mlp")) {
      const detail::JsonScope m(s.at("mlp"), "models.mlp", {"epochs", "l2"});
      m.opt("epochs", c.mlp_epochs);
      m.opt("l2", c.mlp_l2);
    }
    if (s.has("rf")) {
      const detail::JsonScope m(s.at("rf"), "models.rf", {"min_leaf"});
      m.opt("min_leaf", c.rf_min_leaf);
    }
    if (s.has("boost")) {
      const detail::JsonScope m(s.at("boost"), "models.boost",
                                {"iterations", "l2_leaf_reg", "border_count"});
      m.opt("iterations", c.boost_iterations);
      m.opt("l2_leaf_reg", c.boost_l2_leaf_reg);
      m.opt("border_count", c.boost_border_count);
    }
  }
  if (root.has("grid")) {
    const detail::JsonScope s(root.at("grid"), "grid", {"logreg", "mlp", "rf", "boost"});
    if (s.has("logreg"))
      c.grid_logreg = detail::grid_from_json(s.at("logreg"), "grid.logreg");
    if (s.has("mlp")) c.grid_mlp = detail::grid_from_json(s.at("mlp"), "grid.mlp");
    if (s.has("rf")) c.grid_rf = detail::grid_from_json(s.at("rf"), "grid.rf");
    if (s.has("boost")) c.grid_boost = detail::grid_from_json(s.at("boost"), "grid.boost");
  }
  c.validate();
  return c;
}

// TOML -> flattened keys -> the same strict structure as the JSON path.
inline PipelineConfig config_from_toml(const std::string& text) {
  const TomlTable table = parse_toml(text);
  json j = json::object();
  for (const auto& [key, value] : table) {
    // Split "a.b.c" into nested objects.
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : key) {
      if (ch == '.') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    parts.push_back(cur);
    json* node = &j;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
      node = &(*node)[parts[i]];
    }
    auto to_json_value = [](const TomlValue& v, auto&& self) -> json {
      switch (v.kind) {
        case TomlValue::Kind::string:
          return v.str;
        case TomlValue::Kind::boolean:
          return v.boolean;
        case TomlValue::Kind::number:
          return v.num;
        case TomlValue::Kind::array: {
          json arr = json::array();
          for (const auto& item : v.items) arr.push_back(self(item, self));
          return arr;
        }
      }
      return nullptr;
    };
    (*node)[parts.back()] = to_json_value(value, to_json_value);
  }
  return config_from_json(j);
}

inline PipelineConfig config_from_toml_file(const std::filesystem::path& path) {
  return config_from_toml(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Stage artifacts
// ---------------------------------------------------------------------------

struct StageTimings {
  std::vector<std::pair<std::string, double>> seconds;

  void add(const std::string& name, double s) { seconds.emplace_back(name, s); }
};

namespace detail {

class Stopwatch {
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

inline std::string csv_escape(const std::string& s) { return s; }  // names are plain

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    out += csv_escape(header[i]);
    out += (i + 1 == header.size()) ? '\n' : ',';
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += csv_escape(row[i]);
      out += (i + 1 == row.size()) ? '\n' : ',';
    }
  }
  write_text_file(path, out);
}

inline void write_prepared_csv(const std::filesystem::path& path,
                               const std::vector<std::string>& names, const Matrix& x,
                               const std::vector<int>& y) {
  std::vector<std::string> header = names;
  header.push_back("label");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::vector<std::string> row;
    row.reserve(x.cols + 1);
    for (std::size_t c = 0; c < x.cols; ++c) row.push_back(format_double(x.at(r, c)));
    row.push_back(std::to_string(y[r]));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

struct PreparedData {
  std::vector<std::string> names;
  Matrix x;
  std::vector<int> y;
};

inline PreparedData read_prepared_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<std::vector<std::string>> lines;
  std::string cur;
  std::vector<std::string> fields;
  for (char ch : text) {
    if (ch == '\n') {
      fields.push_back(cur);
      cur.clear();
      lines.push_back(fields);
      fields.clear();
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  require(!lines.empty(), "io", "empty prepared file '" + path.string() + "'");
  PreparedData d;
  d.names.assign(lines[0].begin(), lines[0].end() - 1);
  require(lines[0].back() == "label", "io",
          "'" + path.string() + "' missing trailing label column");
  d.x = Matrix(lines.size() - 1, d.names.size());
  d.y.resize(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    require(lines[r].size() == d.names.size() + 1, "io",
            "prepared row " + std::to_string(r) + " has wrong arity");
    for (std::size_t c = 0; c < d.names.size(); ++c)
      d.x.at(r - 1, c) = parse_double(lines[r][c]);
    d.y[r - 1] = static_cast<int>(parse_double(lines[r].back()));
  }
  return d;
}

}  // namespace detail

struct PrepState {
  std::vector<std::string> feature_names;  // the model's features, post selection
  std::vector<std::string> label_names;
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
  json summary;
};

struct TrainState {
  std::vector<std::pair<std::string, ModelArtifact>> models;  // name -> artifact
  json summary;

  const ModelArtifact& model(const std::string& name) const {
    for (const auto& [n, m] : models)
      if (n == name) return m;
    fail("train", "no trained model named '" + name + "'");
  }
};

// ---------------------------------------------------------------------------
// prep: encode -> impute -> outlier adjust -> screen -> standardize -> select
//       -> split -> SMOTE, with artifacts for every sub-stage
// ---------------------------------------------------------------------------

inline PrepState run_prep(const PipelineConfig& config, StageTimings* timings = nullptr) {
  config.validate();
  const detail::Stopwatch watch;
  const std::filesystem::path out(config.out_dir);
  json summary;

  const Dataset dataset =
      load_dataset(config.dataset_path, parse_format(config.dataset_format), config.target);
  EncodedMatrix encoded = encode(dataset);
  {
    std::size_t n_numeric = 0, n_categorical = 0;
    for (const auto& s : dataset.schemas) {
      if (s.name == dataset.target_name) continue;
      (s.kind == ColumnKind::numeric ? n_numeric : n_categorical) += 1;
    }
    summary["dataset"] = {{"path", config.dataset_path},
                          {"rows", dataset.n_rows()},
                          {"columns", dataset.n_cols()},
                          {"numeric_features", n_numeric},
                          {"categorical_features", n_categorical},
                          {"label_names", encoded.label_names}};
    std::vector<std::size_t> class_counts(2, 0);
    for (int y : encoded.labels) class_counts[static_cast<std::size_t>(y)] += 1;
    summary["dataset"]["class_counts"] = class_counts;
  }

  // Missing-count table (the data behind the missing-values figure).
  {
    std::vector<std::vector<std::string>> rows;
    json counts = json::object();
    for (std::size_t c = 0; c < encoded.values.cols; ++c) {
      const std::size_t n = encoded.missing_count(c);
      rows.push_back({encoded.feature_names[c], std::to_string(n)});
      counts[encoded.feature_names[c]] = n;
    }
    detail::write_csv(out / "missing_counts.csv", {"feature", "missing_count"}, rows);
    summary["missing_counts"] = counts;
  }

  // Imputation: mode for categorical columns, KNN for the rest.
  {
    std::set<std::string> categorical;
    for (std::size_t c = 0; c < encoded.values.cols; ++c)
      if (encoded.feature_categorical[c]) categorical.insert(encoded.feature_names[c]);
    encoded = mode_impute(encoded, categorical);
    encoded = knn_impute(encoded, ImputeConfig{config.impute_k});
    summary["impute"] = {{"k", config.impute_k}};
  }

  // From here the stage order depends on leakage_safe; shared pieces are
  // expressed over (train rows, all rows).
  Split split;
  std::vector<AnovaResult> anova_results;
  std::vector<std::string> anova_kept;
  SAResult sa_result;
  Scaler scaler;
  AdjustmentLog cuckoo_log;
  Matrix selected_train, selected_test;
  std::vector<std::string> selected_names;

  auto write_cuckoo_csv = [&](const AdjustmentLog& log) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& col : log)
      for (std::size_t i = 0; i < col.best_fitness_per_iter.size(); ++i)
        rows.push_back({col.column, std::to_string(i),
                        format_double(col.best_fitness_per_iter[i])});
    detail::write_csv(out / "cuckoo_log.csv", {"column", "iteration", "best_fitness"},
                      rows);
    json cols = json::array();
    for (const auto& col : log) {
      cols.push_back({{"column", col.column},
                      {"outlier_rows", col.outlier_rows},
                      {"original", col.original},
                      {"adjusted", col.adjusted},
                      {"lower", col.fences.lower},
                      {"upper", col.fences.upper},
                      {"iqr", col.fences.iqr}});
    }
    summary["cuckoo"] = {{"enabled", config.cuckoo_enabled},
                         {"columns_adjusted", log.size()},
                         {"adjustments", cols}};
  };
  auto write_anova_csv = [&](const std::vector<AnovaResult>& results,
                             const std::vector<std::string>& kept) {
    std::set<std::string> kept_set(kept.begin(), kept.end());
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : results)
      rows.push_back({r.feature_name, format_double(r.f_stat), format_double(r.p_value),
                      std::to_string(r.df_between), std::to_string(r.df_within),
                      kept_set.count(r.feature_name) ? "1" : "0"});
    detail::write_csv(out / "anova.csv",
                      {"feature", "f_stat", "p_value", "df_between", "df_within", "kept"},
                      rows);
    json dropped = json::array();
    for (const auto& r : results)
      if (!kept_set.count(r.feature_name))
        dropped.push_back({{"feature", r.feature_name}, {"p_value", r.p_value}});
    summary["anova"] = {{"enabled", config.anova_enabled},
                        {"alpha", config.anova_alpha},
                        {"kept", kept},
                        {"dropped", dropped}};
  };
  auto write_sa_csv = [&](const SAResult& r, const std::vector<std::string>& names) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < r.trace.avg_fitness.size(); ++i)
      rows.push_back({std::to_string(i), format_double(r.trace.avg_fitness[i]),
                      format_double(r.trace.max_fitness[i])});
    detail::write_csv(out / "sa_trace.csv", {"iteration", "avg_fitness", "max_fitness"},
                      rows);
    summary["sa"] = {{"enabled", config.sa_enabled},
                     {"selected", names},
                     {"selected_count", names.size()},
                     {"best_fitness", r.best_fitness}};
  };

  CuckooConfig cuckoo_cfg = config.cuckoo;
  cuckoo_cfg.seed = derive_seed(config.master_seed, "stage:cuckoo", 0);
  SAConfig sa_cfg = config.sa;
  sa_cfg.seed = derive_seed(config.master_seed, "stage:sa", 0);
  const SplitConfig split_cfg{config.test_fraction,
                              derive_seed(config.master_seed, "stage:split", 0)};

  if (!config.leakage_safe) {
    // Faithful order: everything is fitted on the full matrix before the split.
    if (config.cuckoo_enabled) {
      auto [adjusted, log] = adjust_outliers(encoded, cuckoo_cfg);
      encoded = std::move(adjusted);
      write_cuckoo_csv(log);
    } else {
      write_cuckoo_csv({});
    }

    std::vector<std::string> kept_names = encoded.feature_names;
    if (config.anova_enabled) {
      auto [kept, results] = anova_screen(encoded, config.anova_alpha);
      anova_results = results;
      kept_names = kept;
      write_anova_csv(results, kept);
    } else {
      write_anova_csv({}, kept_names);
    }
    std::vector<std::size_t> kept_idx;
    for (const auto& name : kept_names) kept_idx.push_back(encoded.feature_index(name));
    Matrix kept_matrix = encoded.values.select_cols(kept_idx);

    scaler = fit_standardize(kept_matrix);
    const Matrix standardized = apply_standardize(kept_matrix, scaler);

    std::vector<std::string> final_names = kept_names;
    Matrix final_matrix = standardized;
    if (config.sa_enabled) {
      sa_result = sa_select(standardized, encoded.labels, sa_cfg);
      const auto picked = sa_result.best_mask.selected();
      final_matrix = standardized.select_cols(picked);
      final_names.clear();
      for (std::size_t i : picked) final_names.push_back(kept_names[i]);
    }
    write_sa_csv(sa_result, final_names);

    split = stratified_split(final_matrix, encoded.labels, split_cfg);
    selected_train = split.train_x;
    selected_test = split.test_x;
    selected_names = final_names;
  } else {
    // Leakage-safe: split first, fit screening/scaling/selection on train only.
    split = stratified_split(encoded.values, encoded.labels, split_cfg);
    EncodedMatrix train_enc = encoded;
    train_enc.values = encoded.values.select_rows(split.train_indices);
    train_enc.missing.assign(train_enc.values.rows * train_enc.values.cols, false);
    train_enc.labels = select(encoded.labels, split.train_indices);

    if (config.cuckoo_enabled) {
      auto [adjusted, log] = adjust_outliers(train_enc, cuckoo_cfg);
      train_enc = std::move(adjusted);
      write_cuckoo_csv(log);
    } else {
      write_cuckoo_csv({});
    }

    std::vector<std::string> kept_names = train_enc.feature_names;
    if (config.anova_enabled) {
      auto [kept, results] = anova_screen(train_enc, config.anova_alpha);
      anova_results = results;
      kept_names = kept;
      write_anova_csv(results, kept);
    } else {
      write_anova_csv({}, kept_names);
    }
    std::vector<std::size_t> kept_idx;
    for (const auto& name : kept_names) kept_idx.push_back(encoded.feature_index(name));

    Matrix train_kept = train_enc.values.select_cols(kept_idx);
    Matrix test_kept =
        encoded.values.select_rows(split.test_indices).select_cols(kept_idx);
    scaler = fit_standardize(train_kept);
    Matrix train_std = apply_standardize(train_kept, scaler);
    Matrix test_std = apply_standardize(test_kept, scaler);

    std::vector<std::string> final_names = kept_names;
    if (config.sa_enabled) {
      sa_result = sa_select(train_std, train_enc.labels, sa_cfg);
      const auto picked = sa_result.best_mask.selected();
      train_std = train_std.select_cols(picked);
      test_std = test_std.select_cols(picked);
      final_names.clear();
      for (std::size_t i : picked) final_names.push_back(kept_names[i]);
    }
    write_sa_csv(sa_result, final_names);

    split.train_x = std::move(train_std);
    split.train_y = train_enc.labels;
    split.test_x = std::move(test_std);
    split.test_y = select(encoded.labels, split.test_indices);
    selected_train = split.train_x;
    selected_test = split.test_x;
    selected_names = final_names;
  }

  {
    std::vector<std::size_t> test_counts(2, 0), train_counts(2, 0);
    for (int y : split.test_y) test_counts[static_cast<std::size_t>(y)] += 1;
    for (int y : split.train_y) train_counts[static_cast<std::size_t>(y)] += 1;
    summary["split"] = {{"test_fraction", config.test_fraction},
                        {"train_rows", split.train_y.size()},
                        {"test_rows", split.test_y.size()},
                        {"train_class_counts", train_counts},
                        {"test_class_counts", test_counts},
                        {"train_indices", split.train_indices},
                        {"test_indices", split.test_indices}};
  }

  PrepState state;
  state.feature_names = selected_names;
  state.label_names = encoded.label_names;
  state.test_x = selected_test;
  state.test_y = split.test_y;

  if (config.smote_enabled) {
    const SmoteConfig smote_cfg{config.smote_target, config.smote_k,
                                derive_seed(config.master_seed, "stage:smote", 0)};
    const SmoteResult res = smote(selected_train, split.train_y, smote_cfg);
    state.train_x = res.features;
    state.train_y = res.labels;
    std::vector<std::size_t> counts(2, 0);
    for (int y : res.labels) counts[static_cast<std::size_t>(y)] += 1;
    summary["smote"] = {{"enabled", true},
                        {"target_per_class", config.smote_target},
                        {"k_neighbors", config.smote_k},
                        {"synthetic_rows", res.audit.size()},
                        {"class_counts", counts}};
  } else {
    state.train_x = selected_train;
    state.train_y = split.train_y;
    summary["smote"] = {{"enabled", false}};
  }

  summary["scaler"] = {{"means", scaler.means}, {"stds", scaler.stds}};
  summary["selected_features"] = selected_names;
  summary["label_names"] = state.label_names;
  summary["leakage_safe"] = config.leakage_safe;

  detail::write_prepared_csv(out / "train_prepared.csv", state.feature_names,
                             state.train_x, state.train_y);
  detail::write_prepared_csv(out / "test_prepared.csv", state.feature_names,
                             state.test_x, state.test_y);
  state.summary = summary;
  write_text_file(out / "prep.json", summary.dump(2) + "\n");
  if (timings) timings->add("prep", watch.seconds());
  return state;
}

inline PrepState load_prep(const PipelineConfig& config) {
  const std::filesystem::path out(config.out_dir);
  PrepState state;
  state.summary = json::parse(read_text_file(out / "prep.json"));
  auto train = detail::read_prepared_csv(out / "train_prepared.csv");
  auto test = detail::read_prepared_csv(out / "test_prepared.csv");
  require(train.names == test.names, "prep", "train/test feature names disagree");
  state.feature_names = train.names;
  state.train_x = std::move(train.x);
  state.train_y = std::move(train.y);
  state.test_x = std::move(test.x);
  state.test_y = std::move(test.y);
  state.label_names = state.summary.at("label_names").get<std::vector<std::string>>();
  return state;
}

// ---------------------------------------------------------------------------
// train: grid search + 5-fold CV per family, final fit on the full training set
// ---------------------------------------------------------------------------

namespace detail {

struct FamilySpec {
  std::string name;
  GridSpec grid;
  TrainerFamilyFn family;
  std::function<ModelArtifact(const ParamMap&, const Matrix&, const std::vector<int>&,
                              std::uint64_t seed)>
      final_fit;
};

inline std::vector<FamilySpec> model_families(const PipelineConfig& config,
                                              const std::vector<std::string>& names) {
  std::vector<FamilySpec> out;

  {
    FamilySpec f;
    f.name = "logreg";
    f.grid = config.grid_logreg;
    const std::size_t epochs = config.logreg_epochs;
    f.family = [epochs](const ParamMap& p) -> TrainPredictFn {
      const LogregHyper hyper{p.at("l2"), p.at("lr"), epochs};
      return [hyper](const Matrix& tx, const std::vector<int>& ty, const Matrix& vx,
                     std::uint64_t) {
        return predict_proba(train_logreg(tx, ty, hyper), vx);
      };
    };
    f.final_fit = [epochs, names](const ParamMap& p, const Matrix& x,
                                  const std::vector<int>& y, std::uint64_t) {
      return ModelArtifact{names, train_logreg(x, y, {p.at("l2"), p.at("lr"), epochs})};
    };
    out.push_back(std::move(f));
  }
  {
    FamilySpec f;
    f.name = "mlp";
    f.grid = config.grid_mlp;
    const std::size_t epochs = config.mlp_epochs;
    const double l2 = config.mlp_l2;
    auto hyper_of = [epochs, l2](const ParamMap& p, std::uint64_t seed) {
      MlpHyper h;
      h.hidden = static_cast<std::size_t>(p.at("hidden"));
      h.lr = p.at("lr");
      h.epochs = epochs;
      h.l2 = l2;
      h.seed = seed;
      return h;
    };
    f.family = [hyper_of](const ParamMap& p) -> TrainPredictFn {
      return [hyper_of, p](const Matrix& tx, const std::vector<int>& ty, const Matrix& vx,
                           std::uint64_t seed) {
        return predict_proba(train_mlp(tx, ty, hyper_of(p, seed)), vx);
      };
    };
    f.final_fit = [hyper_of, names](const ParamMap& p, const Matrix& x,
                                    const std::vector<int>& y, std::uint64_t seed) {
      return ModelArtifact{names, train_mlp(x, y, hyper_of(p, seed))};
    };
    out.push_back(std::move(f));
  }
  {
    FamilySpec f;
    f.name = "rf";
    f.grid = config.grid_rf;
    const std::size_t min_leaf = config.rf_min_leaf;
    auto hyper_of = [min_leaf](const ParamMap& p, std::uint64_t seed) {
      ForestHyper h;
      h.n_trees = static_cast<std::size_t>(p.at("trees"));
      h.max_depth = static_cast<int>(p.at("depth"));
      h.min_leaf = min_leaf;
      h.seed = seed;
      return h;
    };
    f.family = [hyper_of](const ParamMap& p) -> TrainPredictFn {
      return [hyper_of, p](const Matrix& tx, const std::vector<int>& ty, const Matrix& vx,
                           std::uint64_t seed) {
        return predict_proba(train_forest(tx, ty, hyper_of(p, seed)), vx);
      };
    };
    f.final_fit = [hyper_of, names](const ParamMap& p, const Matrix& x,
                                    const std::vector<int>& y, std::uint64_t seed) {
      return ModelArtifact{names, train_forest(x, y, hyper_of(p, seed))};
    };
    out.push_back(std::move(f));
  }
  {
    FamilySpec f;
    f.name = "boost";
    f.grid = config.grid_boost;
    auto params_of = [&config](const ParamMap& p, std::uint64_t seed) {
      BoostParams b;
      b.iterations = config.boost_iterations;
      b.depth = static_cast<std::size_t>(p.at("depth"));
      b.learning_rate = p.at("learning_rate");
      b.l2_leaf_reg = config.boost_l2_leaf_reg;
      b.border_count = config.boost_border_count;
      b.seed = seed;
      return b;
    };
    f.family = [params_of](const ParamMap& p) -> TrainPredictFn {
      return [params_of, p](const Matrix& tx, const std::vector<int>& ty,
                            const Matrix& vx, std::uint64_t seed) {
        return predict_proba(fit_boost(tx, ty, params_of(p, seed)), vx);
      };
    };
    f.final_fit = [params_of, names](const ParamMap& p, const Matrix& x,
                                     const std::vector<int>& y, std::uint64_t seed) {
      return ModelArtifact{names, fit_boost(x, y, params_of(p, seed))};
    };
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace detail

inline TrainState run_train(const PipelineConfig& config, const PrepState& prep,
                            StageTimings* timings = nullptr) {
  const detail::Stopwatch watch;
  const std::filesystem::path out(config.out_dir);
  TrainState state;
  json models_summary = json::object();

  for (auto& family : detail::model_families(config, prep.feature_names)) {
    const std::uint64_t grid_seed =
        derive_seed(config.master_seed, "grid:" + family.name, 0);
    const GridResult grid =
        grid_search(family.grid, family.family, prep.train_x, prep.train_y,
                    config.cv_folds, grid_seed);

    // Grid table CSV: sorted param columns + mean accuracy.
    {
      std::vector<std::string> header;
      for (const auto& [key, value] : grid.table.front().params) header.push_back(key);
      header.push_back("mean_cv_accuracy");
      std::vector<std::vector<std::string>> rows;
      for (const auto& cell : grid.table) {
        std::vector<std::string> row;
        for (const auto& [key, value] : cell.params) row.push_back(format_double(value));
        row.push_back(format_double(cell.mean_accuracy));
        rows.push_back(std::move(row));
      }
      detail::write_csv(out / ("grid_" + family.name + ".csv"), header, rows);
    }
    // Winning cell's fold accuracies (learning-curve data).
    {
      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < grid.best_fold_accuracies.size(); ++i)
        rows.push_back({std::to_string(i), format_double(grid.best_fold_accuracies[i])});
      detail::write_csv(out / ("cv_" + family.name + ".csv"), {"fold", "accuracy"}, rows);
    }

    const detail::Stopwatch fit_watch;
    ModelArtifact artifact =
        family.final_fit(grid.best_params, prep.train_x, prep.train_y,
                         derive_seed(config.master_seed, "final:" + family.name, 0));
    const double fit_seconds = fit_watch.seconds();
    if (timings) timings->add("fit:" + family.name, fit_seconds);
    save_model(out / ("model_" + family.name + ".bin"), artifact);

    json cell_table = json::array();
    for (const auto& cell : grid.table)
      cell_table.push_back(
          {{"params", cell.params}, {"mean_cv_accuracy", cell.mean_accuracy}});
    models_summary[family.name] = {{"best_params", grid.best_params},
                                   {"cv_fold_accuracies", grid.best_fold_accuracies},
                                   {"mean_cv_accuracy", mean(grid.best_fold_accuracies)},
                                   {"grid", cell_table}};
    state.models.emplace_back(family.name, std::move(artifact));
  }

  state.summary = json{{"models", models_summary}};
  write_text_file(out / "train.json", state.summary.dump(2) + "\n");
  if (timings) timings->add("train", watch.seconds());
  return state;
}

inline TrainState load_train(const PipelineConfig& config) {
  const std::filesystem::path out(config.out_dir);
  TrainState state;
  state.summary = json::parse(read_text_file(out / "train.json"));
  for (const std::string name : {"logreg", "mlp", "rf", "boost"})
    state.models.emplace_back(name, load_model(out / ("model_" + name + ".bin")));
  return state;
}

// ---------------------------------------------------------------------------
// evaluate: confusion, per-class metrics, kappa, ROC/AUC on the held-out set
// ---------------------------------------------------------------------------

inline json evaluate_model(const std::vector<double>& probs, const std::vector<int>& y) {
  const std::vector<int> pred = hard_labels(probs);
  const ConfusionMatrix cm = confusion(y, pred, 1);
  const ClassMetrics c1 = class_metrics(cm);
  const ClassMetrics c0 = class_metrics(swap_positive(cm));
  const KappaResult k = kappa(cm);
  const auto [roc, auc] = roc_auc(y, probs);
  json j;
  j["confusion"] = {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
  j["accuracy"] = accuracy(cm);
  j["class0"] = {{"precision", c0.precision},
                 {"recall", c0.recall},
                 {"f1", c0.f1},
                 {"degenerate", c0.degenerate}};
  j["class1"] = {{"precision", c1.precision},
                 {"recall", c1.recall},
                 {"f1", c1.f1},
                 {"degenerate", c1.degenerate}};
  j["auc"] = auc;
  j["kappa"] = k.value;
  j["kappa_degenerate"] = k.degenerate;
  return j;
}

inline json run_evaluate(const PipelineConfig& config, const PrepState& prep,
                         const TrainState& train, StageTimings* timings = nullptr) {
  const detail::Stopwatch watch;
  const std::filesystem::path out(config.out_dir);
  json summary = json::object();

  for (const auto& [name, artifact] : train.models) {
    const auto probs = predict_proba(artifact, prep.test_x);
    json j = evaluate_model(probs, prep.test_y);

    const auto [roc, auc] = roc_auc(prep.test_y, probs);
    std::vector<std::vector<std::string>> roc_rows;
    for (const auto& p : roc)
      roc_rows.push_back({format_double(p.fpr), format_double(p.tpr)});
    detail::write_csv(out / ("roc_" + name + ".csv"), {"fpr", "tpr"}, roc_rows);

    detail::write_csv(
        out / ("metrics_" + name + ".csv"),
        {"accuracy", "precision_class0", "recall_class0", "f1_class0",
         "precision_class1", "recall_class1", "f1_class1", "auc", "kappa"},
        {{format_double(j["accuracy"].get<double>()),
          format_double(j["class0"]["precision"].get<double>()),
          format_double(j["class0"]["recall"].get<double>()),
          format_double(j["class0"]["f1"].get<double>()),
          format_double(j["class1"]["precision"].get<double>()),
          format_double(j["class1"]["recall"].get<double>()),
          format_double(j["class1"]["f1"].get<double>()),
          format_double(j["auc"].get<double>()),
          format_double(j["kappa"].get<double>())}});
    summary[name] = std::move(j);
  }
  json stage = json{{"models", summary}, {"positive_label", 1},
                    {"positive_class", prep.label_names.size() > 1 ? prep.label_names[1]
                                                                   : std::string()}};
  write_text_file(out / "eval.json", stage.dump(2) + "\n");
  if (timings) timings->add("evaluate", watch.seconds());
  return stage;
}

// ---------------------------------------------------------------------------
// explain: exact TreeSHAP for the boosted model on the test set
// ---------------------------------------------------------------------------

inline json run_explain(const PipelineConfig& config, const PrepState& prep,
                        const TrainState& train, StageTimings* timings = nullptr) {
  const detail::Stopwatch watch;
  const std::filesystem::path out(config.out_dir);
  const ModelArtifact& artifact = train.model("boost");
  const auto* ensemble = std::get_if<ObliviousEnsemble>(&artifact.model);
  require(ensemble != nullptr, "explain", "model_boost.bin does not hold a boosted model");

  const ShapMatrix shap = tree_shap(*ensemble, prep.test_x, prep.train_x);

  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < shap.phi.rows; ++r)
      for (std::size_t c = 0; c < shap.phi.cols; ++c)
        rows.push_back({std::to_string(r), prep.feature_names[c],
                        format_double(shap.phi.at(r, c)),
                        format_double(prep.test_x.at(r, c))});
    detail::write_csv(out / "shap_values.csv", {"row", "feature", "phi", "feature_value"},
                      rows);
  }
  const FeatureRanking ranking = summarize(shap, prep.feature_names);
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [name, value] : ranking)
      rows.push_back({name, format_double(value)});
    detail::write_csv(out / "shap_ranking.csv", {"feature", "mean_abs_phi"}, rows);
  }

  json ranking_json = json::array();
  for (const auto& [name, value] : ranking)
    ranking_json.push_back({{"feature", name}, {"mean_abs_phi", value}});
  json stage = {{"base_value", shap.base_value},
                {"scale", "margin (log-odds)"},
                {"rows", shap.phi.rows},
                {"ranking", ranking_json}};
  write_text_file(out / "explain.json", stage.dump(2) + "\n");
  if (timings) timings->add("explain", watch.seconds());
  return stage;
}

// ---------------------------------------------------------------------------
// report: assemble everything written so far, with artifact digests
// ---------------------------------------------------------------------------

inline json assemble_report(const PipelineConfig& config) {
  const std::filesystem::path out(config.out_dir);
  json report;
  report["config"] = config_to_json(config);
  for (const auto& [key, file] :
       std::vector<std::pair<std::string, std::string>>{{"prep", "prep.json"},
                                                        {"train", "train.json"},
                                                        {"evaluate", "eval.json"},
                                                        {"explain", "explain.json"}}) {
    const auto path = out / file;
    if (std::filesystem::exists(path))
      report[key] = json::parse(read_text_file(path));
  }
  json digests = json::object();
  std::vector<std::string> names;
  if (std::filesystem::exists(out)) {
    for (const auto& entry : std::filesystem::directory_iterator(out)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (name == "report.json" || name == "timings.json") continue;
      names.push_back(name);
    }
  }
  std::sort(names.begin(), names.end());
  for (const auto& name : names)
    digests[name] = fnv1a64_hex(read_text_file(out / name));
  report["artifact_digests"] = digests;
  return report;
}

inline void write_timings(const PipelineConfig& config, const StageTimings& timings) {
  json j = json::object();
  for (const auto& [name, seconds] : timings.seconds) j[name] = seconds;
  write_text_file(std::filesystem::path(config.out_dir) / "timings.json",
                  j.dump(2) + "\n");
}

// Full workflow. On a stage error a partial report (with the stage tag) is
// still written before the error propagates.
inline json run_pipeline(const PipelineConfig& config) {
  config.validate();
  StageTimings timings;
  const detail::Stopwatch watch;
  try {
    const PrepState prep = run_prep(config, &timings);
    const TrainState train = run_train(config, prep, &timings);
    run_evaluate(config, prep, train, &timings);
    run_explain(config, prep, train, &timings);
  } catch (const Error& e) {
    json partial = assemble_report(config);
    partial["failed_stage"] = e.stage();
    partial["error"] = e.what();
    write_text_file(std::filesystem::path(config.out_dir) / "report.json",
                    partial.dump(2) + "\n");
    timings.add("total", watch.seconds());
    write_timings(config, timings);
    throw;
  }
  const json report = assemble_report(config);
  write_text_file(std::filesystem::path(config.out_dir) / "report.json",
                  report.dump(2) + "\n");
  timings.add("total", watch.seconds());
  write_timings(config, timings);
  return report;
}

// Multi-seed sweep: run the full pipeline at master_seed + i into seed_<s>/
// subdirectories and aggregate test metrics per model.
inline json run_sweep(const PipelineConfig& config, std::size_t n_seeds) {
  require(n_seeds >= 1, "sweep", "need at least one seed");
  json per_seed = json::array();
  std::map<std::string, std::vector<double>> acc, auc, kap;
  for (std::size_t i = 0; i < n_seeds; ++i) {
    PipelineConfig sub = config;
    sub.master_seed = config.master_seed + i;
    sub.out_dir = (std::filesystem::path(config.out_dir) /
                   ("seed_" + std::to_string(sub.master_seed)))
                      .string();
    const json report = run_pipeline(sub);
    json entry;
    entry["master_seed"] = sub.master_seed;
    entry["out_dir"] = sub.out_dir;
    for (const auto& [name, metrics] : report.at("evaluate").at("models").items()) {
      entry["models"][name] = {{"accuracy", metrics.at("accuracy")},
                               {"auc", metrics.at("auc")},
                               {"kappa", metrics.at("kappa")}};
      acc[name].push_back(metrics.at("accuracy").get<double>());
      auc[name].push_back(metrics.at("auc").get<double>());
      kap[name].push_back(metrics.at("kappa").get<double>());
    }
    per_seed.push_back(std::move(entry));
  }
  json aggregate = json::object();
  for (const auto& [name, values] : acc) {
    auto stats = [](const std::vector<double>& v) {
      return json{{"mean", mean(v)},
                  {"min", *std::min_element(v.begin(), v.end())},
                  {"max", *std::max_element(v.begin(), v.end())}};
    };
    aggregate[name] = {{"accuracy", stats(values)},
                       {"auc", stats(auc[name])},
                       {"kappa", stats(kap[name])}};
  }
  json report;
  report["config"] = config_to_json(config);
  report["seeds"] = n_seeds;
  report["per_seed"] = per_seed;
  report["aggregate"] = aggregate;
  write_text_file(std::filesystem::path(config.out_dir) / "report.json",
                  report.dump(2) + "\n");
  return report;
}

}  // namespace ckd
