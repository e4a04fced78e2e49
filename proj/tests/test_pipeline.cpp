#include <doctest.h>

#include <filesystem>
#include <set>
#include <string>

#include "ckd/pipeline.hpp"
#include "ckd/synth.hpp"
#include "support/fixtures.hpp"

using namespace ckd;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path("pipeline_test") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A small, fast configuration over the synthetic dataset.
PipelineConfig tiny_config(const fs::path& dir) {
  PipelineConfig c = default_config();
  const fs::path data = dir / "data.arff";
  if (!fs::exists(data)) write_text_file(data, generate_ckd_arff(7));
  c.dataset_path = data.string();
  c.out_dir = (dir / "out").string();
  c.master_seed = 3;
  c.cuckoo.max_iter = 30;
  c.sa.max_iter = 5;
  c.smote_target = 220;
  c.cv_folds = 2;
  c.logreg_epochs = 50;
  c.mlp_epochs = 5;
  c.boost_iterations = 10;
  c.grid_logreg.params = {{"l2", {0.01}}, {"lr", {0.1}}};
  c.grid_mlp.params = {{"hidden", {8}}, {"lr", {0.01}}};
  c.grid_rf.params = {{"trees", {30}}, {"depth", {6}}};
  c.grid_boost.params = {{"learning_rate", {0.1}}, {"depth", {4}}};
  return c;
}

std::string slurp_artifacts(const fs::path& out) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename() == "timings.json") continue;
    names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  std::string all;
  for (const auto& name : names) {
    all += name;
    all += '\0';
    all += read_text_file(out / name);
    all += '\0';
  }
  return all;
}

}  // namespace

TEST_CASE("toml: tables, arrays, comments, errors") {
  const TomlTable t = parse_toml(
      "# comment\ntitle = \"x\"\n[a]\nn = 3.5\nflag = true\n[a.b]\nvals = [1, 2, 3]\n");
  CHECK(t.at("title").str == "x");
  CHECK(t.at("a.n").num == 3.5);
  CHECK(t.at("a.flag").boolean == true);
  REQUIRE(t.at("a.b.vals").items.size() == 3);
  CHECK(t.at("a.b.vals").items[2].num == 3.0);

  CHECK_THROWS_WITH_AS(parse_toml("key\n"), doctest::Contains("line 1"), Error);
  CHECK_THROWS_WITH_AS(parse_toml("a = 1\na = 2\n"), doctest::Contains("duplicate"),
                       Error);
  CHECK_THROWS_AS(parse_toml("[unclosed\n"), Error);
  CHECK_THROWS_AS(parse_toml("x = \"unterminated\n"), Error);
}

TEST_CASE("config: TOML parse, overrides, grid defaults") {
  const std::string toml =
      "[dataset]\npath = \"d.arff\"\nformat = \"arff\"\n"
      "[run]\nmaster_seed = 9\nout_dir = \"o\"\n"
      "[sa]\nmax_iter = 50\n"
      "[grid.rf]\ntrees = [10, 20]\ndepth = [-1]\n";
  const PipelineConfig c = config_from_toml(toml);
  CHECK(c.dataset_path == "d.arff");
  CHECK(c.master_seed == 9);
  CHECK(c.sa.max_iter == 50);
  CHECK(c.grid_rf.params.at("trees") == std::vector<double>{10, 20});
  // untouched sections keep defaults
  CHECK(c.cuckoo.n_nests == 25);
  CHECK(c.grid_boost.params.at("depth") == std::vector<double>{6, 8});
}

TEST_CASE("config: unknown keys are rejected everywhere") {
  CHECK_THROWS_WITH_AS(
      config_from_toml("[dataset]\npath = \"d\"\n[run]\nbogus = 1\n"),
      doctest::Contains("unknown key"), Error);
  CHECK_THROWS_WITH_AS(
      config_from_toml("[dataset]\npath = \"d\"\n[nosuch]\nx = 1\n"),
      doctest::Contains("unknown key"), Error);
  CHECK_THROWS_WITH_AS(
      config_from_toml("[dataset]\npath = \"d\"\n[grid.logreg]\ngamma = [1]\n"),
      doctest::Contains("gamma"), Error);
  CHECK_THROWS_AS(config_from_toml("[run]\nmaster_seed = 1\n"), Error);  // no dataset
}

TEST_CASE("config: JSON echo round-trips losslessly") {
  PipelineConfig c = default_config();
  c.dataset_path = "x.csv";
  c.dataset_format = "csv";
  c.master_seed = 123456789;
  c.leakage_safe = true;
  c.sa.cooling = 0.9;
  c.grid_mlp.params = {{"hidden", {4, 8}}, {"lr", {0.5}}};
  const PipelineConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
}

TEST_CASE("model artifacts: round-trip for every family") {
  const auto toy = fixtures::linear_toy(40, 3, 2, 5, 0.3);
  const fs::path dir = fresh_dir("models");
  const std::vector<std::string> names{"a", "b", "c"};

  std::vector<ModelArtifact> artifacts;
  artifacts.push_back({names, train_logreg(toy.x, toy.y, {0.01, 0.1, 50})});
  MlpHyper mh;
  mh.hidden = 4;
  mh.epochs = 5;
  mh.seed = 2;
  artifacts.push_back({names, train_mlp(toy.x, toy.y, mh)});
  ForestHyper fh;
  fh.n_trees = 10;
  fh.seed = 3;
  artifacts.push_back({names, train_forest(toy.x, toy.y, fh)});
  BoostParams bp;
  bp.iterations = 5;
  bp.depth = 3;
  artifacts.push_back({names, fit_boost(toy.x, toy.y, bp)});

  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    const fs::path path = dir / ("m" + std::to_string(i) + ".bin");
    save_model(path, artifacts[i]);
    const ModelArtifact loaded = load_model(path);
    CHECK(loaded.feature_names == names);
    CHECK(predict_proba(loaded, toy.x) == predict_proba(artifacts[i], toy.x));
  }
}

TEST_CASE("model artifacts: corrupted, mismatched, and truncated files") {
  const auto toy = fixtures::linear_toy(20, 2, 1, 6);
  const ModelArtifact artifact{{"a", "b"}, train_logreg(toy.x, toy.y, {0.01, 0.1, 20})};
  const std::string bytes = serialize_model(artifact);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(deserialize_model(bad_magic), doctest::Contains("magic"), Error);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_WITH_AS(deserialize_model(bad_version), doctest::Contains("version"),
                       Error);

  std::string bad_family = bytes;
  bad_family[8] = 7;
  CHECK_THROWS_WITH_AS(deserialize_model(bad_family), doctest::Contains("family"), Error);

  CHECK_THROWS_WITH_AS(deserialize_model(bytes.substr(0, bytes.size() - 6)),
                       doctest::Contains("truncated"), Error);

  CHECK_THROWS_WITH_AS(predict_proba(artifact, Matrix(3, 5)),
                       doctest::Contains("5"), Error);
}

TEST_CASE("synthetic dataset: schema and composition match the UCI layout") {
  const fs::path dir = fresh_dir("synth");
  write_text_file(dir / "synth.arff", generate_ckd_arff());
  const Dataset ds = load_dataset((dir / "synth.arff").string(), FileFormat::arff);
  REQUIRE(ds.n_rows() == 400);
  REQUIRE(ds.n_cols() == 25);
  std::size_t numeric = 0, categorical = 0;
  for (const auto& s : ds.schemas) {
    if (s.name == "class") continue;
    (s.kind == ColumnKind::numeric ? numeric : categorical) += 1;
  }
  CHECK(numeric == 14);
  CHECK(categorical == 10);

  const EncodedMatrix m = encode(ds);
  CHECK(std::count(m.labels.begin(), m.labels.end(), 0) == 250);
  CHECK(std::count(m.labels.begin(), m.labels.end(), 1) == 150);
  CHECK(m.label_names == std::vector<std::string>{"ckd", "notckd"});
  std::size_t missing_total = 0;
  for (std::size_t c = 0; c < m.values.cols; ++c) missing_total += m.missing_count(c);
  CHECK(missing_total > 200);  // realistic missingness is present

  // generation is deterministic
  CHECK(generate_ckd_arff() == generate_ckd_arff());
  CHECK(generate_ckd_arff(1) != generate_ckd_arff(2));
}

TEST_CASE("pipeline: two identical runs produce byte-identical artifacts") {
  const fs::path dir = fresh_dir("determinism");
  PipelineConfig c = tiny_config(dir);

  c.out_dir = (dir / "run1").string();
  run_pipeline(c);
  const std::string first = slurp_artifacts(c.out_dir);
  fs::remove_all(c.out_dir);
  run_pipeline(c);
  const std::string second = slurp_artifacts(c.out_dir);
  CHECK(first == second);

  c.master_seed += 1;
  fs::remove_all(c.out_dir);
  run_pipeline(c);
  CHECK(slurp_artifacts(c.out_dir) != first);
}

TEST_CASE("pipeline: report echo re-validates and reproduces the run") {
  const fs::path dir = fresh_dir("echo");
  PipelineConfig c = tiny_config(dir);
  const json report = run_pipeline(c);
  const std::string first = slurp_artifacts(c.out_dir);

  const PipelineConfig echoed = config_from_json(report.at("config"));
  CHECK(config_to_json(echoed) == config_to_json(c));
  fs::remove_all(c.out_dir);
  run_pipeline(echoed);
  CHECK(slurp_artifacts(echoed.out_dir) == first);
}

TEST_CASE("pipeline: stage resume from disk matches the in-memory path") {
  const fs::path dir = fresh_dir("resume");
  PipelineConfig c = tiny_config(dir);
  StageTimings timings;
  const PrepState prep = run_prep(c, &timings);
  const PrepState reloaded = load_prep(c);
  CHECK(reloaded.feature_names == prep.feature_names);
  CHECK(reloaded.train_x.data == prep.train_x.data);
  CHECK(reloaded.test_x.data == prep.test_x.data);
  CHECK(reloaded.train_y == prep.train_y);

  const TrainState train = run_train(c, prep, &timings);
  const TrainState again = load_train(c);
  for (const auto& [name, artifact] : train.models)
    CHECK(predict_proba(again.model(name), prep.test_x) ==
          predict_proba(artifact, prep.test_x));

  const json eval = run_evaluate(c, prep, train, &timings);
  CHECK(eval.at("models").contains("boost"));
  const json expl = run_explain(c, prep, train, &timings);
  CHECK(expl.at("ranking").size() == prep.feature_names.size());
}

TEST_CASE("pipeline: disabling the cuckoo stage equals an outlier-free pipeline") {
  // A dataset whose numeric columns have no Tukey outliers: the cuckoo stage
  // must then be an exact no-op, so toggling it changes nothing.
  const fs::path dir = fresh_dir("toggle");
  std::string arff = "@relation t\n@attribute f0 numeric\n@attribute f1 numeric\n"
                     "@attribute class {ckd,notckd}\n@data\n";
  Rng rng(5);
  for (int i = 0; i < 60; ++i) {
    const bool pos = i % 2 == 0;
    const double f0 = (pos ? 1.0 : -1.0) + 0.3 * rng.uniform01();
    const double f1 = rng.uniform01();
    arff += format_double(f0) + "," + format_double(f1) + "," +
            (pos ? "ckd" : "notckd") + "\n";
  }
  write_text_file(dir / "clean.arff", arff);

  PipelineConfig c = default_config();
  c.dataset_path = (dir / "clean.arff").string();
  c.master_seed = 11;
  c.sa_enabled = false;
  c.smote_target = 30;
  c.smote_k = 3;
  c.cv_folds = 2;
  c.logreg_epochs = 30;
  c.mlp_epochs = 3;
  c.boost_iterations = 5;
  c.grid_logreg.params = {{"l2", {0.01}}, {"lr", {0.1}}};
  c.grid_mlp.params = {{"hidden", {4}}, {"lr", {0.01}}};
  c.grid_rf.params = {{"trees", {10}}, {"depth", {4}}};
  c.grid_boost.params = {{"learning_rate", {0.1}}, {"depth", {2}}};

  c.cuckoo_enabled = true;
  c.out_dir = (dir / "on").string();
  run_pipeline(c);
  c.cuckoo_enabled = false;
  c.out_dir = (dir / "off").string();
  run_pipeline(c);

  for (const auto& name :
       {"train_prepared.csv", "test_prepared.csv", "metrics_boost.csv",
        "metrics_logreg.csv", "shap_ranking.csv"}) {
    CHECK(read_text_file(dir / "on" / name) == read_text_file(dir / "off" / name));
  }
}

TEST_CASE("pipeline: split-stage errors carry the stage tag") {
  const fs::path dir = fresh_dir("errors");
  PipelineConfig c = tiny_config(dir);
  c.test_fraction = 0.001;  // valid range, but empties the test side per class
  bool caught = false;
  try {
    run_pipeline(c);
  } catch (const Error& e) {
    caught = true;
    CHECK(e.stage() == "split");
  }
  CHECK(caught);
  // the partial report names the failed stage
  const json partial = json::parse(read_text_file(fs::path(c.out_dir) / "report.json"));
  CHECK(partial.at("failed_stage") == "split");

  PipelineConfig bad = c;
  bad.test_fraction = 0.0;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("test_fraction"), Error);
}

TEST_CASE("pipeline: shap ranking surfaces the known strong features") {
  const fs::path dir = fresh_dir("ranking");
  PipelineConfig c = tiny_config(dir);
  c.boost_iterations = 40;
  const json report = run_pipeline(c);
  std::set<std::string> top5;
  for (const auto& entry : report.at("explain").at("ranking")) {
    top5.insert(entry.at("feature").get<std::string>());
    if (top5.size() == 5) break;
  }
  const std::set<std::string> expected{"sg", "sc", "al", "hemo", "dm"};
  std::size_t overlap = 0;
  for (const auto& name : top5) overlap += expected.count(name);
  CHECK(overlap >= 3);
}

TEST_CASE("pipeline: seed sweep aggregates per-model metrics") {
  const fs::path dir = fresh_dir("sweep");
  PipelineConfig c = tiny_config(dir);
  const json report = run_sweep(c, 2);
  CHECK(report.at("seeds") == 2);
  REQUIRE(report.at("per_seed").size() == 2);
  CHECK(report.at("per_seed").at(0).at("master_seed") == c.master_seed);
  CHECK(report.at("per_seed").at(1).at("master_seed") == c.master_seed + 1);
  for (const auto& name : {"logreg", "mlp", "rf", "boost"}) {
    const json& stats = report.at("aggregate").at(name);
    const double lo = stats.at("accuracy").at("min").get<double>();
    const double mean_acc = stats.at("accuracy").at("mean").get<double>();
    const double hi = stats.at("accuracy").at("max").get<double>();
    CHECK(lo <= mean_acc);
    CHECK(mean_acc <= hi);
  }
  CHECK(fs::exists(fs::path(c.out_dir) / ("seed_" + std::to_string(c.master_seed)) /
                   "report.json"));
}

TEST_CASE("pipeline: leakage_safe reorders fitting onto the training side") {
  const fs::path dir = fresh_dir("leakage");
  PipelineConfig c = tiny_config(dir);
  c.leakage_safe = true;
  c.out_dir = (dir / "safe").string();
  const json report = run_pipeline(c);
  CHECK(report.at("prep").at("leakage_safe") == true);
  // Still a functioning pipeline end to end.
  CHECK(report.at("evaluate").at("models").at("boost").at("accuracy").get<double>() >
        0.6);
}
