#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "ckd/baselines.hpp"
#include "ckd/error.hpp"
#include "ckd/io.hpp"
#include "ckd/oblivious_boost.hpp"

namespace ckd {

using AnyModel = std::variant<LinearModel, MlpModel, Forest, ObliviousEnsemble>;

// A trained model plus the feature names it expects, as persisted on disk.
struct ModelArtifact {
  std::vector<std::string> feature_names;
  AnyModel model;

  std::size_t n_features() const {
    return std::visit(
        [](const auto& m) -> std::size_t {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, LinearModel>) return m.weights.size();
          if constexpr (std::is_same_v<T, MlpModel>) return m.inputs;
          if constexpr (std::is_same_v<T, Forest>) return m.n_features;
          if constexpr (std::is_same_v<T, ObliviousEnsemble>) return m.n_features();
        },
        model);
  }
};

inline std::vector<double> predict_proba(const ModelArtifact& artifact,
                                         const Matrix& features) {
  require(features.cols == artifact.n_features(), "model-io",
          "model expects " + std::to_string(artifact.n_features()) +
              " features, input has " + std::to_string(features.cols));
  return std::visit([&](const auto& m) { return predict_proba(m, features); },
                    artifact.model);
}

namespace detail {

constexpr char kMagic[4] = {'C', 'K', 'D', 'M'};
constexpr std::uint32_t kVersion = 1;

enum class Family : std::uint8_t { logreg = 0, mlp = 1, forest = 2, boost = 3 };

inline void write_model(BinaryWriter& w, const LinearModel& m) {
  w.u32(static_cast<std::uint32_t>(m.weights.size()));
  for (double v : m.weights) w.f64(v);
  w.f64(m.bias);
  w.f64(m.l2);
}

inline LinearModel read_logreg(BinaryReader& r) {
  LinearModel m;
  m.weights.resize(r.u32());
  for (auto& v : m.weights) v = r.f64();
  m.bias = r.f64();
  m.l2 = r.f64();
  return m;
}

inline void write_model(BinaryWriter& w, const MlpModel& m) {
  w.u32(static_cast<std::uint32_t>(m.inputs));
  w.u32(static_cast<std::uint32_t>(m.hidden));
  for (double v : m.w1) w.f64(v);
  for (double v : m.b1) w.f64(v);
  for (double v : m.w2) w.f64(v);
  w.f64(m.b2);
}

inline MlpModel read_mlp(BinaryReader& r) {
  MlpModel m;
  m.inputs = r.u32();
  m.hidden = r.u32();
  m.w1.resize(m.inputs * m.hidden);
  m.b1.resize(m.hidden);
  m.w2.resize(m.hidden);
  for (auto& v : m.w1) v = r.f64();
  for (auto& v : m.b1) v = r.f64();
  for (auto& v : m.w2) v = r.f64();
  m.b2 = r.f64();
  return m;
}

inline void write_model(BinaryWriter& w, const Forest& m) {
  w.u32(static_cast<std::uint32_t>(m.n_features));
  w.u32(static_cast<std::uint32_t>(m.trees.size()));
  for (const auto& tree : m.trees) {
    w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
    for (const auto& node : tree.nodes) {
      w.u32(static_cast<std::uint32_t>(node.feature + 1));  // -1 -> 0
      w.f64(node.threshold);
      w.u32(static_cast<std::uint32_t>(node.left + 1));
      w.u32(static_cast<std::uint32_t>(node.right + 1));
      w.f64(node.p1);
    }
  }
}

inline Forest read_forest(BinaryReader& r) {
  Forest m;
  m.n_features = r.u32();
  m.trees.resize(r.u32());
  for (auto& tree : m.trees) {
    tree.nodes.resize(r.u32());
    for (auto& node : tree.nodes) {
      node.feature = static_cast<int>(r.u32()) - 1;
      node.threshold = r.f64();
      node.left = static_cast<int>(r.u32()) - 1;
      node.right = static_cast<int>(r.u32()) - 1;
      node.p1 = r.f64();
    }
  }
  return m;
}

inline void write_model(BinaryWriter& w, const ObliviousEnsemble& m) {
  w.f64(m.base_score);
  w.u64(m.params.iterations);
  w.u64(m.params.depth);
  w.f64(m.params.learning_rate);
  w.f64(m.params.l2_leaf_reg);
  w.u64(m.params.border_count);
  w.u64(m.params.seed);
  w.u32(static_cast<std::uint32_t>(m.borders.size()));
  for (const auto& borders : m.borders) {
    w.u32(static_cast<std::uint32_t>(borders.size()));
    for (double b : borders) w.f64(b);
  }
  w.u32(static_cast<std::uint32_t>(m.trees.size()));
  for (const auto& tree : m.trees) {
    w.u32(static_cast<std::uint32_t>(tree.levels.size()));
    for (const auto& level : tree.levels) {
      w.u32(static_cast<std::uint32_t>(level.feature));
      w.u32(static_cast<std::uint32_t>(level.border));
    }
    w.u32(static_cast<std::uint32_t>(tree.leaf_values.size()));
    for (double v : tree.leaf_values) w.f64(v);
  }
}

inline ObliviousEnsemble read_boost(BinaryReader& r) {
  ObliviousEnsemble m;
  m.base_score = r.f64();
  m.params.iterations = r.u64();
  m.params.depth = r.u64();
  m.params.learning_rate = r.f64();
  m.params.l2_leaf_reg = r.f64();
  m.params.border_count = r.u64();
  m.params.seed = r.u64();
  m.borders.resize(r.u32());
  for (auto& borders : m.borders) {
    borders.resize(r.u32());
    for (auto& b : borders) b = r.f64();
  }
  m.trees.resize(r.u32());
  for (auto& tree : m.trees) {
    tree.levels.resize(r.u32());
    for (auto& level : tree.levels) {
      level.feature = r.u32();
      level.border = r.u32();
    }
    tree.leaf_values.resize(r.u32());
    for (auto& v : tree.leaf_values) v = r.f64();
  }
  m.feature_names.clear();
  return m;
}

}  // namespace detail

inline std::string serialize_model(const ModelArtifact& artifact) {
  BinaryWriter w;
  w.u8(detail::kMagic[0]);
  w.u8(detail::kMagic[1]);
  w.u8(detail::kMagic[2]);
  w.u8(detail::kMagic[3]);
  w.u32(detail::kVersion);
  w.u8(static_cast<std::uint8_t>(artifact.model.index()));
  w.u32(static_cast<std::uint32_t>(artifact.feature_names.size()));
  for (const auto& name : artifact.feature_names) w.str(name);
  std::visit([&](const auto& m) { detail::write_model(w, m); }, artifact.model);
  return w.bytes();
}

inline ModelArtifact deserialize_model(const std::string& bytes) {
  BinaryReader r(bytes);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  require(std::equal(magic, magic + 4, detail::kMagic), "model-io",
          "bad magic bytes: not a model file");
  const std::uint32_t version = r.u32();
  require(version == detail::kVersion, "model-io",
          "unsupported model format version " + std::to_string(version) +
              " (expected " + std::to_string(detail::kVersion) + ")");
  const std::uint8_t family = r.u8();
  ModelArtifact artifact;
  artifact.feature_names.resize(r.u32());
  for (auto& name : artifact.feature_names) name = r.str();
  switch (static_cast<detail::Family>(family)) {
    case detail::Family::logreg:
      artifact.model = detail::read_logreg(r);
      break;
    case detail::Family::mlp:
      artifact.model = detail::read_mlp(r);
      break;
    case detail::Family::forest:
      artifact.model = detail::read_forest(r);
      break;
    case detail::Family::boost:
      artifact.model = detail::read_boost(r);
      break;
    default:
      fail("model-io", "unknown model family tag " + std::to_string(family));
  }
  require(r.exhausted(), "model-io", "trailing bytes after model payload");
  return artifact;
}

inline void save_model(const std::filesystem::path& path, const ModelArtifact& artifact) {
  write_text_file(path, serialize_model(artifact));
}

inline ModelArtifact load_model(const std::filesystem::path& path) {
  return deserialize_model(read_text_file(path));
}

}  // namespace ckd
