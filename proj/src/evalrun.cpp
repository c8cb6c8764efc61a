#include "flowglyph/evalrun.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>

#include "flowglyph/cnn/network.hpp"
#include "flowglyph/error.hpp"

namespace flowglyph {

namespace fs = std::filesystem;

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  const fs::path base = fs::path(path).parent_path();
  std::vector<ManifestEntry> entries;
  for (const Json& j : read_json_lines(path)) {
    if (!j.is_object() || !j.contains("path") || !j.contains("label") || !j.at("path").is_string() ||
        !j.at("label").is_string()) {
      throw Error(ErrorKind::MalformedInput, path + ": manifest lines need string \"path\" and \"label\"");
    }
    ManifestEntry e{j.at("path").get<std::string>(), j.at("label").get<std::string>()};
    if (fs::path(e.path).is_relative() && !fs::exists(e.path) && fs::exists(base / e.path)) {
      e.path = (base / e.path).string();
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::string& path, std::span<const ManifestEntry> entries) {
  std::vector<Json> lines;
  lines.reserve(entries.size());
  for (const ManifestEntry& e : entries) lines.push_back(Json{{"path", e.path}, {"label", e.label}});
  write_json_lines(path, lines);
}

Split split_dataset(std::span<const ManifestEntry> entries, std::uint64_t seed, double test_fraction) {
  if (entries.empty()) throw Error(ErrorKind::EmptyManifest, "nothing to split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "test fraction must lie strictly between 0 and 1");
  }
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < entries.size(); ++i) by_label[entries[i].label].push_back(i);

  Rng rng(seed);
  std::vector<bool> in_test(entries.size(), false);
  for (auto& [label, indices] : by_label) {
    rng.shuffle(std::span<std::size_t>(indices));
    const auto take = static_cast<std::size_t>(std::floor(static_cast<double>(indices.size()) * test_fraction + 0.5));
    for (std::size_t k = 0; k < take; ++k) in_test[indices[k]] = true;
  }
  Split split;
  for (std::size_t i = 0; i < entries.size(); ++i) (in_test[i] ? split.test : split.train).push_back(entries[i]);
  return split;
}

Metrics compute_metrics(const Confusion& c) {
  if (c.total() == 0) throw Error(ErrorKind::EmptyConfusion, "no evaluated samples");
  Metrics m;
  const auto d = [](std::uint64_t v) { return static_cast<double>(v); };
  m.accuracy = d(c.tp + c.tn) / d(c.total());
  m.precision = c.tp + c.fp == 0 ? 0.0 : d(c.tp) / d(c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 0.0 : d(c.tp) / d(c.tp + c.fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

void GlyphDataset::append(const Glyph& g, int target) {
  const auto normalized = normalize_glyph(g);
  for (double v : normalized) inputs.push_back(static_cast<float>(v));
  targets.push_back(target);
  labels.push_back(g.label);
  glyphs.push_back(g);
}

GlyphDataset load_glyph_dataset(std::span<const ManifestEntry> entries, const std::string& positive_label,
                                double idle_timeout) {
  std::vector<std::vector<Glyph>> per_entry(entries.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(entries.size()); ++i) {
    try {
      const ManifestEntry& e = entries[static_cast<std::size_t>(i)];
      const auto bytes = read_file_bytes(e.path);
      auto& out = per_entry[static_cast<std::size_t>(i)];
      if (bytes.size() >= 4 && bytes[0] == 'G' && bytes[1] == 'L' && bytes[2] == 'Y' && bytes[3] == '1') {
        out.push_back(decode_glyph(bytes));
      } else {
        for (const FeatureSet& features : features_from_capture(parse_pcap(bytes), idle_timeout)) {
          out.push_back(render_glyph(features));
        }
      }
      for (Glyph& g : out) g.label = e.label;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  GlyphDataset data;
  for (const auto& glyphs : per_entry) {
    for (const Glyph& g : glyphs) {
      data.append(g, g.label == positive_label ? kPositiveClass : kNegativeClass);
    }
  }
  return data;
}

Confusion evaluate(const cnn::Model<float>& model, const GlyphDataset& data) {
  Confusion c;
  const auto predictions = cnn::predict(model, data.inputs, data.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool predicted_positive = predictions[i].label == kPositiveClass;
    const bool actual_positive = data.targets[i] == kPositiveClass;
    if (predicted_positive && actual_positive) ++c.tp;
    else if (predicted_positive) ++c.fp;
    else if (actual_positive) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::uint64_t split_seed(std::uint64_t experiment_seed) { return derive_seed(experiment_seed, 100); }
std::uint64_t init_seed(std::uint64_t experiment_seed) { return derive_seed(experiment_seed, 101); }

ExperimentResult run_experiment(const ExperimentConfig& config, const cnn::EpochCallback& on_epoch) {
  const auto started = std::chrono::steady_clock::now();
  config.train.validate();
  const auto entries = read_manifest(config.manifest);
  if (entries.empty()) throw Error(ErrorKind::EmptyManifest, config.manifest + " lists no samples");
  const bool has_positive = std::any_of(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.label == config.positive_label; });
  const bool has_negative = std::any_of(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.label != config.positive_label; });
  if (!has_positive || !has_negative) {
    throw Error(ErrorKind::InvalidArgument, "manifest needs label '" + config.positive_label + "' and at least one other label");
  }

  const Split split = split_dataset(entries, split_seed(config.seed), config.test_fraction);
  const GlyphDataset train = load_glyph_dataset(split.train, config.positive_label, config.idle_timeout);
  const GlyphDataset test = load_glyph_dataset(split.test, config.positive_label, config.idle_timeout);

  auto model = cnn::Model<float>::initialized(config.classes, config.dropout, init_seed(config.seed));
  ExperimentResult result;
  result.model = cnn::fit(std::move(model), train.inputs, train.targets, config.train, on_epoch);
  result.confusion = evaluate(result.model, test);
  result.metrics = compute_metrics(result.confusion);
  result.train_samples = train.size();
  result.test_samples = test.size();
  result.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.report = Json{{"config", to_json(config)},
                       {"seed", config.seed},
                       {"confusion", to_json(result.confusion)},
                       {"metrics", to_json(result.metrics)},
                       {"train_samples", result.train_samples},
                       {"test_samples", result.test_samples},
                       {"runtime_s", result.runtime_s}};
  return result;
}

Json to_json(const Confusion& c) { return Json{{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}}; }

Json to_json(const Metrics& m) {
  return Json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

Json to_json(const ExperimentConfig& c) {
  return Json{{"manifest", c.manifest},
              {"positive_label", c.positive_label},
              {"test_fraction", c.test_fraction},
              {"idle_timeout", c.idle_timeout},
              {"classes", c.classes},
              {"dropout", c.dropout},
              {"train", to_json(c.train)}};
}

}  // namespace flowglyph
