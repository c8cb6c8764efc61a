#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowglyph/cnn/model.hpp"
#include "flowglyph/cnn/trainer.hpp"
#include "flowglyph/imaging.hpp"
#include "flowglyph/json_io.hpp"

namespace flowglyph {

struct ManifestEntry {
  std::string path;
  std::string label;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// JSON-lines {"path", "label"}. Relative paths resolve against the working
/// directory first, then against the manifest's own directory.
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, std::span<const ManifestEntry> entries);

struct Split {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
};

/// Seeded split stratified by label: round(count * test_fraction) entries of
/// each label go to test. Both halves keep manifest order.
Split split_dataset(std::span<const ManifestEntry> entries, std::uint64_t seed, double test_fraction = 0.2);

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Accuracy, precision, recall and F1 of the positive class. Zero
/// denominators give 0. Throws Error{EmptyConfusion} for an empty confusion.
Metrics compute_metrics(const Confusion& c);

/// Index 1 is the positive class, every other label maps to index 0.
inline constexpr int kPositiveClass = 1;
inline constexpr int kNegativeClass = 0;

struct GlyphDataset {
  std::vector<float> inputs;  // size() x 784, normalized
  std::vector<int> targets;
  std::vector<std::string> labels;
  std::vector<Glyph> glyphs;

  std::size_t size() const { return targets.size(); }
  void append(const Glyph& g, int target);
};

/// Glyphs for every party group in the listed files. Entries may point at
/// pcaps (rendered here) or at GLY1 glyph files.
GlyphDataset load_glyph_dataset(std::span<const ManifestEntry> entries, const std::string& positive_label,
                                double idle_timeout = kDefaultIdleTimeout);

Confusion evaluate(const cnn::Model<float>& model, const GlyphDataset& data);

struct ExperimentConfig {
  std::string manifest;
  std::string positive_label = "apt_cc";
  cnn::TrainConfig train;
  std::uint64_t seed = 1;
  double test_fraction = 0.2;
  double idle_timeout = kDefaultIdleTimeout;
  int classes = cnn::arch::kDefaultClasses;
  float dropout = cnn::arch::kDefaultDropout;
};

struct ExperimentResult {
  Confusion confusion;
  Metrics metrics;
  cnn::Model<float> model;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  double runtime_s = 0.0;
  Json report;
};

/// Manifest -> glyphs -> stratified split -> train -> test-split metrics.
/// Every label other than `positive_label` is pooled into the negative class.
ExperimentResult run_experiment(const ExperimentConfig& config, const cnn::EpochCallback& on_epoch = {});

/// Seeds derived from the experiment seed for each stage.
std::uint64_t split_seed(std::uint64_t experiment_seed);
std::uint64_t init_seed(std::uint64_t experiment_seed);

Json to_json(const Confusion& c);
Json to_json(const Metrics& m);
Json to_json(const ExperimentConfig& c);

}  // namespace flowglyph
