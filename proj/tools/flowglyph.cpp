// flowglyph: pcap -> party-group glyphs -> CNN verdicts.
//
// Exit codes: 0 success, 1 usage error, 2 input format error, 3 runtime failure.

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flowglyph/cnn/network.hpp"
#include "flowglyph/error.hpp"
#include "flowglyph/evalrun.hpp"
#include "flowglyph/features.hpp"
#include "flowglyph/imaging.hpp"
#include "flowglyph/json_io.hpp"
#include "flowglyph/synth.hpp"

namespace fs = std::filesystem;
using namespace flowglyph;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string config_path;
  bool verbose = false;
  int threads = 1;
};

struct SynthOptions {
  std::string spec_path;
  std::string out_dir;
  std::size_t groups = 0;
};

struct ExtractOptions {
  std::vector<std::string> pcaps;
  std::string manifest;
  std::string out;
  std::string sessions_out;
  double idle_timeout = kDefaultIdleTimeout;
};

struct RenderOptions {
  std::string features;
  std::string out_dir;
  bool png = false;
};

struct TrainOptions {
  std::string manifest;
  std::string positive = "apt_cc";
  std::string model_out;
  std::string report;
  cnn::TrainConfig train;
  float dropout = cnn::arch::kDefaultDropout;
  int classes = cnn::arch::kDefaultClasses;
  double test_fraction = 0.2;
  double idle_timeout = kDefaultIdleTimeout;
};

struct EvalOptions {
  std::string manifest;
  std::string model;
  std::string positive = "apt_cc";
  std::string split = "test";
  double test_fraction = 0.2;
  double idle_timeout = kDefaultIdleTimeout;
};

struct ClassifyOptions {
  std::string model;
  std::string pcap;
  std::string positive = "apt_cc";
  std::string negative = "normal";
  double idle_timeout = kDefaultIdleTimeout;
};

void log(const GlobalOptions& g, const std::string& msg) {
  if (g.verbose) std::cerr << "[flowglyph] " << msg << '\n';
}

std::string label_name(int index, const std::string& positive, const std::string& negative) {
  if (index == kPositiveClass) return positive;
  if (index == kNegativeClass) return negative;
  return "class_" + std::to_string(index);
}

// Fills options the user did not pass on the command line from a JSON config:
// top-level keys apply to global flags, a nested object named after the
// subcommand applies to its flags (keys are long flag names without dashes).
void apply_config(CLI::App& app, const Json& config) {
  auto fill = [](CLI::App* scope, const Json& values) {
    for (CLI::Option* opt : scope->get_options()) {
      const std::string name = opt->get_single_name();
      if (opt->count() > 0 || !values.contains(name)) continue;
      const Json& v = values.at(name);
      const auto as_text = [](const Json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
      if (v.is_array()) {
        for (const Json& item : v) opt->add_result(as_text(item));
      } else if (v.is_boolean()) {
        if (v.get<bool>()) opt->add_result("true");
      } else {
        opt->add_result(as_text(v));
      }
      opt->run_callback();
    }
  };
  fill(&app, config);
  for (CLI::App* sub : app.get_subcommands()) {
    if (config.contains(sub->get_name()) && config.at(sub->get_name()).is_object()) fill(sub, config.at(sub->get_name()));
  }
}

int cmd_synth(const GlobalOptions& g, const SynthOptions& o) {
  DatasetSpec spec;
  if (!o.spec_path.empty()) {
    spec = dataset_spec_from_json(read_json_file(o.spec_path));
  } else {
    for (const auto& name : kDefaultProfileNames) spec.profiles.push_back(default_profile(name));
  }
  spec.seed = g.seed;
  if (!o.out_dir.empty()) spec.output_dir = o.out_dir;
  if (o.groups > 0) spec.groups_per_class = o.groups;
  log(g, "synthesizing " + std::to_string(spec.groups_per_class * spec.profiles.size()) + " groups into " + spec.output_dir);
  std::cout << synth_dataset(spec) << '\n';
  return 0;
}

int cmd_extract(const GlobalOptions& g, const ExtractOptions& o) {
  std::vector<ManifestEntry> inputs;
  for (const auto& p : o.pcaps) inputs.push_back({p, ""});
  if (!o.manifest.empty()) {
    for (auto& e : read_manifest(o.manifest)) inputs.push_back(std::move(e));
  }
  if (inputs.empty()) throw Error(ErrorKind::InvalidArgument, "give --pcap or --manifest");

  std::vector<Json> feature_lines;
  std::vector<Json> session_lines;
  for (const ManifestEntry& input : inputs) {
    const Capture capture = read_pcap_file(input.path);
    log(g, input.path + ": " + std::to_string(capture.stats.decoded) + " frames, " +
               std::to_string(capture.stats.skipped) + " skipped");
    const SessionSet sessions = assemble_sessions(capture, o.idle_timeout);
    for (const Session& s : sessions.sessions) {
      Json line = to_json(s);
      line["source"] = input.path;
      session_lines.push_back(std::move(line));
    }
    for (const PartyGroup& group : group_sessions(sessions)) {
      Json line = to_json(extract_features(group));
      line["source"] = input.path;
      if (!input.label.empty()) line["label"] = input.label;
      feature_lines.push_back(std::move(line));
    }
  }
  write_json_lines(o.out, feature_lines);
  if (!o.sessions_out.empty()) write_json_lines(o.sessions_out, session_lines);
  std::cout << o.out << '\n';
  return 0;
}

int cmd_render(const GlobalOptions& g, const RenderOptions& o) {
  const auto lines = read_json_lines(o.features);
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create '" + o.out_dir + "'");

  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const FeatureSet features = feature_set_from_json(lines[i]);
    Glyph glyph = render_glyph(features);
    glyph.label = lines[i].value("label", std::string());
    std::ostringstream stem;
    stem << "group_" << std::setw(5) << std::setfill('0') << i;
    const std::string glyph_path = (fs::path(o.out_dir) / (stem.str() + ".gly")).string();
    write_glyph_file(glyph_path, glyph);
    manifest.push_back({glyph_path, glyph.label});
    if (o.png) {
      write_file_bytes((fs::path(o.out_dir) / (stem.str() + ".png")).string(), render_presentation_png(features));
    }
  }
  const std::string manifest_path = (fs::path(o.out_dir) / "glyphs.jsonl").string();
  write_manifest(manifest_path, manifest);
  log(g, "rendered " + std::to_string(manifest.size()) + " glyphs");
  std::cout << manifest_path << '\n';
  return 0;
}

int cmd_train(const GlobalOptions& g, TrainOptions o) {
  ExperimentConfig config;
  config.manifest = o.manifest;
  config.positive_label = o.positive;
  config.train = o.train;
  config.train.seed = derive_seed(g.seed, 102);
  config.seed = g.seed;
  config.test_fraction = o.test_fraction;
  config.idle_timeout = o.idle_timeout;
  config.classes = o.classes;
  config.dropout = o.dropout;
  // Argument checks before any file is touched.
  config.train.validate();
  (void)cnn::Model<float>::zeros(config.classes, config.dropout);
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "--test-fraction must lie strictly between 0 and 1");
  }

  const ExperimentResult result = run_experiment(config, [&](std::size_t epoch, double loss) {
    log(g, "epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(loss));
  });
  cnn::save_model_file(o.model_out, result.model);
  Json report = result.report;
  report["model_path"] = o.model_out;
  const std::string report_path = o.report.empty() ? o.model_out + ".report.json" : o.report;
  write_file_bytes(report_path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(report.dump(2).data()),
                                                              report.dump(2).size()));
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_eval(const GlobalOptions& g, const EvalOptions& o) {
  if (o.split != "test" && o.split != "all") throw Error(ErrorKind::InvalidArgument, "--split must be test or all");
  const cnn::Model<float> model = cnn::load_model_file(o.model);
  const auto entries = read_manifest(o.manifest);
  const auto selected = o.split == "all" ? entries : split_dataset(entries, split_seed(g.seed), o.test_fraction).test;
  const GlyphDataset data = load_glyph_dataset(selected, o.positive, o.idle_timeout);
  const Confusion confusion = evaluate(model, data);
  const Json out{{"positive_label", o.positive},
                 {"split", o.split},
                 {"seed", g.seed},
                 {"samples", data.size()},
                 {"confusion", to_json(confusion)},
                 {"metrics", to_json(compute_metrics(confusion))}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_classify(const GlobalOptions&, const ClassifyOptions& o) {
  const cnn::Model<float> model = cnn::load_model_file(o.model);
  const Capture capture = read_pcap_file(o.pcap);
  GlyphDataset data;
  std::vector<Triplet> triplets;
  for (const FeatureSet& features : features_from_capture(capture, o.idle_timeout)) {
    data.append(render_glyph(features), kNegativeClass);
    triplets.push_back(features.group_ref);
  }
  const auto predictions = cnn::predict(model, data.inputs, data.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Json line{{"triplet", to_json(triplets[i])},
                    {"label", label_name(predictions[i].label, o.positive, o.negative)},
                    {"probability", predictions[i].probability}};
    std::cout << line.dump() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowglyph: two-party multi-session traffic glyphs and CNN classification"};
  app.require_subcommand(1);
  app.allow_extras(false);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Seed for every random stage (env FLOWGLYPH_SEED overrides)")->capture_default_str();
  app.add_option("--config", global.config_path, "JSON file overriding defaults");
  app.add_flag("--verbose", global.verbose, "Progress messages on stderr");
  app.add_option("--threads", global.threads, "OpenMP threads for parallel-safe stages")->capture_default_str()->check(CLI::PositiveNumber);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled synthetic pcap dataset");
  synth_cmd->add_option("--spec", synth.spec_path, "Dataset spec JSON (default: all built-in profiles)");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--groups", synth.groups, "Override groups_per_class");

  ExtractOptions extract;
  auto* extract_cmd = app.add_subcommand("extract", "Pcaps -> party-group feature sets (JSON lines)");
  extract_cmd->add_option("--pcap", extract.pcaps, "Input pcap files");
  extract_cmd->add_option("--manifest", extract.manifest, "Labeled pcap manifest (JSON lines)");
  extract_cmd->add_option("--out", extract.out, "Feature set output (JSON lines)")->required();
  extract_cmd->add_option("--sessions-out", extract.sessions_out, "Optional session dump (JSON lines)");
  extract_cmd->add_option("--idle-timeout", extract.idle_timeout, "Seconds of silence that split a session")->capture_default_str()->check(CLI::PositiveNumber);

  RenderOptions render;
  auto* render_cmd = app.add_subcommand("render", "Feature sets -> 28x28 glyph files");
  render_cmd->add_option("--features", render.features, "Feature set JSON lines")->required();
  render_cmd->add_option("--out", render.out_dir, "Output directory")->required();
  render_cmd->add_flag("--png", render.png, "Also write 640x320 presentation PNGs");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train on the 80% split and report held-out metrics");
  train_cmd->add_option("--manifest", train.manifest, "Manifest of pcaps or glyph files")->required();
  train_cmd->add_option("--positive", train.positive, "Positive (target) label")->capture_default_str();
  train_cmd->add_option("--model-out", train.model_out, "Model file to write")->required();
  train_cmd->add_option("--report", train.report, "Report path (default <model-out>.report.json)");
  train_cmd->add_option("--lr", train.train.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", train.train.momentum, "Momentum")->capture_default_str();
  train_cmd->add_option("--batch", train.train.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--epochs", train.train.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--dropout", train.dropout, "Dropout rate before the output layer")->capture_default_str();
  train_cmd->add_option("--classes", train.classes, "Output width K")->capture_default_str();
  train_cmd->add_option("--test-fraction", train.test_fraction, "Held-out fraction")->capture_default_str();
  train_cmd->add_option("--idle-timeout", train.idle_timeout, "Session idle timeout in seconds")->capture_default_str()->check(CLI::PositiveNumber);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Metrics of a saved model on a manifest");
  eval_cmd->add_option("--manifest", eval.manifest, "Manifest of pcaps or glyph files")->required();
  eval_cmd->add_option("--model", eval.model, "Model file")->required();
  eval_cmd->add_option("--positive", eval.positive, "Positive (target) label")->capture_default_str();
  eval_cmd->add_option("--split", eval.split, "test: held-out split for --seed; all: every entry")->capture_default_str();
  eval_cmd->add_option("--test-fraction", eval.test_fraction, "Held-out fraction")->capture_default_str();
  eval_cmd->add_option("--idle-timeout", eval.idle_timeout, "Session idle timeout in seconds")->capture_default_str()->check(CLI::PositiveNumber);

  ClassifyOptions classify;
  auto* classify_cmd = app.add_subcommand("classify", "Per-group verdicts for one pcap");
  classify_cmd->add_option("--model", classify.model, "Model file")->required();
  classify_cmd->add_option("--pcap", classify.pcap, "Capture to classify")->required();
  classify_cmd->add_option("--positive", classify.positive, "Name of class 1")->capture_default_str();
  classify_cmd->add_option("--negative", classify.negative, "Name of class 0")->capture_default_str();
  classify_cmd->add_option("--idle-timeout", classify.idle_timeout, "Session idle timeout in seconds")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
    if (!global.config_path.empty()) {
      apply_config(app, read_json_file(global.config_path));
    }
    if (const char* env = std::getenv("FLOWGLYPH_SEED"); env != nullptr && *env != '\0') {
      global.seed = std::stoull(env);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "flowglyph: " << e.what() << '\n';
    return is_input_format_error(e.kind()) ? kExitInput : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "flowglyph: bad configuration: " << e.what() << '\n';
    return kExitUsage;
  }
  omp_set_num_threads(global.threads);

  try {
    if (synth_cmd->parsed()) return cmd_synth(global, synth);
    if (extract_cmd->parsed()) return cmd_extract(global, extract);
    if (render_cmd->parsed()) return cmd_render(global, render);
    if (train_cmd->parsed()) return cmd_train(global, train);
    if (eval_cmd->parsed()) return cmd_eval(global, eval);
    if (classify_cmd->parsed()) return cmd_classify(global, classify);
  } catch (const Error& e) {
    std::cerr << "flowglyph: " << e.what() << '\n';
    if (e.kind() == ErrorKind::InvalidArgument) return kExitUsage;
    return is_input_format_error(e.kind()) ? kExitInput : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "flowglyph: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
