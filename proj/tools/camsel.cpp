// camsel: command-line front end. Every output file gets a sibling
// <file>.manifest.json recording the command, config, seed and digests.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "camsel/camsel.hpp"
#include "camsel/manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace camsel;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

unsigned resolve_cli_threads(const Globals& g) {
  if (g.threads) return *g.threads;
  if (const char* env = std::getenv("CAMSEL_THREADS")) {
    try {
      return static_cast<unsigned>(std::stoul(env));
    } catch (const std::exception&) {
      throw Error(std::string("CAMSEL_THREADS is not a number: '") + env + "'");
    }
  }
  return 0;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("'" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

/// Shared bookkeeping of one invocation.
class Run {
 public:
  Run(std::string command, const Globals& g, const json* config = nullptr)
      : threads_(resolve_cli_threads(g)) {
    manifest_.command = std::move(command);
    if (g.seed) {
      manifest_.seed = *g.seed;
    } else if (config && config->contains("seed") && (*config)["seed"].is_number_unsigned()) {
      manifest_.seed = (*config)["seed"].get<std::uint64_t>();
    } else {
      std::random_device rd;
      manifest_.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
      manifest_.seed_was_random = true;
    }
    manifest_.threads = threads_;
  }

  std::uint64_t seed() const { return manifest_.seed; }
  unsigned threads() const { return threads_; }
  void input(const std::string& p) { manifest_.add_input(p); }
  void config(ordered_json c) { manifest_.config = std::move(c); }
  void output(const std::string& p) { outputs_.push_back(p); }

  void finish() {
    for (const auto& p : outputs_) manifest_.add_output(p);
    for (const auto& p : outputs_) manifest_.write_next_to(p);
  }

 private:
  RunManifest manifest_;
  unsigned threads_;
  std::vector<std::string> outputs_;
};

PipelineConfig load_pipeline_config(const std::string& path, json* raw) {
  if (path.empty()) return {};
  *raw = read_json_file(path);
  return PipelineConfig::from_json(*raw);
}

LoadOptions allow_missing() {
  LoadOptions o;
  o.require_all_dims_observed = false;
  return o;
}

// ---- featurize ----

struct FeaturizeArgs {
  std::string detections, labels, out, pool = "average_max", heat = "sum";
  std::string game_id = "game", sequence_id = "seq0";
  std::size_t cameras = 0, cells_x = 16, cells_y = 9;
  double image_w = 1280, image_h = 720;
  bool exact = false;
};

int cmd_featurize(const FeaturizeArgs& a, const Globals& g) {
  Run run("featurize", g);
  run.input(a.detections);
  GridGeometry geom;
  geom.cells_x = a.cells_x;
  geom.cells_y = a.cells_y;
  geom.image_w = a.image_w;
  geom.image_h = a.image_h;
  geom.validate();
  HeatmapOptions opts;
  if (a.heat == "average") {
    opts.heat = PointHeat::average;
  } else if (a.heat != "sum") {
    throw Error("--point-heat must be 'sum' or 'average'");
  }
  if (a.exact) opts.summation = Summation::exact;
  const PoolMode pool = parse_pool_mode(a.pool);

  // frame -> camera -> boxes
  std::map<std::int64_t, std::map<std::size_t, std::vector<DetectionBox>>> frames;
  std::optional<std::size_t> appearance_dim;
  std::size_t max_camera = 0;
  std::ifstream in(a.detections);
  if (!in) throw Error("cannot open '" + a.detections + "'");
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(text);
      const auto frame = j.at("frame").get<std::int64_t>();
      const auto cam = j.at("camera").get<std::size_t>();
      max_camera = std::max(max_camera, cam);
      auto& boxes = frames[frame][cam];
      for (const auto& b : j.at("boxes")) {
        DetectionBox box{b.at("x1").get<double>(), b.at("y1").get<double>(),
                         b.at("x2").get<double>(), b.at("y2").get<double>(),
                         b.at("appearance").get<std::vector<double>>()};
        if (!appearance_dim) appearance_dim = box.appearance.size();
        boxes.push_back(std::move(box));
      }
    } catch (const json::exception& e) {
      throw ParseError(line, e.what());
    }
  }
  if (frames.empty()) throw Error("no detection records");
  if (!appearance_dim || *appearance_dim == 0) throw Error("no boxes with appearance vectors");
  const std::size_t K = a.cameras ? a.cameras : max_camera + 1;
  if (max_camera >= K) throw Error("camera index " + std::to_string(max_camera) + " >= --cameras");

  std::map<std::int64_t, std::uint32_t> labels;
  if (!a.labels.empty()) {
    run.input(a.labels);
    std::ifstream lin(a.labels);
    if (!lin) throw Error("cannot open '" + a.labels + "'");
    line = 0;
    while (std::getline(lin, text)) {
      ++line;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const json j = json::parse(text);
        labels[j.at("frame").get<std::int64_t>()] = j.at("label").get<std::uint32_t>();
      } catch (const json::exception& e) {
        throw ParseError(line, e.what());
      }
    }
  }

  std::vector<MultiViewSample> samples;
  std::size_t F = 0;
  for (const auto& [frame, cams] : frames) {
    MultiViewSample s;
    s.game_id = a.game_id;
    s.sequence_id = a.sequence_id;
    s.frame_index = frame;
    for (std::size_t k = 0; k < K; ++k) {
      auto it = cams.find(k);
      if (it == cams.end()) {
        s.blocks.push_back(FeatureBlock::missing());
        continue;
      }
      auto v = pool_heatmap(build_heatmap(it->second, geom, *appearance_dim, opts), pool);
      F = v.size();
      s.blocks.push_back(FeatureBlock::observed(std::move(v)));
    }
    if (auto l = labels.find(frame); l != labels.end()) {
      if (l->second >= K) throw Error("label out of range at frame " + std::to_string(frame));
      s.label = CameraId(l->second);
    }
    samples.push_back(std::move(s));
  }
  DatasetConfig dc;
  dc.K = K;
  dc.F = F;
  const Dataset d(dc, std::move(samples));
  save_dataset(a.out, d);
  ordered_json cfg;
  cfg["grid"] = {a.cells_x, a.cells_y};
  cfg["image"] = {a.image_w, a.image_h};
  cfg["pool"] = a.pool;
  cfg["point_heat"] = a.heat;
  cfg["exact"] = a.exact;
  cfg["K"] = K;
  cfg["F"] = F;
  run.config(cfg);
  run.output(a.out);
  run.finish();
  return 0;
}

// ---- gen-synth ----

int cmd_gen_synth(const std::string& config_path, const std::string& out_visible,
                  const std::string& out_truth, const Globals& g) {
  json raw = json::object();
  if (!config_path.empty()) raw = read_json_file(config_path);
  Run run("gen-synth", g, &raw);
  if (!config_path.empty()) run.input(config_path);
  SynthConfig c = SynthConfig::from_json(raw);
  c.seed = run.seed();
  const SynthData data = generate(c, run.threads());
  save_dataset(out_visible, data.visible);
  run.output(out_visible);
  if (!out_truth.empty()) {
    save_dataset(out_truth, data.truth);
    run.output(out_truth);
  }
  run.config(c.to_json());
  run.finish();
  return 0;
}

// ---- impute ----

struct ImputeArgs {
  std::string method = "rsf", complete, incomplete, data, truth, config, out, report;
};

int cmd_impute(const ImputeArgs& a, const Globals& g) {
  json raw = json::object();
  if (!a.config.empty()) raw = read_json_file(a.config);
  Run run("impute", g, &raw);
  if (!a.config.empty()) run.input(a.config);
  if (raw.contains("survival")) raw = raw["survival"];
  SurvivalConfig sc = SurvivalConfig::from_json(raw);
  sc.seed = derive_seed(run.seed(), "rsf");

  Dataset complete, incomplete;
  std::vector<std::size_t> incomplete_ids;
  std::optional<Dataset> whole;
  if (!a.data.empty()) {
    if (!a.complete.empty() || !a.incomplete.empty()) {
      throw Error("use either --data or --complete/--incomplete");
    }
    run.input(a.data);
    whole = load_dataset(a.data, allow_missing());
    for (std::size_t i = 0; i < whole->size(); ++i) {
      if (!(*whole)[i].is_complete()) incomplete_ids.push_back(i);
    }
    std::tie(complete, incomplete) = split_complete_incomplete(*whole);
  } else {
    if (a.complete.empty() || a.incomplete.empty()) {
      throw Error("impute needs --data, or both --complete and --incomplete");
    }
    run.input(a.complete);
    run.input(a.incomplete);
    complete = load_dataset(a.complete);
    incomplete = load_dataset(a.incomplete, allow_missing());
  }

  ImputationResult r;
  if (a.method == "rsf") {
    r = impute_rsf(complete, incomplete, sc, run.threads());
  } else if (a.method == "nn") {
    r = impute_nn(complete, incomplete, run.threads());
  } else if (a.method == "mean") {
    r = impute_mean(complete, incomplete);
  } else {
    throw Error("--method must be rsf, nn or mean");
  }

  if (whole) {
    std::vector<MultiViewSample> merged = whole->samples();
    for (std::size_t i = 0; i < incomplete_ids.size(); ++i) {
      merged[incomplete_ids[i]] = r.imputed[i];
    }
    save_dataset(a.out, Dataset(whole->config(), std::move(merged)));
  } else {
    save_dataset(a.out, r.imputed);
  }
  run.output(a.out);

  if (!a.report.empty()) {
    ordered_json rep;
    rep["method"] = r.method;
    rep["imputed_samples"] = r.imputed.size();
    rep["imputed_scalars"] = r.imputed_count();
    if (!a.truth.empty()) {
      run.input(a.truth);
      Dataset truth = load_dataset(a.truth);
      if (whole && truth.size() == whole->size()) truth = truth.subset(incomplete_ids);
      rep["error"] = imputation_error(r, truth).to_json();
    }
    write_json_file(a.report, rep);
    run.output(a.report);
  }
  ordered_json cfg;
  cfg["method"] = a.method;
  cfg["survival"] = sc.to_json();
  run.config(cfg);
  run.finish();
  return 0;
}

// ---- train / predict ----

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& out, const Globals& g) {
  json raw = json::object();
  if (!config_path.empty()) raw = read_json_file(config_path);
  Run run("train", g, &raw);
  if (!config_path.empty()) run.input(config_path);
  if (raw.contains("forest")) raw = raw["forest"];
  ForestConfig fc = ForestConfig::from_json(raw);
  fc.seed = derive_seed(run.seed(), "forest");
  run.input(data_path);
  const Dataset d = load_dataset(data_path, allow_missing());
  const Forest model = train_forest(d, fc, run.threads());
  write_json_file(out, model.to_json());
  run.output(out);
  run.config(fc.to_json());
  run.finish();
  return 0;
}

Forest load_model(const std::string& path) { return Forest::from_json(read_json_file(path)); }

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out, const Globals& g) {
  Run run("predict", g);
  run.input(model_path);
  run.input(data_path);
  const Forest model = load_model(model_path);
  LoadOptions lo;
  lo.require_label = false;
  const Dataset d = load_dataset(data_path, lo);
  const SelectionTimeline t = predict_sequence(model, d);
  write_json_file(out, t.to_json());
  run.output(out);
  std::size_t labeled = 0, correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d[i].label) continue;
    ++labeled;
    if (*d[i].label == t.cameras[i]) ++correct;
  }
  if (labeled > 0) {
    std::cerr << "accuracy " << static_cast<double>(correct) / static_cast<double>(labeled)
              << " (" << correct << "/" << labeled << ")\n";
  }
  run.finish();
  return 0;
}

// ---- pipeline ----

int cmd_pipeline(const std::string& main_path, const std::string& aux_path,
                 const std::string& config_path, const std::string& out,
                 const std::string& report_path, const Globals& g) {
  json raw = json::object();
  PipelineConfig pc = load_pipeline_config(config_path, &raw);
  Run run("pipeline", g, &raw);
  if (!config_path.empty()) run.input(config_path);
  pc.seed_all(run.seed());
  run.input(main_path);
  const Dataset main = load_dataset(main_path);
  Dataset aux(main.config(), {});
  if (!aux_path.empty()) {
    run.input(aux_path);
    LoadOptions lo = allow_missing();
    lo.schema = main.config();
    aux = load_dataset(aux_path, lo);
  }
  const TrainedPipeline trained = train_full(main, aux, pc, run.threads());
  write_json_file(out, trained.model.to_json());
  run.output(out);
  if (!report_path.empty()) {
    write_json_file(report_path, trained.report.to_json());
    run.output(report_path);
  }
  run.config(pc.to_json());
  run.finish();
  return 0;
}

// ---- select / smooth ----

int cmd_select(const std::string& model_path, const std::string& frames_path,
               std::size_t smooth, const std::string& out, const Globals& g) {
  Run run("select", g);
  run.input(model_path);
  run.input(frames_path);
  const Forest model = load_model(model_path);
  LoadOptions lo;
  lo.require_label = false;
  SelectionTimeline t = predict_sequence(model, load_dataset(frames_path, lo));
  if (smooth > 1) t = smooth_timeline(t, smooth);
  write_json_file(out, t.to_json());
  run.output(out);
  run.config({{"smooth", smooth}});
  run.finish();
  return 0;
}

int cmd_smooth(const std::string& timeline_path, std::size_t tau, const std::string& out,
               const Globals& g) {
  Run run("smooth", g);
  run.input(timeline_path);
  const SelectionTimeline t = SelectionTimeline::from_json(read_json_file(timeline_path));
  write_json_file(out, smooth_timeline(t, tau).to_json());
  run.output(out);
  run.config({{"min_duration", tau}});
  run.finish();
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string config, data, aux, truth, out, confusion_csv;
  std::size_t folds = 3;
};

int cmd_eval(const EvalArgs& a, const Globals& g) {
  json raw = json::object();
  PipelineConfig pc = load_pipeline_config(a.config, &raw);
  Run run("eval", g, &raw);
  if (!a.config.empty()) run.input(a.config);
  pc.seed_all(run.seed());
  run.input(a.data);
  const Dataset data = load_dataset(a.data, allow_missing());
  std::vector<std::size_t> incomplete_ids;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].is_complete()) incomplete_ids.push_back(i);
  }
  auto [main, aux] = split_complete_incomplete(data);
  if (!a.aux.empty()) {
    run.input(a.aux);
    LoadOptions lo = allow_missing();
    lo.schema = data.config();
    aux = concat(aux, load_dataset(a.aux, lo));
  }
  const auto folds = cv_splits(main, a.folds, derive_seed(run.seed(), "folds"));
  EvalReport report = evaluate(pc, main, aux, folds, run.threads());

  // Threshold curve of the imputer: on the real missing views when the truth
  // is supplied, otherwise on views masked out of the complete data.
  if (!a.truth.empty()) {
    run.input(a.truth);
    const Dataset truth = load_dataset(a.truth);
    if (truth.size() != data.size()) throw Error("--truth must align with --data");
    if (!incomplete_ids.empty()) {
      const auto incomplete = data.subset(incomplete_ids);
      const auto r = impute_rsf(main, incomplete, pc.survival, run.threads());
      report.imputation = imputation_error(r, truth.subset(incomplete_ids));
    }
  } else if (main.size() >= 10) {
    report.imputation = imputation_probe(main, pc.survival, 0.2, run.threads());
  }

  const EvalReport baseline = evaluate_with(
      main, folds, [](const Dataset& tr) -> Predictor { return baseline_constant(tr); });
  ordered_json j = report.to_json();
  j["folds"] = a.folds;
  j["baseline_constant_accuracy"] = baseline.overall_accuracy;
  write_json_file(a.out, j);
  run.output(a.out);
  if (!a.confusion_csv.empty()) {
    std::ofstream csv(a.confusion_csv, std::ios::binary);
    if (!csv) throw Error("cannot write '" + a.confusion_csv + "'");
    report.write_confusion_csv(csv);
    csv.close();
    run.output(a.confusion_csv);
  }
  ordered_json cfg = pc.to_json();
  cfg["folds"] = a.folds;
  run.config(cfg);
  run.finish();
  return 0;
}

void print_error(const std::string& command, const std::string& message) {
  ordered_json e;
  e["error"] = {{"command", command}, {"message", message}};
  std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera selection from multi-view features"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Root seed (random if omitted)");
  auto* threads_opt =
      app.add_option("--threads", threads, "Worker threads; 0 = all cores (env CAMSEL_THREADS)");

  FeaturizeArgs fa;
  auto* featurize = app.add_subcommand("featurize", "Detections -> pooled heatmap features");
  featurize->add_option("--detections", fa.detections)->required()->check(CLI::ExistingFile);
  featurize->add_option("--labels", fa.labels, "JSONL of {frame, label}")->check(CLI::ExistingFile);
  featurize->add_option("--out", fa.out)->required();
  featurize->add_option("--cameras", fa.cameras, "K; default max camera index + 1");
  featurize->add_option("--cells-x", fa.cells_x);
  featurize->add_option("--cells-y", fa.cells_y);
  featurize->add_option("--image-width", fa.image_w);
  featurize->add_option("--image-height", fa.image_h);
  featurize->add_option("--pool", fa.pool, "average|max|flatten|average_max");
  featurize->add_option("--point-heat", fa.heat, "sum|average");
  featurize->add_flag("--exact", fa.exact, "Order-independent fixed-point summation");
  featurize->add_option("--game-id", fa.game_id);
  featurize->add_option("--sequence-id", fa.sequence_id);

  std::string synth_config, out_visible, out_truth;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic multi-view dataset");
  gen->add_option("--config", synth_config)->check(CLI::ExistingFile);
  gen->add_option("--out-visible", out_visible)->required();
  gen->add_option("--out-truth", out_truth);

  ImputeArgs ia;
  auto* impute = app.add_subcommand("impute", "Fill missing camera views");
  impute->add_option("--method", ia.method)->check(CLI::IsMember({"rsf", "nn", "mean"}));
  impute->add_option("--complete", ia.complete)->check(CLI::ExistingFile);
  impute->add_option("--incomplete", ia.incomplete)->check(CLI::ExistingFile);
  impute->add_option("--data", ia.data, "Mixed file; output keeps its order")->check(CLI::ExistingFile);
  impute->add_option("--truth", ia.truth)->check(CLI::ExistingFile);
  impute->add_option("--config", ia.config)->check(CLI::ExistingFile);
  impute->add_option("--out", ia.out)->required();
  impute->add_option("--report", ia.report);

  std::string data_path, config_path, out_path, model_path;
  auto* train = app.add_subcommand("train", "Train a forest on complete data");
  train->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  train->add_option("--config", config_path)->check(CLI::ExistingFile);
  train->add_option("--out", out_path)->required();

  auto* predict = app.add_subcommand("predict", "Per-frame predictions of a model");
  predict->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  predict->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out_path)->required();

  std::string main_path, aux_path, report_path;
  auto* pipeline = app.add_subcommand("pipeline", "Impute, verify and train");
  pipeline->add_option("--main", main_path)->required()->check(CLI::ExistingFile);
  pipeline->add_option("--aux", aux_path)->check(CLI::ExistingFile);
  pipeline->add_option("--config", config_path)->check(CLI::ExistingFile);
  pipeline->add_option("--out", out_path)->required();
  pipeline->add_option("--report", report_path);

  std::string frames_path;
  std::size_t smooth = 0;
  auto* select = app.add_subcommand("select", "Camera timeline for a frame sequence");
  select->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  select->add_option("--frames", frames_path)->required()->check(CLI::ExistingFile);
  select->add_option("--smooth", smooth, "Minimum segment length in frames");
  select->add_option("--out", out_path)->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Sequence-level cross-validation");
  eval->add_option("--config", ea.config)->check(CLI::ExistingFile);
  eval->add_option("--data", ea.data)->required()->check(CLI::ExistingFile);
  eval->add_option("--aux", ea.aux)->check(CLI::ExistingFile);
  eval->add_option("--truth", ea.truth, "Complete version of --data")->check(CLI::ExistingFile);
  eval->add_option("--folds", ea.folds);
  eval->add_option("--out", ea.out)->required();
  eval->add_option("--confusion-csv", ea.confusion_csv);

  std::string timeline_path;
  std::size_t tau = 60;
  auto* smooth_cmd = app.add_subcommand("smooth", "Minimum-duration filter of a timeline");
  smooth_cmd->add_option("--timeline", timeline_path)->required()->check(CLI::ExistingFile);
  smooth_cmd->add_option("--min-duration", tau);
  smooth_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (*seed_opt) g.seed = seed;
  if (*threads_opt) g.threads = threads;

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*featurize) return cmd_featurize(fa, g);
    if (*gen) return cmd_gen_synth(synth_config, out_visible, out_truth, g);
    if (*impute) return cmd_impute(ia, g);
    if (*train) return cmd_train(data_path, config_path, out_path, g);
    if (*predict) return cmd_predict(model_path, data_path, out_path, g);
    if (*pipeline) return cmd_pipeline(main_path, aux_path, config_path, out_path, report_path, g);
    if (*select) return cmd_select(model_path, frames_path, smooth, out_path, g);
    if (*eval) return cmd_eval(ea, g);
    if (*smooth_cmd) return cmd_smooth(timeline_path, tau, out_path, g);
  } catch (const std::exception& e) {
    print_error(name, e.what());
    return 1;
  }
  return 2;
}
