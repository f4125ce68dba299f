// ovemo: command-line driver for the open-vocabulary emotion pipeline.
//
// Standard output carries tables and results, standard error carries logs and
// a one-line JSON error summary on failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ovemo/ovemo.hpp"

namespace {

using namespace ovemo;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<double> threshold;
  std::optional<int> min_votes;
  std::optional<std::string> strategy;
  std::vector<std::string> models;
  std::size_t jobs = 1;
};

void log(const std::string& message) { std::cerr << "[ovemo] " << message << '\n'; }

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return 2;
    case ErrorCode::kToolMissing: return 3;
    default: return 1;
  }
}

// Loads the config and applies flag overrides. Overrides go through the same
// validation as config fields.
RunConfig effective_config(const Overrides& o) {
  if (o.config_path.empty()) throw Error(ErrorCode::kConfig, "--config is required");
  RunConfig c = load_run_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.output_dir) c.output_dir = fs::absolute(*o.output_dir).string();
  if (!o.models.empty()) c.models = o.models;
  if (o.threshold) {
    if (!c.captions) c.captions = CaptionSettings{};
    c.captions->threshold = *o.threshold;
  }
  if (o.strategy || o.min_votes) {
    if (!c.fusion) c.fusion = FusionConfig{};
    if (o.strategy) c.fusion->strategy = parse_fusion_strategy(*o.strategy);
    if (o.min_votes) c.fusion->min_votes = *o.min_votes;
  }
  validate_run_config(c);
  return c;
}

fs::path start_run(const RunConfig& c) {
  const fs::path out = c.output_path();
  fs::create_directories(out);
  write_snapshot(c, out);
  return out;
}

int cmd_sample(const Overrides& o, std::optional<std::int64_t> n_frames, std::uint32_t k) {
  if (n_frames) {
    const auto indices = sample_frames(*n_frames, {k, o.seed.value_or(0)});
    for (std::size_t i = 0; i < indices.size(); ++i) std::cout << (i ? " " : "") << indices[i];
    std::cout << '\n';
    return 0;
  }
  const RunConfig c = effective_config(o);
  const fs::path out = start_run(c);
  const auto selections = run_sample(c, load_manifest(c, false), out);
  for (const auto& sel : selections) {
    std::cout << sel.sample_id << ':';
    for (auto i : sel.indices) std::cout << ' ' << i;
    if (!sel.error.empty()) std::cout << "  (" << sel.error << ')';
    std::cout << '\n';
  }
  log("wrote " + (out / "frames.jsonl").string());
  return 0;
}

int cmd_ingest(const Overrides& o, const std::string& manifest_flag, const std::string& tool) {
  fs::path manifest_path;
  fs::path out;
  SplitTag split = SplitTag::kTest;
  if (!manifest_flag.empty()) {
    manifest_path = manifest_flag;
    out = o.output_dir ? fs::path(*o.output_dir) : fs::path("ingested");
  } else {
    const RunConfig c = effective_config(o);
    manifest_path = c.resolve(c.manifest);
    split = c.split;
    out = c.output_path();
  }
  if (!fs::is_regular_file(manifest_path)) {
    throw Error(ErrorCode::kConfig, "manifest not found: " + manifest_path.string());
  }
  DatasetManifest input = read_manifest(manifest_path, split);
  require_valid(input, false);
  fs::create_directories(out);
  const IngestResult result =
      ingest_manifest(input, fs::absolute(manifest_path).parent_path(), out, tool);
  write_manifest(out / "manifest.jsonl", result.manifest);
  Json meta;
  meta["tool"] = result.tool;
  meta["tool_version"] = result.tool_version;
  meta["videos_extracted"] = result.extracted;
  meta["records"] = result.manifest.records.size();
  write_text_file(out / "ingest.json", meta.dump(2) + "\n");
  std::cout << "ingested " << result.manifest.records.size() << " records ("
            << result.extracted << " videos extracted) with " << result.tool_version << '\n';
  return 0;
}

int cmd_captions(const Overrides& o) {
  const RunConfig c = effective_config(o);
  const fs::path out = start_run(c);
  const auto client = make_client(c);
  const CaptionDataset dataset = run_captions(c, *client, out, o.jobs);
  std::cout << to_json(dataset.stats).dump(2) << '\n';
  log("wrote " + (out / "captions" / "dataset.jsonl").string());
  return 0;
}

int cmd_infer(const Overrides& o) {
  const RunConfig c = effective_config(o);
  if (c.models.empty()) throw Error(ErrorCode::kConfig, "no models to run");
  const fs::path out = start_run(c);
  const DatasetManifest manifest = load_manifest(c, false);
  const auto client = make_client(c);
  log("infer: " + std::to_string(manifest.records.size()) + " samples x " +
      std::to_string(c.models.size()) + " models");
  const auto preds = run_inference(c, manifest, *client, c.models, out, o.jobs);
  for (const auto& model : c.models) {
    std::size_t empty = 0;
    for (const auto& p : preds.at(model)) empty += p.is_empty() ? 1 : 0;
    std::cout << model << ": " << preds.at(model).size() << " predictions, " << empty
              << " empty -> " << predictions_path(out, model).string() << '\n';
  }
  return 0;
}

int cmd_eval(const Overrides& o, const std::vector<std::string>& prediction_files) {
  const RunConfig c = effective_config(o);
  const fs::path out = start_run(c);
  const DatasetManifest manifest = load_manifest(c, true);
  const SynonymLexicon lexicon = load_lexicon(c);

  std::vector<std::pair<std::string, MetricReport>> rows;
  if (!prediction_files.empty()) {
    for (const auto& file : prediction_files) {
      if (!fs::is_regular_file(file)) {
        throw Error(ErrorCode::kConfig, "predictions not found: " + file);
      }
      rows.emplace_back(fs::path(file).stem().string(),
                        run_eval(read_predictions(file), manifest, lexicon));
    }
  } else {
    if (c.models.empty()) throw Error(ErrorCode::kConfig, "no models or --predictions to evaluate");
    for (const auto& model : c.models) {
      rows.emplace_back(model, run_eval(load_model_predictions(out, model), manifest, lexicon));
    }
  }
  for (const auto& [name, report] : rows) write_report(out, name, report);
  std::cout << format_table(rows);
  return 0;
}

int cmd_fuse(const Overrides& o) {
  const RunConfig c = effective_config(o);
  if (!c.fusion) throw Error(ErrorCode::kConfig, "config has no fusion section");
  if (c.models.empty()) throw Error(ErrorCode::kConfig, "no models to fuse");
  const fs::path out = start_run(c);
  const DatasetManifest manifest = load_manifest(c, true);
  const SynonymLexicon lexicon = load_lexicon(c);
  PredictionsByModel by_model;
  for (const auto& model : c.models) by_model[model] = load_model_predictions(out, model);
  const FusedEvaluation result = run_fuse_eval(manifest, lexicon, by_model, c.models, *c.fusion, out);
  auto rows = result.constituents;
  rows.emplace_back(result.name, result.fused);
  std::cout << format_table(rows);
  log("wrote " + report_path(out, result.name).string());
  return 0;
}

int cmd_report(const Overrides& o) {
  fs::path out;
  std::optional<RunConfig> config;
  if (!o.config_path.empty()) {
    config = effective_config(o);
    out = config->output_path();
  } else if (o.output_dir) {
    out = *o.output_dir;
  } else {
    throw Error(ErrorCode::kConfig, "report needs --config or --output-dir");
  }
  const fs::path dir = out / "reports";
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kConfig, "no reports under " + out.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, MetricReport>> rows;
  for (const auto& f : files) {
    const Json j = Json::parse(read_text_file(f));
    rows.emplace_back(j.value("name", f.stem().string()), metric_report_from_json(j));
  }
  std::cout << format_table(rows);
  if (config && !config->manifest.empty()) {
    SplitSummary summary;
    summary.add(load_manifest(*config, false));
    std::cout << "\nsplit";
    for (const auto& [split, count] : summary.by_split) std::cout << "  " << split << "=" << count;
    std::cout << "\npreprocess";
    for (const auto& [tag, count] : summary.by_preprocess) std::cout << "  " << tag << "=" << count;
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-vocabulary video emotion pipeline"};
  app.require_subcommand(1);

  Overrides o;
  std::optional<std::int64_t> n_frames;
  std::uint32_t k_segments = kDefaultSegments;
  std::string manifest_flag;
  std::string tool = "ffmpeg";
  std::vector<std::string> prediction_files;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "Run config (JSON)");
    sub->add_option("--seed", o.seed, "Override the global seed");
    sub->add_option("-o,--output-dir", o.output_dir, "Override the output directory");
    sub->add_option("-j,--jobs", o.jobs, "Concurrent workers")->check(CLI::PositiveNumber);
  };

  auto* sample = app.add_subcommand("sample", "Select frames per sample");
  add_common(sample);
  sample->add_option("--n-frames", n_frames, "Sample a single video of this many frames");
  sample->add_option("-k,--segments", k_segments, "Segments for --n-frames")
      ->check(CLI::PositiveNumber);

  auto* ingest = app.add_subcommand("ingest", "Extract frames from videos via an external tool");
  add_common(ingest);
  ingest->add_option("--manifest", manifest_flag, "Manifest to ingest (instead of the config's)");
  ingest->add_option("--tool", tool, "Frame extractor executable");

  auto* captions = app.add_subcommand("captions", "Build a filtered caption dataset");
  add_common(captions);
  captions->add_option("--threshold", o.threshold, "Similarity threshold")
      ->check(CLI::Range(0.0, 1.0));

  auto* infer = app.add_subcommand("infer", "Query model backends and write predictions");
  add_common(infer);
  infer->add_option("--models", o.models, "Models to run");

  auto* fuse = app.add_subcommand("fuse", "Fuse model predictions and score the result");
  add_common(fuse);
  fuse->add_option("--models", o.models, "Models to fuse");
  fuse->add_option("--strategy", o.strategy, "union | vote")
      ->check(CLI::IsMember({"union", "vote"}));
  fuse->add_option("--min-votes", o.min_votes, "Votes required by the vote strategy")
      ->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  add_common(eval);
  eval->add_option("--models", o.models, "Models to score");
  eval->add_option("--predictions", prediction_files, "Prediction files to score");

  auto* report = app.add_subcommand("report", "Print stored reports as a table");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    Json summary;
    summary["error"] = std::string(to_string(ErrorCode::kConfig));
    summary["message"] = e.what();
    std::cerr << summary.dump() << '\n';
    return exit_code_for(ErrorCode::kConfig);
  }

  try {
    if (sample->parsed()) return cmd_sample(o, n_frames, k_segments);
    if (ingest->parsed()) return cmd_ingest(o, manifest_flag, tool);
    if (captions->parsed()) return cmd_captions(o);
    if (infer->parsed()) return cmd_infer(o);
    if (fuse->parsed()) return cmd_fuse(o);
    if (eval->parsed()) return cmd_eval(o, prediction_files);
    if (report->parsed()) return cmd_report(o);
  } catch (const Error& e) {
    Json summary;
    summary["error"] = std::string(to_string(e.code()));
    summary["message"] = e.what();
    std::cerr << summary.dump() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    Json summary;
    summary["error"] = "InternalError";
    summary["message"] = e.what();
    std::cerr << summary.dump() << '\n';
    return 1;
  }
  return 0;
}
