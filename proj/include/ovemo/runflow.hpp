#pragma once

// End-to-end evaluation runs.
//
// Output tree (all files written in manifest order):
//   effective_config.json          snapshot of every setting that shapes outputs
//   frames.jsonl                   selected frame indices per sample
//   predictions/<model>.jsonl      one PredictionRecord per sample
//   fused/<strategy>.jsonl         fused predictions, model_id "fused:<strategy>"
//   reports/<name>.json            MetricReport per model or fusion
//   audit/<sample_id>/             frames.json, <model>.prompt.txt,
//                                  <model>.response.txt, <model>.error.txt
//   captions/dataset.jsonl, captions/stats.json, captions/pairs.jsonl

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ovemo/backend.hpp"
#include "ovemo/caption.hpp"
#include "ovemo/config.hpp"
#include "ovemo/core.hpp"
#include "ovemo/error.hpp"
#include "ovemo/fusion.hpp"
#include "ovemo/http_backend.hpp"
#include "ovemo/jsonl.hpp"
#include "ovemo/labelspace.hpp"
#include "ovemo/metrics.hpp"
#include "ovemo/parallel.hpp"
#include "ovemo/sampler.hpp"

namespace ovemo {

// Maps an id onto a safe single path component.
inline std::string file_component(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

inline std::unique_ptr<BackendClient> make_client(const RunConfig& config) {
  auto client = std::make_unique<BackendClient>();
  for (const auto& spec : config.backends) {
    client->add(spec, make_backend(spec, config.base_dir));
  }
  return client;
}

inline DatasetManifest load_manifest(const RunConfig& config, bool require_ground_truth) {
  if (config.manifest.empty()) throw Error(ErrorCode::kConfig, "config has no manifest");
  const fs::path path = config.resolve(config.manifest);
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorCode::kConfig, "manifest not found: " + path.string());
  }
  DatasetManifest manifest = read_manifest(path, config.split);
  require_valid(manifest, require_ground_truth);
  return manifest;
}

inline SynonymLexicon load_lexicon(const RunConfig& config) {
  if (config.lexicon.empty()) return {};
  return SynonymLexicon::load(config.resolve(config.lexicon));
}

inline void write_snapshot(const RunConfig& config, const fs::path& out_dir) {
  write_text_file(out_dir / "effective_config.json", snapshot_json(config).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Frame selection

struct FrameSelection {
  std::string sample_id;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> indices;
  std::vector<Attachment> attachments;
  std::string error;  // non-empty when frames could not be resolved
};

inline std::uint64_t sample_seed(std::uint64_t global_seed, std::string_view sample_id) {
  return rng::derive_key(global_seed, rng::fnv1a64(sample_id));
}

// A frame directory yields real image attachments. Any other media_ref (a raw
// video, or a path that does not exist here) yields virtual references
// "<media_ref>#frame=<i>" with no file behind them.
inline FrameSelection select_frames(const SampleRecord& record, const RunConfig& config,
                                    const fs::path& manifest_dir) {
  FrameSelection sel;
  sel.sample_id = record.id;
  sel.seed = sample_seed(config.seed, record.id);
  sel.indices = sample_frames(record.n_frames, {config.k_segments, sel.seed});

  const fs::path media =
      fs::path(record.media_ref).is_absolute() ? fs::path(record.media_ref)
                                               : manifest_dir / record.media_ref;
  std::error_code ec;
  if (fs::is_directory(media, ec)) {
    const auto frames = detail::list_frames(media);
    std::string prefix = record.media_ref;
    if (!prefix.empty() && prefix.back() != '/') prefix += '/';
    for (auto i : sel.indices) {
      if (static_cast<std::size_t>(i) >= frames.size()) {
        sel.error = "FrameUnavailable";
        sel.attachments.clear();
        return sel;
      }
      const auto& f = frames[static_cast<std::size_t>(i)];
      sel.attachments.push_back({prefix + f.filename().string(), f});
    }
  } else {
    for (auto i : sel.indices) {
      sel.attachments.push_back({record.media_ref + "#frame=" + std::to_string(i), fs::path()});
    }
  }
  return sel;
}

inline Json to_json(const FrameSelection& sel) {
  Json j;
  j["sample_id"] = sel.sample_id;
  j["seed"] = sel.seed;
  j["indices"] = sel.indices;
  Json names = Json::array();
  for (const auto& a : sel.attachments) names.push_back(a.name);
  j["attachments"] = std::move(names);
  if (!sel.error.empty()) j["error"] = sel.error;
  return j;
}

inline std::vector<FrameSelection> run_sample(const RunConfig& config,
                                              const DatasetManifest& manifest,
                                              const fs::path& out_dir) {
  const fs::path manifest_dir = config.resolve(config.manifest).parent_path();
  std::vector<FrameSelection> selections;
  std::vector<Json> rows;
  for (const auto& record : manifest.records) {
    selections.push_back(select_frames(record, config, manifest_dir));
    rows.push_back(to_json(selections.back()));
  }
  write_text_file(out_dir / "frames.jsonl", to_jsonl(rows));
  return selections;
}

// ---------------------------------------------------------------------------
// Inference

using PredictionsByModel = std::map<std::string, std::vector<PredictionRecord>>;

inline fs::path predictions_path(const fs::path& out_dir, const std::string& model) {
  return out_dir / "predictions" / (file_component(model) + ".jsonl");
}

inline PredictionsByModel run_inference(const RunConfig& config, const DatasetManifest& manifest,
                                        const BackendClient& client,
                                        const std::vector<std::string>& models,
                                        const fs::path& out_dir, std::size_t jobs) {
  const auto tmpls = load_templates(config);
  for (const auto& m : models) {
    if (!client.has(m)) throw Error(ErrorCode::kConfig, "model '" + m + "' has no backend");
    if (!tmpls.count(template_for_model(config, m))) {
      throw Error(ErrorCode::kConfig, "unknown template '" + template_for_model(config, m) + "'");
    }
  }
  const std::vector<FrameSelection> selections = run_sample(config, manifest, out_dir);
  const std::size_t n = manifest.records.size();

  for (const auto& sel : selections) {
    write_text_file(out_dir / "audit" / file_component(sel.sample_id) / "frames.json",
                    to_json(sel).dump(2) + "\n");
  }

  PredictionsByModel out;
  for (const auto& m : models) out[m].resize(n);

  parallel_for(n * models.size(), jobs, [&](std::size_t task) {
    const std::size_t s = task % n;
    const std::string& model = models[task / n];
    const SampleRecord& record = manifest.records[s];
    const FrameSelection& sel = selections[s];
    const fs::path audit = out_dir / "audit" / file_component(record.id);
    const std::string stem = file_component(model);

    PredictionRecord& pred = out[model][s];
    pred.sample_id = record.id;
    pred.model_id = model;
    auto fail = [&](std::string reason, const std::string& detail_text) {
      pred.labels = LabelSet{};
      pred.empty_reason = std::move(reason);
      write_text_file(audit / (stem + ".error.txt"), pred.empty_reason + ": " + detail_text + "\n");
    };

    if (!sel.error.empty()) {
      fail(sel.error, "frame index beyond the frames present in " + record.media_ref);
      return;
    }
    const PromptTemplate& tmpl = tmpls.at(template_for_model(config, model));
    const std::string prompt =
        render(tmpl, {{"text", record.transcript}, {"subtitle", record.transcript}});
    write_text_file(audit / (stem + ".prompt.txt"), prompt);
    try {
      pred.raw_text =
          client.complete(client.make_request(model, prompt, sel.attachments)).text;
    } catch (const Error& e) {
      fail(std::string(to_string(e.code())), e.what());
      return;
    }
    write_text_file(audit / (stem + ".response.txt"), pred.raw_text);
    try {
      pred.labels = to_label_set(extract_label_block(pred.raw_text)).labels;
    } catch (const Error& e) {
      fail(std::string(to_string(e.code())), e.what());
    }
  });

  for (const auto& m : models) {
    write_text_file(predictions_path(out_dir, m), serialize_predictions(out[m]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

// Samples without a prediction are scored as empty predictions.
inline MetricReport run_eval(const std::vector<PredictionRecord>& predictions,
                             const DatasetManifest& manifest, const SynonymLexicon& lexicon) {
  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : predictions) {
    if (!manifest.find(p.sample_id)) {
      throw Error(ErrorCode::kUnknownSampleId,
                  "prediction for unknown sample '" + p.sample_id + "'");
    }
    if (!by_id.emplace(p.sample_id, &p).second) {
      throw Error(ErrorCode::kDuplicatePrediction,
                  "sample '" + p.sample_id + "' predicted more than once");
    }
  }
  std::vector<SampleScore> scores;
  scores.reserve(manifest.records.size());
  for (const auto& record : manifest.records) {
    LabelSet gt;
    try {
      gt = to_label_set(record.gt_labels).labels;
    } catch (const Error&) {
      throw Error(ErrorCode::kEmptyGroundTruth, "sample '" + record.id + "' has no ground truth");
    }
    auto it = by_id.find(record.id);
    const LabelSet empty;
    const LabelSet& pred = it == by_id.end() ? empty : it->second->labels;
    scores.push_back({record.id, ov_sample_metrics(pred, gt, lexicon)});
  }
  return aggregate(std::move(scores));
}

inline Json report_json(const std::string& name, const MetricReport& report) {
  Json j;
  j["name"] = name;
  const Json body = to_json(report);
  for (const auto& [k, v] : body.items()) j[k] = v;
  return j;
}

inline fs::path report_path(const fs::path& out_dir, const std::string& name) {
  return out_dir / "reports" / (file_component(name) + ".json");
}

inline void write_report(const fs::path& out_dir, const std::string& name,
                         const MetricReport& report) {
  write_text_file(report_path(out_dir, name), report_json(name, report).dump(2) + "\n");
}

inline std::vector<PredictionRecord> load_model_predictions(const fs::path& out_dir,
                                                            const std::string& model) {
  const fs::path path = predictions_path(out_dir, model);
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorCode::kConfig, "no predictions for model '" + model + "' at " + path.string());
  }
  return read_predictions(path);
}

// ---------------------------------------------------------------------------
// Fusion

struct FusedEvaluation {
  std::string name;
  MetricReport fused;
  std::vector<std::pair<std::string, MetricReport>> constituents;
  std::vector<PredictionRecord> predictions;
};

inline std::string fused_report_name(FusionStrategy strategy) {
  return "fused-" + std::string(to_string(strategy));
}

// Fuses per manifest sample, scores the result next to every constituent, and
// writes fused/<strategy>.jsonl plus reports/fused-<strategy>.json.
inline FusedEvaluation run_fuse_eval(const DatasetManifest& manifest,
                                     const SynonymLexicon& lexicon,
                                     const PredictionsByModel& by_model,
                                     const std::vector<std::string>& models, FusionConfig fusion,
                                     const fs::path& out_dir) {
  if (models.empty()) throw Error(ErrorCode::kConfig, "fusion needs at least one model");
  if (fusion.model_priority.empty()) fusion.model_priority = models;
  validate_fusion_config(fusion);

  FusedEvaluation result;
  result.name = fused_report_name(fusion.strategy);
  std::map<std::string, std::vector<PredictionRecord>> per_sample;
  for (const auto& model : models) {
    auto found = by_model.find(model);
    if (found == by_model.end()) {
      throw Error(ErrorCode::kConfig, "no predictions for model '" + model + "'");
    }
    const auto& preds = found->second;
    for (const auto& p : preds) {
      if (!manifest.find(p.sample_id)) {
        throw Error(ErrorCode::kUnknownSampleId,
                    "prediction for unknown sample '" + p.sample_id + "'");
      }
      per_sample[p.sample_id].push_back(p);
    }
    result.constituents.emplace_back(model, run_eval(preds, manifest, lexicon));
  }
  for (const auto& record : manifest.records) {
    result.predictions.push_back(
        fuse_sample(record.id, per_sample[record.id], lexicon, fusion));
  }
  result.fused = run_eval(result.predictions, manifest, lexicon);

  write_text_file(out_dir / "fused" / (std::string(to_string(fusion.strategy)) + ".jsonl"),
                  serialize_predictions(result.predictions));
  Json j = report_json(result.name, result.fused);
  j["fusion"] = {{"strategy", std::string(to_string(fusion.strategy))},
                 {"min_votes", fusion.min_votes},
                 {"model_priority", fusion.model_priority}};
  Json constituents = Json::object();
  for (const auto& [model, report] : result.constituents) constituents[model] = to_json(report);
  j["constituents"] = std::move(constituents);
  write_text_file(report_path(out_dir, result.name), j.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// Captions

inline CaptionDataset run_captions(const RunConfig& config, const BackendClient& client,
                                   const fs::path& out_dir, std::size_t jobs) {
  if (!config.captions) throw Error(ErrorCode::kConfig, "config has no captions section");
  const CaptionSettings& s = *config.captions;
  if (s.images.empty()) throw Error(ErrorCode::kConfig, "captions.images is not set");
  const fs::path images_path = config.resolve(s.images);
  if (!fs::is_regular_file(images_path)) {
    throw Error(ErrorCode::kConfig, "image list not found: " + images_path.string());
  }
  const auto tmpls = load_templates(config);
  auto tmpl = [&](const std::string& name) {
    auto it = tmpls.find(name);
    if (it == tmpls.end()) throw Error(ErrorCode::kConfig, "unknown template '" + name + "'");
    return it->second;
  };
  CaptionJob job{s.backend_a,         s.backend_b,   s.judge, tmpl(s.caption_template),
                 tmpl(s.judge_template), {s.threshold, config.seed}, jobs};
  CaptionDataset dataset = build_caption_dataset(read_image_list(images_path), job, client);

  const fs::path dir = out_dir / "captions";
  write_text_file(dir / "dataset.jsonl", serialize_caption_records(dataset.records));
  write_text_file(dir / "stats.json", to_json(dataset.stats).dump(2) + "\n");
  std::vector<Json> rows;
  for (const auto& p : dataset.pairs) {
    Json j;
    j["image"] = p.image_ref;
    j["caption_a"] = p.caption_a;
    j["caption_b"] = p.caption_b;
    j["source_a"] = p.source_a;
    j["source_b"] = p.source_b;
    j["score"] = p.score ? Json(*p.score) : Json(nullptr);
    if (!p.usable()) j["unusable"] = p.unusable_reason;
    rows.push_back(std::move(j));
  }
  write_text_file(dir / "pairs.jsonl", to_jsonl(rows));
  return dataset;
}

}  // namespace ovemo
