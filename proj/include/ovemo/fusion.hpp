#pragma once

// Multi-model late fusion of label sets.
//
// union: walk models in priority order and labels in set order; keep a label
//        unless its synonym group is already represented.
// vote:  keep a group only if at least `min_votes` distinct models predicted
//        it; surface forms and order are the same as for union.

#include <algorithm>
#include <string>
#include <vector>

#include "ovemo/error.hpp"
#include "ovemo/jsonl.hpp"
#include "ovemo/labelspace.hpp"

namespace ovemo {

struct PredictionRecord {
  std::string sample_id;
  std::string model_id;
  std::string raw_text;
  LabelSet labels;           // empty means EmptyPrediction
  std::string empty_reason;  // set when labels is empty

  bool is_empty() const { return labels.empty(); }
  bool operator==(const PredictionRecord&) const = default;
};

enum class FusionStrategy { kUnion, kVote };

inline std::string_view to_string(FusionStrategy s) {
  return s == FusionStrategy::kUnion ? "union" : "vote";
}

inline FusionStrategy parse_fusion_strategy(std::string_view text) {
  if (text == "union") return FusionStrategy::kUnion;
  if (text == "vote") return FusionStrategy::kVote;
  throw Error(ErrorCode::kConfig, "unknown fusion strategy '" + std::string(text) + "'");
}

struct FusionConfig {
  FusionStrategy strategy = FusionStrategy::kUnion;
  int min_votes = 1;
  std::vector<std::string> model_priority;
};

inline void validate_fusion_config(const FusionConfig& config) {
  if (config.model_priority.empty()) {
    throw Error(ErrorCode::kConfig, "fusion.model_priority is empty");
  }
  if (config.min_votes < 1) throw Error(ErrorCode::kConfig, "fusion.min_votes must be >= 1");
  if (config.strategy == FusionStrategy::kVote &&
      static_cast<std::size_t>(config.min_votes) > config.model_priority.size()) {
    throw Error(ErrorCode::kConfig, "fusion.min_votes exceeds the number of models");
  }
}

namespace detail {

// Orders records by priority after checking sample and model ids.
inline std::vector<const PredictionRecord*> order_by_priority(
    const std::vector<PredictionRecord>& preds, const std::vector<std::string>& priority) {
  for (const auto& p : preds) {
    if (p.sample_id != preds.front().sample_id) {
      throw Error(ErrorCode::kMixedSampleIds, "fusion input mixes samples '" +
                                                  preds.front().sample_id + "' and '" +
                                                  p.sample_id + "'");
    }
    if (std::find(priority.begin(), priority.end(), p.model_id) == priority.end()) {
      throw Error(ErrorCode::kUnknownModelInPriority,
                  "model '" + p.model_id + "' is not listed in the fusion priority");
    }
  }
  std::vector<const PredictionRecord*> ordered;
  for (const auto& model : priority) {
    for (const auto& p : preds) {
      if (p.model_id == model) ordered.push_back(&p);
    }
  }
  return ordered;
}

struct GroupTally {
  std::string surface;
  std::vector<std::string> models;
};

inline std::vector<std::pair<GroupId, GroupTally>> tally_groups(
    const std::vector<PredictionRecord>& preds, const SynonymLexicon& lexicon,
    const std::vector<std::string>& priority) {
  std::vector<std::pair<GroupId, GroupTally>> tallies;
  for (const PredictionRecord* p : order_by_priority(preds, priority)) {
    for (const auto& label : p->labels) {
      GroupId g = lexicon.group_of(label);
      auto it = std::find_if(tallies.begin(), tallies.end(),
                             [&](const auto& entry) { return entry.first == g; });
      if (it == tallies.end()) {
        tallies.push_back({std::move(g), {label, {p->model_id}}});
      } else if (std::find(it->second.models.begin(), it->second.models.end(), p->model_id) ==
                 it->second.models.end()) {
        it->second.models.push_back(p->model_id);
      }
    }
  }
  return tallies;
}

}  // namespace detail

inline LabelSet fuse_union(const std::vector<PredictionRecord>& preds,
                           const SynonymLexicon& lexicon,
                           const std::vector<std::string>& priority) {
  LabelSet fused;
  if (preds.empty()) return fused;
  for (const auto& [group, tally] : detail::tally_groups(preds, lexicon, priority)) {
    fused.insert(tally.surface);
  }
  return fused;
}

inline LabelSet fuse_vote(const std::vector<PredictionRecord>& preds,
                          const SynonymLexicon& lexicon, int min_votes,
                          const std::vector<std::string>& priority) {
  if (min_votes < 1) throw Error(ErrorCode::kConfig, "min_votes must be >= 1");
  LabelSet fused;
  if (preds.empty()) return fused;
  for (const auto& [group, tally] : detail::tally_groups(preds, lexicon, priority)) {
    if (tally.models.size() >= static_cast<std::size_t>(min_votes)) fused.insert(tally.surface);
  }
  return fused;
}

inline std::string fused_model_id(FusionStrategy strategy) {
  return "fused:" + std::string(to_string(strategy));
}

// Fuses one sample's records according to `config`.
inline PredictionRecord fuse_sample(const std::string& sample_id,
                                    const std::vector<PredictionRecord>& preds,
                                    const SynonymLexicon& lexicon, const FusionConfig& config) {
  PredictionRecord out;
  out.sample_id = sample_id;
  out.model_id = fused_model_id(config.strategy);
  out.labels = config.strategy == FusionStrategy::kUnion
                   ? fuse_union(preds, lexicon, config.model_priority)
                   : fuse_vote(preds, lexicon, config.min_votes, config.model_priority);
  if (out.labels.empty()) {
    if (preds.empty()) {
      out.empty_reason = "NoConstituentPredictions";
    } else if (config.strategy == FusionStrategy::kUnion) {
      out.empty_reason = "AllConstituentsEmpty";
    } else {
      out.empty_reason = "NoGroupReachedVotes";
    }
  }
  return out;
}

// Prediction files: JSON-lines of
//   {"sample_id", "model_id", "raw_text", "labels": [...], "empty_reason"?}
inline Json to_json(const PredictionRecord& p) {
  Json j;
  j["sample_id"] = p.sample_id;
  j["model_id"] = p.model_id;
  j["raw_text"] = p.raw_text;
  j["labels"] = p.labels.labels();
  if (p.is_empty()) j["empty_reason"] = p.empty_reason;
  return j;
}

inline PredictionRecord prediction_from_json(const Json& j, const std::string& where) {
  PredictionRecord p;
  p.sample_id = detail::require_string(j, "sample_id", where);
  p.model_id = detail::require_string(j, "model_id", where);
  if (auto it = j.find("raw_text"); it != j.end() && it->is_string()) {
    p.raw_text = it->get<std::string>();
  }
  for (const auto& label : detail::require_string_array(j, "labels", where)) {
    try {
      p.labels.insert(label);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyAfterNormalization) throw;
    }
  }
  if (auto it = j.find("empty_reason"); it != j.end() && it->is_string()) {
    p.empty_reason = it->get<std::string>();
  }
  if (p.labels.empty() && p.empty_reason.empty()) p.empty_reason = "EmptySet";
  return p;
}

inline std::vector<PredictionRecord> read_predictions(const fs::path& path) {
  std::vector<PredictionRecord> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    out.push_back(prediction_from_json(j, path.string() + ":" + std::to_string(line)));
  });
  return out;
}

inline std::string serialize_predictions(const std::vector<PredictionRecord>& preds) {
  std::vector<Json> rows;
  rows.reserve(preds.size());
  for (const auto& p : preds) rows.push_back(to_json(p));
  return to_jsonl(rows);
}

}  // namespace ovemo
