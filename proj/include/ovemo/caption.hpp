#pragma once

// Caption dataset factory: two backends caption each image with the same
// prompt, a judge backend scores how similar the two captions are, pairs
// scoring below the threshold are dropped, and one caption of every surviving
// pair is kept by a seeded coin flip keyed on (seed, image_ref).
//
// Image list: JSON-lines {"image": "path", "subtitle": "..."?}
// Output:     JSON-lines {"image", "caption", "source", "score"}

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ovemo/backend.hpp"
#include "ovemo/error.hpp"
#include "ovemo/jsonl.hpp"
#include "ovemo/parallel.hpp"
#include "ovemo/rng.hpp"

namespace ovemo {

inline constexpr double kDefaultSimilarityThreshold = 0.9;

struct ImageItem {
  std::string image_ref;  // as written in the image list
  fs::path path;          // resolved
  std::string subtitle;
};

struct CaptionPair {
  std::string image_ref;
  std::string caption_a;
  std::string caption_b;
  std::string source_a;
  std::string source_b;
  std::optional<double> score;
  std::string unusable_reason;  // empty while the pair is usable

  bool usable() const { return unusable_reason.empty(); }
};

struct FilterConfig {
  double threshold = kDefaultSimilarityThreshold;
  std::uint64_t seed = 0;
};

inline void validate_filter_config(const FilterConfig& config) {
  if (!(config.threshold >= 0.0 && config.threshold <= 1.0)) {
    throw Error(ErrorCode::kConfig, "threshold must lie in [0, 1]");
  }
}

struct FilterDecision {
  bool keep = false;
  std::string caption;
  std::string source;
  std::string drop_reason;  // "BelowThreshold" when dropped
};

namespace detail {

inline bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

inline std::string failure_reason(const Error& e) { return std::string(to_string(e.code())); }

}  // namespace detail

// Queries both captioners with the same rendered prompt. A failed or blank side
// marks the pair unusable with reason "<ErrorCode>SideA|B".
inline CaptionPair generate_caption_pair(const ImageItem& image, const BackendClient& client,
                                         const std::string& backend_a,
                                         const std::string& backend_b,
                                         const PromptTemplate& caption_template) {
  CaptionPair pair;
  pair.image_ref = image.image_ref;
  pair.source_a = backend_a;
  pair.source_b = backend_b;
  const std::string prompt = render(caption_template, {{"subtitle", image.subtitle}});
  const std::vector<Attachment> attachments{{image.image_ref, image.path}};

  auto query = [&](const std::string& backend, std::string& caption, const char* side) {
    try {
      caption = client.complete(client.make_request(backend, prompt, attachments)).text;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfig) throw;
      return detail::failure_reason(e) + side;
    }
    if (detail::blank(caption)) return std::string("EmptyCaption") + side;
    return std::string();
  };
  pair.unusable_reason = query(backend_a, pair.caption_a, "SideA");
  if (pair.unusable_reason.empty()) pair.unusable_reason = query(backend_b, pair.caption_b, "SideB");
  return pair;
}

// NoScoreFound and judge failures mark the pair unusable.
inline CaptionPair score_pair(CaptionPair pair, const BackendClient& client,
                              const std::string& judge, const PromptTemplate& judge_template) {
  if (!pair.usable()) return pair;
  const std::string prompt =
      render(judge_template, {{"caption_a", pair.caption_a}, {"caption_b", pair.caption_b}});
  std::string text;
  try {
    text = client.complete(client.make_request(judge, prompt, {})).text;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    pair.unusable_reason = "Judge" + detail::failure_reason(e);
    return pair;
  }
  try {
    pair.score = parse_score(text);
  } catch (const Error& e) {
    pair.unusable_reason = detail::failure_reason(e);
  }
  return pair;
}

// score >= threshold keeps; only strictly lower scores are eliminated.
inline FilterDecision filter_pair(const CaptionPair& pair, const FilterConfig& config) {
  if (!pair.score) throw Error(ErrorCode::kNoScoreFound, "pair '" + pair.image_ref + "' has no score");
  FilterDecision decision;
  if (*pair.score < config.threshold) {
    decision.drop_reason = "BelowThreshold";
    return decision;
  }
  rng::Stream stream(config.seed, rng::fnv1a64(pair.image_ref));
  const bool pick_b = stream.coin();
  decision.keep = true;
  decision.caption = pick_b ? pair.caption_b : pair.caption_a;
  decision.source = pick_b ? pair.source_b : pair.source_a;
  return decision;
}

struct CaptionRecord {
  std::string image;
  std::string caption;
  std::string source;
  double score = 0.0;
};

struct CaptionStats {
  std::size_t attempted = 0;
  std::size_t unusable = 0;
  std::size_t dropped_below_threshold = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> unusable_reasons;
};

struct CaptionJob {
  std::string backend_a;
  std::string backend_b;
  std::string judge;
  PromptTemplate caption_template;
  PromptTemplate judge_template;
  FilterConfig filter;
  std::size_t concurrency = 1;
};

struct CaptionDataset {
  std::vector<CaptionRecord> records;
  CaptionStats stats;
  std::vector<CaptionPair> pairs;  // every attempted pair, in input order
};

inline CaptionDataset build_caption_dataset(const std::vector<ImageItem>& images,
                                            const CaptionJob& job, const BackendClient& client) {
  validate_filter_config(job.filter);
  for (const auto* id : {&job.backend_a, &job.backend_b, &job.judge}) {
    if (!client.has(*id)) throw Error(ErrorCode::kConfig, "backend '" + *id + "' is not registered");
  }

  std::vector<CaptionPair> pairs(images.size());
  parallel_for(images.size(), job.concurrency, [&](std::size_t i) {
    const ImageItem& image = images[i];
    std::error_code ec;
    if (!fs::is_regular_file(image.path, ec)) {
      pairs[i].image_ref = image.image_ref;
      pairs[i].source_a = job.backend_a;
      pairs[i].source_b = job.backend_b;
      pairs[i].unusable_reason = "MissingImage";
      return;
    }
    CaptionPair pair =
        generate_caption_pair(image, client, job.backend_a, job.backend_b, job.caption_template);
    pairs[i] = score_pair(std::move(pair), client, job.judge, job.judge_template);
  });

  CaptionDataset out;
  out.stats.attempted = pairs.size();
  for (const auto& pair : pairs) {
    if (!pair.usable()) {
      ++out.stats.unusable;
      ++out.stats.unusable_reasons[pair.unusable_reason];
      continue;
    }
    const FilterDecision decision = filter_pair(pair, job.filter);
    if (!decision.keep) {
      ++out.stats.dropped_below_threshold;
      continue;
    }
    ++out.stats.kept;
    out.records.push_back({pair.image_ref, decision.caption, decision.source, *pair.score});
  }
  out.pairs = std::move(pairs);
  return out;
}

inline std::vector<ImageItem> read_image_list(const fs::path& path) {
  std::vector<ImageItem> items;
  const fs::path base = path.parent_path();
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    const std::string where = path.string() + ":" + std::to_string(line);
    ImageItem item;
    item.image_ref = detail::require_string(j, "image", where);
    item.path = fs::path(item.image_ref).is_absolute() ? fs::path(item.image_ref)
                                                       : base / item.image_ref;
    item.subtitle = j.value("subtitle", "");
    items.push_back(std::move(item));
  });
  return items;
}

inline std::string serialize_caption_records(const std::vector<CaptionRecord>& records) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    Json j;
    j["image"] = r.image;
    j["caption"] = r.caption;
    j["source"] = r.source;
    j["score"] = r.score;
    rows.push_back(std::move(j));
  }
  return to_jsonl(rows);
}

inline Json to_json(const CaptionStats& stats) {
  Json j;
  j["attempted"] = stats.attempted;
  j["kept"] = stats.kept;
  j["dropped_below_threshold"] = stats.dropped_below_threshold;
  j["unusable"] = stats.unusable;
  Json reasons = Json::object();
  for (const auto& [reason, count] : stats.unusable_reasons) reasons[reason] = count;
  j["unusable_reasons"] = std::move(reasons);
  return j;
}

}  // namespace ovemo
