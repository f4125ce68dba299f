#pragma once

// Shared domain types and the dataset manifest schema.
//
// A manifest is JSON-lines, one SampleRecord per line:
//   {"id": "s1", "media_ref": "frames/s1", "n_frames": 60,
//    "transcript": "...", "gt_labels": ["happy"], "preprocess_tag": "entire_image"}
// `preprocess_tag` is optional and defaults to entire_image. The core never
// decodes video; `media_ref` is either a directory of extracted frames or a
// video path that `ovemo ingest` turns into one.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ovemo/error.hpp"
#include "ovemo/jsonl.hpp"
#include "ovemo/rng.hpp"

namespace ovemo {

enum class PreprocessTag { kEntireImage, kFaceAlignment };
enum class SplitTag { kTrain, kTest };

inline std::string_view to_string(PreprocessTag tag) {
  return tag == PreprocessTag::kEntireImage ? "entire_image" : "face_alignment";
}

inline std::string_view to_string(SplitTag tag) {
  return tag == SplitTag::kTrain ? "train" : "test";
}

inline PreprocessTag parse_preprocess_tag(std::string_view text) {
  if (text == "entire_image") return PreprocessTag::kEntireImage;
  if (text == "face_alignment") return PreprocessTag::kFaceAlignment;
  throw Error(ErrorCode::kParse, "unknown preprocess_tag '" + std::string(text) + "'");
}

inline SplitTag parse_split_tag(std::string_view text) {
  if (text == "train") return SplitTag::kTrain;
  if (text == "test") return SplitTag::kTest;
  throw Error(ErrorCode::kParse, "unknown split '" + std::string(text) + "'");
}

struct SampleRecord {
  std::string id;
  std::string media_ref;
  std::int64_t n_frames = 0;
  std::string transcript;
  std::vector<std::string> gt_labels;
  PreprocessTag preprocess_tag = PreprocessTag::kEntireImage;

  bool operator==(const SampleRecord&) const = default;
};

struct DatasetManifest {
  std::vector<SampleRecord> records;
  SplitTag split = SplitTag::kTest;

  bool operator==(const DatasetManifest&) const = default;

  const SampleRecord* find(std::string_view id) const {
    auto it = std::find_if(records.begin(), records.end(),
                           [&](const SampleRecord& r) { return r.id == id; });
    return it == records.end() ? nullptr : &*it;
  }
};

struct ManifestIssue {
  ErrorCode code;
  std::string record_id;
  std::string field;

  bool operator==(const ManifestIssue&) const = default;
};

struct ManifestValidation {
  std::vector<ManifestIssue> issues;

  bool ok() const { return issues.empty(); }

  std::string describe() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < issues.size(); ++i) {
      if (i) out << "; ";
      out << to_string(issues[i].code) << "(" << issues[i].record_id << "." << issues[i].field
          << ")";
    }
    return out.str();
  }
};

// Reports every violated record invariant. Duplicate ids are reported once per
// repeated occurrence. Ground truth is only required for evaluation manifests.
inline ManifestValidation validate_manifest(const DatasetManifest& manifest,
                                            bool require_ground_truth = true) {
  ManifestValidation result;
  std::set<std::string> seen;
  for (const auto& record : manifest.records) {
    if (record.id.empty()) {
      result.issues.push_back({ErrorCode::kParse, record.id, "id"});
    }
    if (!seen.insert(record.id).second) {
      result.issues.push_back({ErrorCode::kDuplicateId, record.id, "id"});
    }
    if (record.n_frames < 1) {
      result.issues.push_back({ErrorCode::kNonPositiveFrameCount, record.id, "n_frames"});
    }
    if (require_ground_truth && record.gt_labels.empty()) {
      result.issues.push_back({ErrorCode::kEmptyGroundTruth, record.id, "gt_labels"});
    }
  }
  return result;
}

// Throws the first issue's code with every issue in the message.
inline const DatasetManifest& require_valid(const DatasetManifest& manifest,
                                            bool require_ground_truth = true) {
  auto validation = validate_manifest(manifest, require_ground_truth);
  if (!validation.ok()) {
    throw Error(validation.issues.front().code, "invalid manifest: " + validation.describe());
  }
  return manifest;
}

inline Json to_json(const SampleRecord& record) {
  Json j;
  j["id"] = record.id;
  j["media_ref"] = record.media_ref;
  j["n_frames"] = record.n_frames;
  j["transcript"] = record.transcript;
  j["gt_labels"] = record.gt_labels;
  j["preprocess_tag"] = std::string(to_string(record.preprocess_tag));
  return j;
}

inline SampleRecord sample_record_from_json(const Json& j, const std::string& where) {
  SampleRecord record;
  record.id = detail::require_string(j, "id", where);
  record.media_ref = detail::require_string(j, "media_ref", where);
  const Json& frames = detail::require_field(j, "n_frames", where);
  if (!frames.is_number_integer()) {
    throw Error(ErrorCode::kParse, where + ": field 'n_frames' must be an integer");
  }
  record.n_frames = frames.get<std::int64_t>();
  if (auto it = j.find("transcript"); it != j.end()) {
    if (!it->is_string()) {
      throw Error(ErrorCode::kParse, where + ": field 'transcript' must be a string");
    }
    record.transcript = it->get<std::string>();
  }
  if (j.contains("gt_labels")) {
    record.gt_labels = detail::require_string_array(j, "gt_labels", where);
  }
  if (auto it = j.find("preprocess_tag"); it != j.end()) {
    if (!it->is_string()) {
      throw Error(ErrorCode::kParse, where + ": field 'preprocess_tag' must be a string");
    }
    record.preprocess_tag = parse_preprocess_tag(it->get<std::string>());
  }
  return record;
}

inline DatasetManifest parse_manifest(std::istream& in, const std::string& source,
                                      SplitTag split = SplitTag::kTest) {
  DatasetManifest manifest;
  manifest.split = split;
  for_each_jsonl(in, source, [&](const Json& j, std::size_t line) {
    manifest.records.push_back(sample_record_from_json(j, source + ":" + std::to_string(line)));
  });
  return manifest;
}

inline DatasetManifest read_manifest(const fs::path& path, SplitTag split = SplitTag::kTest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open manifest " + path.string());
  return parse_manifest(in, path.string(), split);
}

inline std::string serialize_manifest(const DatasetManifest& manifest) {
  std::vector<Json> rows;
  rows.reserve(manifest.records.size());
  for (const auto& r : manifest.records) rows.push_back(to_json(r));
  return to_jsonl(rows);
}

inline void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  write_text_file(path, serialize_manifest(manifest));
}

// Extracted frames are image files, ordered by file name.
namespace detail {

inline bool is_frame_file(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp" || ext == ".webp";
}

inline std::vector<fs::path> list_frames(const fs::path& dir) {
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_frame_file(entry.path())) frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

}  // namespace detail

// Record counts keyed by (split, preprocess tag), for dataset-distribution tables.
struct SplitSummary {
  std::map<std::string, std::size_t> by_split;
  std::map<std::string, std::size_t> by_preprocess;

  void add(const DatasetManifest& manifest) {
    by_split[std::string(to_string(manifest.split))] += manifest.records.size();
    for (const auto& r : manifest.records) {
      ++by_preprocess[std::string(to_string(r.preprocess_tag))];
    }
  }
};

// Seeded hold-out split: picks `test_count` records for the test side and keeps
// manifest order on both sides.
inline std::pair<DatasetManifest, DatasetManifest> partition_split(const DatasetManifest& manifest,
                                                                   std::size_t test_count,
                                                                   std::uint64_t seed) {
  const std::size_t n = manifest.records.size();
  if (test_count > n) {
    throw Error(ErrorCode::kConfig, "test_count exceeds manifest size");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng::Stream stream(seed, 0);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[stream.uniform_below(i)]);
  }
  std::vector<bool> is_test(n, false);
  for (std::size_t i = 0; i < test_count; ++i) is_test[order[i]] = true;

  DatasetManifest train{.records = {}, .split = SplitTag::kTrain};
  DatasetManifest test{.records = {}, .split = SplitTag::kTest};
  for (std::size_t i = 0; i < n; ++i) {
    (is_test[i] ? test : train).records.push_back(manifest.records[i]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace ovemo
