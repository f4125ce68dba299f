#pragma once

// Run configuration (JSON). Relative paths resolve against the directory of
// the config file. Example:
//
// {
//   "manifest": "manifest.jsonl", "split": "test", "lexicon": "lexicon.jsonl",
//   "output_dir": "out", "seed": 42,
//   "sampler": {"k_segments": 6},
//   "backends": [{"id": "internvl", "kind": "mock", "script": "internvl.script.jsonl"}],
//   "models": ["internvl"],
//   "templates": {"internvl": "zero_shot"},
//   "template_files": {"my_prompt": "prompts/my_prompt.txt"},
//   "fusion": {"strategy": "union", "min_votes": 1, "model_priority": ["internvl"]},
//   "captions": {"images": "images.jsonl", "backend_a": "qwen", "backend_b": "cog",
//                "judge": "internvl", "threshold": 0.9}
// }
//
// Worker count is a process flag, not part of the config: it never changes
// outputs.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ovemo/backend.hpp"
#include "ovemo/caption.hpp"
#include "ovemo/core.hpp"
#include "ovemo/error.hpp"
#include "ovemo/fusion.hpp"
#include "ovemo/jsonl.hpp"
#include "ovemo/sampler.hpp"
#include "ovemo/templates.hpp"

namespace ovemo {

struct CaptionSettings {
  std::string images;
  std::string backend_a;
  std::string backend_b;
  std::string judge;
  std::string caption_template = "caption";
  std::string judge_template = "judge";
  double threshold = kDefaultSimilarityThreshold;
};

struct RunConfig {
  fs::path base_dir;  // directory of the config file

  std::string manifest;
  SplitTag split = SplitTag::kTest;
  std::string lexicon;  // optional
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  std::uint32_t k_segments = kDefaultSegments;
  std::vector<BackendSpec> backends;
  std::vector<std::string> models;
  std::map<std::string, std::string> templates;       // model id -> template name
  std::map<std::string, std::string> template_files;  // template name -> path
  std::optional<FusionConfig> fusion;
  std::optional<CaptionSettings> captions;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
  fs::path output_path() const { return resolve(output_dir); }

  const BackendSpec* backend(std::string_view id) const {
    for (const auto& b : backends) {
      if (b.id == id) return &b;
    }
    return nullptr;
  }
};

namespace detail {

template <typename T>
T config_value(const Json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::kConfig, where + "." + key + " has the wrong type");
  }
}

inline std::uint64_t config_u64(const Json& j, const char* key, std::uint64_t fallback,
                                const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    throw Error(ErrorCode::kConfig, where + "." + key + " must be a non-negative integer");
  }
  return it->get<std::uint64_t>();
}

inline BackendSpec backend_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "backends[] entries must be objects");
  BackendSpec s;
  const std::string where = "backends[" + j.value("id", std::string("?")) + "]";
  s.id = config_value<std::string>(j, "id", "", where);
  s.kind = config_value<std::string>(j, "kind", s.kind, where);
  s.base_url = config_value<std::string>(j, "base_url", "", where);
  s.protocol = config_value<std::string>(j, "protocol", s.protocol, where);
  s.model = config_value<std::string>(j, "model", "", where);
  s.auth_env = config_value<std::string>(j, "auth_env", "", where);
  s.script = config_value<std::string>(j, "script", "", where);
  s.max_attachments = config_value<std::size_t>(j, "max_attachments", s.max_attachments, where);
  s.max_attachment_bytes =
      config_value<std::size_t>(j, "max_attachment_bytes", s.max_attachment_bytes, where);
  s.timeout_ms = config_value<int>(j, "timeout_ms", s.timeout_ms, where);
  s.retries = config_value<int>(j, "retries", s.retries, where);
  s.backoff_ms = config_value<int>(j, "backoff_ms", s.backoff_ms, where);
  s.max_in_flight = config_value<int>(j, "max_in_flight", s.max_in_flight, where);
  s.max_tokens = config_value<int>(j, "max_tokens", s.max_tokens, where);
  s.temperature = config_value<double>(j, "temperature", s.temperature, where);
  if (s.id.empty()) throw Error(ErrorCode::kConfig, "backend without id");
  if (s.retries < 0 || s.backoff_ms < 0 || s.timeout_ms <= 0) {
    throw Error(ErrorCode::kConfig, where + ": retries/backoff_ms must be >= 0, timeout_ms > 0");
  }
  return s;
}

inline Json backend_to_json(const BackendSpec& s) {
  Json j;
  j["id"] = s.id;
  j["kind"] = s.kind;
  if (!s.base_url.empty()) j["base_url"] = s.base_url;
  if (s.kind == "http") j["protocol"] = s.protocol;
  if (!s.model.empty()) j["model"] = s.model;
  if (!s.auth_env.empty()) j["auth_env"] = s.auth_env;
  if (!s.script.empty()) j["script"] = s.script;
  j["max_attachments"] = s.max_attachments;
  j["max_attachment_bytes"] = s.max_attachment_bytes;
  j["timeout_ms"] = s.timeout_ms;
  j["retries"] = s.retries;
  j["backoff_ms"] = s.backoff_ms;
  j["max_in_flight"] = s.max_in_flight;
  j["max_tokens"] = s.max_tokens;
  j["temperature"] = s.temperature;
  return j;
}

}  // namespace detail

inline RunConfig parse_run_config(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  const std::string where = "config";
  RunConfig c;
  c.base_dir = base_dir;
  c.manifest = detail::config_value<std::string>(j, "manifest", "", where);
  try {
    c.split = parse_split_tag(detail::config_value<std::string>(j, "split", "test", where));
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  c.lexicon = detail::config_value<std::string>(j, "lexicon", "", where);
  c.output_dir = detail::config_value<std::string>(j, "output_dir", c.output_dir, where);
  c.seed = detail::config_u64(j, "seed", 0, where);
  if (auto it = j.find("sampler"); it != j.end()) {
    const auto k = detail::config_u64(*it, "k_segments", kDefaultSegments, "config.sampler");
    if (k < 1 || k > 4096) throw Error(ErrorCode::kConfig, "sampler.k_segments must be in [1, 4096]");
    c.k_segments = static_cast<std::uint32_t>(k);
  }
  if (auto it = j.find("backends"); it != j.end()) {
    if (!it->is_array()) throw Error(ErrorCode::kConfig, "backends must be an array");
    for (const auto& b : *it) c.backends.push_back(detail::backend_from_json(b));
  }
  c.models = detail::config_value<std::vector<std::string>>(j, "models", {}, where);
  c.templates = detail::config_value<std::map<std::string, std::string>>(j, "templates", {}, where);
  c.template_files =
      detail::config_value<std::map<std::string, std::string>>(j, "template_files", {}, where);
  if (auto it = j.find("fusion"); it != j.end() && !it->is_null()) {
    FusionConfig f;
    try {
      f.strategy = parse_fusion_strategy(
          detail::config_value<std::string>(*it, "strategy", "union", "config.fusion"));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, e.what());
    }
    f.min_votes = detail::config_value<int>(*it, "min_votes", 1, "config.fusion");
    f.model_priority =
        detail::config_value<std::vector<std::string>>(*it, "model_priority", {}, "config.fusion");
    c.fusion = std::move(f);
  }
  if (auto it = j.find("captions"); it != j.end() && !it->is_null()) {
    CaptionSettings s;
    const std::string w = "config.captions";
    s.images = detail::config_value<std::string>(*it, "images", "", w);
    s.backend_a = detail::config_value<std::string>(*it, "backend_a", "", w);
    s.backend_b = detail::config_value<std::string>(*it, "backend_b", "", w);
    s.judge = detail::config_value<std::string>(*it, "judge", "", w);
    s.caption_template = detail::config_value<std::string>(*it, "caption_template", s.caption_template, w);
    s.judge_template = detail::config_value<std::string>(*it, "judge_template", s.judge_template, w);
    s.threshold = detail::config_value<double>(*it, "threshold", s.threshold, w);
    c.captions = std::move(s);
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::kConfig, "cannot read config " + path.string());
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return parse_run_config(j, fs::absolute(path).parent_path());
}

// Everything that determines outputs. Output location and worker count are
// excluded so identical runs in different places snapshot identically.
inline Json snapshot_json(const RunConfig& c) {
  Json j;
  j["manifest"] = c.manifest;
  j["split"] = std::string(to_string(c.split));
  j["lexicon"] = c.lexicon;
  j["seed"] = c.seed;
  j["sampler"] = {{"k_segments", c.k_segments}, {"rng", "splitmix64-v1"}};
  Json backends = Json::array();
  for (const auto& b : c.backends) backends.push_back(detail::backend_to_json(b));
  j["backends"] = std::move(backends);
  j["models"] = c.models;
  j["templates"] = c.templates;
  j["template_files"] = c.template_files;
  if (c.fusion) {
    j["fusion"] = {{"strategy", std::string(to_string(c.fusion->strategy))},
                   {"min_votes", c.fusion->min_votes},
                   {"model_priority", c.fusion->model_priority}};
  }
  if (c.captions) {
    j["captions"] = {{"images", c.captions->images},
                     {"backend_a", c.captions->backend_a},
                     {"backend_b", c.captions->backend_b},
                     {"judge", c.captions->judge},
                     {"caption_template", c.captions->caption_template},
                     {"judge_template", c.captions->judge_template},
                     {"threshold", c.captions->threshold}};
  }
  return j;
}

// Built-ins plus template_files; a file may shadow a built-in name.
inline std::map<std::string, PromptTemplate> load_templates(const RunConfig& c) {
  auto out = templates::builtin();
  for (const auto& [name, file] : c.template_files) {
    std::string body;
    try {
      body = read_text_file(c.resolve(file));
    } catch (const Error&) {
      throw Error(ErrorCode::kConfig, "cannot read template file " + file);
    }
    out[name] = PromptTemplate{name, std::move(body)};
  }
  return out;
}

inline const std::string& template_for_model(const RunConfig& c, const std::string& model) {
  static const std::string kDefault = "zero_shot";
  auto it = c.templates.find(model);
  return it == c.templates.end() ? kDefault : it->second;
}

// Checks cross-references. Inference templates may only use {text} and
// {subtitle}, the slots a manifest record can fill.
inline void validate_run_config(const RunConfig& c) {
  std::set<std::string> ids;
  for (const auto& b : c.backends) {
    if (!ids.insert(b.id).second) {
      throw Error(ErrorCode::kConfig, "backend '" + b.id + "' defined twice");
    }
    if (b.kind != "mock" && b.kind != "http") {
      throw Error(ErrorCode::kConfig, "backend '" + b.id + "': unknown kind '" + b.kind + "'");
    }
  }
  const auto tmpls = load_templates(c);
  for (const auto& m : c.models) {
    if (!c.backend(m)) throw Error(ErrorCode::kConfig, "model '" + m + "' has no backend");
    const auto& name = template_for_model(c, m);
    auto it = tmpls.find(name);
    if (it == tmpls.end()) throw Error(ErrorCode::kConfig, "unknown template '" + name + "'");
    for (const auto& slot : placeholders(it->second)) {
      if (slot != "text" && slot != "subtitle") {
        throw Error(ErrorCode::kConfig,
                    "template '" + name + "' uses slot {" + slot + "} that no record fills");
      }
    }
  }
  if (c.fusion) {
    FusionConfig f = *c.fusion;
    if (f.model_priority.empty()) f.model_priority = c.models;
    validate_fusion_config(f);
  }
  if (c.captions) {
    const auto& s = *c.captions;
    for (const auto* id : {&s.backend_a, &s.backend_b, &s.judge}) {
      if (!c.backend(*id)) {
        throw Error(ErrorCode::kConfig, "captions: backend '" + *id + "' is not defined");
      }
    }
    for (const auto* name : {&s.caption_template, &s.judge_template}) {
      if (!tmpls.count(*name)) throw Error(ErrorCode::kConfig, "unknown template '" + *name + "'");
    }
    validate_filter_config({s.threshold, c.seed});
  }
}

}  // namespace ovemo
