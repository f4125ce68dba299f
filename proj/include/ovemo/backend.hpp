#pragma once

// Uniform inference contract between the pipeline and model endpoints.
//
// A Backend turns an InferenceRequest into response text or throws
// BackendFailure. BackendClient owns the registry, enforces attachment caps
// and per-backend in-flight limits, and retries transient failures with
// exponential backoff. A failure is retried only when it is a timeout or
// transport error and no byte of the response body was consumed.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ovemo/error.hpp"
#include "ovemo/jsonl.hpp"
#include "ovemo/rng.hpp"

namespace ovemo {

// ---------------------------------------------------------------------------
// Prompt templates

struct PromptTemplate {
  std::string name;
  std::string body;  // named placeholders: {identifier}
};

namespace detail {

inline bool is_ident_char(char c, bool first) {
  const bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  return first ? alpha : alpha || (c >= '0' && c <= '9');
}

// Calls on_text(verbatim) and on_slot(name) in body order.
template <typename OnText, typename OnSlot>
void scan_template(std::string_view body, OnText&& on_text, OnSlot&& on_slot) {
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t open = body.find('{', pos);
    if (open == std::string_view::npos) break;
    std::size_t end = open + 1;
    while (end < body.size() && is_ident_char(body[end], end == open + 1)) ++end;
    if (end > open + 1 && end < body.size() && body[end] == '}') {
      on_text(body.substr(pos, open - pos));
      on_slot(body.substr(open + 1, end - open - 1));
      pos = end + 1;
    } else {
      on_text(body.substr(pos, open + 1 - pos));
      pos = open + 1;
    }
  }
  on_text(body.substr(pos));
}

}  // namespace detail

inline std::vector<std::string> placeholders(const PromptTemplate& tmpl) {
  std::vector<std::string> names;
  detail::scan_template(
      tmpl.body, [](std::string_view) {},
      [&](std::string_view name) {
        if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
      });
  return names;
}

inline std::string render(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string, std::less<>>& bindings) {
  std::string out;
  detail::scan_template(
      tmpl.body, [&](std::string_view text) { out += text; },
      [&](std::string_view name) {
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw Error(ErrorCode::kMissingBinding,
                      "template '" + tmpl.name + "' needs a binding for '" + std::string(name) +
                          "'");
        }
        out += it->second;
      });
  return out;
}

// ---------------------------------------------------------------------------
// Requests and responses

inline constexpr std::size_t kDefaultMaxAttachments = 6;

struct Attachment {
  std::string name;  // reference as written in the manifest; used for digests
  fs::path path;     // resolved location on disk

  bool operator==(const Attachment&) const = default;
};

struct InferenceRequest {
  std::string backend_id;
  std::string prompt;
  std::vector<Attachment> attachments;
  int max_tokens = 512;
  double temperature = 0.0;
};

struct InferenceResponse {
  std::string text;
  std::chrono::milliseconds latency{0};
  std::string backend_id;
};

// Stable digest of (prompt, attachment names): 16 lowercase hex digits.
inline std::string request_digest(std::string_view prompt,
                                  const std::vector<std::string>& attachment_names) {
  std::uint64_t h = rng::fnv1a64(prompt);
  for (const auto& name : attachment_names) {
    h = rng::fnv1a64("\x1f", h);
    h = rng::fnv1a64(name, h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string request_digest(const InferenceRequest& request) {
  std::vector<std::string> names;
  names.reserve(request.attachments.size());
  for (const auto& a : request.attachments) names.push_back(a.name);
  return request_digest(request.prompt, names);
}

class BackendFailure : public Error {
 public:
  BackendFailure(ErrorCode code, const std::string& message, int status = 0,
                 bool body_consumed = false)
      : Error(code, message), status_(status), body_consumed_(body_consumed) {}

  int status() const noexcept { return status_; }
  bool body_consumed() const noexcept { return body_consumed_; }
  bool retryable() const noexcept {
    return (code() == ErrorCode::kTimeout || code() == ErrorCode::kTransport) && !body_consumed_;
  }

 private:
  int status_;
  bool body_consumed_;
};

// Implementations must be safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const InferenceRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

// Script file, JSON-lines. Each entry selects requests by one of
//   "digest": request_digest(...)           exact match, checked first
//   "contains": "substring"                  prompt or any attachment name
//   "default": true                          fallback
// and answers with "response": "text", or fails with
//   "error": "timeout" | "transport" | "backend"  ("status", "message",
//   "body_consumed" optional). "fail_times": n fails the first n calls and then
//   returns "response".
class MockBackend : public Backend {
 public:
  struct Entry {
    std::string digest;
    std::string contains;
    bool is_default = false;
    std::string response;
    std::string error;
    int status = 500;
    std::string message;
    bool body_consumed = false;
    int fail_times = -1;  // -1: always fail when `error` is set
  };

  MockBackend() = default;
  explicit MockBackend(std::vector<Entry> entries) : entries_(std::move(entries)) {
    calls_.assign(entries_.size(), 0);
  }

  static MockBackend parse(std::istream& in, const std::string& source) {
    std::vector<Entry> entries;
    for_each_jsonl(in, source, [&](const Json& j, std::size_t line) {
      const std::string where = source + ":" + std::to_string(line);
      if (!j.is_object()) throw Error(ErrorCode::kParse, where + ": expected an object");
      Entry e;
      e.digest = j.value("digest", "");
      e.contains = j.value("contains", "");
      e.is_default = j.value("default", false);
      e.response = j.value("response", "");
      e.error = j.value("error", "");
      e.status = j.value("status", 500);
      e.message = j.value("message", "");
      e.body_consumed = j.value("body_consumed", false);
      e.fail_times = j.value("fail_times", -1);
      if (e.digest.empty() && e.contains.empty() && !e.is_default) {
        throw Error(ErrorCode::kParse, where + ": entry needs digest, contains or default");
      }
      if (!e.error.empty() && e.error != "timeout" && e.error != "transport" &&
          e.error != "backend") {
        throw Error(ErrorCode::kParse, where + ": unknown error kind '" + e.error + "'");
      }
      if (e.error.empty() && !j.contains("response")) {
        throw Error(ErrorCode::kParse, where + ": entry needs response or error");
      }
      entries.push_back(std::move(e));
    });
    return MockBackend(std::move(entries));
  }

  static MockBackend load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kConfig, "cannot open mock script " + path.string());
    return parse(in, path.string());
  }

  std::string complete(const InferenceRequest& request) override {
    const std::size_t index = select(request);
    const Entry& e = entries_[index];
    if (!e.error.empty()) {
      bool fail = true;
      if (e.fail_times >= 0) {
        std::lock_guard lock(*mutex_);
        fail = calls_[index]++ < e.fail_times;
      }
      if (fail) {
        const std::string msg = e.message.empty() ? "scripted " + e.error : e.message;
        if (e.error == "timeout") throw BackendFailure(ErrorCode::kTimeout, msg);
        if (e.error == "transport") {
          throw BackendFailure(ErrorCode::kTransport, msg, 0, e.body_consumed);
        }
        throw BackendFailure(ErrorCode::kBackend, msg, e.status);
      }
    }
    return e.response;
  }

 private:
  std::size_t select(const InferenceRequest& request) const {
    const std::string digest = request_digest(request);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!entries_[i].digest.empty() && entries_[i].digest == digest) return i;
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& needle = entries_[i].contains;
      if (needle.empty()) continue;
      if (request.prompt.find(needle) != std::string::npos) return i;
      for (const auto& a : request.attachments) {
        if (a.name.find(needle) != std::string::npos) return i;
      }
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].is_default) return i;
    }
    throw BackendFailure(ErrorCode::kBackend, "mock script has no entry for digest " + digest,
                         404);
  }

  std::vector<Entry> entries_;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
  std::vector<int> calls_;
};

// ---------------------------------------------------------------------------
// Registry and client

struct BackendSpec {
  std::string id;
  std::string kind = "mock";          // mock | http
  std::string base_url;
  std::string protocol = "native";    // native | openai-chat
  std::string model;                  // model name for openai-chat
  std::string auth_env;               // environment variable holding a bearer token
  std::string script;                 // mock script path
  std::size_t max_attachments = kDefaultMaxAttachments;
  std::size_t max_attachment_bytes = 32u << 20;
  int timeout_ms = 60000;
  int retries = 2;
  int backoff_ms = 500;
  int max_in_flight = 4;
  int max_tokens = 512;
  double temperature = 0.0;
};

class BackendClient {
 public:
  BackendClient() = default;
  BackendClient(const BackendClient&) = delete;
  BackendClient& operator=(const BackendClient&) = delete;

  void add(BackendSpec spec, std::unique_ptr<Backend> backend) {
    if (spec.id.empty()) throw Error(ErrorCode::kConfig, "backend id is empty");
    if (entries_.count(spec.id)) {
      throw Error(ErrorCode::kConfig, "backend '" + spec.id + "' registered twice");
    }
    if (spec.max_in_flight < 1) spec.max_in_flight = 1;
    auto entry = std::make_unique<Entry>();
    entry->slots = std::make_unique<std::counting_semaphore<kMaxInFlight>>(
        std::min(spec.max_in_flight, static_cast<int>(kMaxInFlight)));
    entry->spec = std::move(spec);
    entry->backend = std::move(backend);
    const std::string id = entry->spec.id;
    entries_.emplace(id, std::move(entry));
  }

  bool has(std::string_view id) const { return entries_.count(std::string(id)) > 0; }

  const BackendSpec& spec(std::string_view id) const { return lookup(id).spec; }

  // Fills generation controls from the backend spec.
  InferenceRequest make_request(const std::string& backend_id, std::string prompt,
                                std::vector<Attachment> attachments) const {
    const BackendSpec& s = spec(backend_id);
    return {backend_id, std::move(prompt), std::move(attachments), s.max_tokens, s.temperature};
  }

  InferenceResponse complete(const InferenceRequest& request) const {
    Entry& entry = lookup(request.backend_id);
    if (request.prompt.empty()) throw Error(ErrorCode::kConfig, "prompt is empty");
    if (request.attachments.size() > entry.spec.max_attachments) {
      throw BackendFailure(ErrorCode::kAttachmentTooLarge,
                           std::to_string(request.attachments.size()) +
                               " attachments exceed the cap of " +
                               std::to_string(entry.spec.max_attachments));
    }
    entry.slots->acquire();
    struct Release {
      std::counting_semaphore<kMaxInFlight>* s;
      ~Release() { s->release(); }
    } release{entry.slots.get()};

    for (int attempt = 0;; ++attempt) {
      const auto start = std::chrono::steady_clock::now();
      try {
        std::string text = entry.backend->complete(request);
        return {std::move(text),
                std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start),
                request.backend_id};
      } catch (const BackendFailure& failure) {
        if (!failure.retryable() || attempt >= entry.spec.retries) throw;
      }
      const auto delay = static_cast<long long>(entry.spec.backoff_ms) << std::min(attempt, 20);
      if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
  }

 private:
  static constexpr std::ptrdiff_t kMaxInFlight = 256;

  struct Entry {
    BackendSpec spec;
    std::unique_ptr<Backend> backend;
    std::unique_ptr<std::counting_semaphore<kMaxInFlight>> slots;
  };

  Entry& lookup(std::string_view id) const {
    auto it = entries_.find(std::string(id));
    if (it == entries_.end()) {
      throw BackendFailure(ErrorCode::kBackend, "backend '" + std::string(id) + "' is not registered");
    }
    return *it->second;
  }

  std::map<std::string, std::unique_ptr<Entry>> entries_;
};

// ---------------------------------------------------------------------------
// Judge scores

// First decimal number in `text` that lies in [0, 1]. Signed tokens count as
// numbers, so "-0.5" is out of range rather than 0.5.
inline double parse_score(std::string_view text) {
  const std::size_t n = text.size();
  auto digit = [&](std::size_t k) { return k < n && text[k] >= '0' && text[k] <= '9'; };
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    if (text[j] == '-' || text[j] == '+') ++j;
    if (!digit(j) && !(j < n && text[j] == '.' && digit(j + 1))) {
      ++i;
      continue;
    }
    while (digit(j)) ++j;
    if (j < n && text[j] == '.' && digit(j + 1)) {
      ++j;
      while (digit(j)) ++j;
    }
    const std::string token(text.substr(i, j - i));
    const double value = std::strtod(token.c_str(), nullptr);
    if (value >= 0.0 && value <= 1.0) return value;
    i = j;
  }
  throw Error(ErrorCode::kNoScoreFound, "no score in [0, 1] found in judge response");
}

}  // namespace ovemo
