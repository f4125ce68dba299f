#pragma once

// HTTP backend.
//
// protocol "native":  POST <base_url>/infer
//   request  {"prompt", "attachments": [{"name", "mime", "data_b64"}],
//             "max_tokens", "temperature"}
//   response {"text"}
// protocol "openai-chat": POST <base_url>/chat/completions with the prompt and
//   images as data URLs in one user message; reads choices[0].message.content.
//
// Non-2xx statuses raise BackendError(status, message). Connection failures
// raise TransportError; read timeouts raise Timeout. Both record whether any
// response body byte arrived, which disables retrying.

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <httplib.h>

#include "ovemo/backend.hpp"
#include "ovemo/error.hpp"
#include "ovemo/jsonl.hpp"

namespace ovemo {

namespace detail {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

inline ParsedUrl parse_base_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::kConfig, "base_url '" + url + "' has no scheme");
  }
  const std::size_t slash = url.find('/', scheme + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, slash);
  if (slash != std::string::npos) out.path_prefix = url.substr(slash);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

inline std::string mime_for(const fs::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  if (ext == ".wav") return "audio/wav";
  if (ext == ".mp3") return "audio/mpeg";
  return "application/octet-stream";
}

}  // namespace detail

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendSpec spec)
      : spec_(std::move(spec)), url_(detail::parse_base_url(spec_.base_url)) {
    if (spec_.protocol != "native" && spec_.protocol != "openai-chat") {
      throw Error(ErrorCode::kConfig, "backend '" + spec_.id + "': unknown protocol '" +
                                          spec_.protocol + "'");
    }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url_.scheme_host_port.rfind("https://", 0) == 0) {
      throw Error(ErrorCode::kConfig, "backend '" + spec_.id + "': built without TLS support");
    }
#endif
  }

  std::string complete(const InferenceRequest& request) override {
    const std::string body = build_body(request);

    httplib::Request req;
    req.method = "POST";
    req.path = url_.path_prefix + (spec_.protocol == "native" ? "/infer" : "/chat/completions");
    req.body = body;
    req.set_header("Content-Type", "application/json");
    if (!spec_.auth_env.empty()) {
      if (const char* token = std::getenv(spec_.auth_env.c_str()); token && *token) {
        req.set_header("Authorization", std::string("Bearer ") + token);
      }
    }
    std::string received;
    bool consumed = false;
    req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
      consumed = consumed || len > 0;
      received.append(data, len);
      return true;
    };

    auto client = acquire();
    httplib::Response res;
    httplib::Error err = httplib::Error::Success;
    const auto start = std::chrono::steady_clock::now();
    const bool ok = client->send(req, res, err);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    release(std::move(client));

    if (!ok) {
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read &&
                              elapsed.count() >= spec_.timeout_ms * 9 / 10);
      throw BackendFailure(timed_out ? ErrorCode::kTimeout : ErrorCode::kTransport,
                           "backend '" + spec_.id + "': " + httplib::to_string(err), 0, consumed);
    }
    if (res.status < 200 || res.status >= 300) {
      throw BackendFailure(ErrorCode::kBackend,
                           "backend '" + spec_.id + "' returned " + std::to_string(res.status) +
                               ": " + received.substr(0, 512),
                           res.status, consumed);
    }
    return extract_text(received);
  }

 private:
  std::string build_body(const InferenceRequest& request) const {
    std::size_t total = 0;
    std::vector<std::pair<std::string, std::string>> encoded;  // mime, base64
    for (const auto& a : request.attachments) {
      std::error_code ec;
      const auto size = fs::file_size(a.path, ec);
      if (ec) {
        throw BackendFailure(ErrorCode::kBackend,
                             "attachment '" + a.name + "' is not readable at " + a.path.string());
      }
      total += size;
      if (total > spec_.max_attachment_bytes) {
        throw BackendFailure(ErrorCode::kAttachmentTooLarge,
                             "attachments exceed " + std::to_string(spec_.max_attachment_bytes) +
                                 " bytes");
      }
      encoded.emplace_back(detail::mime_for(a.path),
                           httplib::detail::base64_encode(read_text_file(a.path)));
    }

    Json j;
    if (spec_.protocol == "native") {
      j["prompt"] = request.prompt;
      Json atts = Json::array();
      for (std::size_t i = 0; i < encoded.size(); ++i) {
        atts.push_back({{"name", request.attachments[i].name},
                        {"mime", encoded[i].first},
                        {"data_b64", encoded[i].second}});
      }
      j["attachments"] = std::move(atts);
      j["max_tokens"] = request.max_tokens;
      j["temperature"] = request.temperature;
    } else {
      Json content = Json::array();
      content.push_back({{"type", "text"}, {"text", request.prompt}});
      for (const auto& [mime, data] : encoded) {
        content.push_back(
            {{"type", "image_url"},
             {"image_url", {{"url", "data:" + mime + ";base64," + data}}}});
      }
      j["model"] = spec_.model;
      j["messages"] = Json::array({{{"role", "user"}, {"content", std::move(content)}}});
      j["max_tokens"] = request.max_tokens;
      j["temperature"] = request.temperature;
    }
    return j.dump();
  }

  std::string extract_text(const std::string& body) const {
    Json j;
    try {
      j = Json::parse(body);
      if (spec_.protocol == "native") return j.at("text").get<std::string>();
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception& e) {
      throw BackendFailure(ErrorCode::kBackend,
                           "backend '" + spec_.id + "' sent a malformed body: " + e.what(), 200,
                           true);
    }
  }

  // Idle keep-alive connections; each in-flight request owns one exclusively.
  std::unique_ptr<httplib::Client> acquire() {
    {
      std::lock_guard lock(pool_mutex_);
      if (!pool_.empty()) {
        auto c = std::move(pool_.back());
        pool_.pop_back();
        return c;
      }
    }
    auto c = std::make_unique<httplib::Client>(url_.scheme_host_port);
    const auto timeout = std::chrono::milliseconds(spec_.timeout_ms);
    c->set_connection_timeout(timeout);
    c->set_read_timeout(timeout);
    c->set_write_timeout(timeout);
    c->set_keep_alive(true);
    return c;
  }

  void release(std::unique_ptr<httplib::Client> client) {
    std::lock_guard lock(pool_mutex_);
    pool_.push_back(std::move(client));
  }

  BackendSpec spec_;
  detail::ParsedUrl url_;
  std::mutex pool_mutex_;
  std::vector<std::unique_ptr<httplib::Client>> pool_;
};

// Builds the backend named by `spec.kind`. Relative script paths resolve
// against `base_dir`.
inline std::unique_ptr<Backend> make_backend(const BackendSpec& spec, const fs::path& base_dir) {
  if (spec.kind == "mock") {
    if (spec.script.empty()) {
      throw Error(ErrorCode::kConfig, "mock backend '" + spec.id + "' needs a script");
    }
    fs::path script = spec.script;
    if (script.is_relative()) script = base_dir / script;
    return std::make_unique<MockBackend>(MockBackend::load(script));
  }
  if (spec.kind == "http") {
    if (spec.base_url.empty()) {
      throw Error(ErrorCode::kConfig, "http backend '" + spec.id + "' needs base_url");
    }
    return std::make_unique<HttpBackend>(spec);
  }
  throw Error(ErrorCode::kConfig, "backend '" + spec.id + "': unknown kind '" + spec.kind + "'");
}

}  // namespace ovemo
