#include <catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "ovemo/http_backend.hpp"
#include "test_support.hpp"

using namespace ovemo;

namespace {

// Local server on an ephemeral port, stopped on scope exit.
class LocalServer {
 public:
  LocalServer() {
    port_ = server.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    thread_.join();
  }
  std::string url(const std::string& prefix = "") const {
    return "http://127.0.0.1:" + std::to_string(port_) + prefix;
  }

  httplib::Server server;

 private:
  int port_ = 0;
  std::thread thread_;
};

BackendSpec spec_for(const std::string& url, const std::string& protocol = "native") {
  BackendSpec s;
  s.id = "remote";
  s.kind = "http";
  s.base_url = url;
  s.protocol = protocol;
  s.model = "internvl";
  s.timeout_ms = 2000;
  s.retries = 2;
  s.backoff_ms = 0;
  return s;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ovemo::Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("base url parsing") {
  auto u = detail::parse_base_url("http://host:8000/api/v1/");
  CHECK(u.scheme_host_port == "http://host:8000");
  CHECK(u.path_prefix == "/api/v1");
  CHECK(detail::parse_base_url("http://host").path_prefix.empty());
  CHECK_THROWS_AS(detail::parse_base_url("host:8000"), Error);
  CHECK(detail::mime_for("a/B.JPG") == "image/jpeg");
  CHECK(detail::mime_for("a/b.png") == "image/png");
}

TEST_CASE("native protocol sends prompt, attachments and controls") {
  LocalServer srv;
  Json seen;
  std::string auth;
  srv.server.Post("/v1/infer", [&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content("{\"text\":\"[happy]\"}", "application/json");
  });
  testing::TempDir dir;
  testing::write(dir / "f.jpg", "abc");
  ::setenv("OVEMO_TEST_TOKEN", "secret", 1);

  auto spec = spec_for(srv.url("/v1"));
  spec.auth_env = "OVEMO_TEST_TOKEN";
  BackendClient client;
  client.add(spec, make_backend(spec, dir.path()));
  auto req = client.make_request("remote", "describe", {{"clip/f.jpg", dir / "f.jpg"}});
  CHECK(client.complete(req).text == "[happy]");
  CHECK(seen["prompt"] == "describe");
  CHECK(seen["attachments"][0]["name"] == "clip/f.jpg");
  CHECK(seen["attachments"][0]["mime"] == "image/jpeg");
  CHECK(seen["attachments"][0]["data_b64"] == "YWJj");
  CHECK(seen["max_tokens"] == 512);
  CHECK(seen["temperature"] == 0.0);
  CHECK(auth == "Bearer secret");
}

TEST_CASE("openai-chat protocol") {
  LocalServer srv;
  Json seen;
  srv.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    res.set_content("{\"choices\":[{\"message\":{\"role\":\"assistant\",\"content\":\"[calm]\"}}]}",
                    "application/json");
  });
  testing::TempDir dir;
  testing::write(dir / "f.png", "xy");
  auto spec = spec_for(srv.url("/v1"), "openai-chat");
  BackendClient client;
  client.add(spec, make_backend(spec, dir.path()));
  CHECK(client.complete(client.make_request("remote", "p", {{"f.png", dir / "f.png"}})).text ==
        "[calm]");
  CHECK(seen["model"] == "internvl");
  const auto& content = seen["messages"][0]["content"];
  CHECK(content[0]["text"] == "p");
  CHECK(content[1]["image_url"]["url"] == "data:image/png;base64,eHk=");
}

TEST_CASE("non-2xx status is a backend error and is not retried") {
  LocalServer srv;
  std::atomic<int> calls{0};
  srv.server.Post("/infer", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 503;
    res.set_content("overloaded", "text/plain");
  });
  auto spec = spec_for(srv.url());
  BackendClient client;
  client.add(spec, make_backend(spec, "."));
  try {
    client.complete({"remote", "p", {}});
    FAIL("expected BackendFailure");
  } catch (const BackendFailure& f) {
    CHECK(f.code() == ErrorCode::kBackend);
    CHECK(f.status() == 503);
  }
  CHECK(calls == 1);
}

TEST_CASE("malformed body is a backend error") {
  LocalServer srv;
  srv.server.Post("/infer", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"answer\":1}", "application/json");
  });
  auto spec = spec_for(srv.url());
  BackendClient client;
  client.add(spec, make_backend(spec, "."));
  CHECK(code_of([&] { client.complete({"remote", "p", {}}); }) == ErrorCode::kBackend);
}

TEST_CASE("slow server times out after retries") {
  LocalServer srv;
  std::atomic<int> calls{0};
  srv.server.Post("/infer", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content("{\"text\":\"late\"}", "application/json");
  });
  auto spec = spec_for(srv.url());
  spec.timeout_ms = 150;
  spec.retries = 1;
  BackendClient client;
  client.add(spec, make_backend(spec, "."));
  CHECK(code_of([&] { client.complete({"remote", "p", {}}); }) == ErrorCode::kTimeout);
  CHECK(calls == 2);
}

TEST_CASE("refused connection is a transport error") {
  int port = 0;
  {
    LocalServer srv;
    port = std::stoi(srv.url().substr(17));
  }
  auto spec = spec_for("http://127.0.0.1:" + std::to_string(port));
  spec.retries = 1;
  BackendClient client;
  client.add(spec, make_backend(spec, "."));
  CHECK(code_of([&] { client.complete({"remote", "p", {}}); }) == ErrorCode::kTransport);
}

TEST_CASE("attachment limits") {
  LocalServer srv;
  srv.server.Post("/infer", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"text\":\"ok\"}", "application/json");
  });
  testing::TempDir dir;
  testing::write(dir / "big.jpg", std::string(100, 'x'));
  auto spec = spec_for(srv.url());
  spec.max_attachment_bytes = 64;
  BackendClient client;
  client.add(spec, make_backend(spec, "."));
  CHECK(code_of([&] { client.complete({"remote", "p", {{"big.jpg", dir / "big.jpg"}}}); }) ==
        ErrorCode::kAttachmentTooLarge);
  CHECK(code_of([&] { client.complete({"remote", "p", {{"gone.jpg", dir / "gone.jpg"}}}); }) ==
        ErrorCode::kBackend);
}

TEST_CASE("make_backend validation") {
  BackendSpec s;
  s.id = "x";
  s.kind = "grpc";
  CHECK(code_of([&] { make_backend(s, "."); }) == ErrorCode::kConfig);
  s.kind = "http";
  CHECK(code_of([&] { make_backend(s, "."); }) == ErrorCode::kConfig);
  s.base_url = "http://localhost:1";
  s.protocol = "soap";
  CHECK(code_of([&] { make_backend(s, "."); }) == ErrorCode::kConfig);
  s.kind = "mock";
  s.script = "";
  CHECK(code_of([&] { make_backend(s, "."); }) == ErrorCode::kConfig);
}
