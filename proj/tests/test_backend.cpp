#include <catch_amalgamated.hpp>

#include <atomic>
#include <sstream>
#include <thread>

#include "ovemo/backend.hpp"
#include "ovemo/parallel.hpp"
#include "ovemo/templates.hpp"

using namespace ovemo;

namespace {

MockBackend script(const std::string& text) {
  std::istringstream in(text);
  return MockBackend::parse(in, "script");
}

BackendSpec fast_spec(std::string id, int retries = 2) {
  BackendSpec s;
  s.id = std::move(id);
  s.retries = retries;
  s.backoff_ms = 0;
  return s;
}

// Counts calls and fails the first `failures` of them.
class Flaky : public Backend {
 public:
  Flaky(ErrorCode code, int failures, bool consumed = false)
      : code_(code), failures_(failures), consumed_(consumed) {}
  std::string complete(const InferenceRequest&) override {
    if (calls++ < failures_) throw BackendFailure(code_, "flaky", 0, consumed_);
    return "ok";
  }
  std::atomic<int> calls{0};

 private:
  ErrorCode code_;
  int failures_;
  bool consumed_;
};

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

TEST_CASE("render examples") {
  CHECK(render({"t", "words are {text}."}, {{"text", "hello"}}) == "words are hello.");
  CHECK(code_of([] { render({"t", "sub: {subtitle}"}, {}); }) == ErrorCode::kMissingBinding);
  CHECK(render({"t", "no slots here"}, {{"text", "x"}}) == "no slots here");
}

TEST_CASE("render substitutes exactly") {
  CHECK(render({"t", "{a}{b}{a}"}, {{"a", "{b}"}, {"b", "1"}}) == "{b}1{b}");
  CHECK(render({"t", "[,,**] { not a slot } {1x} {"}, {}) == "[,,**] { not a slot } {1x} {");
  CHECK(placeholders({"t", "{x} {y} {x} {9}"}) == std::vector<std::string>{"x", "y"});
}

TEST_CASE("render is injective in distinct delimiter-safe bindings") {
  const PromptTemplate t{"t", "A={a};B={b}"};
  std::set<std::string> outputs;
  const std::vector<std::string> values = {"", "x", "y", "xy", "x;B=", "1"};
  std::size_t n = 0;
  for (const auto& a : values) {
    for (const auto& b : values) {
      if (a.find(';') != std::string::npos || b.find(';') != std::string::npos) continue;
      outputs.insert(render(t, {{"a", a}, {"b", b}}));
      ++n;
    }
  }
  CHECK(outputs.size() == n);
}

TEST_CASE("builtin templates expose the expected slots") {
  CHECK(placeholders(templates::zero_shot()) == std::vector<std::string>{"text"});
  CHECK(placeholders(templates::affectgpt()) == std::vector<std::string>{"subtitle"});
  CHECK(placeholders(templates::caption()).empty());
  CHECK(placeholders(templates::judge()) == std::vector<std::string>{"caption_a", "caption_b"});
  CHECK(templates::zero_shot().body.find("[,,**]") != std::string::npos);
}

TEST_CASE("parse_score examples") {
  CHECK(parse_score("0.95") == 0.95);
  CHECK(parse_score("Score: 0.8, because both mention joy") == 0.8);
  CHECK(code_of([] { parse_score("very similar"); }) == ErrorCode::kNoScoreFound);
}

TEST_CASE("parse_score skips out-of-range numbers") {
  CHECK(parse_score("On a 10 point scale: 9, i.e. 0.9") == 0.9);
  CHECK(parse_score("-0.5 then 0.25") == 0.25);
  CHECK(parse_score("1") == 1.0);
  CHECK(parse_score("score .75") == 0.75);
  CHECK(code_of([] { parse_score("7 out of 10"); }) == ErrorCode::kNoScoreFound);
  CHECK(code_of([] { parse_score(""); }) == ErrorCode::kNoScoreFound);
  for (const char* s : {"0", "1.0", "0.333", "x 2.5 y 0.1", "1.00001 0.5"}) {
    const double v = parse_score(s);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("request digest is stable and sensitive") {
  const auto d = request_digest("prompt", {"a.jpg", "b.jpg"});
  CHECK(d.size() == 16);
  CHECK(d == request_digest("prompt", {"a.jpg", "b.jpg"}));
  CHECK(d != request_digest("prompt", {"b.jpg", "a.jpg"}));
  CHECK(d != request_digest("prompt", {"a.jpgb.jpg"}));
  CHECK(request_digest("", {}) == "cbf29ce484222325");
}

TEST_CASE("mock answers by digest, then substring, then default") {
  const std::string digest = request_digest("exact prompt", {});
  auto mock = script("{\"digest\":\"" + digest + "\",\"response\":\"[happy]\"}\n"
                     "{\"contains\":\"frame7\",\"response\":\"[calm]\"}\n"
                     "{\"contains\":\"prompt\",\"response\":\"[sad]\"}\n"
                     "{\"default\":true,\"response\":\"fallback\"}\n");
  CHECK(mock.complete({"m", "exact prompt", {}}) == "[happy]");
  CHECK(mock.complete({"m", "another prompt", {}}) == "[sad]");
  CHECK(mock.complete({"m", "x", {{"v.mp4#frame7", ""}}}) == "[calm]");
  CHECK(mock.complete({"m", "x", {}}) == "fallback");
  // deterministic across repeated calls
  for (int i = 0; i < 3; ++i) CHECK(mock.complete({"m", "exact prompt", {}}) == "[happy]");
}

TEST_CASE("mock without a matching entry is a backend error") {
  auto mock = script("{\"contains\":\"zzz\",\"response\":\"x\"}\n");
  CHECK(code_of([&] { mock.complete({"m", "abc", {}}); }) == ErrorCode::kBackend);
}

TEST_CASE("mock script validation") {
  CHECK(code_of([] { script("{\"response\":\"x\"}\n"); }) == ErrorCode::kParse);
  CHECK(code_of([] { script("{\"default\":true,\"error\":\"boom\"}\n"); }) == ErrorCode::kParse);
  CHECK(code_of([] { script("{\"default\":true}\n"); }) == ErrorCode::kParse);
  CHECK(code_of([] { MockBackend::load("/nonexistent/script.jsonl"); }) == ErrorCode::kConfig);
}

TEST_CASE("client returns scripted text") {
  BackendClient client;
  client.add(fast_spec("m"), std::make_unique<MockBackend>(script(
                                  "{\"default\":true,\"response\":\"[happy]\"}\n")));
  const auto res = client.complete(client.make_request("m", "hi", {}));
  CHECK(res.text == "[happy]");
  CHECK(res.backend_id == "m");
}

TEST_CASE("unregistered backend is a backend error") {
  BackendClient client;
  CHECK(code_of([&] { client.complete({"ghost", "hi", {}}); }) == ErrorCode::kBackend);
  CHECK_FALSE(client.has("ghost"));
}

TEST_CASE("duplicate registration and empty prompt are config errors") {
  BackendClient client;
  client.add(fast_spec("m"), std::make_unique<Flaky>(ErrorCode::kTimeout, 0));
  CHECK(code_of([&] { client.add(fast_spec("m"), std::make_unique<Flaky>(ErrorCode::kTimeout, 0)); }) ==
        ErrorCode::kConfig);
  CHECK(code_of([&] { client.complete({"m", "", {}}); }) == ErrorCode::kConfig);
}

TEST_CASE("scripted timeout surfaces after the configured retries") {
  auto flaky = std::make_unique<Flaky>(ErrorCode::kTimeout, 100);
  Flaky* raw = flaky.get();
  BackendClient client;
  client.add(fast_spec("m", 2), std::move(flaky));
  CHECK(code_of([&] { client.complete({"m", "hi", {}}); }) == ErrorCode::kTimeout);
  CHECK(raw->calls == 3);
}

TEST_CASE("transient failures recover within the retry budget") {
  auto flaky = std::make_unique<Flaky>(ErrorCode::kTransport, 2);
  Flaky* raw = flaky.get();
  BackendClient client;
  client.add(fast_spec("m", 2), std::move(flaky));
  CHECK(client.complete({"m", "hi", {}}).text == "ok");
  CHECK(raw->calls == 3);
}

TEST_CASE("no retry once response bytes were consumed") {
  auto flaky = std::make_unique<Flaky>(ErrorCode::kTransport, 100, true);
  Flaky* raw = flaky.get();
  BackendClient client;
  client.add(fast_spec("m", 5), std::move(flaky));
  CHECK(code_of([&] { client.complete({"m", "hi", {}}); }) == ErrorCode::kTransport);
  CHECK(raw->calls == 1);
}

TEST_CASE("backend errors are not retried") {
  auto flaky = std::make_unique<Flaky>(ErrorCode::kBackend, 100);
  Flaky* raw = flaky.get();
  BackendClient client;
  client.add(fast_spec("m", 5), std::move(flaky));
  CHECK(code_of([&] { client.complete({"m", "hi", {}}); }) == ErrorCode::kBackend);
  CHECK(raw->calls == 1);
}

TEST_CASE("mock fail_times fails then answers") {
  BackendClient client;
  client.add(fast_spec("m", 1),
             std::make_unique<MockBackend>(script(
                 "{\"default\":true,\"error\":\"timeout\",\"fail_times\":1,\"response\":\"[ok]\"}\n")));
  CHECK(client.complete({"m", "hi", {}}).text == "[ok]");

  BackendClient strict;
  strict.add(fast_spec("m", 0),
             std::make_unique<MockBackend>(script(
                 "{\"default\":true,\"error\":\"timeout\",\"fail_times\":1,\"response\":\"[ok]\"}\n")));
  CHECK(code_of([&] { strict.complete({"m", "hi", {}}); }) == ErrorCode::kTimeout);
  CHECK(strict.complete({"m", "hi", {}}).text == "[ok]");
}

TEST_CASE("mock error kinds") {
  BackendClient client;
  client.add(fast_spec("m", 3),
             std::make_unique<MockBackend>(script(
                 "{\"contains\":\"a\",\"error\":\"backend\",\"status\":503}\n"
                 "{\"contains\":\"b\",\"error\":\"transport\",\"body_consumed\":true}\n")));
  try {
    client.complete({"m", "a", {}});
    FAIL("expected BackendFailure");
  } catch (const BackendFailure& f) {
    CHECK(f.code() == ErrorCode::kBackend);
    CHECK(f.status() == 503);
  }
  try {
    client.complete({"m", "b", {}});
    FAIL("expected BackendFailure");
  } catch (const BackendFailure& f) {
    CHECK(f.code() == ErrorCode::kTransport);
    CHECK(f.body_consumed());
  }
}

TEST_CASE("attachment cap") {
  BackendClient client;
  client.add(fast_spec("m"), std::make_unique<Flaky>(ErrorCode::kTimeout, 0));
  std::vector<Attachment> six(6, Attachment{"f", ""});
  std::vector<Attachment> seven(7, Attachment{"f", ""});
  CHECK(client.complete({"m", "hi", six}).text == "ok");
  CHECK(code_of([&] { client.complete({"m", "hi", seven}); }) == ErrorCode::kAttachmentTooLarge);
}

TEST_CASE("make_request copies generation controls") {
  BackendClient client;
  auto spec = fast_spec("m");
  spec.max_tokens = 77;
  spec.temperature = 0.25;
  client.add(spec, std::make_unique<Flaky>(ErrorCode::kTimeout, 0));
  const auto req = client.make_request("m", "p", {});
  CHECK(req.max_tokens == 77);
  CHECK(req.temperature == 0.25);
}

// Tracks the peak number of overlapping calls.
class Gauge : public Backend {
 public:
  std::string complete(const InferenceRequest&) override {
    const int now = ++active;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active;
    return "ok";
  }
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
};

TEST_CASE("in-flight cap is respected under concurrency") {
  auto gauge = std::make_unique<Gauge>();
  Gauge* raw = gauge.get();
  auto spec = fast_spec("m");
  spec.max_in_flight = 2;
  BackendClient client;
  client.add(spec, std::move(gauge));
  std::vector<std::string> out(40);
  parallel_for(out.size(), 8, [&](std::size_t i) { out[i] = client.complete({"m", "p", {}}).text; });
  CHECK(raw->peak <= 2);
  CHECK(raw->peak >= 1);
  CHECK(std::count(out.begin(), out.end(), "ok") == 40);
}

TEST_CASE("parallel_for rethrows the first failure") {
  CHECK_THROWS_AS(parallel_for(10, 4,
                               [](std::size_t i) {
                                 if (i == 3) throw Error(ErrorCode::kIo, "x");
                               }),
                  Error);
  std::atomic<int> count{0};
  parallel_for(0, 4, [&](std::size_t) { ++count; });
  parallel_for(7, 0, [&](std::size_t) { ++count; });
  CHECK(count == 7);
}
