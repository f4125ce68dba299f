#include <catch_amalgamated.hpp>

#include "ovemo/config.hpp"
#include "test_support.hpp"

using namespace ovemo;

namespace {

Json base() {
  return Json::parse(R"({
    "manifest": "m.jsonl", "seed": 5,
    "backends": [{"id": "a", "kind": "mock", "script": "a.jsonl"},
                 {"id": "b", "kind": "mock", "script": "b.jsonl"}],
    "models": ["a", "b"]
  })");
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

RunConfig parsed(const Json& j) { return parse_run_config(j, "/base"); }

}  // namespace

TEST_CASE("defaults") {
  const auto c = parsed(base());
  CHECK(c.k_segments == 6);
  CHECK(c.seed == 5);
  CHECK(c.output_dir == "out");
  CHECK(c.split == SplitTag::kTest);
  CHECK(c.backends[0].max_attachments == 6);
  CHECK(c.backends[0].temperature == 0.0);
  CHECK(c.resolve("m.jsonl") == fs::path("/base/m.jsonl"));
  CHECK(c.resolve("/abs") == fs::path("/abs"));
  CHECK(template_for_model(c, "a") == "zero_shot");
  CHECK_NOTHROW(validate_run_config(c));
}

TEST_CASE("the bundled toy config is valid") {
  const auto c = load_run_config(testing::toy_dir() / "config.json");
  CHECK_NOTHROW(validate_run_config(c));
  CHECK(c.models == std::vector<std::string>{"internvl", "affectgpt"});
  REQUIRE(c.fusion);
  CHECK(c.fusion->strategy == FusionStrategy::kUnion);
  REQUIRE(c.captions);
  CHECK(c.captions->threshold == 0.9);
}

TEST_CASE("config errors") {
  CHECK(code_of([] { load_run_config("/nonexistent/config.json"); }) == ErrorCode::kConfig);
  testing::TempDir dir;
  testing::write(dir / "bad.json", "{not json");
  CHECK(code_of([&] { load_run_config(dir / "bad.json"); }) == ErrorCode::kConfig);

  auto with = [](auto&& edit) {
    Json j = base();
    edit(j);
    return j;
  };
  CHECK(code_of([&] { parsed(with([](Json& j) { j["seed"] = -1; })); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { parsed(with([](Json& j) { j["seed"] = "x"; })); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { parsed(with([](Json& j) { j["sampler"] = {{"k_segments", 0}}; })); }) ==
        ErrorCode::kConfig);
  CHECK(code_of([&] { parsed(with([](Json& j) { j["split"] = "dev"; })); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { parsed(with([](Json& j) { j["fusion"] = {{"strategy", "avg"}}; })); }) ==
        ErrorCode::kConfig);
  CHECK(code_of([&] { parsed(with([](Json& j) { j["backends"][0]["retries"] = -1; })); }) ==
        ErrorCode::kConfig);
  CHECK(code_of([&] { parsed(Json::array()); }) == ErrorCode::kConfig);
}

TEST_CASE("cross-reference validation") {
  auto invalid = [](auto&& edit) {
    Json j = base();
    edit(j);
    return code_of([&] { validate_run_config(parsed(j)); });
  };
  CHECK(invalid([](Json& j) { j["models"].push_back("ghost"); }) == ErrorCode::kConfig);
  CHECK(invalid([](Json& j) { j["backends"].push_back(j["backends"][0]); }) == ErrorCode::kConfig);
  CHECK(invalid([](Json& j) { j["backends"][0]["kind"] = "grpc"; }) == ErrorCode::kConfig);
  CHECK(invalid([](Json& j) { j["templates"] = {{"a", "missing"}}; }) == ErrorCode::kConfig);
  CHECK(invalid([](Json& j) { j["templates"] = {{"a", "judge"}}; }) == ErrorCode::kConfig);
  CHECK(invalid([](Json& j) { j["fusion"] = {{"strategy", "vote"}, {"min_votes", 3}}; }) ==
        ErrorCode::kConfig);
  CHECK(invalid([](Json& j) {
          j["captions"] = {{"images", "i.jsonl"}, {"backend_a", "a"}, {"backend_b", "zz"},
                           {"judge", "a"}};
        }) == ErrorCode::kConfig);
  CHECK(invalid([](Json& j) {
          j["captions"] = {{"images", "i.jsonl"}, {"backend_a", "a"}, {"backend_b", "b"},
                           {"judge", "a"}, {"threshold", 1.2}};
        }) == ErrorCode::kConfig);
}

TEST_CASE("template files extend and shadow built-ins") {
  testing::TempDir dir;
  testing::write(dir / "p.txt", "Subtitle: {subtitle} -> [..]");
  Json j = base();
  j["template_files"] = {{"mine", "p.txt"}};
  j["templates"] = {{"a", "mine"}};
  auto c = parse_run_config(j, dir.path());
  CHECK_NOTHROW(validate_run_config(c));
  CHECK(load_templates(c).at("mine").body == "Subtitle: {subtitle} -> [..]");
  j["template_files"] = {{"mine", "missing.txt"}};
  CHECK(code_of([&] { load_templates(parse_run_config(j, dir.path())); }) == ErrorCode::kConfig);
}

TEST_CASE("snapshot excludes location and concurrency") {
  auto c1 = parsed(base());
  auto c2 = c1;
  c2.output_dir = "/elsewhere";
  c2.base_dir = "/other";
  CHECK(snapshot_json(c1) == snapshot_json(c2));
  c2.seed = 6;
  CHECK(snapshot_json(c1) != snapshot_json(c2));
  CHECK(snapshot_json(c1)["sampler"]["rng"] == "splitmix64-v1");
  CHECK(snapshot_json(c1)["backends"][0]["temperature"] == 0.0);
}
