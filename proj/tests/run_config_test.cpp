#include <doctest.h>

#include "normprobe/error.hpp"
#include "normprobe/run_config.hpp"
#include "test_util.hpp"

using namespace normprobe;

namespace {

struct ConfigDir {
  testutil::TempDir dir;
  ConfigDir() {
    testutil::write_file(dir / "ratings.csv", "id,text,rating\n");
    testutil::write_file(dir / "anchors.csv", "id,text,polarity\n");
    testutil::write_file(dir / "en.jsonl", "");
    testutil::write_file(dir / "de.jsonl", "");
    testutil::write_file(dir / "anchors.jsonl", "");
  }
  RunConfig parse(const std::string& text) const { return parse_config_text(text, dir.path()); }
};

const std::string kMinimal = R"([run]
langs = ["en", "de"]

[anchors]
statements = "anchors.csv"

[ratings]
path = "ratings.csv"

[[models]]
name = "m"
embeddings = { en = "en.jsonl", de = "de.jsonl" }
anchors = "anchors.jsonl"
)";

std::string message_of(const ConfigDir& c, const std::string& text) {
  try {
    c.parse(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("minimal config resolves defaults") {
  ConfigDir c;
  auto cfg = c.parse(kMinimal);
  CHECK(cfg.method == Method::pearson);
  CHECK(cfg.langs == std::vector<std::string>{"en", "de"});
  CHECK(cfg.strict_alignment);
  CHECK_FALSE(cfg.per_lang_direction);
  CHECK_FALSE(cfg.bootstrap.has_value());
  CHECK(cfg.output_dir == c.dir / "normprobe-out");
  CHECK(cfg.ratings_path == c.dir / "ratings.csv");
  REQUIRE(cfg.models.size() == 1);
  CHECK(cfg.models[0].langs == cfg.langs);
  CHECK(cfg.models[0].embeddings.at("de") == c.dir / "de.jsonl");
  CHECK(cfg.anchors.scale_percentile == 100.0);
  CHECK(cfg.config_hash.size() == 64);
}

TEST_CASE("bootstrap section and method") {
  ConfigDir c;
  auto cfg = c.parse(replace(kMinimal, "[anchors]", "method = \"spearman\"\n\n[bootstrap]\nn_resamples = 500\nseed = 9\n\n[anchors]"));
  CHECK(cfg.method == Method::spearman);
  REQUIRE(cfg.bootstrap.has_value());
  CHECK(cfg.bootstrap->n_resamples == 500);
  CHECK(cfg.bootstrap->seed == 9);
  CHECK(cfg.bootstrap->alpha == 0.05);
}

TEST_CASE("unknown keys name the nearest valid key") {
  ConfigDir c;
  auto msg = message_of(c, kMinimal + "\n[bootsraps]\nseed = 1\n");
  CHECK(msg.find("bootsraps") != std::string::npos);
  CHECK(msg.find("bootstrap") != std::string::npos);
  CHECK(msg.find("did you mean") != std::string::npos);

  auto inner = message_of(c, replace(kMinimal, "name = \"m\"", "name = \"m\"\nanchor = \"x\""));
  CHECK(inner.find("\"models[0].anchor\"") != std::string::npos);
  CHECK(inner.find("\"models[0].anchors\"") != std::string::npos);
}

TEST_CASE("validation errors") {
  ConfigDir c;
  CHECK(message_of(c, replace(kMinimal, "[\"en\", \"de\"]", "[\"en\", \"en\"]")).find("duplicate language") !=
        std::string::npos);
  CHECK(message_of(c, replace(kMinimal, "[\"en\", \"de\"]", "[]")).find("langs") != std::string::npos);
  CHECK(message_of(c, replace(kMinimal, "\"ratings.csv\"", "\"missing.csv\"")).find("missing.csv") !=
        std::string::npos);
  auto type_msg = message_of(c, replace(kMinimal, "en = \"en.jsonl\"", "en = 3"));
  CHECK(type_msg.find("models[0].embeddings.en") != std::string::npos);
  CHECK(message_of(c, replace(kMinimal, "[ratings]\npath = \"ratings.csv\"\n", "")).find("ratings") !=
        std::string::npos);
  CHECK(message_of(c, "[run\n").size() > 0);
  CHECK(message_of(c, replace(kMinimal, "name = \"m\"", "name = \"m\"\nlangs = [\"zh\"]")).find("zh") !=
        std::string::npos);
}

TEST_CASE("parse_config reads from disk and hashes the bytes") {
  ConfigDir c;
  testutil::write_file(c.dir / "run.toml", kMinimal);
  auto a = parse_config(c.dir / "run.toml");
  auto b = c.parse(kMinimal);
  CHECK(a.config_hash == b.config_hash);
  testutil::write_file(c.dir / "run2.toml", kMinimal + "\n");
  CHECK(parse_config(c.dir / "run2.toml").config_hash != a.config_hash);
  CHECK_THROWS_AS(parse_config(c.dir / "nope.toml"), Error);
}
