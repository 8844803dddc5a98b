#include <doctest.h>

#include <algorithm>
#include <random>

#include "normprobe/csv.hpp"
#include "normprobe/embedding_io.hpp"
#include "normprobe/error.hpp"
#include "normprobe/language.hpp"
#include "support/oracles.hpp"
#include "test_util.hpp"

using namespace normprobe;
using testutil::TempDir;
using testutil::write_file;

namespace {

Manifest manifest(std::size_t dim) {
  return Manifest{"test-model", Pooling::sentence_tuned, dim, "tpl-v1", ""};
}

std::string header_line(std::size_t dim, const std::string& hash) {
  return R"({"manifest":{"model_name":"m","pooling":"mean_pooled","dim":)" + std::to_string(dim) +
         R"(,"template_set_id":"t","content_hash":")" + hash + "\"}}\n";
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected normprobe::Error");
  return ErrorCode::io;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected normprobe::Error");
  return {};
}

}  // namespace

TEST_CASE("read_embedding_set accepts a minimal well-formed file") {
  TempDir dir;
  std::vector<EmbeddingRecord> recs = {{"s1", "en", {1.0, 2.0, 3.0}}, {"s2", "en", {0.5, -1.0, 0.0}}};
  auto hash = content_hash(recs);
  write_file(dir / "e.jsonl", header_line(3, hash) +
                                  R"({"id":"s1","lang":"en","vector":[1.0,2.0,3.0]})" "\n"
                                  R"({"id":"s2","lang":"en","vector":[0.5,-1,0]})" "\n");
  auto set = read_embedding_set(dir / "e.jsonl");
  CHECK(set.size() == 2);
  CHECK(set.manifest().dim == 3);
  CHECK(set.manifest().pooling == Pooling::mean_pooled);
  CHECK(set.manifest().content_hash == hash);
  CHECK(set.records()[1].vector == std::vector<double>{0.5, -1.0, 0.0});
}

TEST_CASE("read_embedding_set reports line-numbered validation errors") {
  TempDir dir;
  auto path = dir / "e.jsonl";

  SUBCASE("non-finite component") {
    write_file(path, header_line(3, "x") + R"({"id":"s1","lang":"en","vector":[1.0,2.0,3.0]})" "\n"
                                           R"({"id":"s2","lang":"en","vector":[1.0, NaN, 0.0]})" "\n");
    auto msg = message_of([&] { read_embedding_set(path); });
    CHECK(msg == "non-finite component at line 3");
    CHECK(code_of([&] { read_embedding_set(path); }) == ErrorCode::non_finite);
  }
  SUBCASE("dimension mismatch") {
    write_file(path, header_line(3, "x") + R"({"id":"s1","lang":"en","vector":[1.0,2.0]})" "\n");
    auto msg = message_of([&] { read_embedding_set(path); });
    CHECK(msg.starts_with("dimension mismatch at line 2"));
  }
  SUBCASE("malformed line") {
    write_file(path, header_line(2, "x") + "{\"id\":\"s1\",\n");
    CHECK(message_of([&] { read_embedding_set(path); }) == "malformed JSON at line 2");
  }
  SUBCASE("duplicate (id, lang)") {
    write_file(path, header_line(1, "x") + R"({"id":"s1","lang":"en","vector":[1]})" "\n"
                                           R"({"id":"s1","lang":"en","vector":[2]})" "\n");
    CHECK(code_of([&] { read_embedding_set(path); }) == ErrorCode::duplicate);
  }
  SUBCASE("same id in two languages is fine but hash must match") {
    write_file(path, header_line(1, "deadbeef") + R"({"id":"s1","lang":"en","vector":[1]})" "\n"
                                                  R"({"id":"s1","lang":"de","vector":[2]})" "\n");
    CHECK(code_of([&] { read_embedding_set(path); }) == ErrorCode::hash_mismatch);
  }
  SUBCASE("unknown record field") {
    write_file(path, header_line(1, "x") + R"({"id":"s1","lang":"en","vec":[1]})" "\n");
    CHECK(code_of([&] { read_embedding_set(path); }) == ErrorCode::parse);
  }
  SUBCASE("bad manifest dim") {
    write_file(path, header_line(0, "x"));
    CHECK(code_of([&] { read_embedding_set(path); }) == ErrorCode::parse);
  }
  SUBCASE("malformed language code") {
    write_file(path, header_line(1, "x") + R"({"id":"s1","lang":"EN","vector":[1]})" "\n");
    CHECK(message_of([&] { read_embedding_set(path); }).find("invalid language code") != std::string::npos);
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { read_embedding_set(dir / "nope.jsonl"); }) == ErrorCode::io);
  }
}

TEST_CASE("write_embedding_set canonicalizes, refuses overwrite, and round-trips") {
  TempDir dir;
  auto set = EmbeddingSet::create(manifest(2), {{"b", "en", {1.0, 2.0}},
                                                {"a", "zh", {0.1, 0.2}},
                                                {"a", "en", {-3.5, 1e-300}}});
  auto path = dir / "out.jsonl";
  write_embedding_set(set, path, false);

  auto text = testutil::read_file(path);
  auto first_en_a = text.find(R"("id":"a","lang":"en")");
  auto en_b = text.find(R"("id":"b","lang":"en")");
  auto zh_a = text.find(R"("id":"a","lang":"zh")");
  CHECK(first_en_a < en_b);
  CHECK(en_b < zh_a);
  CHECK(text.starts_with(R"({"manifest":{"model_name":"test-model","pooling":"sentence_tuned","dim":2,)"));

  CHECK(read_embedding_set(path) == set);

  CHECK(message_of([&] { write_embedding_set(set, path, false); }).starts_with("refusing to overwrite"));
  CHECK_NOTHROW(write_embedding_set(set, path, true));
}

TEST_CASE("round-trip and canonical order hold for random sets (property)") {
  TempDir dir;
  oracle::Gaussian g(2024);
  const char* langs[] = {"en", "ar", "cs", "de", "zh"};
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t dim = 1 + g.engine()() % 6;
    std::vector<EmbeddingRecord> recs;
    std::size_t n = g.engine()() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      EmbeddingRecord r{"s" + std::to_string(i), langs[g.engine()() % 5], {}};
      for (std::size_t k = 0; k < dim; ++k) r.vector.push_back(g.normal() * std::pow(10.0, g.uniform(-8, 8)));
      recs.push_back(r);
    }
    auto shuffled = recs;
    std::shuffle(shuffled.begin(), shuffled.end(), g.engine());
    auto a = EmbeddingSet::create(manifest(dim), recs);
    auto b = EmbeddingSet::create(manifest(dim), shuffled);
    REQUIRE(a == b);

    auto path = dir / ("rt" + std::to_string(trial) + ".jsonl");
    write_embedding_set(a, path, true);
    CHECK(read_embedding_set(path) == a);
  }
}

TEST_CASE("EmbeddingSet language helpers") {
  auto set = EmbeddingSet::create(manifest(1), {{"x", "de", {1}}, {"y", "en", {2}}, {"x", "en", {3}}});
  CHECK(set.languages() == std::vector<std::string>{"de", "en"});
  auto en = set.only_language("en");
  CHECK(en.size() == 2);
  CHECK(en.manifest().content_hash != set.manifest().content_hash);
  REQUIRE(set.find("x", "en") != nullptr);
  CHECK(set.find("x", "en")->vector[0] == 3.0);
  CHECK(set.find("z", "en") == nullptr);
}

TEST_CASE("unknown but well-formed language codes warn instead of failing") {
  static std::vector<std::string> seen;
  auto prev = set_warning_handler([](std::string_view m) { seen.emplace_back(m); });
  CHECK_NOTHROW(EmbeddingSet::create(manifest(1), {{"x", "qq", {1}}}));
  set_warning_handler(prev);
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].find("qq") != std::string::npos);
  CHECK(is_known_language("zh"));
  CHECK_FALSE(is_known_language("qq"));
}

TEST_CASE("read_ratings") {
  TempDir dir;
  auto path = dir / "r.csv";
  SUBCASE("minimal input") {
    write_file(path, "id,text,rating\ns1,\"kill people, quickly\",-0.8\ns2,help others,0.9\n");
    auto t = read_ratings(path);
    REQUIRE(t.entries.size() == 2);
    CHECK(t.entries[0].statement_id == "s1");
    CHECK(t.entries[0].rating == -0.8);
    CHECK(t.entries[1].rating == 0.9);
  }
  SUBCASE("rating out of range") {
    write_file(path, "id,text,rating\ns1,x,1.5\n");
    CHECK(message_of([&] { read_ratings(path); }).starts_with("rating out of range"));
  }
  SUBCASE("duplicate id") {
    write_file(path, "id,text,rating\ns1,x,0.1\ns1,y,0.2\n");
    CHECK(message_of([&] { read_ratings(path); }).starts_with("duplicate statement id"));
  }
  SUBCASE("unparseable row") {
    write_file(path, "id,text,rating\ns1,x,abc\n");
    CHECK(message_of([&] { read_ratings(path); }).starts_with("unparseable row at line 2"));
    write_file(path, "id,text,rating\ns1,x\n");
    CHECK(code_of([&] { read_ratings(path); }) == ErrorCode::parse);
  }
  SUBCASE("wrong header") {
    write_file(path, "id,score\ns1,0.1\n");
    CHECK(code_of([&] { read_ratings(path); }) == ErrorCode::parse);
  }
}

TEST_CASE("read_statements marks anchors by polarity") {
  TempDir dir;
  write_file(dir / "s.csv", "id,text,polarity\na1,smile,positive\na2,kill,negative\ns1,eat bread,\n");
  auto st = read_statements(dir / "s.csv", "en");
  REQUIRE(st.size() == 3);
  CHECK(st[0].is_anchor());
  CHECK(*st[1].polarity == Polarity::negative);
  CHECK_FALSE(st[2].is_anchor());
  CHECK(st[2].lang == "en");
  write_file(dir / "bad.csv", "id,text,polarity\na1,x,maybe\n");
  CHECK(code_of([&] { read_statements(dir / "bad.csv", "en"); }) == ErrorCode::parse);
}

TEST_CASE("align_by_id") {
  std::vector<std::string> ab = {"a", "b"}, ba = {"b", "a"}, ac = {"a", "c"};
  SUBCASE("permutation, strict") {
    auto pairs = align_by_id(ab, ba, AlignMode::strict);
    CHECK(pairs == std::vector<IndexPair>{{0, 1}, {1, 0}});
  }
  SUBCASE("unequal sets, strict") {
    CHECK(message_of([&] { align_by_id(ab, ac, AlignMode::strict); }) == "missing: b (right), c (left)");
  }
  SUBCASE("unequal sets, intersect") {
    CHECK(align_by_id(ab, ac, AlignMode::intersect) == std::vector<IndexPair>{{0, 0}});
  }
  SUBCASE("duplicate ids are rejected") {
    std::vector<std::string> aa = {"a", "a"};
    CHECK(code_of([&] { align_by_id(aa, ab, AlignMode::intersect); }) == ErrorCode::duplicate);
  }
}

TEST_CASE("csv reader handles quoting") {
  auto doc = csv::parse("id,text\r\n1,\"a \"\"quoted\"\", text\nwith newline\"\n\n2,plain\n");
  REQUIRE(doc.rows.size() == 2);
  CHECK(doc.rows[0].fields[1] == "a \"quoted\", text\nwith newline");
  CHECK(doc.rows[1].line == 5);
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK(csv::escape("plain") == "plain");
  CHECK_THROWS_AS(csv::parse("a\n\"open"), Error);
}
