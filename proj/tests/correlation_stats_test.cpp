#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "normprobe/correlation_stats.hpp"
#include "normprobe/error.hpp"
#include "support/oracles.hpp"

using namespace normprobe;
using doctest::Approx;
using V = std::vector<double>;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected normprobe::Error");
  return ErrorCode::io;
}

ScoreTable scores_for(const std::vector<std::string>& ids, const V& values, const std::string& lang = "en") {
  ScoreTable t;
  t.model_name = "m";
  for (std::size_t i = 0; i < ids.size(); ++i) t.entries.push_back({ids[i], lang, values[i]});
  return t;
}

RatingTable ratings_for(const std::vector<std::string>& ids, const V& values) {
  RatingTable t;
  for (std::size_t i = 0; i < ids.size(); ++i) t.entries.push_back({ids[i], values[i]});
  return t;
}

// Independent percentile bootstrap: same key derivation and type-7 quantile,
// but straight-line code without threads or the library's helpers.
std::pair<double, double> bootstrap_reference(const V& x, const V& y, std::size_t B, std::uint64_t seed,
                                              double alpha) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  std::vector<double> rs;
  for (std::uint64_t k = 0; k < B; ++k) {
    std::uint64_t state = mix(mix(seed ^ mix(0 + 0x632BE59BD9B4E019ULL)) ^ k);
    auto next = [&] { return mix(state += 0x9E3779B97F4A7C15ULL); };
    V bx, by;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::uint64_t n = x.size();
      // rejection sampling on 128-bit product, same as Lemire
      __extension__ typedef unsigned __int128 u128;
      u128 m = static_cast<u128>(next()) * n;
      auto low = static_cast<std::uint64_t>(m);
      if (low < n) {
        std::uint64_t t = -n % n;
        while (low < t) {
          m = static_cast<u128>(next()) * n;
          low = static_cast<std::uint64_t>(m);
        }
      }
      auto idx = static_cast<std::size_t>(m >> 64);
      bx.push_back(x[idx]);
      by.push_back(y[idx]);
    }
    bool cx = std::all_of(bx.begin(), bx.end(), [&](double v) { return v == bx[0]; });
    bool cy = std::all_of(by.begin(), by.end(), [&](double v) { return v == by[0]; });
    if (cx || cy) continue;
    rs.push_back(oracle::pearson_naive(bx, by));
  }
  std::sort(rs.begin(), rs.end());
  auto q = [&](double p) {
    double h = p * static_cast<double>(rs.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = std::min(lo + 1, rs.size() - 1);
    return rs[lo] + (h - static_cast<double>(lo)) * (rs[hi] - rs[lo]);
  };
  return {q(alpha / 2), q(1 - alpha / 2)};
}

}  // namespace

TEST_CASE("average_ranks examples") {
  CHECK(average_ranks(V{10, 20, 30}) == V{1, 2, 3});
  CHECK(average_ranks(V{5, 5}) == V{1.5, 1.5});
  CHECK(average_ranks(V{3, 1, 3, 2}) == V{3.5, 1, 3.5, 2});
  CHECK(code_of([] { average_ranks(V{1, NAN}); }) == ErrorCode::non_finite);
  CHECK(code_of([] { average_ranks(V{}); }) == ErrorCode::too_few_samples);
}

TEST_CASE("average_ranks agrees with counting ranks (property)") {
  oracle::Gaussian g(5);
  for (int t = 0; t < 300; ++t) {
    V v(1 + g.engine()() % 20);
    for (auto& x : v) x = static_cast<double>(g.engine()() % 7);  // force ties
    CHECK(average_ranks(v) == oracle::ranks_by_counting(v));
  }
}

TEST_CASE("pearson examples") {
  CHECK(pearson(V{1, 2, 3}, V{2, 4, 6}) == Approx(1.0).epsilon(1e-15));
  CHECK(pearson(V{1, 2, 3}, V{6, 4, 2}) == Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(pearson(V{1, 2, 3, 4}, V{1, 3, 2, 4}) - 0.8) <= 1e-12);

  CHECK(code_of([] { pearson(V{1, 2, 3}, V{1, 2}); }) == ErrorCode::length_mismatch);
  CHECK(code_of([] { pearson(V{1, 2}, V{1, 2}); }) == ErrorCode::too_few_samples);
  CHECK(code_of([] { pearson(V{1, 1, 1}, V{1, 2, 3}); }) == ErrorCode::degenerate_input);
  CHECK(code_of([] { pearson(V{0.1, 0.1, 0.1}, V{1, 2, 3}); }) == ErrorCode::degenerate_input);
  CHECK(code_of([] { pearson(V{1, 2, INFINITY}, V{1, 2, 3}); }) == ErrorCode::non_finite);
}

TEST_CASE("spearman examples") {
  CHECK(spearman(V{1, 2, 3}, V{10, 100, 1000}) == 1.0);
  CHECK(std::abs(spearman(V{1, 2, 3, 4}, V{1, 3, 2, 4}) - 0.8) <= 1e-12);
  CHECK(std::abs(spearman(V{1, 2, 3}, V{1, 1, 2}) - 0.8660254037844387) <= 1e-12);
  CHECK(code_of([] { spearman(V{1, 2, 3}, V{4, 4, 4}); }) == ErrorCode::degenerate_input);
}

TEST_CASE("correlation properties (1,000 random cases)") {
  oracle::Gaussian g(11);
  for (int t = 0; t < 1000; ++t) {
    std::size_t n = 3 + g.engine()() % 30;
    V x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = g.normal();
      y[i] = 0.5 * x[i] + g.normal();
    }
    double r = pearson(x, y);
    CHECK(std::abs(r) <= 1.0);
    CHECK(pearson(x, y) == pearson(y, x));
    CHECK(spearman(x, y) == spearman(y, x));
    CHECK(r == Approx(oracle::pearson_naive(x, y)).epsilon(1e-9));

    double a = g.uniform(0.1, 5.0) * (g.uniform() < 0.5 ? -1 : 1);
    double b = g.uniform(-10, 10);
    V ax(n);
    for (std::size_t i = 0; i < n; ++i) ax[i] = a * x[i] + b;
    CHECK(std::abs(pearson(ax, y) - (a > 0 ? r : -r)) <= 1e-12);

    V mx(n);
    for (std::size_t i = 0; i < n; ++i) mx[i] = std::exp(x[i]) + x[i] * x[i] * x[i];  // strictly increasing
    CHECK(spearman(mx, y) == spearman(x, y));

    CHECK(spearman(x, y) == pearson(average_ranks(x), average_ranks(y)));
  }
}

TEST_CASE("bootstrap_ci") {
  BootstrapConfig cfg{1000, 12345, 0.1, 1};

  SUBCASE("perfect correlation gives (1, 1)") {
    V x = {1, 2, 3, 4, 5};
    auto ci = bootstrap_ci(x, x, Method::pearson, cfg);
    CHECK(ci.low == 1.0);
    CHECK(ci.high == 1.0);
    CHECK(ci.skipped > 0);  // resamples of one repeated point are degenerate
  }
  SUBCASE("determinism across runs and thread counts") {
    V x = {1, 2, 3, 4, 5, 6, 7, 8}, y = {2, 1, 4, 3, 6, 5, 8, 9};
    auto a = bootstrap_ci(x, y, Method::spearman, cfg);
    auto b = bootstrap_ci(x, y, Method::spearman, cfg);
    auto c = bootstrap_ci(x, y, Method::spearman, BootstrapConfig{1000, 12345, 0.1, 4});
    CHECK(a == b);
    CHECK(a == c);
    auto d = bootstrap_ci(x, y, Method::spearman, BootstrapConfig{1000, 54321, 0.1, 1});
    CHECK_FALSE(a == d);
  }
  SUBCASE("interval brackets the point estimate and matches a reference resampler") {
    V x = {1, 2, 3, 4}, y = {1, 3, 2, 4};
    auto ci = bootstrap_ci(x, y, Method::pearson, cfg);
    CHECK(ci.low <= 0.8);
    CHECK(0.8 <= ci.high);
    auto [lo, hi] = bootstrap_reference(x, y, 1000, 12345, 0.1);
    CHECK(ci.low == Approx(lo).epsilon(1e-12));
    CHECK(ci.high == Approx(hi).epsilon(1e-12));
  }
  SUBCASE("errors") {
    V x = {1, 2, 3}, y = {1, 2, 4};
    CHECK(code_of([&] { bootstrap_ci(x, y, Method::pearson, BootstrapConfig{99, 1, 0.1, 1}); }) ==
          ErrorCode::invalid_argument);
    CHECK(code_of([&] { bootstrap_ci(x, y, Method::pearson, BootstrapConfig{100, 1, 1.0, 1}); }) ==
          ErrorCode::invalid_argument);
    // 15 of 27 equally likely resamples leave one side constant
    V tx = {0, 0, 1}, ty = {0, 1, 1};
    CHECK(code_of([&] { bootstrap_ci(tx, ty, Method::pearson, cfg); }) == ErrorCode::unstable_bootstrap);
  }
}

TEST_CASE("agreement examples") {
  SUBCASE("identity data") {
    auto r = agreement(scores_for({"a", "b", "c"}, {-0.5, 0.1, 0.7}), ratings_for({"c", "a", "b"}, {0.7, -0.5, 0.1}),
                       Method::pearson);
    CHECK(r.r == Approx(1.0).epsilon(1e-15));
    CHECK(r.n == 3);
    CHECK_FALSE(r.ci.has_value());
  }
  SUBCASE("hand-computed") {
    auto r = agreement(scores_for({"a", "b", "c"}, {-1, 0, 1}), ratings_for({"a", "b", "c"}, {-0.9, 0.1, 0.95}),
                       Method::pearson);
    CHECK(r.r == Approx(0.998906107238672).epsilon(1e-12));
    CHECK(r.r == Approx(0.9989).epsilon(1e-4));
  }
  SUBCASE("too few shared ids") {
    CHECK(code_of([] {
            agreement(scores_for({"a", "b"}, {0, 1}), ratings_for({"a", "b"}, {0, 1}), Method::pearson);
          }) == ErrorCode::too_few_samples);
  }
  SUBCASE("strict alignment failure propagates; intersect recovers") {
    auto s = scores_for({"a", "b", "c", "d"}, {0.1, 0.2, 0.3, 0.4});
    auto t = ratings_for({"a", "b", "c", "e"}, {0.1, 0.3, 0.2, 0.0});
    CHECK(code_of([&] { agreement(s, t, Method::pearson); }) == ErrorCode::alignment);
    auto r = agreement(s, t, Method::spearman, std::nullopt, AlignMode::intersect);
    CHECK(r.n == 3);
    CHECK(r.method == Method::spearman);
  }
  SUBCASE("with bootstrap") {
    auto s = scores_for({"a", "b", "c", "d", "e"}, {0.1, 0.2, 0.3, 0.4, 0.5});
    auto t = ratings_for({"a", "b", "c", "d", "e"}, {0.1, 0.3, 0.2, 0.5, 0.4});
    auto r = agreement(s, t, Method::pearson, BootstrapConfig{200, 3, 0.05, 1});
    REQUIRE(r.ci.has_value());
    CHECK(r.ci->low <= r.r);
    CHECK(r.r <= r.ci->high);
    CHECK(r.ci->n_resamples == 200);
  }
}

TEST_CASE("cross_language_matrix examples") {
  SUBCASE("identical scores") {
    std::vector<LanguageScores> t = {{"en", {"a", "b", "c"}, {1, 2, 3}}, {"de", {"a", "b", "c"}, {1, 2, 3}}};
    auto m = cross_language_matrix(t, Method::pearson);
    CHECK(m.values[0][0] == 1.0);
    CHECK(m.values[0][1] == Approx(1.0).epsilon(1e-15));
    CHECK(m.values[1][0] == m.values[0][1]);
  }
  SUBCASE("reversal") {
    std::vector<LanguageScores> t = {{"en", {"a", "b", "c"}, {1, 2, 3}}, {"zh", {"a", "b", "c"}, {3, 2, 1}}};
    CHECK(cross_language_matrix(t, Method::pearson).values[0][1] == Approx(-1.0).epsilon(1e-15));
  }
  SUBCASE("three languages") {
    std::vector<LanguageScores> t = {{"en", {"a", "b", "c"}, {1, 2, 3}},
                                     {"de", {"a", "b", "c"}, {1, 2, 4}},
                                     {"zh", {"a", "b", "c"}, {2, 1, 3}}};
    auto m = cross_language_matrix(t, Method::pearson);
    CHECK(m.langs == std::vector<std::string>{"en", "de", "zh"});
    CHECK(m.values[0][1] == Approx(0.9819805060619656).epsilon(1e-12));
    CHECK(m.values[0][2] == Approx(0.5).epsilon(1e-12));
    CHECK(m.values[1][2] == Approx(0.6546536707079771).epsilon(1e-12));
    CHECK(m.n_per_pair[1][2] == 3);
  }
  SUBCASE("ids are aligned, not positional") {
    std::vector<LanguageScores> t = {{"en", {"a", "b", "c"}, {1, 2, 3}}, {"de", {"c", "a", "b"}, {3, 1, 2}}};
    CHECK(cross_language_matrix(t, Method::pearson).values[0][1] == Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("errors") {
    std::vector<LanguageScores> mis = {{"en", {"a", "b", "c"}, {1, 2, 3}}, {"de", {"a", "b", "d"}, {1, 2, 3}}};
    CHECK(code_of([&] { cross_language_matrix(mis, Method::pearson); }) == ErrorCode::alignment);
    std::vector<LanguageScores> flat = {{"en", {"a", "b", "c"}, {1, 2, 3}}, {"de", {"a", "b", "c"}, {2, 2, 2}}};
    CHECK(code_of([&] { cross_language_matrix(flat, Method::pearson); }) == ErrorCode::degenerate_input);
    std::vector<LanguageScores> one = {{"en", {"a", "b", "c"}, {1, 2, 3}}};
    CHECK(code_of([&] { cross_language_matrix(one, Method::pearson); }) == ErrorCode::too_few_samples);
  }
  SUBCASE("intersect mode marks the matrix incomplete") {
    std::vector<LanguageScores> t = {{"en", {"a", "b", "c", "d"}, {1, 2, 3, 4}},
                                     {"de", {"a", "b", "c", "e"}, {1, 2, 4, 0}}};
    auto m = cross_language_matrix(t, Method::pearson, AlignMode::intersect);
    CHECK(m.pairwise_incomplete);
    CHECK(m.n_per_pair[0][1] == 3);
    CHECK(m.to_json().find("pairwise-incomplete: PSD not guaranteed") != std::string::npos);
  }
}

TEST_CASE("matrix is symmetric, unit-diagonal and PSD on complete data (property)") {
  oracle::Gaussian g(31);
  const char* langs[] = {"en", "ar", "cs", "de", "zh"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LanguageScores> t;
    V base(50);
    for (auto& b : base) b = g.normal();
    for (const char* l : langs) {
      LanguageScores ls{l, {}, {}};
      for (int i = 0; i < 50; ++i) {
        ls.ids.push_back("s" + std::to_string(i));
        ls.scores.push_back(base[static_cast<std::size_t>(i)] + g.uniform(0.1, 2.0) * g.normal());
      }
      t.push_back(std::move(ls));
    }
    for (auto method : {Method::pearson, Method::spearman}) {
      auto m = cross_language_matrix(t, method);
      Eigen::MatrixXd e(5, 5);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
          e(i, j) = m.values[i][j];
          CHECK(std::abs(m.values[i][j] - m.values[j][i]) <= 1e-12);
          CHECK(std::abs(m.values[i][j]) <= 1.0);
        }
      for (int i = 0; i < 5; ++i) CHECK(m.values[i][i] == 1.0);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e).eigenvalues().minCoeff() >= -1e-8);
    }
  }
}

TEST_CASE("matrix JSON round-trip") {
  std::vector<LanguageScores> t = {{"en", {"a", "b", "c"}, {1, 2, 3}}, {"de", {"a", "b", "c"}, {1, 2, 4}}};
  auto m = cross_language_matrix(t, Method::spearman);
  auto back = CorrelationMatrix::from_json(m.to_json());
  CHECK(back.langs == m.langs);
  CHECK(back.values == m.values);
  CHECK(back.n_per_pair == m.n_per_pair);
  CHECK(back.method == Method::spearman);
  CHECK(m.to_json().starts_with("{\n  \"langs\""));
}
