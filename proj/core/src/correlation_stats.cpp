#include "normprobe/correlation_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "normprobe/error.hpp"

namespace normprobe {

std::string_view to_string(Method method) noexcept {
  return method == Method::pearson ? "pearson" : "spearman";
}

Method parse_method(std::string_view text) {
  if (text == "pearson") return Method::pearson;
  if (text == "spearman") return Method::spearman;
  throw Error(ErrorCode::invalid_argument,
              "unknown method \"" + std::string(text) + "\" (expected pearson or spearman)");
}

namespace {

void validate_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::length_mismatch, "length mismatch: " + std::to_string(x.size()) + " vs " +
                                                std::to_string(y.size()));
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::too_few_samples, "n < 3 (n = " + std::to_string(x.size()) + ")");
  }
  for (auto s : {x, y}) {
    for (double v : s) {
      if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "non-finite input");
    }
  }
}

bool is_constant(std::span<const double> v) {
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi;
}

// Pearson on validated input; nullopt when either side is constant.
std::optional<double> pearson_unchecked(std::span<const double> x, std::span<const double> y) {
  if (is_constant(x) || is_constant(y)) return std::nullopt;
  const auto n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx;
    double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> ranks_unchecked(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share rank mean((i+1)..(j+1))
    double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> correlate_unchecked(Method method, std::span<const double> x,
                                          std::span<const double> y) {
  if (method == Method::pearson) return pearson_unchecked(x, y);
  auto rx = ranks_unchecked(x);
  auto ry = ranks_unchecked(y);
  return pearson_unchecked(rx, ry);
}

double require_nondegenerate(std::optional<double> r) {
  if (!r) throw Error(ErrorCode::degenerate_input, "degenerate input: zero variance");
  return *r;
}

constexpr std::uint64_t splitmix_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

__extension__ typedef unsigned __int128 u128;

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  std::uint64_t next() { return splitmix_mix(state_ += 0x9E3779B97F4A7C15ULL); }

  // Unbiased draw in [0, n) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) {
    u128 m = static_cast<u128>(next()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      std::uint64_t threshold = -n % n;
      while (low < threshold) {
        m = static_cast<u128>(next()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::uint64_t state_;
};

std::uint64_t resample_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t k) {
  return splitmix_mix(splitmix_mix(seed ^ splitmix_mix(stream + 0x632BE59BD9B4E019ULL)) ^ k);
}

double quantile_sorted(std::span<const double> sorted, double q) {
  double h = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::too_few_samples, "average_ranks needs at least one value");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "non-finite input");
  }
  return ranks_unchecked(values);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  validate_pair(x, y);
  return require_nondegenerate(pearson_unchecked(x, y));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  validate_pair(x, y);
  return require_nondegenerate(correlate_unchecked(Method::spearman, x, y));
}

double correlate(Method method, std::span<const double> x, std::span<const double> y) {
  return method == Method::pearson ? pearson(x, y) : spearman(x, y);
}

ConfidenceInterval bootstrap_ci(std::span<const double> x, std::span<const double> y, Method method,
                                const BootstrapConfig& config, std::uint64_t stream) {
  if (config.n_resamples < 100) {
    throw Error(ErrorCode::invalid_argument, "bootstrap needs at least 100 resamples");
  }
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  }
  correlate(method, x, y);  // validates the full sample

  const std::size_t n = x.size();
  std::vector<std::optional<double>> stats(config.n_resamples);
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> bx(n);
    std::vector<double> by(n);
    for (std::size_t k = begin; k < end; ++k) {
      SplitMix64 rng(resample_key(config.seed, stream, k));
      for (std::size_t i = 0; i < n; ++i) {
        auto idx = rng.below(n);
        bx[i] = x[idx];
        by[i] = y[idx];
      }
      stats[k] = correlate_unchecked(method, bx, by);
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(config.threads, 1, config.n_resamples);
  if (threads == 1) {
    work(0, config.n_resamples);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (config.n_resamples + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      auto begin = t * chunk;
      auto end = std::min(config.n_resamples, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }

  std::vector<double> valid;
  valid.reserve(stats.size());
  for (const auto& s : stats) {
    if (s) valid.push_back(*s);
  }
  const std::size_t skipped = stats.size() - valid.size();
  if (2 * skipped > stats.size()) {
    throw Error(ErrorCode::unstable_bootstrap,
                "unstable bootstrap: " + std::to_string(skipped) + " of " +
                    std::to_string(stats.size()) + " resamples were degenerate");
  }
  std::sort(valid.begin(), valid.end());

  ConfidenceInterval ci;
  ci.low = std::clamp(quantile_sorted(valid, config.alpha / 2.0), -1.0, 1.0);
  ci.high = std::clamp(quantile_sorted(valid, 1.0 - config.alpha / 2.0), -1.0, 1.0);
  ci.alpha = config.alpha;
  ci.n_resamples = config.n_resamples;
  ci.seed = config.seed;
  ci.skipped = skipped;
  return ci;
}

CorrelationResult agreement(const ScoreTable& scores, const RatingTable& ratings, Method method,
                            const std::optional<BootstrapConfig>& bootstrap, AlignMode mode,
                            std::uint64_t stream) {
  if (scores.languages().size() > 1) {
    throw Error(ErrorCode::invalid_argument, "agreement expects scores for a single language");
  }
  std::vector<std::string> score_ids;
  score_ids.reserve(scores.entries.size());
  for (const auto& e : scores.entries) score_ids.push_back(e.statement_id);
  auto rating_ids = ratings.ids();
  auto pairs = align_by_id(score_ids, rating_ids, mode);
  if (pairs.size() < 3) {
    throw Error(ErrorCode::too_few_samples, "n < 3 after alignment (n = " + std::to_string(pairs.size()) + ")");
  }
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(pairs.size());
  y.reserve(pairs.size());
  for (const auto& p : pairs) {
    x.push_back(scores.entries[p.left].score);
    y.push_back(ratings.entries[p.right].rating);
  }
  CorrelationResult result;
  result.r = correlate(method, x, y);
  result.n = pairs.size();
  result.method = method;
  if (bootstrap) result.ci = bootstrap_ci(x, y, method, *bootstrap, stream);
  return result;
}

CorrelationMatrix cross_language_matrix(std::span<const LanguageScores> tables, Method method,
                                        AlignMode mode) {
  if (tables.size() < 2) throw Error(ErrorCode::too_few_samples, "need at least 2 languages");
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (tables[i].ids.size() != tables[i].scores.size()) {
      throw Error(ErrorCode::length_mismatch, "language " + tables[i].lang + ": ids and scores differ in length");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (tables[i].lang == tables[j].lang) {
        throw Error(ErrorCode::duplicate, "duplicate language " + tables[i].lang);
      }
    }
  }
  for (const auto& t : tables) {
    if (t.scores.size() < 3) {
      throw Error(ErrorCode::too_few_samples, "language " + t.lang + ": n < 3");
    }
    if (is_constant(t.scores)) {
      throw Error(ErrorCode::degenerate_input, "degenerate language " + t.lang + ": zero-variance scores");
    }
  }

  const std::size_t L = tables.size();
  CorrelationMatrix m;
  m.method = method;
  m.values.assign(L, std::vector<double>(L, 0.0));
  m.n_per_pair.assign(L, std::vector<std::size_t>(L, 0));
  for (const auto& t : tables) m.langs.push_back(t.lang);

  if (mode == AlignMode::strict) {
    for (std::size_t i = 1; i < L; ++i) {
      try {
        align_by_id(tables[0].ids, tables[i].ids, AlignMode::strict);
      } catch (const Error& e) {
        throw Error(ErrorCode::alignment,
                    "id misalignment between " + tables[0].lang + " and " + tables[i].lang + ": " + e.what());
      }
    }
  }

  for (std::size_t i = 0; i < L; ++i) {
    m.values[i][i] = 1.0;
    m.n_per_pair[i][i] = tables[i].scores.size();
    for (std::size_t j = 0; j < i; ++j) {
      auto pairs = align_by_id(tables[i].ids, tables[j].ids, AlignMode::intersect);
      std::vector<double> xi;
      std::vector<double> xj;
      for (const auto& p : pairs) {
        xi.push_back(tables[i].scores[p.left]);
        xj.push_back(tables[j].scores[p.right]);
      }
      double r = 0.0;
      try {
        // Keep the argument order fixed (earlier language first) for symmetry.
        r = correlate(method, xj, xi);
      } catch (const Error& e) {
        throw Error(e.code(), "languages " + tables[j].lang + "/" + tables[i].lang + ": " + e.what());
      }
      m.values[i][j] = m.values[j][i] = r;
      m.n_per_pair[i][j] = m.n_per_pair[j][i] = pairs.size();
      if (pairs.size() != tables[i].scores.size() || pairs.size() != tables[j].scores.size()) {
        m.pairwise_incomplete = true;
      }
    }
  }
  return m;
}

std::string CorrelationMatrix::to_json() const {
  nlohmann::ordered_json j;
  j["langs"] = langs;
  j["method"] = to_string(method);
  j["values"] = values;
  j["n_per_pair"] = n_per_pair;
  if (pairwise_incomplete) {
    j["pairwise_incomplete"] = true;
    j["note"] = "pairwise-incomplete: PSD not guaranteed";
  }
  return j.dump(2);
}

CorrelationMatrix CorrelationMatrix::from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::parse, "malformed matrix JSON");
  CorrelationMatrix m;
  try {
    m.langs = j.at("langs").get<std::vector<std::string>>();
    m.method = parse_method(j.at("method").get<std::string>());
    m.values = j.at("values").get<std::vector<std::vector<double>>>();
    m.n_per_pair = j.at("n_per_pair").get<std::vector<std::vector<std::size_t>>>();
    m.pairwise_incomplete = j.value("pairwise_incomplete", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("matrix JSON: ") + e.what());
  }
  const auto L = m.langs.size();
  bool square = m.values.size() == L && m.n_per_pair.size() == L;
  for (std::size_t i = 0; square && i < L; ++i) {
    square = m.values[i].size() == L && m.n_per_pair[i].size() == L;
  }
  if (!square) throw Error(ErrorCode::parse, "matrix JSON: values must be square over langs");
  return m;
}

}  // namespace normprobe
