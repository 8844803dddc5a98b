#include "normprobe/moral_direction.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "normprobe/error.hpp"
#include "normprobe/hashing.hpp"

namespace normprobe {

namespace {

constexpr double kAmbiguityRatio = 1e-12;
constexpr double kUnitNormTolerance = 1e-9;

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::non_finite, std::string("non-finite ") + what);
  }
}

// Type-7 (linear interpolation) percentile of a sorted sample.
double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.size() == 1) return sorted.front();
  double h = (p / 100.0) * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

PrincipalComponent top_component(std::span<const std::vector<double>> rows) {
  if (rows.size() < 2) throw Error(ErrorCode::too_few_samples, "top_component needs at least 2 rows");
  const std::size_t d = rows.front().size();
  if (d == 0) throw Error(ErrorCode::dimension_mismatch, "top_component needs d >= 1");
  for (const auto& r : rows) {
    if (r.size() != d) throw Error(ErrorCode::dimension_mismatch, "rows differ in dimension");
    require_finite(r, "input");
  }
  if (std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return r == rows.front(); })) {
    throw Error(ErrorCode::zero_variance, "zero variance: all rows are identical");
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd centered(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    centered.row(i) = Eigen::Map<const Eigen::RowVectorXd>(rows[static_cast<std::size_t>(i)].data(),
                                                           static_cast<Eigen::Index>(d));
  }
  Eigen::RowVectorXd mean = centered.colwise().mean();
  centered.rowwise() -= mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double total = sv.squaredNorm();
  if (!(total > 0.0)) throw Error(ErrorCode::zero_variance, "zero variance after centering");
  const double lambda1 = sv(0) * sv(0);
  const double lambda2 = sv.size() > 1 ? sv(1) * sv(1) : 0.0;
  if (lambda1 - lambda2 < kAmbiguityRatio * lambda1) {
    throw Error(ErrorCode::ambiguous_direction,
                "ambiguous principal direction: top two eigenvalues coincide");
  }

  PrincipalComponent pc;
  Eigen::VectorXd v = svd.matrixV().col(0);
  v.normalize();
  pc.direction.assign(v.data(), v.data() + v.size());
  pc.explained_variance_ratio = std::min(1.0, lambda1 / total);
  return pc;
}

std::string anchor_hash(std::span<const Anchor> anchors) {
  std::vector<std::string> encoded;
  encoded.reserve(anchors.size());
  for (const auto& a : anchors) {
    std::string bytes;
    bytes.push_back(a.polarity == Polarity::positive ? '+' : '-');
    auto put_u64 = [&](std::uint64_t x) {
      for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>(x >> (8 * i)));
    };
    put_u64(a.vector.size());
    for (double x : a.vector) put_u64(std::bit_cast<std::uint64_t>(x));
    encoded.push_back(std::move(bytes));
  }
  std::sort(encoded.begin(), encoded.end());
  Sha256 h;
  for (const auto& e : encoded) h.update(e);
  return h.hex_digest();
}

MoralDirection fit_direction(std::span<const Anchor> anchors, const FitOptions& options) {
  if (anchors.size() < 2) throw Error(ErrorCode::too_few_samples, "need at least 2 anchors");
  if (!(options.scale_percentile > 0.0 && options.scale_percentile <= 100.0)) {
    throw Error(ErrorCode::invalid_argument, "scale percentile must lie in (0, 100]");
  }
  const std::size_t d = anchors.front().vector.size();
  bool has_pos = false;
  bool has_neg = false;
  for (const auto& a : anchors) {
    if (a.vector.size() != d) throw Error(ErrorCode::dimension_mismatch, "anchor dimension mismatch");
    require_finite(a.vector, "anchor component");
    (a.polarity == Polarity::positive ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw Error(ErrorCode::missing_polarity, std::string("anchors lack any ") +
                                                 (has_pos ? "negative" : "positive") + " example");
  }

  // Canonical order makes the fit bit-identical under permutation.
  std::vector<const Anchor*> order;
  for (const auto& a : anchors) order.push_back(&a);
  std::sort(order.begin(), order.end(), [](const Anchor* a, const Anchor* b) {
    if (a->vector != b->vector) return a->vector < b->vector;
    return a->polarity < b->polarity;
  });
  std::vector<std::vector<double>> rows;
  rows.reserve(order.size());
  for (const auto* a : order) rows.push_back(a->vector);

  auto pc = top_component(rows);

  MoralDirection md;
  md.mean.assign(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) md.mean[k] += r[k];
  }
  for (auto& m : md.mean) m /= static_cast<double>(rows.size());
  md.direction = std::move(pc.direction);
  md.explained_variance_ratio = pc.explained_variance_ratio;
  md.scale = 1.0;

  double pos_sum = 0.0;
  std::size_t pos_n = 0;
  std::vector<double> projections;
  projections.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double p = raw_score(md, rows[i]);
    projections.push_back(p);
    if (order[i]->polarity == Polarity::positive) {
      pos_sum += p;
      ++pos_n;
    }
  }
  double pos_mean = pos_sum / static_cast<double>(pos_n);
  if (pos_mean == 0.0) {
    throw Error(ErrorCode::degenerate_input,
                "principal direction does not separate positive from negative anchors");
  }
  if (pos_mean < 0.0) {
    for (auto& x : md.direction) x = -x;
    for (auto& p : projections) p = -p;
  }

  for (auto& p : projections) p = std::abs(p);
  std::sort(projections.begin(), projections.end());
  md.scale = percentile_sorted(projections, options.scale_percentile);
  if (!(md.scale > 0.0)) throw Error(ErrorCode::degenerate_input, "normalization scale is zero");
  md.anchor_hash = anchor_hash(anchors);
  return md;
}

double raw_score(const MoralDirection& md, std::span<const double> embedding) {
  if (embedding.size() != md.direction.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "dimension mismatch: direction has " + std::to_string(md.direction.size()) +
                    ", embedding has " + std::to_string(embedding.size()));
  }
  require_finite(embedding, "embedding component");
  double acc = 0.0;
  for (std::size_t k = 0; k < embedding.size(); ++k) {
    acc += (embedding[k] - md.mean[k]) * md.direction[k];
  }
  return acc;
}

double moral_score(const MoralDirection& md, std::span<const double> embedding) {
  return std::clamp(raw_score(md, embedding) / md.scale, -1.0, 1.0);
}

std::string MoralDirection::to_json() const {
  nlohmann::ordered_json j;
  j["direction"] = direction;
  j["mean"] = mean;
  j["scale"] = scale;
  j["evr"] = explained_variance_ratio;
  j["anchor_hash"] = anchor_hash;
  return j.dump();
}

MoralDirection MoralDirection::from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::parse, "malformed direction JSON");
  MoralDirection md;
  try {
    md.direction = j.at("direction").get<std::vector<double>>();
    md.mean = j.at("mean").get<std::vector<double>>();
    md.scale = j.at("scale").get<double>();
    md.explained_variance_ratio = j.at("evr").get<double>();
    md.anchor_hash = j.at("anchor_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("direction JSON: ") + e.what());
  }
  if (md.direction.empty() || md.direction.size() != md.mean.size()) {
    throw Error(ErrorCode::dimension_mismatch, "direction JSON: direction and mean differ in length");
  }
  require_finite(md.direction, "direction component");
  require_finite(md.mean, "mean component");
  double norm = std::sqrt(std::inner_product(md.direction.begin(), md.direction.end(),
                                             md.direction.begin(), 0.0));
  if (std::abs(norm - 1.0) > kUnitNormTolerance) {
    throw Error(ErrorCode::parse, "direction JSON: direction is not unit length");
  }
  if (!(md.scale > 0.0) || !std::isfinite(md.scale)) {
    throw Error(ErrorCode::parse, "direction JSON: scale must be positive");
  }
  if (!(md.explained_variance_ratio > 0.0 && md.explained_variance_ratio <= 1.0)) {
    throw Error(ErrorCode::parse, "direction JSON: evr must lie in (0, 1]");
  }
  return md;
}

ScoreTable ScoreTable::only_language(std::string_view lang) const {
  ScoreTable out;
  out.model_name = model_name;
  for (const auto& e : entries) {
    if (e.lang == lang) out.entries.push_back(e);
  }
  return out;
}

std::vector<std::string> ScoreTable::languages() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (std::find(out.begin(), out.end(), e.lang) == out.end()) out.push_back(e.lang);
  }
  return out;
}

ScoreTable score_set(const MoralDirection& md, const EmbeddingSet& set) {
  if (!set.empty() && set.manifest().dim != md.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "dimension mismatch: direction has " + std::to_string(md.dim()) + ", set has " +
                    std::to_string(set.manifest().dim));
  }
  ScoreTable table;
  table.model_name = set.manifest().model_name;
  table.entries.reserve(set.size());
  for (const auto& r : set.records()) {
    table.entries.push_back({r.statement_id, r.lang, moral_score(md, r.vector)});
  }
  return table;
}

}  // namespace normprobe
