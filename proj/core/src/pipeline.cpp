#include "normprobe/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>

#include <json.hpp>

#include "normprobe/csv.hpp"
#include "normprobe/remote.hpp"
#include "normprobe/report.hpp"
#include "normprobe/scores_io.hpp"

namespace normprobe {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

#ifndef NORMPROBE_VERSION
#define NORMPROBE_VERSION "0.0.0"
#endif

std::string_view toolkit_version() noexcept { return NORMPROBE_VERSION; }

bool RunReport::all_succeeded() const noexcept {
  bool cells_ok = std::all_of(cells.begin(), cells.end(), [](const auto& c) { return c.result.has_value(); });
  bool matrices_ok = std::all_of(models.begin(), models.end(),
                                 [](const auto& m) { return !m.matrix_failure.has_value(); });
  return cells_ok && matrices_ok;
}

int RunReport::exit_code() const noexcept { return all_succeeded() ? 0 : 2; }

std::string model_slug(std::string_view name) {
  std::string out;
  for (char c : name) {
    bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                c == '-' || c == '_';
    out += keep ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "model";
  return out;
}

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CellFailure failure_from(const Error& e, std::string stage) {
  return CellFailure{e.code(), std::move(stage), e.what()};
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

EmbeddingSet fetch_set(const ModelConfig& model, const std::vector<Statement>& statements,
                       const std::string& lang, std::string template_set_id) {
  std::vector<std::string> texts;
  texts.reserve(statements.size());
  for (const auto& s : statements) texts.push_back(s.text);
  auto vectors = fetch_remote_embeddings(*model.endpoint, texts, lang, model.fetch);
  std::vector<EmbeddingRecord> records;
  records.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    records.push_back({statements[i].id, lang, std::move(vectors[i])});
  }
  Manifest manifest;
  manifest.model_name = model.name;
  manifest.pooling = model.pooling;
  manifest.dim = records.empty() ? 1 : records.front().vector.size();
  manifest.template_set_id = std::move(template_set_id);
  return EmbeddingSet::create(std::move(manifest), std::move(records));
}

std::vector<Anchor> collect_anchors(const EmbeddingSet& set, const std::map<std::string, Polarity>& labels,
                                    const std::optional<std::string>& lang) {
  std::vector<Anchor> anchors;
  for (const auto& r : set.records()) {
    if (lang && r.lang != *lang) continue;
    auto it = labels.find(r.statement_id);
    if (it != labels.end()) anchors.push_back({r.vector, it->second});
  }
  return anchors;
}

struct ModelWork {
  ModelOutcome outcome;
  std::vector<CellOutcome> cells;
  std::map<std::string, MoralDirection> directions;  // "" = shared
  std::optional<ScoreTable> scores;
};

ModelWork run_model(const RunConfig& config, const ModelConfig& model, const RatingTable& ratings,
                    const std::vector<Statement>& anchor_statements, std::uint64_t& stream) {
  ModelWork work;
  work.outcome.name = model.name;
  work.outcome.langs = model.langs;

  std::map<std::string, CellFailure> failed;
  std::map<std::string, EmbeddingSet> sets;

  for (const auto& lang : model.langs) {
    try {
      if (model.endpoint) {
        auto statements = read_statements(config.statements.at(lang), lang);
        sets[lang] = fetch_set(model, statements, lang, "remote");
      } else {
        auto set = read_embedding_set(model.embeddings.at(lang)).only_language(lang);
        if (set.empty()) throw Error(ErrorCode::parse, "no records for language " + lang);
        sets[lang] = std::move(set);
      }
    } catch (const Error& e) {
      failed[lang] = failure_from(e, "parse");
    }
  }

  std::map<std::string, Polarity> labels;
  for (const auto& s : anchor_statements) {
    if (s.polarity) labels[s.id] = *s.polarity;
  }

  // Fit: one shared direction, or one per language.
  std::optional<EmbeddingSet> anchor_set;
  std::optional<CellFailure> anchor_failure;
  try {
    if (model.anchors) {
      anchor_set = read_embedding_set(*model.anchors);
    } else {
      std::vector<Statement> only_anchors;
      for (const auto& s : anchor_statements) {
        if (s.polarity) only_anchors.push_back(s);
      }
      auto lang = config.anchors.lang.value_or(model.langs.front());
      for (auto& s : only_anchors) s.lang = lang;
      anchor_set = fetch_set(model, only_anchors, lang, "remote-anchors");
    }
  } catch (const Error& e) {
    anchor_failure = failure_from(e, "fit");
  }

  FitOptions fit_options{config.anchors.scale_percentile};
  auto fit = [&](const std::string& key, const std::optional<std::string>& lang) -> std::optional<CellFailure> {
    if (anchor_failure) return anchor_failure;
    try {
      auto anchors = collect_anchors(*anchor_set, labels, lang);
      auto md = fit_direction(anchors, fit_options);
      work.outcome.directions.push_back(
          {key, md.explained_variance_ratio, md.scale, md.anchor_hash, anchors.size()});
      work.directions.emplace(key, std::move(md));
      return std::nullopt;
    } catch (const Error& e) {
      return failure_from(e, "fit");
    }
  };

  if (config.per_lang_direction) {
    for (const auto& lang : model.langs) {
      if (failed.contains(lang)) continue;
      if (auto f = fit(lang, lang)) failed[lang] = *f;
    }
  } else if (auto f = fit("", config.anchors.lang)) {
    for (const auto& lang : model.langs) {
      if (!failed.contains(lang)) failed[lang] = *f;
    }
  }

  // Score.
  ScoreTable all;
  all.model_name = model.name;
  std::map<std::string, ScoreTable> per_lang;
  for (const auto& lang : model.langs) {
    if (failed.contains(lang)) continue;
    const auto& md = work.directions.at(config.per_lang_direction ? lang : "");
    try {
      auto table = score_set(md, sets.at(lang));
      table.model_name = model.name;
      all.entries.insert(all.entries.end(), table.entries.begin(), table.entries.end());
      per_lang.emplace(lang, std::move(table));
    } catch (const Error& e) {
      failed[lang] = failure_from(e, "score");
    }
  }
  std::sort(all.entries.begin(), all.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.lang, a.statement_id) < std::tie(b.lang, b.statement_id);
  });
  if (!per_lang.empty()) work.scores = std::move(all);

  // Agreement per language; streams follow config order regardless of failures.
  const auto mode = config.strict_alignment ? AlignMode::strict : AlignMode::intersect;
  for (const auto& lang : model.langs) {
    CellOutcome cell{model.name, lang, std::nullopt, std::nullopt};
    const auto cell_stream = stream++;
    if (auto it = failed.find(lang); it != failed.end()) {
      cell.failure = it->second;
    } else {
      try {
        cell.result = agreement(per_lang.at(lang), ratings, config.method, config.bootstrap, mode, cell_stream);
      } catch (const Error& e) {
        cell.failure = failure_from(e, "agreement");
      }
    }
    work.cells.push_back(std::move(cell));
  }

  // Cross-language matrix over the languages that scored.
  if (model.langs.size() >= 2) {
    std::vector<LanguageScores> tables;
    for (const auto& lang : model.langs) {
      auto it = per_lang.find(lang);
      if (it == per_lang.end()) continue;
      LanguageScores ls{lang, {}, {}};
      for (const auto& e : it->second.entries) {
        ls.ids.push_back(e.statement_id);
        ls.scores.push_back(e.score);
      }
      tables.push_back(std::move(ls));
    }
    if (tables.size() < 2) {
      work.outcome.matrix_failure =
          CellFailure{ErrorCode::too_few_samples, "matrix", "fewer than 2 languages scored"};
    } else {
      try {
        work.outcome.matrix = cross_language_matrix(tables, config.method, mode);
      } catch (const Error& e) {
        work.outcome.matrix_failure = failure_from(e, "matrix");
      }
    }
  }
  return work;
}

ordered_json failure_json(const CellFailure& f) {
  return {{"stage", f.stage}, {"code", to_string(f.code)}, {"message", f.message}};
}

ErrorCode parse_error_code(std::string_view name) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::nothing_to_report); ++c) {
    if (to_string(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  }
  return ErrorCode::io;
}

CellFailure failure_from_json(const nlohmann::json& j) {
  return CellFailure{parse_error_code(j.at("code").get<std::string>()), j.at("stage").get<std::string>(),
                     j.at("message").get<std::string>()};
}

std::string four_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s(buf);
  return s == "-0.0000" ? "0.0000" : s;
}

}  // namespace

RunReport run(const RunConfig& config) {
  RunReport report;
  report.started_at = utc_now();
  report.langs = config.langs;
  report.method = config.method;
  report.bootstrap = config.bootstrap;
  report.config_hash = config.config_hash;
  report.version = std::string(toolkit_version());

  auto ratings = read_ratings(config.ratings_path);
  auto anchor_statements = read_statements(config.anchors.statements, config.anchors.lang.value_or("en"));

  std::vector<ModelWork> works;
  std::set<std::string> slugs;
  std::uint64_t stream = 0;
  for (const auto& model : config.models) {
    auto work = run_model(config, model, ratings, anchor_statements, stream);
    auto slug = model_slug(model.name);
    for (int k = 2; !slugs.insert(slug).second; ++k) slug = model_slug(model.name) + "-" + std::to_string(k);
    work.outcome.slug = slug;
    works.push_back(std::move(work));
  }

  for (auto& w : works) {
    report.cells.insert(report.cells.end(), w.cells.begin(), w.cells.end());
    report.models.push_back(w.outcome);
  }
  if (std::none_of(report.cells.begin(), report.cells.end(), [](const auto& c) { return c.result.has_value(); })) {
    std::string detail;
    for (const auto& c : report.cells) {
      if (c.failure) detail += "\n  " + c.model + "/" + c.lang + ": " + c.failure->message;
    }
    throw Error(ErrorCode::nothing_to_report, "nothing to report: every cell failed" + detail);
  }

  fs::create_directories(config.output_dir);
  for (const auto& w : works) {
    auto dir = config.output_dir / w.outcome.slug;
    fs::create_directories(dir);
    for (const auto& [key, md] : w.directions) {
      write_text(dir / (key.empty() ? "direction.json" : "direction." + key + ".json"), md.to_json() + "\n");
    }
    if (w.scores) write_text(dir / "scores.csv", scores_to_csv(*w.scores));
    if (w.outcome.matrix) write_text(dir / "matrix.json", w.outcome.matrix->to_json() + "\n");
  }
  write_text(config.output_dir / "results.json", results_to_json(report));
  write_text(config.output_dir / "report.md", render_report(report));

  report.finished_at = utc_now();
  ordered_json provenance;
  provenance["config_hash"] = report.config_hash;
  provenance["version"] = report.version;
  provenance["started_at"] = report.started_at;
  provenance["finished_at"] = report.finished_at;
  write_text(config.output_dir / "provenance.json", provenance.dump(2) + "\n");
  return report;
}

std::string render_report(const RunReport& report) {
  std::string out = "# normprobe report\n\n";
  out += "- toolkit version: " + report.version + "\n";
  out += "- config sha256: " + report.config_hash + "\n";
  out += "- method: " + std::string(to_string(report.method)) + "\n";
  if (report.bootstrap) {
    const auto& b = *report.bootstrap;
    char alpha[32];
    std::snprintf(alpha, sizeof alpha, "%g", b.alpha);
    out += "- bootstrap: percentile, " + std::to_string(b.n_resamples) + " resamples, seed " +
           std::to_string(b.seed) + ", alpha " + alpha + ", generator " + std::string(kBootstrapGenerator) + "\n";
  } else {
    out += "- bootstrap: none\n";
  }

  std::map<AgreementKey, CorrelationResult> results;
  for (const auto& c : report.cells) {
    if (c.result) results.emplace(AgreementKey{c.model, c.lang}, *c.result);
  }
  std::vector<std::string> model_names;
  for (const auto& m : report.models) model_names.push_back(m.name);

  out += "\n## Agreement with human ratings\n\n";
  out += results.empty() ? std::string("(no results)\n")
                         : render_agreement_table(results, model_names, report.langs);

  for (const auto& m : report.models) {
    if (m.langs.size() < 2) continue;
    out += "\n## Cross-language correlation: " + m.name + "\n\n";
    if (m.matrix) {
      out += "```text\n" + render_matrix(*m.matrix) + "```\n";
      if (m.matrix->pairwise_incomplete) {
        out += "\npairwise-incomplete: PSD not guaranteed\n";
      } else {
        out += "\nn = " + std::to_string(m.matrix->n_per_pair[0][0]) + " statements per language\n";
      }
    } else if (m.matrix_failure) {
      out += "failed: " + m.matrix_failure->stage + ": " + m.matrix_failure->message + "\n";
    }
  }

  out += "\n## Agreement details\n\n| Model | Lang | Method | n | r | CI |\n|---|---|---|---|---|---|\n";
  for (const auto& c : report.cells) {
    out += "| " + c.model + " | " + c.lang + " | ";
    if (c.result) {
      const auto& r = *c.result;
      out += std::string(to_string(r.method)) + " | " + std::to_string(r.n) + " | " + four_decimals(r.r) + " | ";
      if (r.ci) {
        out += "[" + four_decimals(r.ci->low) + ", " + four_decimals(r.ci->high) + "]";
        if (r.ci->skipped > 0) out += " (" + std::to_string(r.ci->skipped) + " degenerate resamples skipped)";
      } else {
        out += "---";
      }
      out += " |\n";
    } else {
      out += "--- | --- | failed | --- |\n";
    }
  }

  out += "\n## Directions\n\n| Model | Scope | EVR | Scale | Anchors | Anchor hash |\n|---|---|---|---|---|---|\n";
  for (const auto& m : report.models) {
    for (const auto& d : m.directions) {
      out += "| " + m.name + " | " + (d.lang.empty() ? std::string("shared") : d.lang) + " | " +
             four_decimals(d.explained_variance_ratio) + " | " + four_decimals(d.scale) + " | " +
             std::to_string(d.n_anchors) + " | " + d.anchor_hash.substr(0, 16) + " |\n";
    }
  }

  out += "\n## Failures\n\n";
  bool any = false;
  for (const auto& c : report.cells) {
    if (!c.failure) continue;
    any = true;
    out += "- " + c.model + " / " + c.lang + ": failed: " + c.failure->stage + " error (" +
           std::string(to_string(c.failure->code)) + "): " + c.failure->message + "\n";
  }
  for (const auto& m : report.models) {
    if (!m.matrix_failure) continue;
    any = true;
    out += "- " + m.name + " / matrix: failed: " + m.matrix_failure->message + "\n";
  }
  if (!any) out += "none\n";
  return out;
}

std::string results_to_json(const RunReport& report) {
  ordered_json j;
  j["version"] = report.version;
  j["config_hash"] = report.config_hash;
  j["method"] = to_string(report.method);
  j["langs"] = report.langs;
  if (report.bootstrap) {
    j["bootstrap"] = {{"n_resamples", report.bootstrap->n_resamples},
                      {"seed", report.bootstrap->seed},
                      {"alpha", report.bootstrap->alpha},
                      {"generator", kBootstrapGenerator}};
  } else {
    j["bootstrap"] = nullptr;
  }
  j["models"] = ordered_json::array();
  for (const auto& m : report.models) {
    ordered_json mj;
    mj["name"] = m.name;
    mj["slug"] = m.slug;
    mj["langs"] = m.langs;
    mj["directions"] = ordered_json::array();
    for (const auto& d : m.directions) {
      mj["directions"].push_back({{"lang", d.lang},
                                  {"evr", d.explained_variance_ratio},
                                  {"scale", d.scale},
                                  {"anchor_hash", d.anchor_hash},
                                  {"n_anchors", d.n_anchors}});
    }
    mj["matrix"] = m.matrix ? ordered_json::parse(m.matrix->to_json()) : ordered_json(nullptr);
    mj["matrix_failure"] = m.matrix_failure ? failure_json(*m.matrix_failure) : ordered_json(nullptr);
    j["models"].push_back(std::move(mj));
  }
  j["cells"] = ordered_json::array();
  for (const auto& c : report.cells) {
    ordered_json cj;
    cj["model"] = c.model;
    cj["lang"] = c.lang;
    if (c.result) {
      cj["status"] = "ok";
      cj["method"] = to_string(c.result->method);
      cj["n"] = c.result->n;
      cj["r"] = c.result->r;
      if (c.result->ci) {
        const auto& ci = *c.result->ci;
        cj["ci"] = {{"low", ci.low},   {"high", ci.high}, {"alpha", ci.alpha},
                    {"n_resamples", ci.n_resamples}, {"seed", ci.seed}, {"skipped", ci.skipped}};
      } else {
        cj["ci"] = nullptr;
      }
    } else {
      cj["status"] = "failed";
      cj["failure"] = failure_json(*c.failure);
    }
    j["cells"].push_back(std::move(cj));
  }
  return j.dump(2) + "\n";
}

RunReport results_from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::parse, "malformed results JSON");
  RunReport report;
  try {
    report.version = j.at("version").get<std::string>();
    report.config_hash = j.at("config_hash").get<std::string>();
    report.method = parse_method(j.at("method").get<std::string>());
    report.langs = j.at("langs").get<std::vector<std::string>>();
    if (!j.at("bootstrap").is_null()) {
      const auto& b = j["bootstrap"];
      report.bootstrap = BootstrapConfig{b.at("n_resamples").get<std::size_t>(), b.at("seed").get<std::uint64_t>(),
                                         b.at("alpha").get<double>(), 1};
    }
    for (const auto& mj : j.at("models")) {
      ModelOutcome m;
      m.name = mj.at("name").get<std::string>();
      m.slug = mj.at("slug").get<std::string>();
      m.langs = mj.at("langs").get<std::vector<std::string>>();
      for (const auto& d : mj.at("directions")) {
        m.directions.push_back({d.at("lang").get<std::string>(), d.at("evr").get<double>(),
                                d.at("scale").get<double>(), d.at("anchor_hash").get<std::string>(),
                                d.at("n_anchors").get<std::size_t>()});
      }
      if (!mj.at("matrix").is_null()) m.matrix = CorrelationMatrix::from_json(mj["matrix"].dump());
      if (!mj.at("matrix_failure").is_null()) m.matrix_failure = failure_from_json(mj["matrix_failure"]);
      report.models.push_back(std::move(m));
    }
    for (const auto& cj : j.at("cells")) {
      CellOutcome c;
      c.model = cj.at("model").get<std::string>();
      c.lang = cj.at("lang").get<std::string>();
      if (cj.at("status") == "ok") {
        CorrelationResult r;
        r.method = parse_method(cj.at("method").get<std::string>());
        r.n = cj.at("n").get<std::size_t>();
        r.r = cj.at("r").get<double>();
        if (!cj.at("ci").is_null()) {
          const auto& ci = cj["ci"];
          r.ci = ConfidenceInterval{ci.at("low").get<double>(),        ci.at("high").get<double>(),
                                    ci.at("alpha").get<double>(),      ci.at("n_resamples").get<std::size_t>(),
                                    ci.at("seed").get<std::uint64_t>(), ci.at("skipped").get<std::size_t>()};
        }
        c.result = r;
      } else {
        c.failure = failure_from_json(cj.at("failure"));
      }
      report.cells.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("results JSON: ") + e.what());
  }
  return report;
}

std::string render_results_csv(const RunReport& report) {
  std::string out = "model,lang,method,n,r,ci_low,ci_high,status\n";
  for (const auto& c : report.cells) {
    out += csv::escape(c.model) + "," + c.lang + ",";
    if (c.result) {
      const auto& r = *c.result;
      out += std::string(to_string(r.method)) + "," + std::to_string(r.n) + "," + format_real(r.r) + ",";
      out += r.ci ? format_real(r.ci->low) + "," + format_real(r.ci->high) : std::string(",");
      out += ",ok\n";
    } else {
      out += ",,,,," + csv::escape("failed: " + c.failure->stage + ": " + c.failure->message) + "\n";
    }
  }
  return out;
}

}  // namespace normprobe
