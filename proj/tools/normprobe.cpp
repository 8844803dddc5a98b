// normprobe: fit moral directions, score statements, and correlate scores
// with human ratings and across languages.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "normprobe/correlation_stats.hpp"
#include "normprobe/embedding_io.hpp"
#include "normprobe/error.hpp"
#include "normprobe/moral_direction.hpp"
#include "normprobe/pipeline.hpp"
#include "normprobe/report.hpp"
#include "normprobe/run_config.hpp"
#include "normprobe/scores_io.hpp"

namespace fs = std::filesystem;
using namespace normprobe;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
}

std::string describe(const CorrelationResult& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s n=%zu r=%.4f", std::string(to_string(r.method)).c_str(), r.n, r.r);
  std::string out = buf;
  if (r.ci) {
    std::snprintf(buf, sizeof buf, " ci[%g]=[%.4f, %.4f]", 1.0 - r.ci->alpha, r.ci->low, r.ci->high);
    out += buf;
  }
  return out;
}

struct RunArgs {
  std::string config;
  std::string out;
  std::string method;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const RunArgs& args) {
  auto config = parse_config(args.config);
  if (!args.out.empty()) config.output_dir = args.out;
  if (!args.method.empty()) config.method = parse_method(args.method);
  if (args.seed) {
    if (!config.bootstrap) config.bootstrap = BootstrapConfig{};
    config.bootstrap->seed = *args.seed;
  }
  auto report = run(config);
  for (const auto& c : report.cells) {
    std::cout << c.model << " / " << c.lang << ": "
              << (c.result ? describe(*c.result) : "failed: " + c.failure->message) << '\n';
  }
  std::cout << "report: " << (config.output_dir / "report.md").string() << '\n';
  return report.exit_code();
}

struct FitArgs {
  std::string anchors;
  std::string labels;
  std::string out;
  std::string lang;
  double percentile = 100.0;
};

int cmd_fit(const FitArgs& args) {
  auto set = read_embedding_set(args.anchors);
  auto statements = read_statements(args.labels, args.lang.empty() ? "en" : args.lang);
  std::map<std::string, Polarity> labels;
  for (const auto& s : statements) {
    if (s.polarity) labels[s.id] = *s.polarity;
  }
  std::vector<Anchor> anchors;
  for (const auto& r : set.records()) {
    if (!args.lang.empty() && r.lang != args.lang) continue;
    if (auto it = labels.find(r.statement_id); it != labels.end()) anchors.push_back({r.vector, it->second});
  }
  auto md = fit_direction(anchors, FitOptions{args.percentile});
  spit(args.out, md.to_json() + "\n");
  std::printf("fitted %zu anchors: evr=%.4f scale=%.6g anchor_hash=%s\n", anchors.size(),
              md.explained_variance_ratio, md.scale, md.anchor_hash.c_str());
  return 0;
}

int cmd_score(const std::string& direction, const std::string& embeddings, const std::string& out,
              const std::string& lang) {
  auto md = MoralDirection::from_json(slurp(direction));
  auto set = read_embedding_set(embeddings);
  if (!lang.empty()) set = set.only_language(lang);
  auto table = score_set(md, set);
  spit(out, scores_to_csv(table));
  std::printf("scored %zu records\n", table.entries.size());
  return 0;
}

struct AgreeArgs {
  std::string scores;
  std::string ratings;
  std::string method = "pearson";
  std::size_t bootstrap = 0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  unsigned threads = 1;
  bool intersect = false;
};

int cmd_agree(const AgreeArgs& args) {
  auto scores = read_scores_csv(args.scores);
  auto ratings = read_ratings(args.ratings);
  auto method = parse_method(args.method);
  std::optional<BootstrapConfig> boot;
  if (args.bootstrap > 0) boot = BootstrapConfig{args.bootstrap, args.seed, args.alpha, args.threads};
  auto mode = args.intersect ? AlignMode::intersect : AlignMode::strict;
  int status = 0;
  std::uint64_t stream = 0;
  for (const auto& lang : scores.languages()) {
    try {
      auto r = agreement(scores.only_language(lang), ratings, method, boot, mode, stream++);
      std::cout << lang << ": " << describe(r) << '\n';
    } catch (const Error& e) {
      std::cout << lang << ": failed: " << e.what() << '\n';
      status = 2;
    }
  }
  return status;
}

int cmd_xcorr(const std::vector<std::string>& files, const std::string& out, const std::string& method,
              const std::vector<std::string>& langs, bool intersect) {
  std::vector<LanguageScores> tables;
  auto find = [&](const std::string& lang) {
    return std::find_if(tables.begin(), tables.end(), [&](const auto& t) { return t.lang == lang; });
  };
  for (const auto& f : files) {
    auto table = read_scores_csv(f);
    // Languages keep the order of first appearance: file order, then code order.
    for (const auto& lang : table.languages()) {
      if (find(lang) != tables.end()) {
        throw Error(ErrorCode::duplicate, "language " + lang + " appears in more than one scores file");
      }
      LanguageScores ls{lang, {}, {}};
      for (const auto& e : table.only_language(lang).entries) {
        ls.ids.push_back(e.statement_id);
        ls.scores.push_back(e.score);
      }
      tables.push_back(std::move(ls));
    }
  }
  if (!langs.empty()) {
    std::vector<LanguageScores> ordered;
    for (const auto& l : langs) {
      auto it = find(l);
      if (it == tables.end()) throw Error(ErrorCode::invalid_argument, "no scores for language " + l);
      ordered.push_back(*it);
    }
    tables = std::move(ordered);
  }
  auto m = cross_language_matrix(tables, parse_method(method), intersect ? AlignMode::intersect : AlignMode::strict);
  spit(out, m.to_json() + "\n");
  std::cout << render_matrix(m);
  if (m.pairwise_incomplete) std::cout << "pairwise-incomplete: PSD not guaranteed\n";
  return 0;
}

int cmd_report(const std::string& in, const std::string& format) {
  auto report = results_from_json(slurp(fs::path(in) / "results.json"));
  std::cout << (format == "csv" ? render_results_csv(report) : render_report(report));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"normprobe: moral-direction probing of sentence-embedding spaces"};
  app.set_version_flag("--version", std::string(toolkit_version()));
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline from a TOML config");
  run_cmd->add_option("--config", run_args.config, "Run configuration (TOML)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run_args.out, "Output directory (overrides run.output_dir)");
  run_cmd->add_option("--method", run_args.method, "Correlation method")->check(CLI::IsMember({"pearson", "spearman"}));
  run_cmd->add_option("--seed", run_args.seed, "Bootstrap seed (enables bootstrap with defaults if absent)");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a moral direction from anchor embeddings");
  fit_cmd->add_option("--anchors", fit_args.anchors, "Anchor embeddings (JSONL)")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--anchor-labels", fit_args.labels, "Anchor labels CSV (id,text,polarity)")
      ->required()
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fit_args.out, "Direction JSON output")->required();
  fit_cmd->add_option("--lang", fit_args.lang, "Use only anchors in this language");
  fit_cmd->add_option("--scale-percentile", fit_args.percentile, "Percentile of |projection| used as scale")
      ->check(CLI::Range(0.0, 100.0));

  std::string score_direction, score_embeddings, score_out, score_lang;
  auto* score_cmd = app.add_subcommand("score", "Score embeddings along a fitted direction");
  score_cmd->add_option("--direction", score_direction, "Direction JSON")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--embeddings", score_embeddings, "Embeddings (JSONL)")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--out", score_out, "Scores CSV output")->required();
  score_cmd->add_option("--lang", score_lang, "Score only this language");

  AgreeArgs agree_args;
  auto* agree_cmd = app.add_subcommand("agree", "Correlate scores with human ratings per language");
  agree_cmd->add_option("--scores", agree_args.scores, "Scores CSV (id,lang,score)")->required()->check(CLI::ExistingFile);
  agree_cmd->add_option("--ratings", agree_args.ratings, "Ratings CSV (id,text,rating)")->required()->check(CLI::ExistingFile);
  agree_cmd->add_option("--method", agree_args.method)->check(CLI::IsMember({"pearson", "spearman"}));
  agree_cmd->add_option("--bootstrap", agree_args.bootstrap, "Bootstrap resamples (0 = off)");
  agree_cmd->add_option("--seed", agree_args.seed, "Bootstrap seed");
  agree_cmd->add_option("--alpha", agree_args.alpha, "Two-sided alpha")->check(CLI::Range(0.0, 1.0));
  agree_cmd->add_option("--threads", agree_args.threads, "Bootstrap worker threads")->check(CLI::PositiveNumber);
  agree_cmd->add_flag("--intersect", agree_args.intersect, "Align on shared ids instead of requiring equal sets");

  std::vector<std::string> xcorr_files, xcorr_langs;
  std::string xcorr_out, xcorr_method = "pearson";
  bool xcorr_intersect = false;
  auto* xcorr_cmd = app.add_subcommand("xcorr", "Cross-language correlation matrix of scores");
  xcorr_cmd->add_option("--scores", xcorr_files, "Scores CSV files")->required()->check(CLI::ExistingFile);
  xcorr_cmd->add_option("--out", xcorr_out, "Matrix JSON output")->required();
  xcorr_cmd->add_option("--method", xcorr_method)->check(CLI::IsMember({"pearson", "spearman"}));
  xcorr_cmd->add_option("--langs", xcorr_langs, "Language order")->delimiter(',');
  xcorr_cmd->add_flag("--intersect", xcorr_intersect,
                      "Pairwise on shared ids (matrix marked pairwise-incomplete)");

  std::string report_in, report_format = "md";
  auto* report_cmd = app.add_subcommand("report", "Render a finished run's results");
  report_cmd->add_option("--in", report_in, "Run output directory")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--format", report_format)->check(CLI::IsMember({"md", "csv"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run_args);
    if (*fit_cmd) return cmd_fit(fit_args);
    if (*score_cmd) return cmd_score(score_direction, score_embeddings, score_out, score_lang);
    if (*agree_cmd) return cmd_agree(agree_args);
    if (*xcorr_cmd) return cmd_xcorr(xcorr_files, xcorr_out, xcorr_method, xcorr_langs, xcorr_intersect);
    if (*report_cmd) return cmd_report(report_in, report_format);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
