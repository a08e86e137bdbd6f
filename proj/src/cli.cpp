#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "llmlint/cli.hpp"
#include "llmlint/corpus.hpp"
#include "llmlint/evaluation.hpp"
#include "llmlint/patterns.hpp"
#include "llmlint/report.hpp"
#include "llmlint/rules.hpp"

namespace llmlint {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int severity_rank(std::string_view severity) {
  if (severity == "error") return 2;
  if (severity == "warning") return 1;
  if (severity == "info") return 0;
  return 3;  // "never"
}

bool any_at_or_above(const std::vector<AnalysisResult>& results,
                     const std::string& fail_on) {
  if (fail_on == "never") return false;
  int threshold = severity_rank(fail_on);
  for (const AnalysisResult& r : results)
    for (const Finding& f : r.findings)
      if (severity_rank(f.severity) >= threshold) return true;
  return false;
}

int emit(const std::string& text, const std::string& output_path,
         std::ostream& out, std::ostream& err) {
  if (output_path.empty()) {
    out << text;
    return 0;
  }
  std::ofstream file(output_path, std::ios::binary);
  if (!file) {
    err << "error: cannot write output file: " << output_path << "\n";
    return 2;
  }
  file << text;
  return 0;
}

std::vector<Rule> effective_rules(const std::string& rules_file,
                                  const std::string& add_rules_file) {
  std::vector<Rule> rules =
      rules_file.empty() ? builtin_rules() : load_rules_file(rules_file);
  if (!add_rules_file.empty()) {
    std::vector<Rule> extra = load_rules_file(add_rules_file);
    for (Rule& r : extra) {
      for (const Rule& existing : rules)
        if (existing.name == r.name)
          throw RuleParseError("rule '" + r.name + "' already defined", 0, 0);
      rules.push_back(std::move(r));
    }
  }
  return rules;
}

PatternTable effective_patterns(const std::string& patterns_file) {
  return patterns_file.empty() ? PatternTable::defaults()
                               : PatternTable::load(patterns_file);
}

/// Expands analyze path arguments: files stay, directories contribute their
/// .py files (sorted), with --exclude globs applied relative to the directory.
std::vector<std::string> expand_paths(const std::vector<std::string>& paths,
                                      const std::vector<std::string>& excludes) {
  std::vector<std::regex> exclude_res;
  exclude_res.reserve(excludes.size());
  for (const std::string& glob : excludes)
    exclude_res.emplace_back(glob_to_regex(glob));

  std::vector<std::string> files;
  for (const std::string& arg : paths) {
    fs::path p(arg);
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      std::error_code ec;
      for (fs::recursive_directory_iterator
               it(p, fs::directory_options::skip_permission_denied, ec),
           end;
           it != end; it.increment(ec)) {
        if (ec) break;
        if (!it->is_regular_file(ec)) continue;
        if (it->path().extension() != ".py") continue;
        std::string rel =
            fs::path(fs::relative(it->path(), p)).generic_string();
        bool excluded = false;
        for (const std::regex& re : exclude_res)
          if (std::regex_match(rel, re)) {
            excluded = true;
            break;
          }
        if (!excluded) found.push_back(it->path().generic_string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p.generic_string());
    } else {
      throw std::invalid_argument("no such file or directory: " + arg);
    }
  }
  return files;
}

std::string format_metric(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << *v;
  return out.str();
}

std::string metrics_text(const MetricsSummary& m) {
  std::ostringstream out;
  out << "smell tp fp fn tn precision recall f1\n";
  for (const SmellMetrics& row : m.per_smell) {
    out << row.smell << " " << row.counts.tp << " " << row.counts.fp << " "
        << row.counts.fn << " " << row.counts.tn << " "
        << format_metric(row.precision) << " " << format_metric(row.recall)
        << " " << format_metric(row.f1) << "\n";
  }
  out << "micro " << m.micro.tp << " " << m.micro.fp << " " << m.micro.fn
      << " " << m.micro.tn << " " << format_metric(m.micro_precision) << " "
      << format_metric(m.micro_recall) << " " << format_metric(m.micro_f1)
      << "\n";
  out << "macro ("
      << (m.policy == MacroPolicy::drop_undefined ? "drop-undefined"
                                                  : "zero-fill")
      << ") precision " << format_metric(m.macro_precision) << " recall "
      << format_metric(m.macro_recall) << " f1 " << format_metric(m.macro_f1);
  if (!m.excluded_from_macro.empty()) {
    out << " [undefined:";
    for (const std::string& s : m.excluded_from_macro) out << " " << s;
    out << "]";
  }
  out << "\n";
  return out.str();
}

json metric_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string metrics_json(const MetricsSummary& m) {
  json root;
  json rows = json::array();
  for (const SmellMetrics& row : m.per_smell) {
    json r;
    r["smell"] = row.smell;
    r["tp"] = row.counts.tp;
    r["fp"] = row.counts.fp;
    r["fn"] = row.counts.fn;
    r["tn"] = row.counts.tn;
    r["precision"] = metric_json(row.precision);
    r["recall"] = metric_json(row.recall);
    r["f1"] = metric_json(row.f1);
    rows.push_back(std::move(r));
  }
  root["per_smell"] = std::move(rows);
  root["micro"]["tp"] = m.micro.tp;
  root["micro"]["fp"] = m.micro.fp;
  root["micro"]["fn"] = m.micro.fn;
  root["micro"]["tn"] = m.micro.tn;
  root["micro"]["precision"] = metric_json(m.micro_precision);
  root["micro"]["recall"] = metric_json(m.micro_recall);
  root["micro"]["f1"] = metric_json(m.micro_f1);
  root["macro"]["policy"] = m.policy == MacroPolicy::drop_undefined
                                ? "drop-undefined"
                                : "zero-fill";
  root["macro"]["precision"] = metric_json(m.macro_precision);
  root["macro"]["recall"] = metric_json(m.macro_recall);
  root["macro"]["f1"] = metric_json(m.macro_f1);
  root["macro"]["undefined_smells"] = m.excluded_from_macro;
  return root.dump(2) + "\n";
}

std::vector<FindingRef> findings_from_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open findings report: " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.contains("files") || !j["files"].is_array())
    throw std::invalid_argument("malformed findings report: " + path);
  std::vector<FindingRef> out;
  for (const json& file : j["files"]) {
    if (!file.contains("path") || !file.contains("findings")) continue;
    std::string file_path = file["path"].get<std::string>();
    for (const json& f : file["findings"]) {
      FindingRef ref;
      ref.file = file_path;
      ref.smell = f.value("smell", std::string{});
      ref.line = f.value("line", 0);
      out.push_back(std::move(ref));
    }
  }
  return out;
}

std::map<std::string, Confusion> counts_from_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open counts file: " + path);
  std::map<std::string, Confusion> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line;
    while (!body.empty() && (body.back() == '\r' || body.back() == ' '))
      body.pop_back();
    if (body.empty() || body.front() == '#') continue;
    std::istringstream row(body);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (line_no == 1 && fields.size() == 5 && fields[1] == "tp") continue;
    if (fields.size() != 5)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected 'smell,tp,fp,fn,tn'");
    Confusion c;
    try {
      c.tp = std::stoll(fields[1]);
      c.fp = std::stoll(fields[2]);
      c.fn = std::stoll(fields[3]);
      c.tn = std::stoll(fields[4]);
    } catch (const std::exception&) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": counts must be integers");
    }
    if (!out.emplace(fields[0], c).second)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": duplicate smell '" + fields[0] + "'");
  }
  return out;
}

std::vector<std::vector<long long>> matrix_from_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open matrix file: " + path);
  std::vector<std::vector<long long>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line;
    while (!body.empty() && (body.back() == '\r' || body.back() == ' '))
      body.pop_back();
    if (body.empty() || body.front() == '#') continue;
    std::istringstream row(body);
    std::string field;
    std::vector<long long> values;
    while (std::getline(row, field, ',')) {
      try {
        values.push_back(std::stoll(field));
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                    ": matrix entries must be integers");
      }
    }
    out.push_back(std::move(values));
  }
  return out;
}

std::vector<std::pair<std::string, long long>> strata_from_csv(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open strata file: " + path);
  std::vector<std::pair<std::string, long long>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line;
    while (!body.empty() && (body.back() == '\r' || body.back() == ' '))
      body.pop_back();
    if (body.empty() || body.front() == '#') continue;
    std::size_t comma = body.find(',');
    std::string name = comma == std::string::npos
                           ? "stratum-" + std::to_string(out.size() + 1)
                           : body.substr(0, comma);
    std::string size_text =
        comma == std::string::npos ? body : body.substr(comma + 1);
    try {
      out.emplace_back(name, std::stoll(size_text));
    } catch (const std::exception&) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": stratum size must be an integer");
    }
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"llmlint: a static analyzer for LLM integration smells in "
               "Python code"};
  app.require_subcommand(1);

  // --- analyze -----------------------------------------------------------
  auto* analyze = app.add_subcommand(
      "analyze", "Analyze Python files or directories");
  std::vector<std::string> analyze_paths;
  std::string analyze_rules, analyze_add_rules, analyze_patterns;
  std::string analyze_format = "text", analyze_output,
              analyze_fail_on = "info";
  std::vector<std::string> analyze_excludes;
  bool analyze_no_timing = false;
  analyze->add_option("paths", analyze_paths, "Files or directories")
      ->required();
  analyze->add_option("--rules", analyze_rules,
                      "Rule file replacing the built-in rules");
  analyze->add_option("--add-rules", analyze_add_rules,
                      "Rule file extending the effective rules");
  analyze->add_option("--patterns", analyze_patterns,
                      "Pattern table overrides");
  analyze->add_option("--format", analyze_format, "Output format")
      ->check(CLI::IsMember({"text", "json", "sarif"}));
  analyze->add_option("--exclude", analyze_excludes,
                      "Exclusion glob for directory walks (repeatable)");
  analyze->add_option("--output", analyze_output, "Write the report here");
  analyze->add_option("--fail-on", analyze_fail_on,
                      "Exit 1 when a finding reaches this severity")
      ->check(CLI::IsMember({"info", "warning", "error", "never"}));
  analyze->add_flag("--no-timing", analyze_no_timing,
                    "Omit timing from reports");

  // --- corpus ------------------------------------------------------------
  auto* corpus = app.add_subcommand("corpus", "Analyze a corpus manifest");
  std::string corpus_manifest;
  int corpus_jobs = 1;
  double corpus_timeout = 10.0;
  std::string corpus_format = "json", corpus_output, corpus_fail_on = "never";
  bool corpus_no_timing = false;
  corpus->add_option("manifest", corpus_manifest, "Corpus manifest file")
      ->required();
  corpus->add_option("--jobs", corpus_jobs, "Worker threads")
      ->check(CLI::PositiveNumber);
  corpus->add_option("--timeout", corpus_timeout,
                     "Per-file timeout in seconds (0 disables)");
  corpus->add_option("--format", corpus_format, "Output format")
      ->check(CLI::IsMember({"text", "json", "sarif"}));
  corpus->add_option("--output", corpus_output, "Write the report here");
  corpus->add_option("--fail-on", corpus_fail_on,
                     "Exit 1 when a finding reaches this severity")
      ->check(CLI::IsMember({"info", "warning", "error", "never"}));
  corpus->add_flag("--no-timing", corpus_no_timing,
                   "Omit timing from reports");

  // --- eval ---------------------------------------------------------------
  auto* eval = app.add_subcommand(
      "eval", "Score findings against labels, or aggregate counts");
  std::string eval_findings, eval_labels, eval_counts, eval_kappa;
  std::string eval_match = "line", eval_macro = "drop-undefined",
              eval_format = "text";
  long long eval_tolerance = 0;
  eval->add_option("--findings", eval_findings, "JSON report to score");
  eval->add_option("--labels", eval_labels, "Ground-truth CSV");
  eval->add_option("--match", eval_match, "Matching granularity")
      ->check(CLI::IsMember({"line", "file"}));
  eval->add_option("--tolerance", eval_tolerance,
                   "Line distance tolerated in line mode")
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--macro", eval_macro, "Macro-averaging policy")
      ->check(CLI::IsMember({"drop-undefined", "zero-fill"}));
  eval->add_option("--counts", eval_counts,
                   "CSV of per-smell tp,fp,fn,tn counts to aggregate");
  eval->add_option("--kappa", eval_kappa,
                   "Agreement matrix CSV for Fleiss' kappa");
  eval->add_option("--format", eval_format, "Output format")
      ->check(CLI::IsMember({"text", "json"}));

  // --- sample -------------------------------------------------------------
  auto* sample = app.add_subcommand(
      "sample", "Plan a review sample size (Cochran)");
  double sample_z = 1.96, sample_margin = 0.05, sample_p = 0.5;
  std::string sample_population = "inf", sample_strata;
  std::string sample_format = "text";
  sample->add_option("--Z", sample_z, "Confidence z-score");
  sample->add_option("--margin", sample_margin, "Margin of error");
  sample->add_option("--p", sample_p, "Expected proportion");
  sample->add_option("--population", sample_population,
                     "Population size or 'inf'");
  sample->add_option("--strata", sample_strata,
                     "CSV of stratum sizes for allocation");
  sample->add_option("--format", sample_format, "Output format")
      ->check(CLI::IsMember({"text", "json"}));

  // --- rules --------------------------------------------------------------
  auto* rules_cmd = app.add_subcommand("rules", "Inspect or validate rules");
  auto* rules_list = rules_cmd->add_subcommand("list", "List built-in rules");
  auto* rules_check = rules_cmd->add_subcommand("check", "Validate a rule file");
  std::string rules_check_file;
  rules_check->add_option("file", rules_check_file, "Rule file")->required();
  rules_cmd->require_subcommand(1);

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("llmlint");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*analyze) {
      std::vector<Rule> rules;
      PatternTable patterns = PatternTable::defaults();
      try {
        rules = effective_rules(analyze_rules, analyze_add_rules);
        patterns = effective_patterns(analyze_patterns);
      } catch (const RuleParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
      }
      std::vector<std::string> files =
          expand_paths(analyze_paths, analyze_excludes);
      std::vector<AnalysisResult> results;
      results.reserve(files.size());
      for (const std::string& f : files)
        results.push_back(analyze_file(f, rules, patterns));
      std::string rendered;
      if (analyze_format == "json")
        rendered = render_json(results, !analyze_no_timing);
      else if (analyze_format == "sarif")
        rendered = render_sarif(results, rules);
      else
        rendered = render_text(results);
      if (int rc = emit(rendered, analyze_output, out, err)) return rc;
      return any_at_or_above(results, analyze_fail_on) ? 1 : 0;
    }

    if (*corpus) {
      std::vector<Rule> rules;
      PatternTable patterns = PatternTable::defaults();
      try {
        rules = builtin_rules();
      } catch (const RuleParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
      }
      CorpusManifest manifest = load_manifest(corpus_manifest);
      CorpusOptions options;
      options.jobs = corpus_jobs;
      options.timeout_seconds = corpus_timeout;
      std::vector<FileResult> results =
          run_corpus(manifest, rules, patterns, options);
      std::vector<AnalysisResult> flat;
      flat.reserve(results.size());
      for (const FileResult& r : results) flat.push_back(r.result);
      std::string rendered;
      if (corpus_format == "json") {
        rendered = render_corpus_json(results, !corpus_no_timing);
      } else if (corpus_format == "sarif") {
        rendered = render_sarif(flat, rules);
      } else {
        std::ostringstream text;
        text << render_text(flat);
        PrevalenceSummary prev = prevalence(results);
        text << "projects: " << prev.flagged_projects << "/" << prev.projects
             << " flagged\n";
        if (!corpus_no_timing) {
          RuntimeStats stats = runtime_stats(results);
          text << std::fixed << std::setprecision(4) << "runtime: total "
               << stats.total_seconds << "s, median " << stats.median
               << "s, p95 " << stats.p95 << "s, " << stats.files_per_second
               << " files/s\n";
        }
        rendered = text.str();
      }
      if (int rc = emit(rendered, corpus_output, out, err)) return rc;
      return any_at_or_above(flat, corpus_fail_on) ? 1 : 0;
    }

    if (*eval) {
      MacroPolicy policy = eval_macro == "zero-fill"
                               ? MacroPolicy::zero_fill
                               : MacroPolicy::drop_undefined;
      std::ostringstream text;
      bool did_something = false;
      if (!eval_kappa.empty()) {
        double kappa = fleiss_kappa(matrix_from_csv(eval_kappa));
        if (eval_format == "json") {
          json j;
          j["fleiss_kappa"] = kappa;
          text << j.dump(2) << "\n";
        } else {
          text << "fleiss_kappa " << std::fixed << std::setprecision(4)
               << kappa << "\n";
        }
        did_something = true;
      }
      std::optional<MetricsSummary> summary;
      if (!eval_counts.empty()) {
        if (!eval_findings.empty() || !eval_labels.empty()) {
          err << "error: --counts cannot be combined with --findings/--labels\n";
          return 2;
        }
        summary = metrics_from_confusions(counts_from_csv(eval_counts), policy);
      } else if (!eval_findings.empty() || !eval_labels.empty()) {
        if (eval_findings.empty() || eval_labels.empty()) {
          err << "error: --findings and --labels must be given together\n";
          return 2;
        }
        summary = score_findings(
            findings_from_report(eval_findings), load_labels_csv(eval_labels),
            eval_match == "file" ? MatchMode::file : MatchMode::line,
            eval_tolerance, policy);
      }
      if (summary) {
        text << (eval_format == "json" ? metrics_json(*summary)
                                       : metrics_text(*summary));
        did_something = true;
      }
      if (!did_something) {
        err << "error: nothing to evaluate (use --findings/--labels, "
               "--counts, or --kappa)\n";
        return 2;
      }
      out << text.str();
      return 0;
    }

    if (*sample) {
      std::optional<long long> population;
      if (sample_population != "inf") {
        try {
          population = std::stoll(sample_population);
        } catch (const std::exception&) {
          err << "error: --population must be an integer or 'inf'\n";
          return 2;
        }
      }
      SampleSize size =
          cochran_sample_size(sample_z, sample_margin, sample_p, population);
      std::vector<std::pair<std::string, long long>> strata;
      std::vector<long long> alloc;
      if (!sample_strata.empty()) {
        strata = strata_from_csv(sample_strata);
        std::vector<long long> sizes;
        sizes.reserve(strata.size());
        for (const auto& [name, n] : strata) sizes.push_back(n);
        alloc = stratified_allocation(size.n, sizes);
      }
      if (sample_format == "json") {
        json j;
        j["n0"] = size.n0;
        j["corrected"] = size.corrected;
        j["n"] = size.n;
        if (!strata.empty()) {
          json rows = json::array();
          for (std::size_t i = 0; i < strata.size(); ++i) {
            json r;
            r["stratum"] = strata[i].first;
            r["size"] = strata[i].second;
            r["allocation"] = alloc[i];
            rows.push_back(std::move(r));
          }
          j["strata"] = std::move(rows);
        }
        out << j.dump(2) << "\n";
      } else {
        out << std::fixed << std::setprecision(4) << "n0 " << size.n0 << "\n"
            << "corrected " << size.corrected << "\n"
            << "n " << size.n << "\n";
        for (std::size_t i = 0; i < strata.size(); ++i)
          out << strata[i].first << " " << strata[i].second << " -> "
              << alloc[i] << "\n";
      }
      return 0;
    }

    if (*rules_cmd) {
      if (*rules_list) {
        for (const Rule& r : builtin_rules()) {
          out << r.name << " smell=" << r.smell << " category=" << r.category
              << " severity=" << r.severity << " effects=";
          for (std::size_t i = 0; i < r.effects.size(); ++i) {
            if (i) out << ",";
            out << r.effects[i];
          }
          out << "\n";
        }
        return 0;
      }
      if (*rules_check) {
        try {
          std::vector<Rule> parsed = load_rules_file(rules_check_file);
          out << "OK: " << parsed.size() << " rule(s)\n";
          return 0;
        } catch (const RuleParseError& e) {
          err << "error: " << e.what() << "\n";
          return 1;
        }
      }
    }
  } catch (const RuleParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace llmlint
