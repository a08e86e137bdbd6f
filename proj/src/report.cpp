#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "llmlint/binding.hpp"
#include "llmlint/report.hpp"

namespace llmlint {

namespace {

using nlohmann::json;

json finding_to_json(const Finding& f) {
  json j;
  j["smell"] = f.smell;
  j["rule"] = f.rule;
  j["category"] = f.category;
  j["effects"] = f.effects;
  j["severity"] = f.severity;
  j["line"] = f.span.begin.line;
  j["end_line"] = f.span.end.line;
  j["column"] = f.span.begin.column;
  j["end_column"] = f.span.end.column;
  j["message"] = f.message;
  j["evidence"] = f.evidence;
  j["callee"] = f.callee;
  return j;
}

json file_to_json(const AnalysisResult& r, bool with_timing) {
  json j;
  j["path"] = r.file_path;
  j["status"] = r.status;
  if (with_timing) j["duration_s"] = r.duration_seconds;
  json findings = json::array();
  for (const Finding& f : r.findings) findings.push_back(finding_to_json(f));
  j["findings"] = std::move(findings);
  return j;
}

const char* sarif_level(std::string_view severity) {
  if (severity == "error") return "error";
  if (severity == "warning") return "warning";
  return "note";
}

}  // namespace

AnalysisResult analyze_source(std::string source, std::string path,
                              const std::vector<Rule>& rules,
                              const PatternTable& patterns,
                              double timeout_seconds) {
  AnalysisResult result;
  result.file_path = path;
  Deadline deadline = timeout_seconds > 0 ? Deadline::after(timeout_seconds)
                                          : Deadline::none();
  auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         started)
        .count();
  };
  try {
    EnrichedTree tree = parse_source(std::move(source), path, deadline);
    if (!tree.ok()) {
      result.status = "parse-error";
      result.detail = tree.error()->message;
    } else {
      BindingTable bindings = BindingTable::build(tree);
      AnalysisContext ctx{tree, bindings, patterns};
      result.findings = evaluate_rules(ctx, rules, deadline);
    }
  } catch (const TimeoutExceeded&) {
    result.status = "timeout";
    result.findings.clear();
  }
  result.duration_seconds = elapsed();
  // A deadline that expired between cooperative checks still counts.
  if (result.status == "ok" && timeout_seconds > 0 &&
      result.duration_seconds > timeout_seconds) {
    result.status = "timeout";
    result.findings.clear();
  }
  return result;
}

AnalysisResult analyze_file(const std::string& path,
                            const std::vector<Rule>& rules,
                            const PatternTable& patterns,
                            double timeout_seconds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    AnalysisResult result;
    result.file_path = path;
    result.status = "parse-error";
    result.detail = "cannot read file";
    return result;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return analyze_source(buf.str(), path, rules, patterns, timeout_seconds);
}

std::string render_text(const std::vector<AnalysisResult>& results) {
  std::ostringstream out;
  std::size_t findings = 0;
  std::size_t flagged = 0;
  std::size_t failed = 0;
  for (const AnalysisResult& r : results) {
    if (r.status != "ok") {
      out << r.file_path << ": " << r.status << "\n";
      ++failed;
      continue;
    }
    if (!r.findings.empty()) ++flagged;
    for (const Finding& f : r.findings) {
      out << f.path << ":" << f.span.begin.line << ":" << f.span.begin.column
          << " " << f.smell << " " << f.severity << ": " << f.message << "\n";
      ++findings;
    }
  }
  out << findings << " finding(s) in " << results.size() << " file(s), "
      << flagged << " flagged";
  if (failed) out << ", " << failed << " not analyzed";
  out << "\n";
  return out.str();
}

std::string render_json(const std::vector<AnalysisResult>& results,
                        bool with_timing) {
  json root;
  json files = json::array();
  std::size_t flagged = 0;
  std::map<std::string, std::size_t> by_smell;
  for (const AnalysisResult& r : results) {
    files.push_back(file_to_json(r, with_timing));
    if (!r.findings.empty()) ++flagged;
    for (const Finding& f : r.findings) ++by_smell[f.smell];
  }
  root["files"] = std::move(files);
  root["totals"]["files"] = results.size();
  root["totals"]["flagged_files"] = flagged;
  root["totals"]["occurrences_by_smell"] = json(by_smell);
  return root.dump(2) + "\n";
}

std::string render_sarif(const std::vector<AnalysisResult>& results,
                         const std::vector<Rule>& rules) {
  json descriptors = json::array();
  std::map<std::string, std::size_t> rule_index;
  for (const Rule& r : rules) {
    rule_index[r.name] = descriptors.size();
    json d;
    d["id"] = r.name;
    d["shortDescription"]["text"] = r.message;
    d["defaultConfiguration"]["level"] = sarif_level(r.severity);
    d["properties"]["smell"] = r.smell;
    d["properties"]["category"] = r.category;
    json effects = r.effects;
    std::sort(effects.begin(), effects.end());
    d["properties"]["effects"] = std::move(effects);
    descriptors.push_back(std::move(d));
  }

  json sarif_results = json::array();
  for (const AnalysisResult& r : results) {
    for (const Finding& f : r.findings) {
      json res;
      res["ruleId"] = f.rule;
      if (auto it = rule_index.find(f.rule); it != rule_index.end())
        res["ruleIndex"] = it->second;
      res["level"] = sarif_level(f.severity);
      res["message"]["text"] = f.message;
      json region;
      region["startLine"] = f.span.begin.line;
      region["startColumn"] = f.span.begin.column + 1;  // SARIF is 1-based
      region["endLine"] = f.span.end.line;
      region["endColumn"] = f.span.end.column + 1;
      json loc;
      loc["physicalLocation"]["artifactLocation"]["uri"] = f.path;
      loc["physicalLocation"]["region"] = std::move(region);
      res["locations"] = json::array({std::move(loc)});
      sarif_results.push_back(std::move(res));
    }
  }

  json root;
  root["$schema"] = "https://json.schemastore.org/sarif-2.1.0.json";
  root["version"] = "2.1.0";
  json run;
  run["tool"]["driver"]["name"] = "llmlint";
  run["tool"]["driver"]["rules"] = std::move(descriptors);
  run["results"] = std::move(sarif_results);
  root["runs"] = json::array({std::move(run)});
  return root.dump(2) + "\n";
}

}  // namespace llmlint
