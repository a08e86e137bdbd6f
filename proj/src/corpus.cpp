#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "llmlint/corpus.hpp"

namespace llmlint {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() &&
         (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

/// Root-relative path with forward slashes, for exclusion matching.
std::string relative_slash_path(const fs::path& file, const fs::path& root) {
  return fs::path(fs::relative(file, root)).generic_string();
}

}  // namespace

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open manifest: " + path);
  fs::path base = fs::absolute(fs::path(path)).parent_path();

  CorpusManifest manifest;
  std::set<std::string> seen;
  bool in_excludes = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (body == "[exclude]") {
      in_excludes = true;
      continue;
    }
    if (in_excludes) {
      manifest.excludes.emplace_back(body);
      continue;
    }
    std::size_t tab = body.find('\t');
    if (tab == std::string_view::npos)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected 'project_id<TAB>root_path'");
    std::string project(trim(body.substr(0, tab)));
    std::string root_text(trim(body.substr(tab + 1)));
    if (project.empty() || root_text.empty())
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": empty project id or root path");
    if (!seen.insert(project).second)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": duplicate project id '" + project + "'");
    fs::path root(root_text);
    if (root.is_relative()) root = base / root;
    root = root.lexically_normal();
    if (!fs::is_directory(root))
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": project root is not a directory: " +
                                  root.string());
    manifest.entries.push_back({std::move(project), std::move(root)});
  }
  return manifest;
}

std::string glob_to_regex(std::string_view glob) {
  std::string re = "^";
  std::size_t i = 0;
  while (i < glob.size()) {
    char c = glob[i];
    if (c == '*') {
      if (glob.substr(i, 3) == "**/") {
        re += "(?:.*/)?";
        i += 3;
        continue;
      }
      if (glob.substr(i, 2) == "**") {
        re += ".*";
        i += 2;
        continue;
      }
      re += "[^/]*";
      ++i;
      continue;
    }
    if (c == '?') {
      re += "[^/]";
      ++i;
      continue;
    }
    if (c == '[') {  // character class passes through
      std::size_t end = glob.find(']', i + 1);
      if (end != std::string_view::npos) {
        re.append(glob.substr(i, end - i + 1));
        i = end + 1;
        continue;
      }
    }
    if (std::string_view("\\^$.|+(){}").find(c) != std::string_view::npos)
      re += '\\';
    re += c;
    ++i;
  }
  re += "$";
  return re;
}

bool matches_glob(std::string_view glob, std::string_view relative_path) {
  std::regex re(glob_to_regex(glob));
  return std::regex_match(relative_path.begin(), relative_path.end(), re);
}

std::vector<std::pair<std::string, fs::path>> enumerate_corpus(
    const CorpusManifest& manifest) {
  std::vector<std::regex> excludes;
  excludes.reserve(manifest.excludes.size());
  for (const std::string& glob : manifest.excludes)
    excludes.emplace_back(glob_to_regex(glob));

  std::vector<std::pair<std::string, fs::path>> files;
  for (const CorpusEntry& entry : manifest.entries) {
    std::vector<fs::path> project_files;
    std::error_code ec;
    for (fs::recursive_directory_iterator
             it(entry.root, fs::directory_options::skip_permission_denied, ec),
         end;
         it != end; it.increment(ec)) {
      if (ec) break;
      if (!it->is_regular_file(ec)) continue;
      const fs::path& p = it->path();
      if (p.extension() != ".py") continue;
      std::string rel = relative_slash_path(p, entry.root);
      bool excluded = false;
      for (const std::regex& re : excludes)
        if (std::regex_match(rel, re)) {
          excluded = true;
          break;
        }
      if (!excluded) project_files.push_back(p);
    }
    std::sort(project_files.begin(), project_files.end(),
              [](const fs::path& a, const fs::path& b) {
                return a.generic_string() < b.generic_string();
              });
    for (fs::path& p : project_files)
      files.emplace_back(entry.project_id, std::move(p));
  }
  return files;
}

std::vector<FileResult> run_corpus(const CorpusManifest& manifest,
                                   const std::vector<Rule>& rules,
                                   const PatternTable& patterns,
                                   const CorpusOptions& options) {
  auto files = enumerate_corpus(manifest);
  std::vector<FileResult> results(files.size());

  int jobs = std::max(1, options.jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= files.size()) return;
      results[i].project_id = files[i].first;
      results[i].result =
          analyze_file(files[i].second.generic_string(), rules, patterns,
                       options.timeout_seconds);
    }
  };
  if (jobs == 1 || files.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    std::size_t n = std::min(static_cast<std::size_t>(jobs), files.size());
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::stable_sort(results.begin(), results.end(),
                   [](const FileResult& a, const FileResult& b) {
                     if (a.project_id != b.project_id)
                       return a.project_id < b.project_id;
                     return a.result.file_path < b.result.file_path;
                   });
  return results;
}

RuntimeStats runtime_stats(const std::vector<FileResult>& results) {
  RuntimeStats stats;
  stats.files = results.size();
  if (results.empty()) return stats;
  std::vector<double> durations;
  durations.reserve(results.size());
  for (const FileResult& r : results) {
    durations.push_back(r.result.duration_seconds);
    stats.total_seconds += r.result.duration_seconds;
  }
  std::sort(durations.begin(), durations.end());
  std::size_t n = durations.size();
  stats.mean = stats.total_seconds / static_cast<double>(n);
  stats.median = durations[(n - 1) / 2];  // lower median
  std::size_t rank95 = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(n)));  // nearest-rank
  stats.p95 = durations[std::max<std::size_t>(rank95, 1) - 1];
  stats.min = durations.front();
  stats.max = durations.back();
  stats.files_per_second =
      stats.total_seconds > 0 ? static_cast<double>(n) / stats.total_seconds
                              : 0.0;
  return stats;
}

PrevalenceSummary prevalence(const std::vector<FileResult>& results) {
  PrevalenceSummary out;
  out.files = results.size();
  std::set<std::string> projects;
  std::set<std::string> flagged_projects;
  for (const FileResult& r : results) {
    projects.insert(r.project_id);
    if (!r.result.findings.empty()) {
      ++out.flagged_files;
      flagged_projects.insert(r.project_id);
    }
    std::set<std::string> smells_here;
    for (const Finding& f : r.result.findings) {
      ++out.occurrences_by_smell[f.smell];
      smells_here.insert(f.smell);
    }
    for (const std::string& s : smells_here) ++out.files_by_smell[s];
  }
  out.projects = projects.size();
  out.flagged_projects = flagged_projects.size();
  return out;
}

std::string render_corpus_json(const std::vector<FileResult>& results,
                               bool with_timing) {
  using nlohmann::json;
  json root;
  json files = json::array();
  for (const FileResult& r : results) {
    json file;
    file["project"] = r.project_id;
    file["path"] = r.result.file_path;
    file["status"] = r.result.status;
    if (with_timing) file["duration_s"] = r.result.duration_seconds;
    json findings = json::array();
    for (const Finding& f : r.result.findings) {
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
      findings.push_back(std::move(j));
    }
    file["findings"] = std::move(findings);
    files.push_back(std::move(file));
  }
  root["files"] = std::move(files);

  PrevalenceSummary prev = prevalence(results);
  json p;
  p["files"] = prev.files;
  p["flagged_files"] = prev.flagged_files;
  p["file_rate"] =
      prev.files ? static_cast<double>(prev.flagged_files) / prev.files : 0.0;
  p["projects"] = prev.projects;
  p["flagged_projects"] = prev.flagged_projects;
  p["project_rate"] = prev.projects ? static_cast<double>(prev.flagged_projects) /
                                          prev.projects
                                    : 0.0;
  p["occurrences_by_smell"] = json(prev.occurrences_by_smell);
  p["files_by_smell"] = json(prev.files_by_smell);
  root["prevalence"] = std::move(p);

  if (with_timing) {
    RuntimeStats stats = runtime_stats(results);
    json rt;
    rt["files"] = stats.files;
    rt["total_s"] = stats.total_seconds;
    rt["files_per_second"] = stats.files_per_second;
    rt["mean_s"] = stats.mean;
    rt["median_s"] = stats.median;
    rt["p95_s"] = stats.p95;
    rt["min_s"] = stats.min;
    rt["max_s"] = stats.max;
    root["runtime"] = std::move(rt);
  }
  return root.dump(2) + "\n";
}

SampleSize cochran_sample_size(double z, double margin, double p,
                               std::optional<long long> population) {
  if (!(z > 0)) throw std::invalid_argument("Z must be positive");
  if (!(margin > 0)) throw std::invalid_argument("margin must be positive");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("p must lie in [0, 1]");
  if (population && *population < 1)
    throw std::invalid_argument("population must be at least 1");

  SampleSize out;
  out.n0 = z * z * p * (1.0 - p) / (margin * margin);
  out.corrected = out.n0;
  if (population) {
    double n_pop = static_cast<double>(*population);
    out.corrected = out.n0 / (1.0 + (out.n0 - 1.0) / n_pop);
    out.corrected = std::min(out.corrected, n_pop);
  }
  out.n = static_cast<long long>(std::ceil(out.corrected - 1e-12));
  if (out.n < 1) out.n = 1;
  return out;
}

std::vector<long long> largest_remainder_apportionment(
    long long total, const std::vector<double>& weights) {
  if (total < 0) throw std::invalid_argument("total must be non-negative");
  double sum = 0;
  for (double w : weights) {
    if (w < 0) throw std::invalid_argument("weights must be non-negative");
    sum += w;
  }
  std::vector<long long> out(weights.size(), 0);
  if (weights.empty() || sum <= 0) {
    if (total > 0 && !weights.empty())
      throw std::invalid_argument("cannot apportion into all-zero weights");
    return out;
  }
  struct Part {
    double remainder;
    double weight;
    std::size_t index;
  };
  std::vector<Part> parts;
  long long assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double quota = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<long long>(std::floor(quota + 1e-12));
    assigned += out[i];
    parts.push_back({quota - static_cast<double>(out[i]), weights[i], i});
  }
  std::sort(parts.begin(), parts.end(), [](const Part& a, const Part& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.index < b.index;
  });
  for (std::size_t k = 0; assigned < total; ++k) {
    ++out[parts[k % parts.size()].index];
    ++assigned;
  }
  return out;
}

std::vector<long long> stratified_allocation(
    long long sample_size, const std::vector<long long>& strata_sizes) {
  long long capacity = 0;
  std::vector<double> weights;
  weights.reserve(strata_sizes.size());
  for (long long s : strata_sizes) {
    if (s < 0) throw std::invalid_argument("stratum sizes must be non-negative");
    capacity += s;
    weights.push_back(static_cast<double>(s));
  }
  if (sample_size < 0)
    throw std::invalid_argument("sample size must be non-negative");
  if (sample_size > capacity)
    throw std::invalid_argument("sample size exceeds population");

  std::vector<long long> alloc =
      largest_remainder_apportionment(sample_size, weights);
  // Clamp over-allocated strata and push the shortfall into the strata with
  // spare capacity (largest remaining capacity first for determinism).
  long long shortfall = 0;
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    if (alloc[i] > strata_sizes[i]) {
      shortfall += alloc[i] - strata_sizes[i];
      alloc[i] = strata_sizes[i];
    }
  }
  while (shortfall > 0) {
    std::size_t best = alloc.size();
    long long best_room = 0;
    for (std::size_t i = 0; i < alloc.size(); ++i) {
      long long room = strata_sizes[i] - alloc[i];
      if (room > best_room) {
        best_room = room;
        best = i;
      }
    }
    if (best == alloc.size()) break;  // unreachable given the capacity check
    ++alloc[best];
    --shortfall;
  }
  return alloc;
}

}  // namespace llmlint
