// Corpus-scale machinery: manifest parsing, file enumeration with exclusion
// globs, a parallel per-file runner with timeouts, prevalence and runtime
// aggregation, and sample-size planning (Cochran with finite-population
// correction, stratified allocation by largest remainder).
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "llmlint/report.hpp"

namespace llmlint {

struct CorpusEntry {
  std::string project_id;
  std::filesystem::path root;
};

/// Manifest format: `project_id<TAB>root_path` lines, '#' comments, and an
/// optional `[exclude]` section of glob patterns (matched against the
/// root-relative path with forward slashes).
struct CorpusManifest {
  std::vector<CorpusEntry> entries;
  std::vector<std::string> excludes;
};

/// Throws std::invalid_argument on duplicate project ids, malformed lines or
/// nonexistent roots.  Relative roots resolve against the manifest directory.
CorpusManifest load_manifest(const std::string& path);

/// All .py regular files under each project root, exclusions applied,
/// sorted per project by lexicographic path.
std::vector<std::pair<std::string, std::filesystem::path>> enumerate_corpus(
    const CorpusManifest& manifest);

/// Translates one exclusion glob ("**" crosses directories, "*"/"?" do not,
/// "[...]" passes through) into an anchored ECMAScript regex.
std::string glob_to_regex(std::string_view glob);
bool matches_glob(std::string_view glob, std::string_view relative_path);

struct FileResult {
  std::string project_id;
  AnalysisResult result;
};

struct CorpusOptions {
  int jobs = 1;                  // worker threads
  double timeout_seconds = 10.0; // per-file deadline; <= 0 disables
};

/// Analyzes every corpus file.  Output order is deterministic regardless of
/// job count: results are slotted by enumeration index, then stably sorted
/// by (project_id, path).
std::vector<FileResult> run_corpus(const CorpusManifest& manifest,
                                   const std::vector<Rule>& rules,
                                   const PatternTable& patterns,
                                   const CorpusOptions& options);

struct RuntimeStats {
  std::size_t files = 0;
  double total_seconds = 0.0;
  double files_per_second = 0.0;
  double mean = 0.0;
  double median = 0.0;  // lower median
  double p95 = 0.0;     // nearest-rank
  double min = 0.0;
  double max = 0.0;
};
RuntimeStats runtime_stats(const std::vector<FileResult>& results);

struct PrevalenceSummary {
  std::size_t files = 0;
  std::size_t flagged_files = 0;
  std::size_t projects = 0;
  std::size_t flagged_projects = 0;
  std::map<std::string, std::size_t> occurrences_by_smell;
  std::map<std::string, std::size_t> files_by_smell;
};
PrevalenceSummary prevalence(const std::vector<FileResult>& results);

/// Corpus JSON report: the per-file schema of render_json plus a "project"
/// key per file, a "prevalence" section, and (when timing) a "runtime" one.
std::string render_corpus_json(const std::vector<FileResult>& results,
                               bool with_timing);

/// Cochran sample size: n0 = Z^2 p (1-p) / e^2, with the finite-population
/// correction n = n0 / (1 + (n0 - 1)/N) applied when a population is given.
/// `n` is the rounded-up integer size.  Invalid inputs (Z <= 0, e <= 0,
/// p outside [0,1], N < 1) throw std::invalid_argument.
struct SampleSize {
  double n0 = 0.0;
  double corrected = 0.0;   // equals n0 without a population
  long long n = 0;
};
SampleSize cochran_sample_size(double z, double margin, double p,
                               std::optional<long long> population = {});

/// Largest-remainder apportionment of `total` into parts proportional to
/// `weights` (ties: larger remainder, then larger weight, then lower index).
std::vector<long long> largest_remainder_apportionment(
    long long total, const std::vector<double>& weights);

/// Stratified allocation of `sample_size` across strata proportional to
/// their sizes; every allocation is clamped to its stratum size and the
/// shortfall is redistributed.  Throws when the strata cannot absorb the
/// requested sample.
std::vector<long long> stratified_allocation(
    long long sample_size, const std::vector<long long>& strata_sizes);

}  // namespace llmlint
