// Per-file analysis driver and report rendering (text, JSON, SARIF 2.1.0).
#pragma once

#include <string>
#include <vector>

#include "llmlint/patterns.hpp"
#include "llmlint/rules.hpp"

namespace llmlint {

/// Outcome of analyzing one file.  `status` is "ok", "parse-error" or
/// "timeout"; findings are present only for "ok".
struct AnalysisResult {
  std::string file_path;
  std::string status = "ok";
  double duration_seconds = 0.0;
  std::vector<Finding> findings;
  std::string detail;  // parse error message (not serialized)
};

/// Parse + bind + evaluate one in-memory source.  `timeout_seconds <= 0`
/// disables the deadline.
AnalysisResult analyze_source(std::string source, std::string path,
                              const std::vector<Rule>& rules,
                              const PatternTable& patterns,
                              double timeout_seconds = 0.0);

/// Reads the file and delegates to analyze_source; unreadable files produce
/// a "parse-error" result.
AnalysisResult analyze_file(const std::string& path,
                            const std::vector<Rule>& rules,
                            const PatternTable& patterns,
                            double timeout_seconds = 0.0);

/// `{path}:{line}:{col} {SMELL} {severity}: {message}` per finding, one
/// status line per non-ok file, and a trailing summary.
std::string render_text(const std::vector<AnalysisResult>& results);

/// Stable JSON report; `with_timing` controls the per-file duration_s field.
std::string render_json(const std::vector<AnalysisResult>& results,
                        bool with_timing);

/// SARIF 2.1.0 with one reportingDescriptor per rule.
std::string render_sarif(const std::vector<AnalysisResult>& results,
                         const std::vector<Rule>& rules);

}  // namespace llmlint
