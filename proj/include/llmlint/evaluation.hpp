// Detector evaluation: confusion counts against hand-labeled ground truth,
// precision/recall/F1 with explicit undefined handling, micro/macro
// aggregation, and Fleiss' kappa for annotator agreement.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace llmlint {

struct Confusion {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long tn = 0;
};

/// Undefined (nullopt) when the denominator is zero.
std::optional<double> precision(const Confusion& c);
std::optional<double> recall(const Confusion& c);
/// Harmonic mean; undefined when either side is undefined or P + R == 0.
std::optional<double> f1_score(const Confusion& c);

/// One ground-truth row: `positive` marks a labeled smell instance, false a
/// confirmed-clean site.
struct LabelRow {
  std::string file;
  std::string smell;
  long long line = 0;
  bool positive = true;
};

/// CSV loader for `file,smell,line,verdict` rows (verdict `smell`/`clean`,
/// case-insensitive; optional header).  Throws std::invalid_argument on
/// malformed rows or duplicate (file, smell, line) keys.
std::vector<LabelRow> load_labels_csv(const std::string& path);

/// A detector finding reduced to its matching key.
struct FindingRef {
  std::string file;
  std::string smell;
  long long line = 0;
};

enum class MatchMode { line, file };
enum class MacroPolicy { drop_undefined, zero_fill };

struct SmellMetrics {
  std::string smell;
  Confusion counts;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

struct MetricsSummary {
  std::vector<SmellMetrics> per_smell;  // sorted by smell name
  Confusion micro;
  std::optional<double> micro_precision;
  std::optional<double> micro_recall;
  std::optional<double> micro_f1;
  std::optional<double> macro_precision;
  std::optional<double> macro_recall;
  std::optional<double> macro_f1;
  MacroPolicy policy = MacroPolicy::drop_undefined;
  /// Smells excluded from a macro dimension under drop-undefined.
  std::vector<std::string> excluded_from_macro;
};

/// Scores findings against labels.  Only files that appear in some label row
/// count; findings elsewhere are ignored.  In line mode a finding matches a
/// label of the same (file, smell) within `tolerance` lines, one-to-one,
/// closest pairs first.  In file mode any finding of the smell in the file
/// matches.  Clean labels contribute TNs when no finding hits them and FPs
/// otherwise (a finding can confirm at most one clean label miss).
MetricsSummary score_findings(const std::vector<FindingRef>& findings,
                              const std::vector<LabelRow>& labels,
                              MatchMode mode, long long tolerance,
                              MacroPolicy policy);

/// Micro/macro aggregation over externally supplied per-smell counts.
MetricsSummary metrics_from_confusions(
    const std::map<std::string, Confusion>& per_smell, MacroPolicy policy);

/// Fleiss' kappa.  `table[i][j]` counts raters assigning subject i to
/// category j; every row must sum to the same number of raters (>= 2).
/// Returns 1.0 when expected agreement is 1.  Throws std::invalid_argument
/// on ragged or empty input.
double fleiss_kappa(const std::vector<std::vector<long long>>& table);

}  // namespace llmlint
