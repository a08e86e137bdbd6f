#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "llmlint/evaluation.hpp"

namespace llmlint {

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower_copy(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim_copy(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::optional<double> ratio(long long num, long long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

/// Mean of the defined values under the macro policy; records smells whose
/// value was undefined.
std::optional<double> macro_mean(
    const std::vector<SmellMetrics>& rows,
    std::optional<double> SmellMetrics::*member, MacroPolicy policy,
    std::set<std::string>& excluded) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (const SmellMetrics& row : rows) {
    const std::optional<double>& v = row.*member;
    if (v) {
      sum += *v;
      ++counted;
    } else if (policy == MacroPolicy::zero_fill) {
      ++counted;  // contributes 0
    } else {
      excluded.insert(row.smell);
    }
  }
  if (counted == 0) return std::nullopt;
  return sum / static_cast<double>(counted);
}

MetricsSummary summarize(std::map<std::string, Confusion> per_smell,
                         MacroPolicy policy) {
  MetricsSummary out;
  out.policy = policy;
  for (auto& [smell, counts] : per_smell) {
    SmellMetrics row;
    row.smell = smell;
    row.counts = counts;
    row.precision = precision(counts);
    row.recall = recall(counts);
    row.f1 = f1_score(counts);
    out.micro.tp += counts.tp;
    out.micro.fp += counts.fp;
    out.micro.fn += counts.fn;
    out.micro.tn += counts.tn;
    out.per_smell.push_back(std::move(row));
  }
  out.micro_precision = precision(out.micro);
  out.micro_recall = recall(out.micro);
  out.micro_f1 = f1_score(out.micro);

  std::set<std::string> excluded;
  out.macro_precision =
      macro_mean(out.per_smell, &SmellMetrics::precision, policy, excluded);
  out.macro_recall =
      macro_mean(out.per_smell, &SmellMetrics::recall, policy, excluded);
  // Macro F1 is the mean of per-smell F1 scores, not the harmonic mean of
  // the macro precision/recall.
  out.macro_f1 = macro_mean(out.per_smell, &SmellMetrics::f1, policy, excluded);
  out.excluded_from_macro.assign(excluded.begin(), excluded.end());
  return out;
}

}  // namespace

std::optional<double> precision(const Confusion& c) {
  return ratio(c.tp, c.tp + c.fp);
}

std::optional<double> recall(const Confusion& c) {
  return ratio(c.tp, c.tp + c.fn);
}

std::optional<double> f1_score(const Confusion& c) {
  auto p = precision(c);
  auto r = recall(c);
  if (!p || !r) return std::nullopt;
  if (*p + *r == 0.0) return std::nullopt;
  return 2.0 * *p * *r / (*p + *r);
}

std::vector<LabelRow> load_labels_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open labels file: " + path);
  std::vector<LabelRow> rows;
  std::set<std::tuple<std::string, std::string, long long>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = trim_copy(line);
    if (body.empty() || body.front() == '#') continue;
    std::vector<std::string> fields = split_csv(body);
    if (line_no == 1 && fields.size() >= 4 &&
        lower_copy(fields[0]) == "file" && lower_copy(fields[1]) == "smell")
      continue;  // header
    if (fields.size() != 4)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected 'file,smell,line,verdict'");
    LabelRow row;
    row.file = fields[0];
    row.smell = fields[1];
    char* end = nullptr;
    row.line = std::strtoll(fields[2].c_str(), &end, 10);
    if (fields[2].empty() || (end && *end != '\0'))
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": line must be an integer");
    std::string verdict = lower_copy(fields[3]);
    if (verdict == "smell")
      row.positive = true;
    else if (verdict == "clean")
      row.positive = false;
    else
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": verdict must be 'smell' or 'clean'");
    if (!seen.insert({row.file, row.smell, row.line}).second)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": duplicate label for (" + row.file + ", " +
                                  row.smell + ", " + fields[2] + ")");
    rows.push_back(std::move(row));
  }
  return rows;
}

MetricsSummary score_findings(const std::vector<FindingRef>& findings,
                              const std::vector<LabelRow>& labels,
                              MatchMode mode, long long tolerance,
                              MacroPolicy policy) {
  if (tolerance < 0) throw std::invalid_argument("tolerance must be >= 0");

  std::set<std::string> labeled_files;
  for (const LabelRow& l : labels) labeled_files.insert(l.file);

  // Group by (file, smell).
  struct Group {
    std::vector<long long> finding_lines;
    std::vector<long long> positive_lines;
    std::vector<long long> clean_lines;
  };
  std::map<std::pair<std::string, std::string>, Group> groups;
  for (const FindingRef& f : findings) {
    if (!labeled_files.count(f.file)) continue;  // unlabeled file: ignored
    groups[{f.file, f.smell}].finding_lines.push_back(f.line);
  }
  for (const LabelRow& l : labels) {
    Group& g = groups[{l.file, l.smell}];
    (l.positive ? g.positive_lines : g.clean_lines).push_back(l.line);
  }

  std::map<std::string, Confusion> per_smell;
  for (auto& [key, g] : groups) {
    Confusion& c = per_smell[key.second];
    if (mode == MatchMode::file) {
      long long tp = std::min(g.finding_lines.size(), g.positive_lines.size());
      c.tp += tp;
      c.fp += static_cast<long long>(g.finding_lines.size()) - tp;
      c.fn += static_cast<long long>(g.positive_lines.size()) - tp;
      if (g.finding_lines.empty())
        c.tn += static_cast<long long>(g.clean_lines.size());
      continue;
    }
    // Line mode: greedy one-to-one matching, closest pairs first.
    struct Pair {
      long long distance;
      long long finding_line;
      long long label_line;
      std::size_t fi;
      std::size_t li;
    };
    std::vector<Pair> pairs;
    for (std::size_t fi = 0; fi < g.finding_lines.size(); ++fi)
      for (std::size_t li = 0; li < g.positive_lines.size(); ++li) {
        long long d = std::llabs(g.finding_lines[fi] - g.positive_lines[li]);
        if (d <= tolerance)
          pairs.push_back({d, g.finding_lines[fi], g.positive_lines[li], fi, li});
      }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.distance != b.distance) return a.distance < b.distance;
      if (a.finding_line != b.finding_line)
        return a.finding_line < b.finding_line;
      return a.label_line < b.label_line;
    });
    std::vector<bool> finding_used(g.finding_lines.size(), false);
    std::vector<bool> label_used(g.positive_lines.size(), false);
    long long tp = 0;
    for (const Pair& p : pairs) {
      if (finding_used[p.fi] || label_used[p.li]) continue;
      finding_used[p.fi] = true;
      label_used[p.li] = true;
      ++tp;
    }
    c.tp += tp;
    c.fp += static_cast<long long>(g.finding_lines.size()) - tp;
    c.fn += static_cast<long long>(g.positive_lines.size()) - tp;
    for (long long clean_line : g.clean_lines) {
      bool hit = false;
      for (long long f_line : g.finding_lines)
        if (std::llabs(f_line - clean_line) <= tolerance) {
          hit = true;
          break;
        }
      if (!hit) ++c.tn;
    }
  }
  return summarize(std::move(per_smell), policy);
}

MetricsSummary metrics_from_confusions(
    const std::map<std::string, Confusion>& per_smell, MacroPolicy policy) {
  return summarize(per_smell, policy);
}

double fleiss_kappa(const std::vector<std::vector<long long>>& table) {
  if (table.empty() || table.front().empty())
    throw std::invalid_argument("agreement table must be non-empty");
  const std::size_t categories = table.front().size();
  long long raters = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].size() != categories)
      throw std::invalid_argument("agreement table rows must be equal length");
    long long row_sum = 0;
    for (long long v : table[i]) {
      if (v < 0) throw std::invalid_argument("counts must be non-negative");
      row_sum += v;
    }
    if (i == 0) {
      raters = row_sum;
      if (raters < 2)
        throw std::invalid_argument("each subject needs at least two ratings");
    } else if (row_sum != raters) {
      throw std::invalid_argument(
          "every subject must be rated by the same number of raters");
    }
  }

  const double n = static_cast<double>(table.size());
  const double r = static_cast<double>(raters);
  double p_bar = 0.0;
  std::vector<double> p_j(categories, 0.0);
  for (const auto& row : table) {
    double agree = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      double v = static_cast<double>(row[j]);
      agree += v * (v - 1.0);
      p_j[j] += v;
    }
    p_bar += agree / (r * (r - 1.0));
  }
  p_bar /= n;
  double p_e = 0.0;
  for (double total : p_j) {
    double share = total / (n * r);
    p_e += share * share;
  }
  if (p_e >= 1.0) return 1.0;
  return (p_bar - p_e) / (1.0 - p_e);
}

}  // namespace llmlint
