// Declarative rule language: each rule quantifies over call sites and
// conjoins (possibly negated) predicates.  Built-in rules cover the nine
// LLM-integration smells; user rule files can replace or extend them.
//
//   rule no-structured-output {
//     smell NSO
//     category data-semantics
//     severity warning
//     effects robustness, reliability
//     message "..."
//     forall c: Call . isTextGeneratingCall(c) and hasNoStructuredOutput(c)
//   }
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "llmlint/predicates.hpp"
#include "llmlint/syntax.hpp"

namespace llmlint {

struct RuleTerm {
  bool negated = false;
  std::string predicate;  // registry name, e.g. "isLLMCall"
};

struct Rule {
  std::string name;
  std::string smell;      // defaults to the rule name
  std::string category = "structural-or-api-usage";
  std::string severity = "warning";
  std::string message;    // templates: {path} {line} {model}
  std::vector<std::string> effects;
  bool kwargs_guard = false;  // suppress when the call forwards **kwargs
  std::string var;
  std::vector<RuleTerm> terms;
};

struct RuleParseError : std::runtime_error {
  RuleParseError(std::string msg, int line, int column)
      : std::runtime_error(std::move(msg)), line(line), column(column) {}
  int line = 0;
  int column = 0;
};

/// Parses rule text; throws RuleParseError on syntax errors, unknown
/// predicates, bad attribute values, duplicate rule names, or terms applied
/// to a variable other than the quantified one.
std::vector<Rule> parse_rules(const std::string& text,
                              const std::string& origin = "<rules>");
std::vector<Rule> load_rules_file(const std::string& path);

/// The nine built-in smell rules (NSO, UMM, TNES, NMVP, NSM, RENES, RVP,
/// OSP, AIC), expressed in the rule language itself.
const std::vector<Rule>& builtin_rules();

/// One rule violation at one call site.
struct Finding {
  std::string smell;
  std::string rule;
  std::string category;
  std::vector<std::string> effects;
  std::string severity;
  std::string path;
  SourceSpan span;
  std::string message;
  std::string evidence;  // source slice of the call
  std::string callee;    // canonical callee path
};

/// Evaluates every rule against every call site of a parsed file.  Findings
/// come back sorted by (path, line, column, smell).
std::vector<Finding> evaluate_rules(const AnalysisContext& ctx,
                                    const std::vector<Rule>& rules,
                                    const Deadline& deadline = Deadline::none());

}  // namespace llmlint
