#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "llmlint/rules.hpp"

namespace llmlint {

namespace {

// --- rule language tokenizer ---------------------------------------------

struct RuleToken {
  enum Kind { word, str, punct, eof } kind = eof;
  std::string text;
  int line = 1;
  int column = 0;
};

class RuleLexer {
 public:
  RuleLexer(const std::string& text, const std::string& origin)
      : text_(text), origin_(origin) {}

  RuleToken next() {
    skip_space();
    RuleToken t;
    t.line = line_;
    t.column = column_;
    if (i_ >= text_.size()) return t;
    char c = text_[i_];
    if (c == '"') {
      t.kind = RuleToken::str;
      advance();
      while (i_ < text_.size() && text_[i_] != '"') {
        if (text_[i_] == '\\' && i_ + 1 < text_.size()) advance();
        if (text_[i_] == '\n') error("unterminated string", t.line, t.column);
        t.text += text_[i_];
        advance();
      }
      if (i_ >= text_.size()) error("unterminated string", t.line, t.column);
      advance();  // closing quote
      return t;
    }
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
      t.kind = RuleToken::word;
      while (i_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[i_])) ||
              text_[i_] == '_' || text_[i_] == '-')) {
        t.text += text_[i_];
        advance();
      }
      return t;
    }
    if (std::string_view("{}():.,").find(c) != std::string_view::npos) {
      t.kind = RuleToken::punct;
      t.text = c;
      advance();
      return t;
    }
    error(std::string("unexpected character '") + c + "'", line_, column_);
  }

  [[noreturn]] void error(const std::string& msg, int line, int column) const {
    throw RuleParseError(origin_ + ":" + std::to_string(line) + ":" +
                             std::to_string(column) + ": " + msg,
                         line, column);
  }

 private:
  void skip_space() {
    while (i_ < text_.size()) {
      char c = text_[i_];
      if (c == '#') {
        while (i_ < text_.size() && text_[i_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }
  void advance() {
    if (text_[i_] == '\n') {
      ++line_;
      column_ = 0;
    } else {
      ++column_;
    }
    ++i_;
  }

  const std::string& text_;
  std::string origin_;
  std::size_t i_ = 0;
  int line_ = 1;
  int column_ = 0;
};

const std::set<std::string_view> k_categories = {"structural-or-api-usage",
                                                 "data-semantics", "protocol"};
const std::set<std::string_view> k_severities = {"info", "warning", "error"};

class RuleParser {
 public:
  RuleParser(const std::string& text, const std::string& origin)
      : lexer_(text, origin) {
    cur_ = lexer_.next();
  }

  std::vector<Rule> parse() {
    std::vector<Rule> rules;
    std::set<std::string> names;
    while (cur_.kind != RuleToken::eof) {
      Rule r = parse_rule();
      if (!names.insert(r.name).second)
        lexer_.error("duplicate rule name '" + r.name + "'", name_line_,
                     name_column_);
      rules.push_back(std::move(r));
    }
    return rules;
  }

 private:
  RuleToken take() {
    RuleToken t = cur_;
    cur_ = lexer_.next();
    return t;
  }
  bool at_word(std::string_view w) const {
    return cur_.kind == RuleToken::word && cur_.text == w;
  }
  bool at_punct(char c) const {
    return cur_.kind == RuleToken::punct && cur_.text[0] == c;
  }
  void expect_punct(char c, const char* ctx) {
    if (!at_punct(c))
      lexer_.error(std::string("expected '") + c + "' " + ctx, cur_.line,
                   cur_.column);
    take();
  }
  std::string expect_word(const char* ctx) {
    if (cur_.kind != RuleToken::word)
      lexer_.error(std::string("expected identifier ") + ctx, cur_.line,
                   cur_.column);
    return take().text;
  }

  Rule parse_rule() {
    if (!at_word("rule"))
      lexer_.error("expected 'rule'", cur_.line, cur_.column);
    take();
    Rule r;
    name_line_ = cur_.line;
    name_column_ = cur_.column;
    r.name = expect_word("after 'rule'");
    r.smell = r.name;
    expect_punct('{', "after rule name");
    bool saw_forall = false;
    while (!at_punct('}')) {
      if (cur_.kind == RuleToken::eof)
        lexer_.error("unterminated rule body", cur_.line, cur_.column);
      std::string attr = expect_word("in rule body");
      if (attr == "forall") {
        parse_quantifier(r);
        saw_forall = true;
        break;
      }
      if (saw_forall)
        lexer_.error("attributes must precede 'forall'", cur_.line,
                     cur_.column);
      if (attr == "smell") {
        r.smell = expect_word("after 'smell'");
      } else if (attr == "category") {
        RuleToken at = cur_;
        r.category = expect_word("after 'category'");
        if (!k_categories.count(r.category))
          lexer_.error("unknown category '" + r.category + "'", at.line,
                       at.column);
      } else if (attr == "severity") {
        RuleToken at = cur_;
        r.severity = expect_word("after 'severity'");
        if (!k_severities.count(r.severity))
          lexer_.error("unknown severity '" + r.severity + "'", at.line,
                       at.column);
      } else if (attr == "message") {
        if (cur_.kind != RuleToken::str)
          lexer_.error("expected quoted string after 'message'", cur_.line,
                       cur_.column);
        r.message = take().text;
      } else if (attr == "effects") {
        r.effects.push_back(expect_word("after 'effects'"));
        while (at_punct(',')) {
          take();
          r.effects.push_back(expect_word("in effects list"));
        }
      } else if (attr == "kwargs_guard") {
        RuleToken at = cur_;
        std::string v = expect_word("after 'kwargs_guard'");
        if (v == "on")
          r.kwargs_guard = true;
        else if (v == "off")
          r.kwargs_guard = false;
        else
          lexer_.error("kwargs_guard must be 'on' or 'off'", at.line,
                       at.column);
      } else {
        lexer_.error("unknown rule attribute '" + attr + "'", cur_.line,
                     cur_.column);
      }
    }
    if (!saw_forall)
      lexer_.error("rule '" + r.name + "' has no 'forall' clause", cur_.line,
                   cur_.column);
    expect_punct('}', "after rule body");
    if (r.message.empty())
      r.message = "rule " + r.name + " matched at {path}:{line}";
    return r;
  }

  void parse_quantifier(Rule& r) {
    r.var = expect_word("after 'forall'");
    expect_punct(':', "after quantifier variable");
    std::string domain = expect_word("after ':'");
    if (domain != "Call")
      lexer_.error("unknown quantifier domain '" + domain + "'", cur_.line,
                   cur_.column);
    expect_punct('.', "after 'Call'");
    for (;;) {
      RuleTerm term;
      if (at_word("not")) {
        take();
        term.negated = true;
      }
      RuleToken at = cur_;
      term.predicate = expect_word("as predicate name");
      if (!predicate_registry().count(term.predicate))
        lexer_.error("unknown predicate '" + term.predicate + "'", at.line,
                     at.column);
      expect_punct('(', "after predicate name");
      RuleToken var_tok = cur_;
      std::string var = expect_word("as predicate argument");
      if (var != r.var)
        lexer_.error("predicate argument '" + var +
                         "' does not match quantified variable '" + r.var + "'",
                     var_tok.line, var_tok.column);
      expect_punct(')', "after predicate argument");
      r.terms.push_back(std::move(term));
      if (at_word("and")) {
        take();
        continue;
      }
      break;
    }
  }

  RuleLexer lexer_;
  RuleToken cur_;
  int name_line_ = 1;    // position of the current rule's name token,
  int name_column_ = 0;  // used by duplicate-name diagnostics
};

constexpr const char* k_builtin_rules = R"rules(
# Built-in LLM integration smell rules.

rule no-structured-output {
  smell NSO
  category data-semantics
  severity warning
  effects robustness, reliability
  message "text-generating call leaves the output format unconstrained (no response schema, tools, or structured-output chain)"
  forall c: Call . isTextGeneratingCall(c) and hasNoStructuredOutput(c)
}

rule unbounded-metrics {
  smell UMM
  category protocol
  severity warning
  effects robustness, performance, maintainability
  kwargs_guard on
  message "LLM call sets no bound on tokens, retries, or timeout"
  forall c: Call . isLLMCall(c) and hasNoBoundedMetrics(c)
}

rule temperature-not-explicit {
  smell TNES
  category protocol
  severity warning
  effects maintainability, reliability
  kwargs_guard on
  message "sampling temperature is left at the provider default"
  forall c: Call . isTextGeneratingCall(c) and requiresTemperature(c) and hasNoTemperatureParameter(c)
}

rule no-model-version-pinning {
  smell NMVP
  category protocol
  severity warning
  effects maintainability, reliability
  message "model '{model}' is not pinned to a specific version"
  forall c: Call . isLLMCall(c) and hasNoModelVersionPinning(c)
}

rule no-system-message {
  smell NSM
  category structural-or-api-usage
  severity warning
  effects maintainability, reliability
  message "role-based chat sends no system message"
  forall c: Call . isRoleBasedLLMChat(c) and hasNoSystemMessage(c)
}

rule reasoning-effort-not-explicit {
  smell RENES
  category protocol
  severity warning
  effects robustness, performance, maintainability, reliability
  message "reasoning model '{model}' called without an explicit reasoning-effort setting"
  forall c: Call . isReasoningModelCall(c) and hasNoReasoningEffort(c)
}

rule raw-vision-payload {
  smell RVP
  category data-semantics
  severity warning
  effects performance, maintainability
  message "vision call sends image content without preprocessing or an explicit detail level"
  forall c: Call . isVisionModelCall(c) and hasImageContent(c) and not hasImagePreprocessing(c) and not hasExplicitDetailLevel(c)
}

rule overspecified-sampling {
  smell OSP
  category protocol
  severity warning
  effects maintainability, reliability
  message "temperature is combined with top_p/top_k; providers advise altering only one"
  forall c: Call . hasOverspecifiedSampling(c)
}

rule missing-user-attribution {
  smell AIC
  category structural-or-api-usage
  severity warning
  effects robustness, maintainability
  kwargs_guard on
  message "multi-user context reaches the LLM call without per-user attribution"
  forall c: Call . isLLMCall(c) and hasMultiUserContext(c) and not hasUserAttribution(c)
}
)rules";

std::string interpolate(std::string_view tmpl, const std::string& path,
                        int line, const std::string& model) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      if (tmpl.substr(i, 6) == "{path}") {
        out += path;
        i += 6;
        continue;
      }
      if (tmpl.substr(i, 6) == "{line}") {
        out += std::to_string(line);
        i += 6;
        continue;
      }
      if (tmpl.substr(i, 7) == "{model}") {
        out += model;
        i += 7;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace

std::vector<Rule> parse_rules(const std::string& text,
                              const std::string& origin) {
  return RuleParser(text, origin).parse();
}

std::vector<Rule> load_rules_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuleParseError("cannot open rules file: " + path, 0, 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rules(buf.str(), path);
}

const std::vector<Rule>& builtin_rules() {
  static const std::vector<Rule> rules =
      parse_rules(k_builtin_rules, "<builtin>");
  return rules;
}

std::vector<Finding> evaluate_rules(const AnalysisContext& ctx,
                                    const std::vector<Rule>& rules,
                                    const Deadline& deadline) {
  std::vector<Finding> findings;
  if (!ctx.tree.ok()) return findings;
  std::vector<CallSite> sites = iter_call_sites(ctx.tree);
  for (const CallSite& site : sites) {
    deadline.check();
    for (const Rule& rule : rules) {
      if (rule.kwargs_guard && site.has_starred_kwargs) continue;
      bool matched = true;
      for (const RuleTerm& term : rule.terms) {
        PredicateFn fn = predicate_registry().at(term.predicate);
        if (fn(ctx, site) == term.negated) {
          matched = false;
          break;
        }
      }
      if (!matched) continue;
      const SyntaxNode& node = ctx.tree.node(site.node);
      Finding f;
      f.smell = rule.smell;
      f.rule = rule.name;
      f.category = rule.category;
      f.effects = rule.effects;
      std::sort(f.effects.begin(), f.effects.end());
      f.effects.erase(std::unique(f.effects.begin(), f.effects.end()),
                      f.effects.end());
      f.severity = rule.severity;
      f.path = ctx.tree.path();
      f.span = node.span;
      auto model = resolved_model(ctx, site);
      f.message = interpolate(rule.message, f.path, node.span.begin.line,
                              model.value_or("unknown"));
      f.evidence = std::string(ctx.tree.text(site.node));
      f.callee = ctx.bindings.canonical_callee(site);
      findings.push_back(std::move(f));
    }
  }
  std::sort(findings.begin(), findings.end(),
            [](const Finding& a, const Finding& b) {
              if (a.path != b.path) return a.path < b.path;
              if (a.span.begin.line != b.span.begin.line)
                return a.span.begin.line < b.span.begin.line;
              if (a.span.begin.column != b.span.begin.column)
                return a.span.begin.column < b.span.begin.column;
              return a.smell < b.smell;
            });
  return findings;
}

}  // namespace llmlint
