#include <doctest.h>

#include <string>

#include "llmlint/binding.hpp"
#include "llmlint/rules.hpp"

using namespace llmlint;

namespace {

const Rule* find_rule(const std::vector<Rule>& rules, std::string_view name) {
  for (const Rule& r : rules)
    if (r.name == name) return &r;
  return nullptr;
}

std::vector<Finding> run(const std::string& src,
                         const std::vector<Rule>& rules) {
  EnrichedTree tree = parse_source(src, "mem.py");
  REQUIRE(tree.ok());
  BindingTable bindings = BindingTable::build(tree);
  PatternTable patterns = PatternTable::defaults();
  AnalysisContext ctx{tree, bindings, patterns};
  return evaluate_rules(ctx, rules);
}

}  // namespace

TEST_CASE("builtin rules cover the nine smells with their metadata") {
  const std::vector<Rule>& rules = builtin_rules();
  REQUIRE(rules.size() == 9);

  struct Expected {
    const char* name;
    const char* smell;
    const char* category;
    bool guarded;
  };
  const Expected table[] = {
      {"no-structured-output", "NSO", "data-semantics", false},
      {"unbounded-metrics", "UMM", "protocol", true},
      {"temperature-not-explicit", "TNES", "protocol", true},
      {"no-model-version-pinning", "NMVP", "protocol", false},
      {"no-system-message", "NSM", "structural-or-api-usage", false},
      {"reasoning-effort-not-explicit", "RENES", "protocol", false},
      {"raw-vision-payload", "RVP", "data-semantics", false},
      {"overspecified-sampling", "OSP", "protocol", false},
      {"missing-user-attribution", "AIC", "structural-or-api-usage", true},
  };
  for (const Expected& e : table) {
    CAPTURE(e.name);
    const Rule* r = find_rule(rules, e.name);
    REQUIRE(r != nullptr);
    CHECK(r->smell == e.smell);
    CHECK(r->category == e.category);
    CHECK(r->severity == "warning");
    CHECK(r->kwargs_guard == e.guarded);
    CHECK(!r->effects.empty());
    CHECK(!r->message.empty());
  }

  // Spot-check rule bodies: AIC is the only builtin with a negated term.
  const Rule* aic = find_rule(rules, "missing-user-attribution");
  REQUIRE(aic->terms.size() == 3);
  CHECK(aic->terms[2].negated);
  CHECK(aic->terms[2].predicate == "hasUserAttribution");
  const Rule* rvp = find_rule(rules, "raw-vision-payload");
  REQUIRE(rvp->terms.size() == 4);
  CHECK(rvp->terms[2].negated);
  CHECK(rvp->terms[3].negated);
}

TEST_CASE("rule parsing: defaults and explicit attributes") {
  std::vector<Rule> rules = parse_rules(
      "rule bare {\n"
      "  forall c : Call . isLLMCall(c)\n"
      "}\n"
      "rule full {\n"
      "  smell XY\n"
      "  category protocol\n"
      "  severity error\n"
      "  message \"saw {model} at {path}:{line}\"\n"
      "  effects robustness, performance\n"
      "  kwargs_guard on\n"
      "  forall site : Call . isLLMCall(site) and not hasUserAttribution(site)\n"
      "}\n");
  REQUIRE(rules.size() == 2);
  CHECK(rules[0].smell == "bare");  // defaults to the rule name
  CHECK(rules[0].category == "structural-or-api-usage");
  CHECK(rules[0].severity == "warning");
  CHECK(rules[0].message == "rule bare matched at {path}:{line}");
  CHECK_FALSE(rules[0].kwargs_guard);

  CHECK(rules[1].smell == "XY");
  CHECK(rules[1].severity == "error");
  CHECK(rules[1].kwargs_guard);
  REQUIRE(rules[1].effects.size() == 2);
  REQUIRE(rules[1].terms.size() == 2);
  CHECK(rules[1].terms[1].negated);
}

TEST_CASE("rule parse errors carry origin, line and column") {
  auto expect_error = [](const std::string& text, const char* needle,
                         int line) {
    try {
      parse_rules(text, "t.rules");
      FAIL_CHECK("expected RuleParseError for: " << needle);
    } catch (const RuleParseError& e) {
      CAPTURE(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
      CHECK(std::string(e.what()).find("t.rules:") != std::string::npos);
      CHECK(e.line == line);
    }
  };

  expect_error("rule x {\n  forall c : Call . nothing(c)\n}\n",
               "unknown predicate", 2);
  expect_error("rule x {\n  category nonsense\n  forall c : Call . "
               "isLLMCall(c)\n}\n",
               "unknown category", 2);
  expect_error("rule x {\n  severity fatal\n  forall c : Call . "
               "isLLMCall(c)\n}\n",
               "unknown severity", 2);
  expect_error("rule x {\n  forall c : Call . isLLMCall(d)\n}\n",
               "does not match", 2);
  expect_error("rule x {\n  smell A\n}\n", "no 'forall'", 3);
  expect_error("rule x {\n  forall c : Site . isLLMCall(c)\n}\n",
               "unknown quantifier domain", 2);
  expect_error("rule x {\n  banner \"hi\"\n  forall c : Call . "
               "isLLMCall(c)\n}\n",
               "unknown rule attribute", 2);
  expect_error("rule x {\n  kwargs_guard maybe\n  forall c : Call . "
               "isLLMCall(c)\n}\n",
               "kwargs_guard", 2);
  // The diagnostic points at the second declaration's name token (line 4).
  expect_error(
      "rule x {\n  forall c : Call . isLLMCall(c)\n}\n"
      "rule x {\n  forall c : Call . isLLMCall(c)\n}\n",
      "duplicate rule name", 4);
  expect_error("rule x {\n  message \"unterminated\n}\n", "unterminated", 2);
}

TEST_CASE("evaluation: interpolation, sorting, evidence and callee") {
  std::vector<Rule> rules = parse_rules(
      "rule flag-unpinned {\n"
      "  severity error\n"
      "  message \"model {model} unpinned ({path}:{line})\"\n"
      "  forall c : Call . isLLMCall(c) and hasNoModelVersionPinning(c)\n"
      "}\n");
  std::vector<Finding> findings = run(
      "from openai import OpenAI\n"
      "client = OpenAI()\n"
      "a = client.chat.completions.create(model=\"gpt-4o\", messages=m)\n",
      rules);
  REQUIRE(findings.size() == 1);
  const Finding& f = findings[0];
  CHECK(f.smell == "flag-unpinned");
  CHECK(f.rule == "flag-unpinned");
  CHECK(f.severity == "error");
  CHECK(f.message == "model gpt-4o unpinned (mem.py:3)");
  CHECK(f.path == "mem.py");
  CHECK(f.span.begin.line == 3);
  CHECK(f.callee == "openai.OpenAI.chat.completions.create");
  CHECK(f.evidence ==
        "client.chat.completions.create(model=\"gpt-4o\", messages=m)");
}

TEST_CASE("evaluation: builtin findings sort by position then smell") {
  std::vector<Finding> findings = run(
      "r2 = openai.chat.completions.create(model=\"gpt-4o\", messages=m)\n"
      "r1 = openai.chat.completions.create(model=\"gpt-4o\", messages=m)\n",
      builtin_rules());
  // Per line: NMVP, NSO, TNES, UMM (messages stay unresolved, so no NSM).
  REQUIRE(findings.size() == 8);
  CHECK(findings[0].span.begin.line == 1);
  CHECK(findings[0].smell == "NMVP");
  CHECK(findings[1].smell == "NSO");
  CHECK(findings[2].smell == "TNES");
  CHECK(findings[3].smell == "UMM");
  CHECK(findings[4].span.begin.line == 2);
  CHECK(findings[4].smell == "NMVP");
}

TEST_CASE("evaluation: negated terms and kwargs guard") {
  // Fires only when temperature IS present (negation test).
  std::vector<Rule> inverted = parse_rules(
      "rule has-temp {\n"
      "  forall c : Call . isTextGeneratingCall(c) and not "
      "hasNoTemperatureParameter(c)\n"
      "}\n");
  CHECK(run("r = x.chat.completions.create(model=\"m\")\n", inverted).empty());
  CHECK(run("r = x.chat.completions.create(model=\"m\", temperature=1)\n",
            inverted)
            .size() == 1);

  // kwargs_guard suppresses matches on forwarding calls.
  std::vector<Rule> guarded = parse_rules(
      "rule g {\n"
      "  kwargs_guard on\n"
      "  forall c : Call . isTextGeneratingCall(c)\n"
      "}\n");
  CHECK(run("def f(**kw):\n"
            "    return x.chat.completions.create(model=\"m\", **kw)\n",
            guarded)
            .empty());
  CHECK(run("r = x.chat.completions.create(model=\"m\")\n", guarded).size() ==
        1);
}

TEST_CASE("evaluation: effects are sorted and deduplicated in findings") {
  std::vector<Rule> rules = parse_rules(
      "rule e {\n"
      "  effects reliability, robustness, reliability\n"
      "  forall c : Call . isLLMCall(c)\n"
      "}\n");
  std::vector<Finding> findings =
      run("r = x.chat.completions.create(model=\"m\")\n", rules);
  REQUIRE(findings.size() == 1);
  REQUIRE(findings[0].effects.size() == 2);
  CHECK(findings[0].effects[0] == "reliability");
  CHECK(findings[0].effects[1] == "robustness");
}

TEST_CASE("evaluation honors deadlines") {
  std::string src;
  for (int i = 0; i < 3000; ++i)
    src += "r = x.chat.completions.create(model=\"gpt-4o\", messages=m)\n";
  EnrichedTree tree = parse_source(src);
  REQUIRE(tree.ok());
  BindingTable bindings = BindingTable::build(tree);
  PatternTable patterns = PatternTable::defaults();
  AnalysisContext ctx{tree, bindings, patterns};
  CHECK_THROWS_AS(evaluate_rules(ctx, builtin_rules(), Deadline::after(0.0)),
                  TimeoutExceeded);
}
