// Tests for confusion metrics, label scoring, aggregation policies, and
// Fleiss' kappa.
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "llmlint/evaluation.hpp"

using namespace llmlint;
namespace fs = std::filesystem;

#ifndef LLMLINT_TEST_DATA_DIR
#error "LLMLINT_TEST_DATA_DIR must be defined by the build"
#endif

namespace {

const std::string kData = LLMLINT_TEST_DATA_DIR;

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& content) {
    path = fs::temp_directory_path() /
           ("llmlint-labels-" + std::to_string(std::random_device{}()) +
            ".csv");
    std::ofstream(path) << content;
  }
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

const SmellMetrics& row(const MetricsSummary& s, const std::string& smell) {
  for (const SmellMetrics& m : s.per_smell)
    if (m.smell == smell) return m;
  REQUIRE_MESSAGE(false, "missing smell row: " << smell);
  static SmellMetrics dummy;
  return dummy;
}

}  // namespace

TEST_CASE("precision/recall/f1: defined and undefined denominators") {
  Confusion c{8, 2, 2, 88};
  CHECK(precision(c).value() == doctest::Approx(0.8));
  CHECK(recall(c).value() == doctest::Approx(0.8));
  CHECK(f1_score(c).value() == doctest::Approx(0.8));

  Confusion no_predictions{0, 0, 3, 10};
  CHECK(!precision(no_predictions).has_value());
  CHECK(recall(no_predictions).value() == doctest::Approx(0.0));
  CHECK(!f1_score(no_predictions).has_value());

  Confusion no_positives{0, 2, 0, 10};
  CHECK(precision(no_positives).value() == doctest::Approx(0.0));
  CHECK(!recall(no_positives).has_value());
  CHECK(!f1_score(no_positives).has_value());

  Confusion all_zero{0, 0, 0, 5};
  CHECK(!precision(all_zero).has_value());
  CHECK(!recall(all_zero).has_value());
  CHECK(!f1_score(all_zero).has_value());

  // P and R both defined but zero -> harmonic mean undefined (0/0).
  Confusion both_zero{0, 1, 1, 0};
  CHECK(precision(both_zero).value() == doctest::Approx(0.0));
  CHECK(recall(both_zero).value() == doctest::Approx(0.0));
  CHECK(!f1_score(both_zero).has_value());
}

TEST_CASE("load_labels_csv: fixture with header parses in order") {
  auto labels = load_labels_csv(kData + "/eval/labels.csv");
  REQUIRE(labels.size() == 5);
  CHECK(labels[0].file == "a.py");
  CHECK(labels[0].smell == "TNES");
  CHECK(labels[0].line == 3);
  CHECK(labels[0].positive);
  CHECK(labels[2].smell == "NSO");
  CHECK(!labels[2].positive);  // verdict "clean"
  CHECK(labels[3].file == "b.py");
  CHECK(labels[4].smell == "UMM");
  CHECK(!labels[4].positive);
}

TEST_CASE("load_labels_csv: headerless input and case-insensitive verdicts") {
  TempFile f("x.py,NSO,4,SMELL\nx.py,NSO,9,Clean\n");
  auto labels = load_labels_csv(f.path.string());
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].positive);
  CHECK(!labels[1].positive);
}

TEST_CASE("load_labels_csv: malformed rows and duplicates throw") {
  SUBCASE("bad verdict") {
    TempFile f("x.py,NSO,4,maybe\n");
    CHECK_THROWS_AS(load_labels_csv(f.path.string()), std::invalid_argument);
  }
  SUBCASE("non-numeric line") {
    TempFile f("x.py,NSO,four,smell\n");
    CHECK_THROWS_AS(load_labels_csv(f.path.string()), std::invalid_argument);
  }
  SUBCASE("too few fields") {
    TempFile f("x.py,NSO\n");
    CHECK_THROWS_AS(load_labels_csv(f.path.string()), std::invalid_argument);
  }
  SUBCASE("duplicate key") {
    TempFile f("x.py,NSO,4,smell\nx.py,NSO,4,clean\n");
    CHECK_THROWS_AS(load_labels_csv(f.path.string()), std::invalid_argument);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_labels_csv("/nonexistent/labels.csv"),
                    std::invalid_argument);
  }
}

TEST_CASE("score_findings: line mode against the fixture scenario") {
  // Labels: a.py TNES@3 smell, a.py TNES@10 smell, a.py NSO@3 clean,
  //         b.py TNES@5 smell, b.py UMM@5 clean.
  auto labels = load_labels_csv(kData + "/eval/labels.csv");
  std::vector<FindingRef> findings = {
      {"a.py", "TNES", 3},  // exact hit -> TP
      {"a.py", "TNES", 12}, // 2 lines off the @10 label -> FP + FN at tol 0
      {"a.py", "NSO", 3},   // hits the clean label -> FP
      // c.py findings are outside the labeled universe and must be ignored.
      {"c.py", "TNES", 1},
  };

  SUBCASE("tolerance 0") {
    MetricsSummary s = score_findings(findings, labels, MatchMode::line, 0,
                                      MacroPolicy::drop_undefined);
    const SmellMetrics& tnes = row(s, "TNES");
    CHECK(tnes.counts.tp == 1);
    CHECK(tnes.counts.fp == 1);
    CHECK(tnes.counts.fn == 2);  // a.py@10 and b.py@5 unmatched
    CHECK(tnes.counts.tn == 0);
    CHECK(tnes.precision.value() == doctest::Approx(0.5));
    CHECK(tnes.recall.value() == doctest::Approx(1.0 / 3.0));
    CHECK(tnes.f1.value() == doctest::Approx(0.4));

    const SmellMetrics& nso = row(s, "NSO");
    CHECK(nso.counts.tp == 0);
    CHECK(nso.counts.fp == 1);
    CHECK(nso.counts.fn == 0);
    CHECK(nso.counts.tn == 0);
    CHECK(nso.precision.value() == doctest::Approx(0.0));
    CHECK(!nso.recall.has_value());

    const SmellMetrics& umm = row(s, "UMM");
    CHECK(umm.counts.tp == 0);
    CHECK(umm.counts.fp == 0);
    CHECK(umm.counts.fn == 0);
    CHECK(umm.counts.tn == 1);  // untouched clean label
    CHECK(!umm.precision.has_value());

    CHECK(s.micro.tp == 1);
    CHECK(s.micro.fp == 2);
    CHECK(s.micro.fn == 2);
    CHECK(s.micro.tn == 1);
    CHECK(s.micro_precision.value() == doctest::Approx(1.0 / 3.0));
    CHECK(s.micro_recall.value() == doctest::Approx(1.0 / 3.0));
    CHECK(s.micro_f1.value() == doctest::Approx(1.0 / 3.0));

    // Macro drop-undefined: P over {TNES, NSO}, R over {TNES}, F1 over {TNES}.
    CHECK(s.macro_precision.value() == doctest::Approx(0.25));
    CHECK(s.macro_recall.value() == doctest::Approx(1.0 / 3.0));
    CHECK(s.macro_f1.value() == doctest::Approx(0.4));
    CHECK(s.excluded_from_macro == std::vector<std::string>{"NSO", "UMM"});
  }

  SUBCASE("tolerance 2 pairs the near miss") {
    MetricsSummary s = score_findings(findings, labels, MatchMode::line, 2,
                                      MacroPolicy::drop_undefined);
    const SmellMetrics& tnes = row(s, "TNES");
    CHECK(tnes.counts.tp == 2);
    CHECK(tnes.counts.fp == 0);
    CHECK(tnes.counts.fn == 1);  // only b.py@5 unmatched now
  }
}

TEST_CASE("score_findings: one-to-one matching, closest pairs first") {
  std::vector<LabelRow> labels = {
      {"a.py", "NSO", 10, true},
      {"a.py", "NSO", 14, true},
  };
  // One finding between both labels: it must consume exactly one (the closer).
  std::vector<FindingRef> findings = {{"a.py", "NSO", 11}};
  MetricsSummary s = score_findings(findings, labels, MatchMode::line, 5,
                                    MacroPolicy::drop_undefined);
  const SmellMetrics& nso = row(s, "NSO");
  CHECK(nso.counts.tp == 1);
  CHECK(nso.counts.fp == 0);
  CHECK(nso.counts.fn == 1);
}

TEST_CASE("score_findings: file mode ignores line numbers") {
  std::vector<LabelRow> labels = {
      {"a.py", "TNES", 3, true},
      {"a.py", "TNES", 40, true},
      {"b.py", "NSO", 1, false},
      {"c.py", "UMM", 1, true},
  };
  std::vector<FindingRef> findings = {
      {"a.py", "TNES", 999},  // matches one positive label
      {"b.py", "NSO", 5},     // spoils the clean label -> FP
  };
  MetricsSummary s = score_findings(findings, labels, MatchMode::file, 0,
                                    MacroPolicy::drop_undefined);
  const SmellMetrics& tnes = row(s, "TNES");
  CHECK(tnes.counts.tp == 1);
  CHECK(tnes.counts.fn == 1);  // the second positive label stays uncovered
  const SmellMetrics& nso = row(s, "NSO");
  CHECK(nso.counts.fp == 1);
  CHECK(nso.counts.tn == 0);
  const SmellMetrics& umm = row(s, "UMM");
  CHECK(umm.counts.fn == 1);
}

TEST_CASE("metrics_from_confusions: drop-undefined vs zero-fill") {
  std::map<std::string, Confusion> per_smell = {
      {"A", {0, 0, 0, 10}},  // nothing predicted, nothing labeled
      {"B", {5, 0, 5, 0}},   // P = 1, R = 0.5, F1 = 2/3
  };

  SUBCASE("drop-undefined excludes A and reports it") {
    MetricsSummary s =
        metrics_from_confusions(per_smell, MacroPolicy::drop_undefined);
    REQUIRE(s.per_smell.size() == 2);
    CHECK(s.per_smell[0].smell == "A");  // sorted by name
    CHECK(s.macro_precision.value() == doctest::Approx(1.0));
    CHECK(s.macro_recall.value() == doctest::Approx(0.5));
    CHECK(s.macro_f1.value() == doctest::Approx(2.0 / 3.0));
    CHECK(s.excluded_from_macro == std::vector<std::string>{"A"});
    CHECK(s.micro.tp == 5);
    CHECK(s.micro.tn == 10);
    CHECK(s.micro_precision.value() == doctest::Approx(1.0));
    CHECK(s.micro_recall.value() == doctest::Approx(0.5));
  }

  SUBCASE("zero-fill averages undefined dimensions as zero") {
    MetricsSummary s =
        metrics_from_confusions(per_smell, MacroPolicy::zero_fill);
    CHECK(s.macro_precision.value() == doctest::Approx(0.5));
    CHECK(s.macro_recall.value() == doctest::Approx(0.25));
    CHECK(s.macro_f1.value() == doctest::Approx(1.0 / 3.0));
    CHECK(s.excluded_from_macro.empty());
  }

  SUBCASE("all rows undefined leaves the macro undefined") {
    std::map<std::string, Confusion> empty_rows = {{"A", {0, 0, 0, 1}}};
    MetricsSummary s =
        metrics_from_confusions(empty_rows, MacroPolicy::drop_undefined);
    CHECK(!s.macro_precision.has_value());
    CHECK(!s.macro_recall.has_value());
    CHECK(!s.macro_f1.has_value());
  }
}

TEST_CASE("fleiss_kappa: hand-worked four-subject example") {
  // 3 raters, 2 categories; rows (3,0), (2,1), (1,2), (0,3).
  // P_i per row: 1, 1/3, 1/3, 1 -> P-bar = 2/3.
  // Column shares: 0.5/0.5 -> P_e = 0.5.  kappa = (2/3 - 1/2)/(1 - 1/2) = 1/3.
  std::vector<std::vector<long long>> table = {
      {3, 0}, {2, 1}, {1, 2}, {0, 3}};
  CHECK(fleiss_kappa(table) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("fleiss_kappa: perfect agreement and degenerate cases") {
  SUBCASE("perfect agreement is 1") {
    std::vector<std::vector<long long>> table = {{4, 0}, {0, 4}, {4, 0}};
    CHECK(fleiss_kappa(table) == doctest::Approx(1.0));
  }
  SUBCASE("single category forces P_e = 1, defined as 1.0") {
    std::vector<std::vector<long long>> table = {{3, 0}, {3, 0}};
    CHECK(fleiss_kappa(table) == doctest::Approx(1.0));
  }
  SUBCASE("worse than chance goes negative") {
    std::vector<std::vector<long long>> table = {{1, 1}, {1, 1}};
    CHECK(fleiss_kappa(table) < 0.0);  // P-bar = 0, P_e = 0.5 -> kappa = -1
  }
}

TEST_CASE("fleiss_kappa: invalid tables throw") {
  CHECK_THROWS_AS(fleiss_kappa({}), std::invalid_argument);
  CHECK_THROWS_AS(fleiss_kappa({{2, 1}, {1, 1}}),  // ragged rater counts
                  std::invalid_argument);
  CHECK_THROWS_AS(fleiss_kappa({{1, 0}, {0, 1}}),  // single rater
                  std::invalid_argument);
  CHECK_THROWS_AS(fleiss_kappa({{-1, 4}, {1, 2}}),  // negative count
                  std::invalid_argument);
}
