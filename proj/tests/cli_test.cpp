// End-to-end tests driving the CLI in-process.
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "llmlint/cli.hpp"

using namespace llmlint;
using nlohmann::json;
namespace fs = std::filesystem;

#ifndef LLMLINT_TEST_DATA_DIR
#error "LLMLINT_TEST_DATA_DIR must be defined by the build"
#endif

namespace {

const std::string kData = LLMLINT_TEST_DATA_DIR;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines_with(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.find(needle) != std::string::npos) ++n;
  return n;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("llmlint-cli-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("analyze: text output and the findings exit code") {
  CliResult r = cli({"analyze", kData + "/listings/nmvp_faulty.py"});
  CHECK(r.code == 1);  // default --fail-on info
  CHECK(r.err.empty());
  CHECK(count_lines_with(r.out, " NMVP warning: ") == 1);
  CHECK(r.out.find(":1:") != std::string::npos);
  CHECK(r.out.find("file(s), 1 flagged\n") != std::string::npos);
}

TEST_CASE("analyze: --fail-on gates the exit code by severity") {
  SUBCASE("warnings below an error threshold exit 0") {
    CliResult r = cli({"analyze", kData + "/listings/nmvp_faulty.py",
                       "--fail-on", "error"});
    CHECK(r.code == 0);
  }
  SUBCASE("never always exits 0") {
    CliResult r = cli({"analyze", kData + "/listings/nmvp_faulty.py",
                       "--fail-on", "never"});
    CHECK(r.code == 0);
  }
  SUBCASE("clean file exits 0 at the default threshold") {
    CliResult r = cli({"analyze", kData + "/guards/non_llm_call.py"});
    CHECK(r.code == 0);
    CHECK(r.out.find("0 finding(s)") != std::string::npos);
  }
}

TEST_CASE("analyze: JSON format parses and carries totals") {
  CliResult r = cli({"analyze", kData + "/listings/osp_faulty.py", "--format",
                     "json", "--fail-on", "never"});
  CHECK(r.code == 0);
  json doc = json::parse(r.out);
  REQUIRE(doc["files"].size() == 1);
  CHECK(doc["files"][0]["status"] == "ok");
  CHECK(doc["files"][0].contains("duration_s"));  // timing on by default
  CHECK(doc["totals"]["flagged_files"] == 1);
  CHECK(doc["totals"]["occurrences_by_smell"]["OSP"] == 1);
}

TEST_CASE("analyze: --no-timing removes duration_s") {
  CliResult r = cli({"analyze", kData + "/listings/osp_faulty.py", "--format",
                     "json", "--fail-on", "never", "--no-timing"});
  json doc = json::parse(r.out);
  CHECK(!doc["files"][0].contains("duration_s"));
}

TEST_CASE("analyze: SARIF format is schema-shaped") {
  CliResult r = cli({"analyze", kData + "/listings/rvp_faulty.py", "--format",
                     "sarif", "--fail-on", "never"});
  CHECK(r.code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["version"] == "2.1.0");
  CHECK(doc["runs"][0]["tool"]["driver"]["rules"].size() == 9);
  CHECK(!doc["runs"][0]["results"].empty());
}

TEST_CASE("analyze: directory walk honors --exclude globs") {
  CliResult all = cli({"analyze", kData + "/corpus/projects/alpha",
                       "--fail-on", "never"});
  CHECK(all.out.find("3 file(s)") != std::string::npos);  // includes skip_me
  CliResult filtered =
      cli({"analyze", kData + "/corpus/projects/alpha", "--fail-on", "never",
           "--exclude", "**/skip_me.py"});
  CHECK(filtered.out.find("2 file(s)") != std::string::npos);
  CHECK(filtered.out.find("skip_me") == std::string::npos);
}

TEST_CASE("analyze: --output writes the report to a file") {
  TempDir tmp;
  fs::path out_file = tmp.path / "report.json";
  CliResult r = cli({"analyze", kData + "/listings/nsm_faulty.py", "--format",
                     "json", "--fail-on", "never", "--output",
                     out_file.string()});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream in(out_file);
  REQUIRE(in.good());
  json doc = json::parse(in);
  CHECK(doc["totals"]["files"] == 1);
}

TEST_CASE("analyze: --rules replaces builtins") {
  // custom.rules: single NMVP rule at severity error with a template message.
  CliResult r = cli({"analyze", kData + "/listings/nmvp_faulty.py", "--rules",
                     kData + "/rules/custom.rules", "--fail-on", "error"});
  CHECK(r.code == 1);  // error severity meets the error threshold
  CHECK(count_lines_with(r.out, "NMVP error: pin gpt-4o at ") == 1);
  // Builtins are gone: no NSO/TNES/UMM lines.
  CHECK(r.out.find("NSO") == std::string::npos);
  CHECK(r.out.find("TNES") == std::string::npos);
}

TEST_CASE("analyze: --add-rules extends builtins") {
  CliResult r = cli({"analyze", kData + "/listings/nmvp_faulty.py",
                     "--add-rules", kData + "/rules/extra.rules", "--fail-on",
                     "never"});
  CHECK(r.code == 0);
  CHECK(count_lines_with(r.out, " LLM info: ") == 1);
  CHECK(count_lines_with(r.out, " NMVP warning: ") == 1);  // builtins intact
}

TEST_CASE("analyze: --patterns teaches the analyzer a custom SDK") {
  CliResult without = cli(
      {"analyze", kData + "/guards/custom_sdk.py", "--fail-on", "never"});
  CHECK(without.out.find("0 finding(s)") != std::string::npos);
  CliResult with = cli({"analyze", kData + "/guards/custom_sdk.py",
                        "--patterns", kData + "/patterns/custom.patterns",
                        "--fail-on", "never"});
  CHECK(count_lines_with(with.out, " TNES warning: ") == 1);
}

TEST_CASE("analyze: usage and input errors exit 2") {
  SUBCASE("missing path argument") {
    CliResult r = cli({"analyze"});
    CHECK(r.code == 2);
    CHECK(!r.err.empty());
  }
  SUBCASE("nonexistent input path") {
    CliResult r = cli({"analyze", kData + "/listings/venusian.py"});
    CHECK(r.code == 2);
    CHECK(!r.err.empty());
  }
  SUBCASE("invalid rules file") {
    CliResult r = cli({"analyze", kData + "/listings/nso_faulty.py", "--rules",
                       kData + "/rules/invalid.rules"});
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown predicate") != std::string::npos);
  }
  SUBCASE("unknown subcommand") {
    CliResult r = cli({"dance"});
    CHECK(r.code == 2);
  }
  SUBCASE("unknown flag") {
    CliResult r = cli({"analyze", kData + "/listings/nso_faulty.py",
                       "--frobnicate"});
    CHECK(r.code == 2);
  }
}

TEST_CASE("top-level --help exits 0 and prints usage") {
  CliResult r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("analyze") != std::string::npos);
  CHECK(r.out.find("corpus") != std::string::npos);
}

TEST_CASE("rules list: all nine builtin smells appear") {
  CliResult r = cli({"rules", "list"});
  CHECK(r.code == 0);
  for (const char* smell : {"NSO", "UMM", "TNES", "NMVP", "NSM", "RENES",
                            "RVP", "OSP", "AIC"})
    CHECK(count_lines_with(r.out, std::string("smell=") + smell + " ") == 1);
  CHECK(count_lines_with(r.out, "severity=warning") == 9);
}

TEST_CASE("rules check: valid and invalid rule files") {
  SUBCASE("valid file reports the rule count") {
    CliResult r = cli({"rules", "check", kData + "/rules/custom.rules"});
    CHECK(r.code == 0);
    CHECK(r.out == "OK: 1 rule(s)\n");
  }
  SUBCASE("invalid file pinpoints the error and exits 1") {
    CliResult r = cli({"rules", "check", kData + "/rules/invalid.rules"});
    CHECK(r.code == 1);
    CHECK(r.err.find(":2:20: unknown predicate 'isTotallyMadeUp'") !=
          std::string::npos);
  }
}

TEST_CASE("eval: --counts aggregation with hand-checked values") {
  CliResult r = cli({"eval", "--counts", kData + "/eval/counts.csv"});
  CHECK(r.code == 0);
  CHECK(r.out.find("A 8 2 2 88 0.8000 0.8000 0.8000\n") != std::string::npos);
  CHECK(r.out.find("B 1 1 3 95 0.5000 0.2500 0.3333\n") != std::string::npos);
  CHECK(r.out.find("micro 9 3 5 183 0.7500 0.6429 0.6923\n") !=
        std::string::npos);
  CHECK(r.out.find("macro (drop-undefined) precision 0.6500 recall 0.5250 "
                   "f1 0.5667\n") != std::string::npos);
}

TEST_CASE("eval: findings vs labels in line mode") {
  CliResult r = cli({"eval", "--findings", kData + "/eval/report.json",
                     "--labels", kData + "/eval/labels.csv"});
  CHECK(r.code == 0);
  CHECK(r.out.find("TNES 1 1 2 0 0.5000 0.3333 0.4000\n") !=
        std::string::npos);
  CHECK(r.out.find("NSO 0 1 0 0 0.0000 n/a n/a\n") != std::string::npos);
  CHECK(r.out.find("UMM 0 0 0 1 n/a n/a n/a\n") != std::string::npos);
  CHECK(r.out.find("micro 1 2 2 1 0.3333 0.3333 0.3333\n") !=
        std::string::npos);
  CHECK(r.out.find("macro (drop-undefined) precision 0.2500 recall 0.3333 "
                   "f1 0.4000 [undefined: NSO UMM]\n") != std::string::npos);
}

TEST_CASE("eval: --tolerance widens line matching") {
  CliResult r = cli({"eval", "--findings", kData + "/eval/report.json",
                     "--labels", kData + "/eval/labels.csv", "--tolerance",
                     "2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("TNES 2 0 1 0 1.0000 0.6667 0.8000\n") !=
        std::string::npos);
}

TEST_CASE("eval: JSON format carries the same numbers") {
  CliResult r = cli({"eval", "--counts", kData + "/eval/counts.csv",
                     "--format", "json"});
  CHECK(r.code == 0);
  json doc = json::parse(r.out);
  REQUIRE(doc["per_smell"].size() == 2);
  CHECK(doc["per_smell"][0]["smell"] == "A");
  CHECK(doc["per_smell"][0]["precision"] == doctest::Approx(0.8));
  CHECK(doc["micro"]["tp"] == 9);
  CHECK(doc["micro"]["f1"] == doctest::Approx(0.6923).epsilon(1e-3));
  CHECK(doc["macro"]["policy"] == "drop-undefined");
  CHECK(doc["macro"]["precision"] == doctest::Approx(0.65));
}

TEST_CASE("eval: fleiss kappa from an agreement table") {
  SUBCASE("standalone") {
    CliResult r = cli({"eval", "--kappa", kData + "/eval/kappa.csv"});
    CHECK(r.code == 0);
    CHECK(r.out == "fleiss_kappa 0.3333\n");
  }
  SUBCASE("combined with counts") {
    CliResult r = cli({"eval", "--counts", kData + "/eval/counts.csv",
                       "--kappa", kData + "/eval/kappa.csv"});
    CHECK(r.code == 0);
    CHECK(r.out.find("fleiss_kappa 0.3333\n") != std::string::npos);
    CHECK(r.out.find("micro 9 3 5 183") != std::string::npos);
  }
}

TEST_CASE("eval: input errors exit 2") {
  SUBCASE("no inputs at all") {
    CliResult r = cli({"eval"});
    CHECK(r.code == 2);
  }
  SUBCASE("--counts conflicts with --findings/--labels") {
    CliResult r = cli({"eval", "--counts", kData + "/eval/counts.csv",
                       "--findings", kData + "/eval/report.json", "--labels",
                       kData + "/eval/labels.csv"});
    CHECK(r.code == 2);
  }
  SUBCASE("--findings without --labels") {
    CliResult r = cli({"eval", "--findings", kData + "/eval/report.json"});
    CHECK(r.code == 2);
  }
}

TEST_CASE("sample: text output for the classic parameters") {
  SUBCASE("unbounded population") {
    CliResult r = cli({"sample"});
    CHECK(r.code == 0);
    CHECK(r.out ==
          "n0 384.1600\n"
          "corrected 384.1600\n"
          "n 385\n");
  }
  SUBCASE("finite population") {
    CliResult r = cli({"sample", "--population", "171194"});
    CHECK(r.code == 0);
    CHECK(r.out ==
          "n0 384.1600\n"
          "corrected 383.3021\n"
          "n 384\n");
  }
  SUBCASE("strata allocation lines") {
    TempDir tmp;
    fs::path strata = tmp.path / "strata.csv";
    std::ofstream(strata) << "alpha,100000\nbeta,50000\ngamma,21194\n";
    CliResult r = cli({"sample", "--population", "171194", "--strata",
                       strata.string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("n 384\n") != std::string::npos);
    CHECK(r.out.find("alpha 100000 -> 224\n") != std::string::npos);
    CHECK(r.out.find("beta 50000 -> 112\n") != std::string::npos);
    CHECK(r.out.find("gamma 21194 -> 48\n") != std::string::npos);
  }
  SUBCASE("json variant") {
    CliResult r = cli({"sample", "--population", "692", "--format", "json"});
    CHECK(r.code == 0);
    json doc = json::parse(r.out);
    CHECK(doc["n0"] == doctest::Approx(384.16));
    CHECK(doc["corrected"] == doctest::Approx(247.2550).epsilon(1e-4));
    CHECK(doc["n"] == 248);
  }
  SUBCASE("invalid population exits 2") {
    CliResult r = cli({"sample", "--population", "zero"});
    CHECK(r.code == 2);
  }
}

TEST_CASE("corpus: JSON report with prevalence and statuses") {
  CliResult r = cli({"corpus", kData + "/corpus/manifest.tsv", "--format",
                     "json"});
  CHECK(r.code == 0);  // default --fail-on never for corpus
  json doc = json::parse(r.out);
  REQUIRE(doc["files"].size() == 4);
  CHECK(doc["files"][0]["project"] == "alpha");
  CHECK(doc["files"][2]["status"] == "parse-error");
  CHECK(doc["prevalence"]["files"] == 4);
  CHECK(doc["prevalence"]["flagged_files"] == 1);
  CHECK(doc["prevalence"]["projects"] == 2);
  CHECK(doc["prevalence"]["flagged_projects"] == 1);
  CHECK(doc["prevalence"]["occurrences_by_smell"]["NMVP"] == 1);
  CHECK(doc.contains("runtime"));
}

TEST_CASE("corpus: determinism across job counts with --no-timing") {
  CliResult serial = cli({"corpus", kData + "/corpus/manifest.tsv", "--format",
                          "json", "--no-timing", "--jobs", "1"});
  CliResult parallel = cli({"corpus", kData + "/corpus/manifest.tsv",
                            "--format", "json", "--no-timing", "--jobs", "8"});
  CHECK(serial.code == 0);
  CHECK(parallel.code == 0);
  CHECK(serial.out == parallel.out);  // byte-identical
}

TEST_CASE("corpus: text format appends prevalence and runtime lines") {
  CliResult r = cli({"corpus", kData + "/corpus/manifest.tsv", "--format",
                     "text"});
  CHECK(r.code == 0);
  CHECK(r.out.find("projects: 1/2 flagged\n") != std::string::npos);
  CHECK(count_lines_with(r.out, "runtime: total ") == 1);
  CHECK(r.out.find("files/s") != std::string::npos);
}

TEST_CASE("corpus: --fail-on warning trips on the fixture findings") {
  CliResult r = cli({"corpus", kData + "/corpus/manifest.tsv", "--fail-on",
                     "warning"});
  CHECK(r.code == 1);
}

TEST_CASE("corpus: missing manifest exits 2") {
  CliResult r = cli({"corpus", kData + "/corpus/absent.tsv"});
  CHECK(r.code == 2);
  CHECK(!r.err.empty());
}
