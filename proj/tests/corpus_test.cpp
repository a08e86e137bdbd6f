// Tests for corpus enumeration, the parallel runner, aggregation, and
// sample-size planning.
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "llmlint/corpus.hpp"

using namespace llmlint;
namespace fs = std::filesystem;

#ifndef LLMLINT_TEST_DATA_DIR
#error "LLMLINT_TEST_DATA_DIR must be defined by the build"
#endif

namespace {

const std::string kData = LLMLINT_TEST_DATA_DIR;

/// Temp directory that cleans up after itself.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("llmlint-test-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path write(const std::string& rel, const std::string& content) const {
    fs::path p = path / rel;
    fs::create_directories(p.parent_path());
    std::ofstream(p) << content;
    return p;
  }
};

FileResult make_result(std::string project, std::string path, double seconds,
                       std::vector<std::string> smells,
                       std::string status = "ok") {
  FileResult fr;
  fr.project_id = std::move(project);
  fr.result.file_path = std::move(path);
  fr.result.status = std::move(status);
  fr.result.duration_seconds = seconds;
  for (std::string& s : smells) {
    Finding f;
    f.smell = std::move(s);
    f.path = fr.result.file_path;
    fr.result.findings.push_back(std::move(f));
  }
  return fr;
}

}  // namespace

TEST_CASE("glob_to_regex: ** crosses directories, * and ? do not") {
  CHECK(matches_glob("**/skip.py", "a/b/skip.py"));
  CHECK(matches_glob("**/skip.py", "skip.py"));  // zero directories
  CHECK(!matches_glob("*/skip.py", "a/b/skip.py"));
  CHECK(matches_glob("*/skip.py", "a/skip.py"));
  CHECK(matches_glob("*.py", "main.py"));
  CHECK(!matches_glob("*.py", "sub/main.py"));
  CHECK(matches_glob("tests/**", "tests/deep/er/file.py"));
  CHECK(matches_glob("m?in.py", "main.py"));
  CHECK(!matches_glob("m?in.py", "ma/in.py"));
  CHECK(matches_glob("[ch]at.py", "cat.py"));
  CHECK(matches_glob("[ch]at.py", "hat.py"));
  CHECK(!matches_glob("[ch]at.py", "rat.py"));
  // Regex metacharacters in literals are escaped.
  CHECK(matches_glob("a+b.py", "a+b.py"));
  CHECK(!matches_glob("a+b.py", "aab.py"));
}

TEST_CASE("glob_to_regex: anchored ECMAScript form") {
  CHECK(glob_to_regex("*.py") == "^[^/]*\\.py$");
  CHECK(!matches_glob("skip.py", "prefix_skip.py"));  // anchored both ends
}

TEST_CASE("load_manifest: fixture with comments and [exclude] section") {
  CorpusManifest m = load_manifest(kData + "/corpus/manifest.tsv");
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].project_id == "alpha");
  CHECK(m.entries[1].project_id == "beta");
  CHECK(fs::is_directory(m.entries[0].root));
  REQUIRE(m.excludes.size() == 1);
  CHECK(m.excludes[0] == "**/skip_me.py");
}

TEST_CASE("load_manifest: malformed lines and duplicates throw") {
  TempDir tmp;
  tmp.write("proj/a.py", "X = 1\n");

  SUBCASE("missing tab separator") {
    fs::path p = tmp.write("bad.tsv", "alpha proj\n");
    CHECK_THROWS_AS(load_manifest(p.string()), std::invalid_argument);
  }
  SUBCASE("duplicate project id") {
    fs::path p = tmp.write("dup.tsv", "alpha\tproj\nalpha\tproj\n");
    CHECK_THROWS_AS(load_manifest(p.string()), std::invalid_argument);
  }
  SUBCASE("nonexistent root") {
    fs::path p = tmp.write("gone.tsv", "alpha\tdoes-not-exist\n");
    CHECK_THROWS_AS(load_manifest(p.string()), std::invalid_argument);
  }
  SUBCASE("unreadable manifest path") {
    CHECK_THROWS_AS(load_manifest((tmp.path / "missing.tsv").string()),
                    std::invalid_argument);
  }
}

TEST_CASE("enumerate_corpus: sorted .py files with exclusions applied") {
  CorpusManifest m = load_manifest(kData + "/corpus/manifest.tsv");
  auto files = enumerate_corpus(m);
  REQUIRE(files.size() == 4);  // skip_me.py excluded
  CHECK(files[0].first == "alpha");
  CHECK(files[0].second.filename() == "main.py");
  CHECK(files[1].first == "alpha");
  CHECK(files[1].second.filename() == "util.py");
  CHECK(files[2].first == "beta");
  CHECK(files[2].second.filename() == "broken.py");
  CHECK(files[3].first == "beta");
  CHECK(files[3].second.filename() == "ok.py");
  for (const auto& [project, path] : files)
    CHECK(path.filename() != "skip_me.py");
}

TEST_CASE("enumerate_corpus: non-Python files are ignored") {
  TempDir tmp;
  tmp.write("proj/readme.md", "hello\n");
  tmp.write("proj/app.py", "X = 1\n");
  fs::path manifest = tmp.write("m.tsv", "p\tproj\n");
  CorpusManifest m = load_manifest(manifest.string());
  auto files = enumerate_corpus(m);
  REQUIRE(files.size() == 1);
  CHECK(files[0].second.filename() == "app.py");
}

TEST_CASE("run_corpus: deterministic order regardless of job count") {
  CorpusManifest m = load_manifest(kData + "/corpus/manifest.tsv");
  CorpusOptions serial;
  serial.jobs = 1;
  CorpusOptions parallel;
  parallel.jobs = 4;
  auto a = run_corpus(m, builtin_rules(), PatternTable::defaults(), serial);
  auto b = run_corpus(m, builtin_rules(), PatternTable::defaults(), parallel);
  REQUIRE(a.size() == 4);
  REQUIRE(b.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].project_id == b[i].project_id);
    CHECK(a[i].result.file_path == b[i].result.file_path);
    CHECK(a[i].result.status == b[i].result.status);
    REQUIRE(a[i].result.findings.size() == b[i].result.findings.size());
    for (std::size_t k = 0; k < a[i].result.findings.size(); ++k)
      CHECK(a[i].result.findings[k].smell == b[i].result.findings[k].smell);
  }
}

TEST_CASE("run_corpus: statuses and findings for the fixture corpus") {
  CorpusManifest m = load_manifest(kData + "/corpus/manifest.tsv");
  auto results =
      run_corpus(m, builtin_rules(), PatternTable::defaults(), CorpusOptions{});
  REQUIRE(results.size() == 4);
  // alpha/main.py: the smelly client call.
  CHECK(results[0].result.status == "ok");
  REQUIRE(results[0].result.findings.size() == 5);
  CHECK(results[0].result.findings[0].smell == "NMVP");
  // alpha/util.py and beta/ok.py: clean.
  CHECK(results[1].result.findings.empty());
  CHECK(results[3].result.findings.empty());
  // beta/broken.py: syntax error.
  CHECK(results[2].result.status == "parse-error");
}

TEST_CASE("runtime_stats: hand-computed totals over four durations") {
  std::vector<FileResult> results = {
      make_result("p", "a.py", 0.2, {}),
      make_result("p", "b.py", 0.4, {}),
      make_result("p", "c.py", 0.1, {}),
      make_result("p", "d.py", 0.3, {}),
  };
  RuntimeStats s = runtime_stats(results);
  CHECK(s.files == 4);
  CHECK(s.total_seconds == doctest::Approx(1.0));
  CHECK(s.mean == doctest::Approx(0.25));
  CHECK(s.median == doctest::Approx(0.2));  // lower median of even count
  CHECK(s.p95 == doctest::Approx(0.4));     // nearest-rank: ceil(0.95*4) = 4th
  CHECK(s.min == doctest::Approx(0.1));
  CHECK(s.max == doctest::Approx(0.4));
  CHECK(s.files_per_second == doctest::Approx(4.0));
}

TEST_CASE("runtime_stats: empty input stays all-zero") {
  RuntimeStats s = runtime_stats({});
  CHECK(s.files == 0);
  CHECK(s.total_seconds == 0.0);
  CHECK(s.files_per_second == 0.0);
}

TEST_CASE("prevalence: files, projects, and per-smell tallies") {
  std::vector<FileResult> results = {
      make_result("p1", "a.py", 0.0, {"NSO", "NSO", "UMM"}),
      make_result("p1", "b.py", 0.0, {}),
      make_result("p2", "c.py", 0.0, {"NSO"}),
      make_result("p3", "d.py", 0.0, {}),
      make_result("p3", "e.py", 0.0, {}, "parse-error"),
  };
  PrevalenceSummary p = prevalence(results);
  CHECK(p.files == 5);
  CHECK(p.flagged_files == 2);
  CHECK(p.projects == 3);
  CHECK(p.flagged_projects == 2);
  CHECK(p.occurrences_by_smell.at("NSO") == 3);
  CHECK(p.occurrences_by_smell.at("UMM") == 1);
  CHECK(p.files_by_smell.at("NSO") == 2);  // a.py counted once despite 2 hits
  CHECK(p.files_by_smell.at("UMM") == 1);
}

TEST_CASE("cochran_sample_size: the classic unlimited-population value") {
  SampleSize s = cochran_sample_size(1.96, 0.05, 0.5);
  CHECK(s.n0 == doctest::Approx(384.16).epsilon(1e-6));
  CHECK(s.corrected == doctest::Approx(384.16).epsilon(1e-6));
  CHECK(s.n == 385);
}

TEST_CASE("cochran_sample_size: finite-population correction") {
  SUBCASE("small population shrinks the sample") {
    SampleSize s = cochran_sample_size(1.96, 0.05, 0.5, 692);
    // 384.16 / (1 + 383.16/692) = 247.2550...
    CHECK(s.corrected == doctest::Approx(247.2550).epsilon(1e-4));
    CHECK(s.n == 248);
  }
  SUBCASE("large population barely moves it") {
    SampleSize s = cochran_sample_size(1.96, 0.05, 0.5, 171194);
    CHECK(s.corrected == doctest::Approx(383.3021).epsilon(1e-4));
    CHECK(s.n == 384);
  }
}

TEST_CASE("cochran_sample_size: invalid inputs throw") {
  CHECK_THROWS_AS(cochran_sample_size(0.0, 0.05, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(cochran_sample_size(1.96, 0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(cochran_sample_size(1.96, 0.05, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(cochran_sample_size(1.96, 0.05, 1.1), std::invalid_argument);
  CHECK_THROWS_AS(cochran_sample_size(1.96, 0.05, 0.5, 0),
                  std::invalid_argument);
}

TEST_CASE("largest_remainder_apportionment: exact sums and tie-breaking") {
  SUBCASE("10 over equal thirds") {
    auto parts = largest_remainder_apportionment(10, {1.0, 1.0, 1.0});
    REQUIRE(parts.size() == 3);
    CHECK(parts[0] == 4);  // equal remainders: lower index wins the extra
    CHECK(parts[1] == 3);
    CHECK(parts[2] == 3);
  }
  SUBCASE("corpus strata") {
    auto parts =
        largest_remainder_apportionment(384, {100000.0, 50000.0, 21194.0});
    REQUIRE(parts.size() == 3);
    CHECK(parts[0] == 224);
    CHECK(parts[1] == 112);
    CHECK(parts[2] == 48);
    CHECK(parts[0] + parts[1] + parts[2] == 384);
  }
  SUBCASE("zero total") {
    auto parts = largest_remainder_apportionment(0, {3.0, 2.0});
    CHECK(parts == std::vector<long long>{0, 0});
  }
}

TEST_CASE("stratified_allocation: proportional, clamped, exact-sum") {
  SUBCASE("matches largest remainder when nothing clamps") {
    auto alloc = stratified_allocation(384, {100000, 50000, 21194});
    CHECK(alloc == std::vector<long long>{224, 112, 48});
  }
  SUBCASE("clamps to stratum size and redistributes") {
    auto alloc = stratified_allocation(10, {2, 100, 100});
    REQUIRE(alloc.size() == 3);
    CHECK(alloc[0] <= 2);
    CHECK(alloc[0] + alloc[1] + alloc[2] == 10);
  }
  SUBCASE("sample larger than capacity throws") {
    CHECK_THROWS_AS(stratified_allocation(11, {5, 5}),
                    std::invalid_argument);
  }
  SUBCASE("exact capacity fills every stratum") {
    CHECK(stratified_allocation(10, {5, 5}) ==
          std::vector<long long>{5, 5});
  }
}
