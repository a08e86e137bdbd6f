// Pattern table: the configurable vocabulary the predicates match against
// (API path suffixes, model-name regexes, marker keys).  Defaults cover the
// mainstream provider SDKs; a config file can replace any category.
#pragma once

#include <map>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace llmlint {

class PatternTable {
 public:
  /// Built-in defaults for all eleven categories.
  static PatternTable defaults();

  /// Defaults overlaid with a config file.  Lines are `<category> <pattern>`;
  /// '#' starts a comment.  A category named in the file replaces its default
  /// list entirely.  Unknown categories and malformed regexes throw
  /// std::invalid_argument with the offending line number.
  static PatternTable load(const std::string& path);
  static PatternTable parse(const std::string& text, const std::string& origin);

  /// Raw pattern list of a category (empty list for unknown names).
  const std::vector<std::string>& raw(std::string_view category) const;

  // --- typed queries ------------------------------------------------------

  /// Dotted-path suffix match: pattern "chat.completions.create" matches
  /// "client.chat.completions.create" and the bare path itself.
  bool text_gen_path(std::string_view callee_path) const;

  bool reasoning_model(std::string_view model) const;
  bool vision_model(std::string_view model) const;
  bool pinned_version(std::string_view model) const;
  bool bound_metric_key(std::string_view key) const;
  bool preprocessing_name(std::string_view name) const;
  bool attribution_key(std::string_view key) const;
  bool multiuser_name(std::string_view name) const;

  /// Marker lists are returned raw; entries are "<kind>:<payload>" with kinds
  /// kwarg / keyval / path / chain (structured output), role / kwarg
  /// (system), type / key / prefix (image payloads).
  const std::vector<std::string>& structured_markers() const;
  const std::vector<std::string>& system_markers() const;
  const std::vector<std::string>& image_markers() const;

 private:
  void compile();

  std::map<std::string, std::vector<std::string>> raw_;
  std::vector<std::regex> reasoning_;
  std::vector<std::regex> vision_;
  std::vector<std::regex> pinned_;
  std::vector<std::regex> preprocessing_;
  std::vector<std::regex> multiuser_;
};

/// Splits "kwarg:response_format" into {"kwarg", "response_format"}; entries
/// without a kind prefix come back with an empty kind.
std::pair<std::string_view, std::string_view> split_marker(
    std::string_view marker);

}  // namespace llmlint
