// Python source model: lexing/parsing into an enriched syntax tree with
// parent links, scopes and byte-accurate spans, plus call-site extraction.
//
// The parser targets Python 3 source (3.8 and later constructs are accepted;
// `match` blocks are consumed tolerantly).  Files that do not parse are never
// reported through exceptions: the failure is encoded on the returned tree.
#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace llmlint {

using NodeId = std::uint32_t;
inline constexpr NodeId k_no_node = 0xffffffffu;

using ScopeId = std::uint32_t;
inline constexpr ScopeId k_no_scope = 0xffffffffu;

/// line is 1-based, column is a 0-based byte offset within the line.
struct SourcePos {
  int line = 1;
  int column = 0;

  friend bool operator==(const SourcePos&, const SourcePos&) = default;
  friend auto operator<=>(const SourcePos& a, const SourcePos& b) {
    if (a.line != b.line) return a.line <=> b.line;
    return a.column <=> b.column;
  }
};

/// Half-open byte range [begin_offset, end_offset) with line/column endpoints.
struct SourceSpan {
  SourcePos begin;
  SourcePos end;
  std::size_t begin_offset = 0;
  std::size_t end_offset = 0;
};

/// Coarse node classification; constructs the analysis does not interpret
/// structurally are folded into `other` (with a descriptive tag).
enum class NodeKind : std::uint8_t {
  call,
  assignment,
  function_def,
  class_def,
  mapping_literal,
  list_literal,
  string_literal,
  number_literal,
  name,
  attribute_access,
  subscript,
  keyword_argument,
  starred_kwargs,
  other,
};

std::string_view to_string(NodeKind kind);

// Node flag bits.
inline constexpr std::uint8_t node_flag_fstring = 0x01;   // on `other` string atoms
inline constexpr std::uint8_t node_flag_bytes = 0x02;     // bytes literal
inline constexpr std::uint8_t node_flag_augmented = 0x04; // `x += v` style assignment
inline constexpr std::uint8_t node_flag_no_value = 0x08;  // `x: T` annotation only
inline constexpr std::uint8_t node_flag_walrus = 0x10;    // `x := v`
inline constexpr std::uint8_t node_flag_annotated = 0x20; // `x: T = v` (child 1 is the annotation)

enum class ScopeKind : std::uint8_t { module, function, cls };

struct ScopeInfo {
  ScopeKind kind = ScopeKind::module;
  std::string name;
  SourceSpan span;
  ScopeId parent = k_no_scope;
  NodeId node = k_no_node;
};

/// One syntax tree node.  `value` holds the kind-specific payload:
/// identifier text (name), attribute name (attribute_access), keyword name
/// (keyword_argument), decoded literal value (string_literal), literal text
/// (number_literal), bound module path (import aliases), etc.
struct SyntaxNode {
  NodeKind kind = NodeKind::other;
  std::uint8_t flags = 0;
  ScopeId scope = k_no_scope;
  NodeId parent = k_no_node;
  SourceSpan span;
  std::string value;
  std::string tag;  // secondary label for `other` nodes ("module", "import", ...)
  std::vector<NodeId> children;
};

struct ParseDiagnostic {
  std::string message;
  SourcePos pos;
};

/// Thrown when a cooperative deadline expires mid-analysis; callers convert
/// it into a `timeout` result status.
struct TimeoutExceeded : std::runtime_error {
  TimeoutExceeded() : std::runtime_error("analysis deadline exceeded") {}
};

/// Cooperative deadline checked at parser/analyzer loop boundaries.
class Deadline {
 public:
  static Deadline none() { return Deadline{}; }
  static Deadline after(double seconds) {
    Deadline d;
    d.enabled_ = true;
    d.at_ = std::chrono::steady_clock::now() +
            std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(seconds));
    return d;
  }
  bool enabled() const { return enabled_; }
  bool expired() const {
    return enabled_ && std::chrono::steady_clock::now() >= at_;
  }
  void check() const {
    if (expired()) throw TimeoutExceeded{};
  }

 private:
  bool enabled_ = false;
  std::chrono::steady_clock::time_point at_{};
};

/// Immutable parse result: node arena, scope table and the original source.
class EnrichedTree {
 public:
  bool ok() const { return !error_.has_value(); }
  const std::optional<ParseDiagnostic>& error() const { return error_; }

  const std::string& source() const { return source_; }
  const std::string& path() const { return path_; }

  NodeId root() const { return root_; }
  const SyntaxNode& node(NodeId id) const { return nodes_[id]; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Source slice covered by the node's span.
  std::string_view text(NodeId id) const {
    const SourceSpan& s = nodes_[id].span;
    return std::string_view(source_).substr(s.begin_offset,
                                            s.end_offset - s.begin_offset);
  }

  const std::vector<ScopeInfo>& scopes() const { return scopes_; }
  const ScopeInfo& scope(ScopeId id) const { return scopes_[id]; }

  /// Pre-order walk applying `fn(NodeId)`; `fn` returning false prunes the
  /// subtree.
  template <typename Fn>
  void walk(Fn&& fn) const {
    if (nodes_.empty()) return;
    walk_from(root_, fn);
  }

  /// Pre-order walk of one subtree.
  template <typename Fn>
  void walk_from(NodeId start, Fn&& fn) const {
    std::vector<NodeId> stack{start};
    while (!stack.empty()) {
      NodeId id = stack.back();
      stack.pop_back();
      if (!fn(id)) continue;
      const auto& kids = nodes_[id].children;
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
  }

 private:
  friend class Parser;
  friend EnrichedTree make_failed_tree(std::string, std::string, ParseDiagnostic);

  std::string source_;
  std::string path_;
  std::vector<SyntaxNode> nodes_;
  std::vector<ScopeInfo> scopes_;
  NodeId root_ = k_no_node;
  std::optional<ParseDiagnostic> error_;
};

/// Parse `source`.  Failures are encoded on the tree (`ok() == false`,
/// `error()` set, empty root); only deadline expiry escapes, as
/// TimeoutExceeded.
EnrichedTree parse_source(std::string source, std::string path = "<memory>",
                          const Deadline& deadline = Deadline::none());

/// Tree representing a file that could not be parsed (or read): `ok()` is
/// false and `error()` carries the diagnostic.
EnrichedTree make_failed_tree(std::string source, std::string path,
                              ParseDiagnostic diagnostic);

/// One call expression, pre-digested for the predicate layer.
struct CallSite {
  NodeId node = k_no_node;

  /// Dotted callee path as written, with calls in the chain collapsed:
  /// `client.with_options(t=1).chat.completions.create` yields
  /// "client.with_options.chat.completions.create".
  std::string callee_path;

  std::vector<NodeId> positional_args;
  std::vector<std::pair<std::string, NodeId>> keyword_args;  // unique names
  bool has_starred_kwargs = false;

  /// Innermost-first chain of enclosing scopes, ending with the module scope.
  std::vector<ScopeId> enclosing_scopes;

  // --- derived plumbing -----------------------------------------------
  std::string base_name;   // leading identifier when the chain roots at one
  bool base_is_name = false;
  std::vector<NodeId> chain_calls;  // call nodes inside the callee chain

  /// Keyword argument lookup; returns k_no_node when absent.
  NodeId keyword(std::string_view name) const {
    for (const auto& [kw, v] : keyword_args)
      if (kw == name) return v;
    return k_no_node;
  }
};

/// All call sites in pre-order (outer calls before their nested arguments).
std::vector<CallSite> iter_call_sites(const EnrichedTree& tree);

/// Build the CallSite view for one specific call node.
CallSite make_call_site(const EnrichedTree& tree, NodeId call_node);

}  // namespace llmlint
