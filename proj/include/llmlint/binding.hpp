// Name resolution over one parsed file: ordered per-scope assignments,
// import aliases, LLM client constructor bindings and pipeline task bindings.
// The table is flow-insensitive except for `last_assignment`, which respects
// statement order within a scope.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmlint/syntax.hpp"

namespace llmlint {

/// One recorded binding of a name inside a scope.  `value` is the RHS node
/// when the binding is transparent; opaque bindings (loop targets, params,
/// augmented targets, unpacking, `del`, ...) poison the slot instead.
struct AssignRecord {
  SourcePos pos;
  NodeId value = k_no_node;
  bool poisoned = false;
};

/// An LLM client object bound to a local name (`client = OpenAI(...)`).
struct ClientBinding {
  std::string tag;                  // "openai-client", "anthropic-client", ...
  std::string constructor_path;     // canonical ctor path, "openai.OpenAI"
  NodeId constructor = k_no_node;   // the constructor call node
  std::vector<NodeId> option_calls; // with_options(...) calls layered on top
};

/// Provider tag for a canonical constructor path ("openai.OpenAI" ->
/// "openai-client"); empty when the path is not a known client constructor.
std::string_view client_constructor_tag(std::string_view canonical_path);

/// True for `pipeline` / `transformers.pipeline`.
bool is_pipeline_constructor(std::string_view canonical_path);

/// Pure dotted chain text of a name/attribute expression ("a.b.c"); empty
/// when the expression contains anything else.
std::string dotted_chain(const EnrichedTree& tree, NodeId id);

class BindingTable {
 public:
  static BindingTable build(const EnrichedTree& tree);

  /// RHS node of the latest visible assignment of `name` from `scope`
  /// strictly before `before`.  Walks the scope chain (class scopes are
  /// skipped unless queried directly); the first scope that assigns the name
  /// anywhere decides.  nullopt when unknown or poisoned.
  std::optional<NodeId> last_assignment(ScopeId scope, std::string_view name,
                                        SourcePos before) const;

  /// `last_assignment` for a name node (scope/position taken from the node).
  std::optional<NodeId> resolve_name(NodeId name_node) const;

  /// Constant string value of an expression: string literals directly, names
  /// through `last_assignment` (bounded depth).  nullopt for f-strings,
  /// bytes, concatenations involving either, and anything non-constant.
  std::optional<std::string> resolve_string(NodeId node) const;

  /// Client binding for a local name; nullptr when the name is not a known
  /// client object.
  const ClientBinding* client(std::string_view name) const;
  const std::map<std::string, ClientBinding>& clients() const {
    return clients_;
  }

  /// Task string of a transformers pipeline bound to `name`.
  std::optional<std::string> pipeline_task(std::string_view name) const;

  /// Canonical dotted path an imported local name stands for
  /// ("OpenAI" -> "openai.OpenAI" after `from openai import OpenAI`).
  std::optional<std::string> import_target(std::string_view name) const;

  /// Canonical callee path for a call site: local aliases spliced
  /// (`create = client.chat.completions.create; create(...)`), import names
  /// expanded, and calls on pipeline-bound variables rewritten to
  /// "pipeline:<task>".
  std::string resolve_callee(const CallSite& site) const;

  /// resolve_callee, then with a leading client variable replaced by its
  /// constructor path ("client.chat.completions.create" ->
  /// "openai.OpenAI.chat.completions.create").
  std::string canonical_callee(const CallSite& site) const;

  const EnrichedTree& tree() const { return *tree_; }

 private:
  std::optional<std::string> resolve_string_impl(NodeId node, int depth) const;
  std::string resolve_callee_impl(std::string path, ScopeId scope,
                                  SourcePos before, int depth) const;

  const EnrichedTree* tree_ = nullptr;
  std::map<std::pair<ScopeId, std::string>, std::vector<AssignRecord>>
      assignments_;
  std::map<std::string, ClientBinding> clients_;
  std::map<std::string, std::string> pipelines_;  // name -> task
  std::map<std::string, std::string> imports_;    // local -> canonical path
};

}  // namespace llmlint
