#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "llmlint/syntax.hpp"

namespace llmlint {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::call: return "call";
    case NodeKind::assignment: return "assignment";
    case NodeKind::function_def: return "function_def";
    case NodeKind::class_def: return "class_def";
    case NodeKind::mapping_literal: return "mapping_literal";
    case NodeKind::list_literal: return "list_literal";
    case NodeKind::string_literal: return "string_literal";
    case NodeKind::number_literal: return "number_literal";
    case NodeKind::name: return "name";
    case NodeKind::attribute_access: return "attribute_access";
    case NodeKind::subscript: return "subscript";
    case NodeKind::keyword_argument: return "keyword_argument";
    case NodeKind::starred_kwargs: return "starred_kwargs";
    case NodeKind::other: return "other";
  }
  return "other";
}

EnrichedTree make_failed_tree(std::string source, std::string path,
                              ParseDiagnostic diagnostic) {
  EnrichedTree tree;
  tree.source_ = std::move(source);
  tree.path_ = std::move(path);
  tree.error_ = std::move(diagnostic);
  return tree;
}

CallSite make_call_site(const EnrichedTree& tree, NodeId call_node) {
  CallSite site;
  site.node = call_node;
  const SyntaxNode& call = tree.node(call_node);

  // Walk the callee chain down to its base, collecting dotted segments.
  // Calls and subscripts inside the chain are collapsed (descend through
  // them); anything else makes the base opaque.
  std::vector<std::string> segments;
  NodeId cur = call.children.empty() ? k_no_node : call.children.front();
  while (cur != k_no_node) {
    const SyntaxNode& n = tree.node(cur);
    if (n.kind == NodeKind::attribute_access) {
      segments.push_back(n.value);
      cur = n.children.front();
    } else if (n.kind == NodeKind::name) {
      segments.push_back(n.value);
      site.base_is_name = true;
      break;
    } else if (n.kind == NodeKind::call) {
      site.chain_calls.push_back(cur);
      cur = n.children.empty() ? k_no_node : n.children.front();
    } else if (n.kind == NodeKind::subscript) {
      cur = n.children.empty() ? k_no_node : n.children.front();
    } else {
      break;  // lambda call, literal call, ... — no usable path
    }
  }
  std::reverse(segments.begin(), segments.end());
  std::reverse(site.chain_calls.begin(), site.chain_calls.end());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) site.callee_path += '.';
    site.callee_path += segments[i];
  }
  if (site.base_is_name && !segments.empty()) site.base_name = segments.front();

  for (std::size_t i = 1; i < call.children.size(); ++i) {
    NodeId arg = call.children[i];
    const SyntaxNode& a = tree.node(arg);
    if (a.kind == NodeKind::keyword_argument) {
      site.keyword_args.emplace_back(a.value, a.children.front());
    } else if (a.kind == NodeKind::starred_kwargs) {
      site.has_starred_kwargs = true;
    } else {
      site.positional_args.push_back(arg);
    }
  }

  for (ScopeId s = call.scope; s != k_no_scope; s = tree.scope(s).parent)
    site.enclosing_scopes.push_back(s);

  return site;
}

std::vector<CallSite> iter_call_sites(const EnrichedTree& tree) {
  std::vector<CallSite> sites;
  if (!tree.ok() || tree.root() == k_no_node) return sites;
  tree.walk([&](NodeId id) {
    if (tree.node(id).kind == NodeKind::call)
      sites.push_back(make_call_site(tree, id));
    return true;
  });
  return sites;
}

}  // namespace llmlint
