#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "llmlint/binding.hpp"

namespace llmlint {

namespace {

/// Dot-boundary suffix test: `pattern` equals `path` or ends it right after
/// a '.'.
bool path_suffix_match(std::string_view path, std::string_view pattern) {
  if (path == pattern) return true;
  if (path.size() <= pattern.size()) return false;
  return path.ends_with(pattern) &&
         path[path.size() - pattern.size() - 1] == '.';
}

struct CtorEntry {
  std::string_view pattern;
  std::string_view tag;
};

constexpr std::array<CtorEntry, 8> k_client_constructors{{
    {"OpenAI", "openai-client"},
    {"AsyncOpenAI", "openai-client"},
    {"AzureOpenAI", "openai-client"},
    {"Anthropic", "anthropic-client"},
    {"AsyncAnthropic", "anthropic-client"},
    {"genai.Client", "google-client"},
    {"GenerativeModel", "google-client"},
    {"ollama.Client", "ollama-client"},
}};

}  // namespace

std::string_view client_constructor_tag(std::string_view canonical_path) {
  for (const CtorEntry& e : k_client_constructors)
    if (path_suffix_match(canonical_path, e.pattern)) return e.tag;
  return {};
}

bool is_pipeline_constructor(std::string_view canonical_path) {
  return canonical_path == "pipeline" ||
         path_suffix_match(canonical_path, "transformers.pipeline");
}

std::string dotted_chain(const EnrichedTree& tree, NodeId id) {
  std::vector<std::string_view> segments;
  NodeId cur = id;
  for (;;) {
    const SyntaxNode& n = tree.node(cur);
    if (n.kind == NodeKind::name) {
      segments.push_back(n.value);
      break;
    }
    if (n.kind == NodeKind::attribute_access) {
      segments.push_back(n.value);
      cur = n.children.front();
      continue;
    }
    return {};
  }
  std::string out;
  for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
    if (!out.empty()) out += '.';
    out += *it;
  }
  return out;
}

BindingTable BindingTable::build(const EnrichedTree& tree) {
  BindingTable table;
  table.tree_ = &tree;
  if (!tree.ok() || tree.root() == k_no_node) return table;

  auto record = [&](NodeId name_node, NodeId value, bool poisoned) {
    const SyntaxNode& n = tree.node(name_node);
    table.assignments_[{n.scope, n.value}].push_back(
        AssignRecord{n.span.begin, value, poisoned});
  };

  // Poison every name bound inside a target expression (tuple/list/starred
  // unpacking); plain names may carry a transparent value instead.
  auto bind_target = [&](auto&& self, NodeId target, NodeId value,
                         bool poisoned) -> void {
    const SyntaxNode& t = tree.node(target);
    switch (t.kind) {
      case NodeKind::name:
        record(target, poisoned ? k_no_node : value, poisoned);
        return;
      case NodeKind::list_literal:
        for (NodeId c : t.children) self(self, c, k_no_node, true);
        return;
      case NodeKind::other:
        if (t.tag == "tuple" || t.tag == "starred") {
          for (NodeId c : t.children) self(self, c, k_no_node, true);
        }
        return;
      default:
        return;  // attribute/subscript targets are not local names
    }
  };

  // (name node, value node, position) for simple `name = <call or name>`
  // bindings, processed in document order for client/pipeline propagation.
  struct Candidate {
    NodeId name;
    NodeId value;
    std::size_t offset;
  };
  std::vector<Candidate> candidates;

  tree.walk([&](NodeId id) {
    const SyntaxNode& n = tree.node(id);
    if (n.kind == NodeKind::assignment) {
      bool augmented = n.flags & node_flag_augmented;
      bool annotated = n.flags & node_flag_annotated;
      bool no_value = n.flags & node_flag_no_value;
      if (n.flags & node_flag_walrus) {
        bind_target(bind_target, n.children[0], n.children[1], false);
      } else if (augmented) {
        bind_target(bind_target, n.children[0], k_no_node, true);
      } else if (annotated) {
        if (no_value)
          bind_target(bind_target, n.children[0], k_no_node, true);
        else
          bind_target(bind_target, n.children[0], n.children[2], false);
      } else {
        NodeId value = n.children.back();
        for (std::size_t i = 0; i + 1 < n.children.size(); ++i)
          bind_target(bind_target, n.children[i], value, false);
      }
      if (!augmented && !no_value) {
        NodeId target = n.children[0];
        NodeId value = annotated ? n.children[2] : n.children.back();
        if (tree.node(target).kind == NodeKind::name)
          candidates.push_back({target, value, tree.node(id).span.begin_offset});
      }
      return true;
    }
    if (n.kind == NodeKind::function_def || n.kind == NodeKind::class_def) {
      table.assignments_[{n.scope, n.value}].push_back(
          AssignRecord{n.span.begin, id, false});
      return true;
    }
    if (n.kind != NodeKind::other) return true;

    if (n.tag == "for" || n.tag == "comp_for") {
      bind_target(bind_target, n.children[0], k_no_node, true);
    } else if (n.tag == "with_item" && n.children.size() == 2) {
      bind_target(bind_target, n.children[1], k_no_node, true);
    } else if (n.tag == "except" && !n.value.empty()) {
      table.assignments_[{n.scope, n.value}].push_back(
          AssignRecord{n.span.begin, k_no_node, true});
    } else if (n.tag == "param") {
      table.assignments_[{n.scope, n.value}].push_back(
          AssignRecord{n.span.begin, k_no_node, true});
    } else if (n.tag == "del") {
      for (NodeId c : n.children) bind_target(bind_target, c, k_no_node, true);
    } else if (n.tag == "import" || n.tag == "import_from") {
      for (NodeId alias : n.children) {
        const SyntaxNode& a = tree.node(alias);
        if (a.tag != "alias" || a.children.empty()) continue;
        NodeId local = a.children.front();
        const std::string& local_name = tree.node(local).value;
        if (local_name == "*") continue;
        table.imports_[local_name] = a.value;
        record(local, k_no_node, true);
      }
    }
    return true;
  });

  for (auto& [key, records] : table.assignments_)
    std::sort(records.begin(), records.end(),
              [](const AssignRecord& a, const AssignRecord& b) {
                return a.pos < b.pos;
              });

  // Client / pipeline binding pass, in document order so aliases of earlier
  // bindings propagate (last writer wins).
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.offset < b.offset;
            });
  for (const Candidate& c : candidates) {
    const std::string& name = tree.node(c.name).value;
    const SyntaxNode& v = tree.node(c.value);
    if (v.kind == NodeKind::name) {
      if (auto it = table.clients_.find(v.value); it != table.clients_.end())
        table.clients_[name] = it->second;
      if (auto it = table.pipelines_.find(v.value); it != table.pipelines_.end())
        table.pipelines_[name] = it->second;
      continue;
    }
    if (v.kind != NodeKind::call) continue;
    CallSite site = make_call_site(tree, c.value);
    std::string canonical = table.resolve_callee(site);
    if (std::string_view tag = client_constructor_tag(canonical); !tag.empty()) {
      table.clients_[name] =
          ClientBinding{std::string(tag), canonical, c.value, {}};
      continue;
    }
    if (is_pipeline_constructor(canonical)) {
      NodeId task_node = site.keyword("task");
      if (task_node == k_no_node && !site.positional_args.empty())
        task_node = site.positional_args.front();
      if (task_node != k_no_node) {
        if (auto task = table.resolve_string(task_node)) {
          table.pipelines_[name] = *task;
          table.clients_[name] = ClientBinding{"pipeline", canonical, c.value, {}};
        }
      }
      continue;
    }
    // `c2 = client.with_options(...)` keeps the client binding and layers
    // the option call on top.
    if (site.base_is_name &&
        site.callee_path == site.base_name + ".with_options") {
      if (auto it = table.clients_.find(site.base_name);
          it != table.clients_.end()) {
        ClientBinding derived = it->second;
        derived.option_calls.push_back(c.value);
        table.clients_[name] = std::move(derived);
      }
    }
  }

  return table;
}

std::optional<NodeId> BindingTable::last_assignment(ScopeId scope,
                                                    std::string_view name,
                                                    SourcePos before) const {
  if (!tree_) return std::nullopt;
  std::string key(name);
  for (ScopeId s = scope; s != k_no_scope; s = tree_->scope(s).parent) {
    if (s != scope && tree_->scope(s).kind == ScopeKind::cls) continue;
    auto it = assignments_.find({s, key});
    if (it == assignments_.end()) continue;
    // The name is local to this scope; only assignments before the use count.
    const AssignRecord* best = nullptr;
    for (const AssignRecord& r : it->second) {
      if (r.pos < before)
        best = &r;
      else
        break;
    }
    if (!best || best->poisoned || best->value == k_no_node)
      return std::nullopt;
    return best->value;
  }
  return std::nullopt;
}

std::optional<NodeId> BindingTable::resolve_name(NodeId name_node) const {
  const SyntaxNode& n = tree_->node(name_node);
  if (n.kind != NodeKind::name) return std::nullopt;
  return last_assignment(n.scope, n.value, n.span.begin);
}

std::optional<std::string> BindingTable::resolve_string(NodeId node) const {
  return resolve_string_impl(node, 8);
}

std::optional<std::string> BindingTable::resolve_string_impl(NodeId node,
                                                             int depth) const {
  const SyntaxNode& n = tree_->node(node);
  if (n.kind == NodeKind::string_literal) {
    if (n.flags & node_flag_bytes) return std::nullopt;
    return n.value;
  }
  if (n.kind == NodeKind::name && depth > 0) {
    if (auto v = resolve_name(node)) return resolve_string_impl(*v, depth - 1);
  }
  return std::nullopt;
}

const ClientBinding* BindingTable::client(std::string_view name) const {
  auto it = clients_.find(std::string(name));
  return it == clients_.end() ? nullptr : &it->second;
}

std::optional<std::string> BindingTable::pipeline_task(
    std::string_view name) const {
  auto it = pipelines_.find(std::string(name));
  if (it == pipelines_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> BindingTable::import_target(
    std::string_view name) const {
  auto it = imports_.find(std::string(name));
  if (it == imports_.end()) return std::nullopt;
  return it->second;
}

std::string BindingTable::resolve_callee(const CallSite& site) const {
  if (!tree_ || !site.base_is_name || site.callee_path.empty())
    return site.callee_path;
  const SyntaxNode& call = tree_->node(site.node);
  return resolve_callee_impl(site.callee_path, call.scope, call.span.begin, 8);
}

std::string BindingTable::resolve_callee_impl(std::string path, ScopeId scope,
                                              SourcePos before,
                                              int depth) const {
  std::size_t dot = path.find('.');
  std::string base = path.substr(0, dot);
  std::string rest = dot == std::string::npos ? "" : path.substr(dot);

  if (rest.empty()) {
    if (auto it = pipelines_.find(base); it != pipelines_.end())
      return "pipeline:" + it->second;
  }

  if (depth > 0) {
    if (auto v = last_assignment(scope, base, before)) {
      const SyntaxNode& n = tree_->node(*v);
      if (n.kind == NodeKind::name || n.kind == NodeKind::attribute_access) {
        std::string chain = dotted_chain(*tree_, *v);
        if (!chain.empty() && chain != base)
          return resolve_callee_impl(chain + rest, n.scope, n.span.begin,
                                     depth - 1);
      }
    }
  }

  if (auto it = imports_.find(base); it != imports_.end())
    return it->second + rest;
  return path;
}

std::string BindingTable::canonical_callee(const CallSite& site) const {
  std::string path = resolve_callee(site);
  std::size_t dot = path.find('.');
  if (dot == std::string::npos) return path;
  if (auto it = clients_.find(path.substr(0, dot));
      it != clients_.end() && !it->second.constructor_path.empty())
    return it->second.constructor_path + path.substr(dot);
  return path;
}

}  // namespace llmlint
