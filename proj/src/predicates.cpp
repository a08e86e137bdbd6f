// Predicate implementations.  Shared conventions:
//  - evidence (sampling keys, metric bounds, markers) is searched through the
//    call's keyword arguments, recognized config objects, `with_options`
//    chain segments and the client constructor the callee is bound to;
//  - names resolve through the binding table with a bounded number of hops;
//  - when evidence cannot be resolved statically the predicate answers the
//    conservative way (the one that does not produce a finding).
#include <array>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "llmlint/predicates.hpp"

namespace llmlint {

namespace {

const std::set<std::string_view> k_text_gen_tasks = {
    "text-generation", "text2text-generation", "conversational"};
const std::set<std::string_view> k_vision_tasks = {
    "image-to-text", "image-text-to-text", "visual-question-answering"};
const std::set<std::string_view> k_config_kwargs = {
    "generation_config", "model_kwargs", "options", "config"};
const std::set<std::string_view> k_reasoning_keys = {
    "reasoning", "reasoning_effort", "thinking", "thinking_budget",
    "thinking_config"};
const std::set<std::string_view> k_detail_keys = {"detail", "quality"};
const std::array<std::string_view, 3> k_message_kwargs = {"messages", "input",
                                                          "contents"};
const std::array<std::string_view, 3> k_model_kwargs = {"model", "model_name",
                                                        "model_id"};

/// Follows name chains to the node they denote (bounded).
NodeId resolve_node(const AnalysisContext& ctx, NodeId id) {
  for (int hop = 0; hop < 8; ++hop) {
    if (ctx.tree.node(id).kind != NodeKind::name) return id;
    auto next = ctx.bindings.resolve_name(id);
    if (!next) return id;
    id = *next;
  }
  return id;
}

/// Applies `fn(key_node, value_node)` to each key/value entry of a mapping
/// literal (skipping `**spread` entries).
template <typename Fn>
void for_each_entry(const EnrichedTree& tree, NodeId mapping, Fn&& fn) {
  const auto& kids = tree.node(mapping).children;
  for (std::size_t i = 0; i < kids.size();) {
    if (tree.node(kids[i]).kind == NodeKind::starred_kwargs) {
      ++i;
      continue;
    }
    if (i + 1 >= kids.size()) break;
    fn(kids[i], kids[i + 1]);
    i += 2;
  }
}

std::string last_segment(std::string_view path) {
  std::size_t dot = path.rfind('.');
  return std::string(dot == std::string_view::npos ? path
                                                   : path.substr(dot + 1));
}

bool path_has_segment(std::string_view path, std::string_view segment) {
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t dot = path.find('.', start);
    std::string_view part = path.substr(
        start, dot == std::string_view::npos ? path.size() - start
                                             : dot - start);
    if (part == segment) return true;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return false;
}

/// Flattened key evidence around a call: direct keyword arguments, entries of
/// recognized config objects (mappings or config-constructor calls, searched
/// recursively), keyword arguments of chained calls (`.with_options(...)`)
/// and of the bound client's constructor.
struct Evidence {
  struct Entry {
    std::string key;
    NodeId value;
  };
  std::vector<Entry> entries;

  bool has_key(std::string_view key) const {
    for (const Entry& e : entries)
      if (e.key == key) return true;
    return false;
  }
  NodeId value_of(std::string_view key) const {
    for (const Entry& e : entries)
      if (e.key == key) return e.value;
    return k_no_node;
  }
};

void expand_config_value(const AnalysisContext& ctx, NodeId value,
                         Evidence& out, int depth);

void add_entry(const AnalysisContext& ctx, const std::string& key,
               NodeId value, Evidence& out, int depth, bool expand_all) {
  out.entries.push_back({key, value});
  if (depth <= 0) return;
  if (expand_all || k_config_kwargs.count(key))
    expand_config_value(ctx, value, out, depth - 1);
}

/// Recurses into a config-ish value: mapping entries and config-call keyword
/// arguments become evidence keys at any depth.
void expand_config_value(const AnalysisContext& ctx, NodeId value,
                         Evidence& out, int depth) {
  if (depth <= 0) return;
  NodeId target = resolve_node(ctx, value);
  const SyntaxNode& n = ctx.tree.node(target);
  if (n.kind == NodeKind::mapping_literal) {
    for_each_entry(ctx.tree, target, [&](NodeId key, NodeId val) {
      auto key_text = ctx.bindings.resolve_string(key);
      if (key_text)
        add_entry(ctx, *key_text, val, out, depth - 1, /*expand_all=*/true);
      else
        expand_config_value(ctx, val, out, depth - 1);
    });
    return;
  }
  if (n.kind == NodeKind::call) {  // GenerateContentConfig(...), Options(...)
    CallSite cfg = make_call_site(ctx.tree, target);
    for (const auto& [key, val] : cfg.keyword_args)
      add_entry(ctx, key, val, out, depth - 1, /*expand_all=*/true);
  }
}

Evidence collect_evidence(const AnalysisContext& ctx, const CallSite& call) {
  Evidence out;
  const int depth = 8;
  for (const auto& [key, value] : call.keyword_args)
    add_entry(ctx, key, value, out, depth, /*expand_all=*/false);
  for (NodeId chain_call : call.chain_calls) {
    CallSite chained = make_call_site(ctx.tree, chain_call);
    for (const auto& [key, value] : chained.keyword_args)
      add_entry(ctx, key, value, out, depth, /*expand_all=*/false);
  }
  if (call.base_is_name) {
    if (const ClientBinding* cb = ctx.bindings.client(call.base_name)) {
      std::vector<NodeId> option_nodes = cb->option_calls;
      if (cb->constructor != k_no_node)
        option_nodes.insert(option_nodes.begin(), cb->constructor);
      for (NodeId opt : option_nodes) {
        CallSite ctor = make_call_site(ctx.tree, opt);
        for (const auto& [key, value] : ctor.keyword_args)
          add_entry(ctx, key, value, out, depth, /*expand_all=*/false);
      }
    }
  }
  return out;
}

/// Canonical callee path, cached per call through the context would be nicer;
/// resolution is cheap enough to recompute.
std::string canonical_path(const AnalysisContext& ctx, const CallSite& call) {
  return ctx.bindings.resolve_callee(call);
}

bool is_constructor_path(std::string_view canonical) {
  return !client_constructor_tag(canonical).empty() ||
         is_pipeline_constructor(canonical);
}

std::optional<std::string> pipeline_task_of(std::string_view canonical) {
  constexpr std::string_view prefix = "pipeline:";
  if (canonical.substr(0, prefix.size()) != prefix) return std::nullopt;
  return std::string(canonical.substr(prefix.size()));
}

// --- message list resolution ------------------------------------------------

enum class MessagesStatus { absent, unresolved, resolved };

struct Messages {
  MessagesStatus status = MessagesStatus::absent;
  NodeId kwarg_value = k_no_node;
  std::vector<NodeId> elements;  // resolved element nodes (list items)
};

Messages message_list(const AnalysisContext& ctx, const CallSite& call) {
  Messages out;
  for (std::string_view kw : k_message_kwargs) {
    NodeId v = call.keyword(kw);
    if (v == k_no_node) continue;
    out.kwarg_value = v;
    NodeId target = resolve_node(ctx, v);
    const SyntaxNode& n = ctx.tree.node(target);
    if (n.kind == NodeKind::list_literal) {
      out.status = MessagesStatus::resolved;
      for (NodeId el : n.children)
        out.elements.push_back(resolve_node(ctx, el));
    } else if (n.kind == NodeKind::string_literal) {
      out.status = MessagesStatus::resolved;  // plain prompt, no roles
    } else {
      out.status = MessagesStatus::unresolved;
    }
    return out;
  }
  return out;
}

/// Role string of a message mapping, when statically known.  The outer
/// optional is "has a role key at all".
std::optional<std::optional<std::string>> role_of(const AnalysisContext& ctx,
                                                  NodeId mapping) {
  std::optional<std::optional<std::string>> found;
  for_each_entry(ctx.tree, mapping, [&](NodeId key, NodeId value) {
    auto key_text = ctx.bindings.resolve_string(key);
    if (!key_text || *key_text != "role") return;
    found = ctx.bindings.resolve_string(value);
  });
  return found;
}

// --- image payload scan -------------------------------------------------

struct ImageScan {
  bool found = false;
  std::vector<NodeId> payload_values;  // exprs carrying the image data
  std::vector<NodeId> marked_mappings; // mappings that matched a marker
};

void scan_images(const AnalysisContext& ctx, NodeId id, ImageScan& out,
                 int depth) {
  if (depth <= 0) return;
  NodeId target = resolve_node(ctx, id);
  const SyntaxNode& n = ctx.tree.node(target);
  switch (n.kind) {
    case NodeKind::string_literal: {
      for (const std::string& marker : ctx.patterns.image_markers()) {
        auto [kind, payload] = split_marker(marker);
        if (kind == "prefix" && n.value.size() >= payload.size() &&
            std::string_view(n.value).substr(0, payload.size()) == payload) {
          out.found = true;
          out.payload_values.push_back(target);
        }
      }
      return;
    }
    case NodeKind::list_literal:
      for (NodeId el : n.children) scan_images(ctx, el, out, depth - 1);
      return;
    case NodeKind::mapping_literal: {
      bool matched = false;
      for_each_entry(ctx.tree, target, [&](NodeId key, NodeId value) {
        auto key_text = ctx.bindings.resolve_string(key);
        if (key_text) {
          for (const std::string& marker : ctx.patterns.image_markers()) {
            auto [kind, payload] = split_marker(marker);
            if (kind == "key" && *key_text == payload) {
              matched = true;
              out.payload_values.push_back(resolve_node(ctx, value));
            } else if (kind == "type" && *key_text == "type") {
              auto value_text = ctx.bindings.resolve_string(value);
              if (value_text && *value_text == payload) matched = true;
            }
          }
        }
        scan_images(ctx, value, out, depth - 1);
      });
      if (matched) {
        out.found = true;
        out.marked_mappings.push_back(target);
      }
      return;
    }
    case NodeKind::call: {
      CallSite inner = make_call_site(ctx.tree, target);
      for (NodeId arg : inner.positional_args)
        scan_images(ctx, arg, out, depth - 1);
      for (const auto& [key, value] : inner.keyword_args) {
        (void)key;
        scan_images(ctx, value, out, depth - 1);
      }
      return;
    }
    default:
      return;
  }
}

ImageScan image_scan(const AnalysisContext& ctx, const CallSite& call) {
  ImageScan out;
  for (const auto& [key, value] : call.keyword_args) {
    // APIs that take the payload as a direct keyword (ollama's `images=`)
    // match the same key markers as mapping entries.
    for (const std::string& marker : ctx.patterns.image_markers()) {
      auto [kind, payload] = split_marker(marker);
      if (kind == "key" && key == payload) {
        out.found = true;
        out.payload_values.push_back(resolve_node(ctx, value));
      }
    }
    scan_images(ctx, value, out, 8);
  }
  for (NodeId arg : call.positional_args) scan_images(ctx, arg, out, 8);
  return out;
}

}  // namespace

// --- gating predicates --------------------------------------------------

bool is_text_generating_call(const AnalysisContext& ctx,
                             const CallSite& call) {
  std::string canonical = canonical_path(ctx, call);
  if (is_constructor_path(canonical)) return false;
  if (auto task = pipeline_task_of(canonical))
    return k_text_gen_tasks.count(*task) > 0;
  return ctx.patterns.text_gen_path(canonical);
}

bool is_llm_call(const AnalysisContext& ctx, const CallSite& call) {
  std::string canonical = canonical_path(ctx, call);
  if (is_constructor_path(canonical)) return false;
  if (auto task = pipeline_task_of(canonical))
    return k_text_gen_tasks.count(*task) > 0 || k_vision_tasks.count(*task) > 0;
  return ctx.patterns.text_gen_path(canonical);
}

std::optional<std::string> resolved_model(const AnalysisContext& ctx,
                                          const CallSite& call) {
  // 1. model keyword on the call itself
  for (std::string_view kw : k_model_kwargs) {
    NodeId v = call.keyword(kw);
    if (v != k_no_node) {
      if (auto s = ctx.bindings.resolve_string(v)) return s;
      return std::nullopt;  // present but not a static constant
    }
  }
  // 2. "model" entry of a recognized config object
  for (std::string_view cfg : k_config_kwargs) {
    NodeId v = call.keyword(cfg);
    if (v == k_no_node) continue;
    Evidence ev;
    expand_config_value(ctx, v, ev, 8);
    NodeId model = ev.value_of("model");
    if (model != k_no_node)
      if (auto s = ctx.bindings.resolve_string(model)) return s;
  }
  // 3. the constructor the callee is bound to
  if (call.base_is_name) {
    if (const ClientBinding* cb = ctx.bindings.client(call.base_name)) {
      if (cb->constructor != k_no_node) {
        CallSite ctor = make_call_site(ctx.tree, cb->constructor);
        for (std::string_view kw : k_model_kwargs) {
          NodeId v = ctor.keyword(kw);
          if (v != k_no_node)
            if (auto s = ctx.bindings.resolve_string(v)) return s;
        }
        std::string ctor_name = last_segment(ctor.callee_path);
        if (ctor_name == "GenerativeModel" && !ctor.positional_args.empty())
          if (auto s = ctx.bindings.resolve_string(ctor.positional_args[0]))
            return s;
        if (cb->tag == "pipeline" && ctor.positional_args.size() >= 2)
          if (auto s = ctx.bindings.resolve_string(ctor.positional_args[1]))
            return s;
      }
    }
  }
  return std::nullopt;
}

bool is_reasoning_model_call(const AnalysisContext& ctx,
                             const CallSite& call) {
  auto model = resolved_model(ctx, call);
  return model && ctx.patterns.reasoning_model(*model);
}

bool is_vision_model_call(const AnalysisContext& ctx, const CallSite& call) {
  auto model = resolved_model(ctx, call);
  return model && ctx.patterns.vision_model(*model);
}

bool is_role_based_llm_chat(const AnalysisContext& ctx, const CallSite& call) {
  if (!is_llm_call(ctx, call)) return false;
  Messages msgs = message_list(ctx, call);
  if (msgs.status != MessagesStatus::resolved || msgs.elements.empty())
    return false;
  for (NodeId el : msgs.elements) {
    if (ctx.tree.node(el).kind != NodeKind::mapping_literal) return false;
    if (!role_of(ctx, el).has_value()) return false;
  }
  return true;
}

bool requires_temperature(const AnalysisContext& ctx, const CallSite& call) {
  auto model = resolved_model(ctx, call);
  if (model && ctx.patterns.reasoning_model(*model)) return false;
  Evidence ev = collect_evidence(ctx, call);
  if (ev.has_key("top_p") || ev.has_key("top_k")) return false;
  return true;
}

// --- absence predicates ---------------------------------------------------

bool has_no_temperature_parameter(const AnalysisContext& ctx,
                                  const CallSite& call) {
  return !collect_evidence(ctx, call).has_key("temperature");
}

bool has_no_model_version_pinning(const AnalysisContext& ctx,
                                  const CallSite& call) {
  auto model = resolved_model(ctx, call);
  if (!model) return false;  // cannot judge: stay quiet
  const std::string& m = *model;
  if (m == "latest" || m.ends_with(":latest") || m.ends_with("-latest") ||
      m.ends_with("@latest"))
    return true;
  return !ctx.patterns.pinned_version(m);
}

bool has_no_reasoning_effort(const AnalysisContext& ctx,
                             const CallSite& call) {
  Evidence ev = collect_evidence(ctx, call);
  for (std::string_view key : k_reasoning_keys)
    if (ev.has_key(key)) return false;
  return true;
}

bool has_no_bounded_metrics(const AnalysisContext& ctx, const CallSite& call) {
  Evidence ev = collect_evidence(ctx, call);
  for (const Evidence::Entry& e : ev.entries)
    if (ctx.patterns.bound_metric_key(e.key)) return false;
  return true;
}

bool has_no_structured_output(const AnalysisContext& ctx,
                              const CallSite& call) {
  Evidence ev = collect_evidence(ctx, call);
  std::string canonical = canonical_path(ctx, call);
  for (const std::string& marker : ctx.patterns.structured_markers()) {
    auto [kind, payload] = split_marker(marker);
    if (kind == "kwarg") {
      if (ev.has_key(payload)) return false;
    } else if (kind == "keyval") {
      std::size_t eq = payload.find('=');
      if (eq == std::string_view::npos) continue;
      NodeId v = ev.value_of(payload.substr(0, eq));
      if (v != k_no_node) {
        auto text = ctx.bindings.resolve_string(v);
        if (text && *text == payload.substr(eq + 1)) return false;
      }
    } else if (kind == "path") {
      // Follow key segments through nested mappings.
      std::string_view rest = payload;
      std::size_t dot = rest.find('.');
      if (dot == std::string_view::npos) continue;
      NodeId v = ev.value_of(rest.substr(0, dot));
      rest.remove_prefix(dot + 1);
      bool matched = v != k_no_node;
      while (matched && !rest.empty()) {
        dot = rest.find('.');
        std::string_view seg =
            dot == std::string_view::npos ? rest : rest.substr(0, dot);
        rest.remove_prefix(dot == std::string_view::npos ? rest.size()
                                                         : dot + 1);
        NodeId target = resolve_node(ctx, v);
        if (ctx.tree.node(target).kind != NodeKind::mapping_literal) {
          matched = false;
          break;
        }
        NodeId next = k_no_node;
        for_each_entry(ctx.tree, target, [&](NodeId key, NodeId value) {
          auto key_text = ctx.bindings.resolve_string(key);
          if (key_text && *key_text == seg) next = value;
        });
        matched = next != k_no_node;
        v = next;
      }
      if (matched) return false;
    } else if (kind == "chain") {
      if (path_has_segment(canonical, payload) ||
          path_has_segment(call.callee_path, payload))
        return false;
    }
  }
  return true;
}

bool has_no_system_message(const AnalysisContext& ctx, const CallSite& call) {
  Evidence ev = collect_evidence(ctx, call);
  Messages msgs = message_list(ctx, call);
  for (const std::string& marker : ctx.patterns.system_markers()) {
    auto [kind, payload] = split_marker(marker);
    if (kind == "kwarg" && ev.has_key(payload)) return false;
  }
  if (msgs.status == MessagesStatus::unresolved) return false;
  for (NodeId el : msgs.elements) {
    const SyntaxNode& n = ctx.tree.node(el);
    if (n.kind == NodeKind::name) return false;  // opaque element
    if (n.kind != NodeKind::mapping_literal) continue;
    auto role = role_of(ctx, el);
    if (!role) continue;       // no role key in this mapping
    if (!role->has_value()) return false;  // role value not static
    for (const std::string& marker : ctx.patterns.system_markers()) {
      auto [kind, payload] = split_marker(marker);
      if (kind == "role" && **role == payload) return false;
    }
  }
  return true;
}

// --- presence predicates ---------------------------------------------------

bool has_image_content(const AnalysisContext& ctx, const CallSite& call) {
  return image_scan(ctx, call).found;
}

bool has_image_preprocessing(const AnalysisContext& ctx,
                             const CallSite& call) {
  ImageScan scan = image_scan(ctx, call);
  if (!scan.found) return false;
  for (NodeId payload : scan.payload_values) {
    NodeId target = resolve_node(ctx, payload);
    const SyntaxNode& n = ctx.tree.node(target);
    if (n.kind != NodeKind::call) continue;
    CallSite inner = make_call_site(ctx.tree, target);
    if (ctx.patterns.preprocessing_name(last_segment(inner.callee_path)))
      return true;
  }
  return false;
}

bool has_explicit_detail_level(const AnalysisContext& ctx,
                               const CallSite& call) {
  for (std::string_view key : k_detail_keys)
    if (call.keyword(key) != k_no_node) return true;
  ImageScan scan = image_scan(ctx, call);
  bool found = false;
  auto search_mapping = [&](auto&& self, NodeId mapping, int depth) -> void {
    if (found || depth <= 0) return;
    for_each_entry(ctx.tree, mapping, [&](NodeId key, NodeId value) {
      if (found) return;
      auto key_text = ctx.bindings.resolve_string(key);
      if (key_text && k_detail_keys.count(*key_text)) {
        found = true;
        return;
      }
      NodeId target = resolve_node(ctx, value);
      if (ctx.tree.node(target).kind == NodeKind::mapping_literal)
        self(self, target, depth - 1);
    });
  };
  for (NodeId mapping : scan.marked_mappings)
    search_mapping(search_mapping, mapping, 8);
  return found;
}

bool has_overspecified_sampling(const AnalysisContext& ctx,
                                const CallSite& call) {
  Evidence ev = collect_evidence(ctx, call);
  return ev.has_key("temperature") &&
         (ev.has_key("top_p") || ev.has_key("top_k"));
}

bool has_multi_user_context(const AnalysisContext& ctx, const CallSite& call) {
  for (ScopeId sid : call.enclosing_scopes) {
    const ScopeInfo& scope = ctx.tree.scope(sid);
    if (scope.kind == ScopeKind::module) continue;
    if (scope.node == k_no_node) continue;
    bool found = false;
    ctx.tree.walk_from(scope.node, [&](NodeId id) {
      if (found) return false;
      const SyntaxNode& n = ctx.tree.node(id);
      if (n.kind == NodeKind::name || (n.kind == NodeKind::other &&
                                       n.tag == "param")) {
        if (ctx.patterns.multiuser_name(n.value)) found = true;
      } else if (n.kind == NodeKind::attribute_access) {
        std::string chain = dotted_chain(ctx.tree, id);
        if (!chain.empty() && ctx.patterns.multiuser_name(chain)) found = true;
      } else if (n.kind == NodeKind::subscript && n.children.size() == 2) {
        const SyntaxNode& index = ctx.tree.node(n.children[1]);
        if (index.kind == NodeKind::string_literal &&
            ctx.patterns.multiuser_name(index.value))
          found = true;
      }
      return !found;
    });
    if (found) return true;
  }
  return false;
}

bool has_user_attribution(const AnalysisContext& ctx, const CallSite& call) {
  if (call.has_starred_kwargs) return true;  // cannot rule attribution out
  Evidence ev = collect_evidence(ctx, call);
  for (const Evidence::Entry& e : ev.entries)
    if (ctx.patterns.attribution_key(e.key)) return true;
  NodeId metadata = call.keyword("metadata");
  if (metadata != k_no_node) {
    NodeId target = resolve_node(ctx, metadata);
    if (ctx.tree.node(target).kind == NodeKind::mapping_literal) {
      bool found = false;
      for_each_entry(ctx.tree, target, [&](NodeId key, NodeId value) {
        (void)value;
        auto key_text = ctx.bindings.resolve_string(key);
        if (key_text && (ctx.patterns.attribution_key(*key_text) ||
                         ctx.patterns.multiuser_name(*key_text)))
          found = true;
      });
      if (found) return true;
    }
  }
  return false;
}

const std::map<std::string, PredicateFn, std::less<>>& predicate_registry() {
  static const std::map<std::string, PredicateFn, std::less<>> registry = {
      {"isLLMCall", &is_llm_call},
      {"isTextGeneratingCall", &is_text_generating_call},
      {"isReasoningModelCall", &is_reasoning_model_call},
      {"isVisionModelCall", &is_vision_model_call},
      {"isRoleBasedLLMChat", &is_role_based_llm_chat},
      {"requiresTemperature", &requires_temperature},
      {"hasNoTemperatureParameter", &has_no_temperature_parameter},
      {"hasNoModelVersionPinning", &has_no_model_version_pinning},
      {"hasNoReasoningEffort", &has_no_reasoning_effort},
      {"hasNoBoundedMetrics", &has_no_bounded_metrics},
      {"hasNoStructuredOutput", &has_no_structured_output},
      {"hasNoSystemMessage", &has_no_system_message},
      {"hasImageContent", &has_image_content},
      {"hasImagePreprocessing", &has_image_preprocessing},
      {"hasExplicitDetailLevel", &has_explicit_detail_level},
      {"hasOverspecifiedSampling", &has_overspecified_sampling},
      {"hasMultiUserContext", &has_multi_user_context},
      {"hasUserAttribution", &has_user_attribution},
  };
  return registry;
}

}  // namespace llmlint
