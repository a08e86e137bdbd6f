// Call-site predicates: the semantic vocabulary rules are written in.
// Every predicate is a pure function of (tree, bindings, patterns, call) and
// errs on the side of *not* matching when evidence is unresolvable.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "llmlint/binding.hpp"
#include "llmlint/patterns.hpp"
#include "llmlint/syntax.hpp"

namespace llmlint {

/// Everything a predicate may consult for one file.
struct AnalysisContext {
  const EnrichedTree& tree;
  const BindingTable& bindings;
  const PatternTable& patterns;
};

// --- gating predicates ------------------------------------------------------
bool is_llm_call(const AnalysisContext& ctx, const CallSite& call);
bool is_text_generating_call(const AnalysisContext& ctx, const CallSite& call);
bool is_reasoning_model_call(const AnalysisContext& ctx, const CallSite& call);
bool is_vision_model_call(const AnalysisContext& ctx, const CallSite& call);
bool is_role_based_llm_chat(const AnalysisContext& ctx, const CallSite& call);
bool requires_temperature(const AnalysisContext& ctx, const CallSite& call);

// --- absence predicates -----------------------------------------------------
bool has_no_temperature_parameter(const AnalysisContext& ctx,
                                  const CallSite& call);
bool has_no_model_version_pinning(const AnalysisContext& ctx,
                                  const CallSite& call);
bool has_no_reasoning_effort(const AnalysisContext& ctx, const CallSite& call);
bool has_no_bounded_metrics(const AnalysisContext& ctx, const CallSite& call);
bool has_no_structured_output(const AnalysisContext& ctx, const CallSite& call);
bool has_no_system_message(const AnalysisContext& ctx, const CallSite& call);

// --- presence predicates ----------------------------------------------------
bool has_image_content(const AnalysisContext& ctx, const CallSite& call);
bool has_image_preprocessing(const AnalysisContext& ctx, const CallSite& call);
bool has_explicit_detail_level(const AnalysisContext& ctx, const CallSite& call);
bool has_overspecified_sampling(const AnalysisContext& ctx,
                                const CallSite& call);
bool has_multi_user_context(const AnalysisContext& ctx, const CallSite& call);
bool has_user_attribution(const AnalysisContext& ctx, const CallSite& call);

/// Model identifier the call resolves to (kwarg, config mapping or client
/// constructor), when it is a compile-time constant.
std::optional<std::string> resolved_model(const AnalysisContext& ctx,
                                          const CallSite& call);

using PredicateFn = bool (*)(const AnalysisContext&, const CallSite&);

/// Rule-language names (camelCase) to implementations.
const std::map<std::string, PredicateFn, std::less<>>& predicate_registry();

}  // namespace llmlint
