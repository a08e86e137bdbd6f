#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "llmlint/patterns.hpp"

namespace llmlint {

namespace {

const std::set<std::string, std::less<>> k_categories = {
    "text_gen_paths",        "reasoning_model_patterns",
    "vision_model_patterns", "pinned_version_patterns",
    "bound_metric_keys",     "structured_output_markers",
    "system_markers",        "image_payload_markers",
    "preprocessing_name_patterns", "attribution_keys",
    "multiuser_patterns"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool contains(const std::vector<std::string>& list, std::string_view value) {
  for (const std::string& v : list)
    if (v == value) return true;
  return false;
}

bool any_search(const std::vector<std::regex>& regexes, std::string_view text) {
  for (const std::regex& re : regexes)
    if (std::regex_search(text.begin(), text.end(), re)) return true;
  return false;
}

}  // namespace

PatternTable PatternTable::defaults() {
  PatternTable t;
  t.raw_["text_gen_paths"] = {
      "chat.completions.create", "responses.create", "messages.create",
      "generate_content",        "invoke",           "predict"};
  t.raw_["reasoning_model_patterns"] = {
      "^o1([.-]|$)", "^o3([.-]|$)", "^o4([.-]|$)",    "^gpt-5",
      "thinking",    "^gemini-2\\.[5-9]", "^deepseek-r"};
  t.raw_["vision_model_patterns"] = {"^gpt-4o",  "^gpt-4\\.1", "vision",
                                     "^llava",   "^claude-3",  "^gemini"};
  t.raw_["pinned_version_patterns"] = {"-\\d{4}-\\d{2}-\\d{2}$", "-\\d{8}$",
                                       "@", "-v\\d+(\\.\\d+)+$"};
  t.raw_["bound_metric_keys"] = {"max_tokens",           "max_output_tokens",
                                 "max_completion_tokens", "timeout",
                                 "request_timeout",       "max_retries"};
  t.raw_["structured_output_markers"] = {
      "kwarg:response_format", "kwarg:json_schema",
      "kwarg:response_schema", "kwarg:tools",
      "kwarg:functions",       "keyval:response_mime_type=application/json",
      "path:text.format",      "chain:with_structured_output"};
  t.raw_["system_markers"] = {"role:system", "role:developer", "kwarg:system",
                              "kwarg:instructions", "kwarg:system_instruction"};
  t.raw_["image_payload_markers"] = {
      "type:input_image", "type:image_url", "type:image",       "key:image",
      "key:image_url",    "key:images",     "prefix:data:image/"};
  t.raw_["preprocessing_name_patterns"] = {"resize",   "crop",
                                           "thumbnail", "downscale",
                                           "compress",  "convert", "preprocess"};
  t.raw_["attribution_keys"] = {"user", "user_id", "safety_identifier",
                                "prompt_cache_key"};
  t.raw_["multiuser_patterns"] = {"^user_id$",      "^session_id$",
                                  "^user_session",  "^tenant_id$",
                                  "^account_id$",   "^request\\.user(\\.|$)"};
  t.compile();
  return t;
}

PatternTable PatternTable::parse(const std::string& text,
                                 const std::string& origin) {
  PatternTable t = defaults();
  std::set<std::string> replaced;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::size_t ws = body.find_first_of(" \t");
    if (ws == std::string_view::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected '<category> <pattern>'");
    std::string category(body.substr(0, ws));
    std::string pattern(trim(body.substr(ws)));
    if (!k_categories.count(category))
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": unknown pattern category '" + category +
                                  "'");
    if (pattern.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": empty pattern");
    // First mention of a category replaces its default list.
    if (replaced.insert(category).second) t.raw_[category].clear();
    t.raw_[category].push_back(pattern);
  }
  try {
    t.compile();
  } catch (const std::regex_error& e) {
    throw std::invalid_argument(origin + ": invalid pattern regex: " +
                                e.what());
  }
  return t;
}

PatternTable PatternTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::invalid_argument("cannot open patterns file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void PatternTable::compile() {
  auto compile_list = [this](const char* category) {
    std::vector<std::regex> out;
    for (const std::string& p : raw_[category])
      out.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
    return out;
  };
  reasoning_ = compile_list("reasoning_model_patterns");
  vision_ = compile_list("vision_model_patterns");
  pinned_ = compile_list("pinned_version_patterns");
  preprocessing_ = compile_list("preprocessing_name_patterns");
  multiuser_ = compile_list("multiuser_patterns");
}

const std::vector<std::string>& PatternTable::raw(
    std::string_view category) const {
  static const std::vector<std::string> empty;
  auto it = raw_.find(std::string(category));
  return it == raw_.end() ? empty : it->second;
}

bool PatternTable::text_gen_path(std::string_view callee_path) const {
  for (const std::string& p : raw("text_gen_paths")) {
    if (callee_path == p) return true;
    if (callee_path.size() > p.size() && callee_path.ends_with(p) &&
        callee_path[callee_path.size() - p.size() - 1] == '.')
      return true;
  }
  return false;
}

bool PatternTable::reasoning_model(std::string_view model) const {
  return any_search(reasoning_, model);
}
bool PatternTable::vision_model(std::string_view model) const {
  return any_search(vision_, model);
}
bool PatternTable::pinned_version(std::string_view model) const {
  return any_search(pinned_, model);
}
bool PatternTable::bound_metric_key(std::string_view key) const {
  return contains(raw("bound_metric_keys"), key);
}
bool PatternTable::preprocessing_name(std::string_view name) const {
  return any_search(preprocessing_, name);
}
bool PatternTable::attribution_key(std::string_view key) const {
  return contains(raw("attribution_keys"), key);
}
bool PatternTable::multiuser_name(std::string_view name) const {
  return any_search(multiuser_, name);
}

const std::vector<std::string>& PatternTable::structured_markers() const {
  return raw("structured_output_markers");
}
const std::vector<std::string>& PatternTable::system_markers() const {
  return raw("system_markers");
}
const std::vector<std::string>& PatternTable::image_markers() const {
  return raw("image_payload_markers");
}

std::pair<std::string_view, std::string_view> split_marker(
    std::string_view marker) {
  std::size_t colon = marker.find(':');
  if (colon == std::string_view::npos) return {std::string_view{}, marker};
  return {marker.substr(0, colon), marker.substr(colon + 1)};
}

}  // namespace llmlint
