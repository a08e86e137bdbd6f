// Recursive-descent parser producing the enriched syntax tree.  The grammar
// covers Python 3 statements and expressions at the fidelity the analysis
// needs: structural kinds for calls, assignments, literals, names, attribute
// chains and definitions; everything else becomes a tagged `other` node with
// correct spans and children.
#include <cstring>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lexer.hpp"
#include "llmlint/syntax.hpp"

namespace llmlint {

using detail::TokKind;
using detail::Token;

namespace {

const std::unordered_set<std::string_view> k_keywords = {
    "False", "None",   "True",   "and",    "as",     "assert", "async",
    "await", "break",  "class",  "continue", "def",  "del",    "elif",
    "else",  "except", "finally", "for",   "from",   "global", "if",
    "import", "in",    "is",     "lambda", "nonlocal", "not",  "or",
    "pass",  "raise",  "return", "try",    "while",  "with",   "yield"};

const std::unordered_set<std::string_view> k_aug_ops = {
    "+=", "-=", "*=", "/=", "//=", "%=", "@=", "&=", "|=", "^=", ">>=",
    "<<=", "**="};

struct ParseError {
  std::string message;
  SourcePos pos;
};

}  // namespace

// Defined at namespace scope (not anonymous) to match the friend declaration
// on EnrichedTree.
class Parser {
 public:
  Parser(std::string source, std::string path, const Deadline& deadline)
      : deadline_(deadline) {
    tree_.source_ = std::move(source);
    tree_.path_ = std::move(path);
  }

  EnrichedTree run() {
    detail::LexError lex_err;
    if (!detail::tokenize(tree_.source_, tokens_, lex_err, deadline_)) {
      tree_.error_ = ParseDiagnostic{lex_err.message, lex_err.pos};
      return std::move(tree_);
    }
    try {
      parse_module();
      fixup_parents_and_scopes();
    } catch (const ParseError& e) {
      tree_.nodes_.clear();
      tree_.scopes_.clear();
      tree_.root_ = k_no_node;
      tree_.error_ = ParseDiagnostic{e.message, e.pos};
    }
    return std::move(tree_);
  }

 private:
  // ---- token access ------------------------------------------------------
  const Token& peek(std::size_t k = 0) const {
    std::size_t i = pos_ + k;
    return tokens_[i < tokens_.size() ? i : tokens_.size() - 1];
  }
  const Token& take() {
    const Token& t = tokens_[pos_ < tokens_.size() ? pos_ : tokens_.size() - 1];
    if (pos_ < tokens_.size() - 1) ++pos_;
    prev_end_ = t.end;
    prev_end_off_ = t.end_offset;
    if ((++steps_ & 0xFF) == 0) deadline_.check();
    return t;
  }
  bool at(TokKind k) const { return peek().kind == k; }
  bool at_op(std::string_view s) const {
    return peek().kind == TokKind::op && peek().text == s;
  }
  bool at_kw(std::string_view s) const {
    return peek().kind == TokKind::name && peek().text == s &&
           k_keywords.count(s) > 0;
  }
  bool at_name(std::string_view s) const {  // soft keyword check
    return peek().kind == TokKind::name && peek().text == s;
  }
  bool accept_op(std::string_view s) {
    if (!at_op(s)) return false;
    take();
    return true;
  }
  bool accept_kw(std::string_view s) {
    if (!at_kw(s)) return false;
    take();
    return true;
  }
  void expect_op(std::string_view s, const char* ctx) {
    if (!accept_op(s)) fail(std::string("expected '") + std::string(s) + "' " + ctx);
  }
  std::string expect_name(const char* ctx) {
    if (peek().kind != TokKind::name || k_keywords.count(peek().text))
      fail(std::string("expected identifier ") + ctx);
    return take().text;
  }
  void expect_newline() {
    if (at(TokKind::eof)) return;
    if (peek().kind != TokKind::newline) fail("expected end of line");
    take();
  }

  [[noreturn]] void fail(std::string msg) const {
    throw ParseError{std::move(msg), peek().pos};
  }

  bool at_expr_end() const {
    TokKind k = peek().kind;
    if (k == TokKind::newline || k == TokKind::eof || k == TokKind::dedent)
      return true;
    return peek().kind == TokKind::op &&
           (peek().text == ";" || peek().text == ")" || peek().text == "]" ||
            peek().text == "}" || peek().text == ":" || peek().text == ",");
  }

  // ---- node helpers ------------------------------------------------------
  struct Mark {
    SourcePos pos;
    std::size_t off;
  };
  Mark here() const { return Mark{peek().pos, peek().offset}; }

  NodeId open(NodeKind kind, Mark m) {
    SyntaxNode n;
    n.kind = kind;
    n.span.begin = m.pos;
    n.span.begin_offset = m.off;
    tree_.nodes_.push_back(std::move(n));
    return static_cast<NodeId>(tree_.nodes_.size() - 1);
  }
  NodeId close(NodeId id) {
    tree_.nodes_[id].span.end = prev_end_;
    tree_.nodes_[id].span.end_offset = prev_end_off_;
    return id;
  }
  SyntaxNode& node(NodeId id) { return tree_.nodes_[id]; }
  void add_child(NodeId parent, NodeId child) {
    tree_.nodes_[parent].children.push_back(child);
  }

  /// Node covering exactly the previously taken token.
  NodeId leaf_from_prev(NodeKind kind, const Token& t) {
    SyntaxNode n;
    n.kind = kind;
    n.span.begin = t.pos;
    n.span.end = t.end;
    n.span.begin_offset = t.offset;
    n.span.end_offset = t.end_offset;
    tree_.nodes_.push_back(std::move(n));
    return static_cast<NodeId>(tree_.nodes_.size() - 1);
  }

  struct Snapshot {
    std::size_t token_pos;
    std::size_t node_count;
    SourcePos prev_end;
    std::size_t prev_end_off;
  };
  Snapshot snapshot() const { return {pos_, tree_.nodes_.size(), prev_end_, prev_end_off_}; }
  void rollback(const Snapshot& s) {
    pos_ = s.token_pos;
    tree_.nodes_.resize(s.node_count);
    prev_end_ = s.prev_end;
    prev_end_off_ = s.prev_end_off;
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > 400) p_.fail("expression nesting too deep");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  // ---- module / statements ----------------------------------------------
  void parse_module() {
    Mark m{SourcePos{1, 0}, 0};
    NodeId root = open(NodeKind::other, m);
    node(root).tag = "module";
    std::vector<NodeId> stmts;
    while (!at(TokKind::eof)) {
      if (at(TokKind::newline)) {
        take();
        continue;
      }
      if (at(TokKind::indent)) fail("unexpected indent");
      if (at(TokKind::dedent)) fail("unexpected dedent");
      parse_statement(stmts);
    }
    for (NodeId s : stmts) add_child(root, s);
    take();  // eof, fixes prev_end_ to the file end
    close(root);
    tree_.root_ = root;
  }

  void parse_statement(std::vector<NodeId>& out) {
    if (at_kw("if")) return out.push_back(parse_if());
    if (at_kw("while")) return out.push_back(parse_while());
    if (at_kw("for")) return out.push_back(parse_for(here()));
    if (at_kw("try")) return out.push_back(parse_try());
    if (at_kw("with")) return out.push_back(parse_with(here()));
    if (at_kw("def")) return out.push_back(parse_func(here(), k_no_node));
    if (at_kw("class")) return out.push_back(parse_class(here(), k_no_node));
    if (at_op("@")) return out.push_back(parse_decorated());
    if (at_kw("async")) return out.push_back(parse_async());
    if (at_name("match")) {
      Snapshot s = snapshot();
      try {
        return out.push_back(parse_match());
      } catch (const ParseError&) {
        rollback(s);
      }
    }
    parse_simple_line(out);
  }

  std::vector<NodeId> parse_block() {
    expect_op(":", "before suite");
    std::vector<NodeId> stmts;
    if (at(TokKind::newline)) {
      take();
      if (!at(TokKind::indent)) fail("expected an indented block");
      take();
      while (!at(TokKind::dedent) && !at(TokKind::eof)) {
        if (at(TokKind::newline)) {
          take();
          continue;
        }
        parse_statement(stmts);
      }
      if (at(TokKind::dedent)) take();
    } else {
      parse_simple_line(stmts);
    }
    return stmts;
  }

  NodeId parse_if() {
    Mark m = here();
    take();  // if
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "if";
    add_child(n, parse_namedexpr());
    for (NodeId s : parse_block()) add_child(n, s);
    while (at_kw("elif")) {
      take();
      add_child(n, parse_namedexpr());
      for (NodeId s : parse_block()) add_child(n, s);
    }
    if (accept_kw("else"))
      for (NodeId s : parse_block()) add_child(n, s);
    return close(n);
  }

  NodeId parse_while() {
    Mark m = here();
    take();
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "while";
    add_child(n, parse_namedexpr());
    for (NodeId s : parse_block()) add_child(n, s);
    if (accept_kw("else"))
      for (NodeId s : parse_block()) add_child(n, s);
    return close(n);
  }

  NodeId parse_for(Mark m) {
    take();  // for
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "for";
    add_child(n, parse_target_list());
    if (!accept_kw("in")) fail("expected 'in' in for statement");
    add_child(n, parse_testlist_star());
    for (NodeId s : parse_block()) add_child(n, s);
    if (accept_kw("else"))
      for (NodeId s : parse_block()) add_child(n, s);
    return close(n);
  }

  NodeId parse_try() {
    Mark m = here();
    take();
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "try";
    for (NodeId s : parse_block()) add_child(n, s);
    bool saw_clause = false;
    while (at_kw("except")) {
      saw_clause = true;
      Mark hm = here();
      take();
      accept_op("*");  // except* groups (3.11)
      NodeId h = open(NodeKind::other, hm);
      node(h).tag = "except";
      if (!at_op(":")) {
        add_child(h, parse_test());
        if (accept_kw("as")) node(h).value = expect_name("after 'as'");
      }
      for (NodeId s : parse_block()) add_child(h, s);
      add_child(n, close(h));
    }
    if (accept_kw("else")) {
      saw_clause = true;
      for (NodeId s : parse_block()) add_child(n, s);
    }
    if (accept_kw("finally")) {
      saw_clause = true;
      for (NodeId s : parse_block()) add_child(n, s);
    }
    if (!saw_clause) fail("expected 'except' or 'finally' block");
    return close(n);
  }

  NodeId parse_with(Mark m, bool took_async = false) {
    (void)took_async;
    take();  // with
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "with";
    // Parenthesized item list (3.9+) needs a tentative parse: `(` may also
    // start an ordinary context expression.
    bool parsed_items = false;
    if (at_op("(")) {
      Snapshot s = snapshot();
      try {
        take();  // (
        std::vector<NodeId> items;
        while (!at_op(")")) {
          items.push_back(parse_with_item());
          if (!accept_op(",")) break;
        }
        expect_op(")", "after with items");
        if (!at_op(":")) fail("expected ':'");
        for (NodeId it : items) add_child(n, it);
        parsed_items = true;
      } catch (const ParseError&) {
        rollback(s);
        // Remove any children added before the rollback.
        node(n).children.clear();
      }
    }
    if (!parsed_items) {
      add_child(n, parse_with_item());
      while (accept_op(",")) add_child(n, parse_with_item());
    }
    for (NodeId s : parse_block()) add_child(n, s);
    return close(n);
  }

  NodeId parse_with_item() {
    Mark m = here();
    NodeId item = open(NodeKind::other, m);
    node(item).tag = "with_item";
    add_child(item, parse_test());
    if (accept_kw("as")) add_child(item, parse_target_atom());
    return close(item);
  }

  NodeId parse_decorated() {
    Mark m = here();
    NodeId decs = open(NodeKind::other, m);
    node(decs).tag = "decorators";
    while (at_op("@")) {
      take();
      add_child(decs, parse_namedexpr());
      expect_newline();
      while (at(TokKind::newline)) take();
    }
    close(decs);
    if (at_kw("def")) return parse_func(m, decs);
    if (at_kw("class")) return parse_class(m, decs);
    if (at_kw("async")) {
      take();
      if (at_kw("def")) return parse_func(m, decs);
      fail("expected 'def' after decorators and 'async'");
    }
    fail("expected 'def' or 'class' after decorators");
  }

  NodeId parse_async() {
    Mark m = here();
    take();  // async
    if (at_kw("def")) return parse_func(m, k_no_node);
    if (at_kw("for")) return parse_for(m);
    if (at_kw("with")) return parse_with(m, true);
    fail("expected 'def', 'for' or 'with' after 'async'");
  }

  NodeId parse_func(Mark m, NodeId decorators) {
    take();  // def
    NodeId fn = open(NodeKind::function_def, m);
    node(fn).value = expect_name("after 'def'");
    if (decorators != k_no_node) add_child(fn, decorators);
    expect_op("(", "after function name");
    add_child(fn, parse_params(/*allow_annotations=*/true, ")"));
    expect_op(")", "after parameters");
    if (accept_op("->")) {
      Mark rm = here();
      NodeId ret = open(NodeKind::other, rm);
      node(ret).tag = "returns";
      add_child(ret, parse_test());
      add_child(fn, close(ret));
    }
    for (NodeId s : parse_block()) add_child(fn, s);
    return close(fn);
  }

  /// Parses a parameter list up to (not including) `terminator`.
  NodeId parse_params(bool allow_annotations, std::string_view terminator) {
    Mark m = here();
    NodeId params = open(NodeKind::other, m);
    node(params).tag = "params";
    while (!at_op(terminator) && !(terminator == ":" && at_op(":"))) {
      if (accept_op("/")) {
        if (!accept_op(",")) break;
        continue;
      }
      if (at_op("*") || at_op("**")) {
        take();
        if (peek().kind == TokKind::name && !k_keywords.count(peek().text)) {
          Mark pm = here();
          std::string name = take().text;
          NodeId p = open(NodeKind::other, pm);
          node(p).tag = "param";
          node(p).value = std::move(name);
          if (allow_annotations && accept_op(":")) add_child(p, parse_test());
          close(p);
          add_child(params, p);
        }
        if (!accept_op(",")) break;
        continue;
      }
      Mark pm = here();
      std::string name = expect_name("in parameter list");
      NodeId p = open(NodeKind::other, pm);
      node(p).tag = "param";
      node(p).value = std::move(name);
      if (allow_annotations && accept_op(":")) add_child(p, parse_test());
      if (accept_op("=")) add_child(p, parse_test());
      close(p);
      add_child(params, p);
      if (!accept_op(",")) break;
    }
    return close(params);
  }

  NodeId parse_class(Mark m, NodeId decorators) {
    take();  // class
    NodeId cls = open(NodeKind::class_def, m);
    node(cls).value = expect_name("after 'class'");
    if (decorators != k_no_node) add_child(cls, decorators);
    if (accept_op("(")) {
      Mark bm = here();
      NodeId bases = open(NodeKind::other, bm);
      node(bases).tag = "bases";
      while (!at_op(")")) {
        add_child(bases, parse_call_arg());
        if (!accept_op(",")) break;
      }
      expect_op(")", "after class bases");
      add_child(cls, close(bases));
    }
    for (NodeId s : parse_block()) add_child(cls, s);
    return close(cls);
  }

  NodeId parse_match() {
    Mark m = here();
    take();  // 'match' (soft keyword)
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "match";
    add_child(n, parse_testlist_star());
    expect_op(":", "after match subject");
    expect_newline();
    if (!at(TokKind::indent)) fail("expected an indented block");
    take();
    bool any_case = false;
    while (!at(TokKind::dedent) && !at(TokKind::eof)) {
      if (at(TokKind::newline)) {
        take();
        continue;
      }
      if (!at_name("case")) fail("expected 'case' in match block");
      Mark cm = here();
      take();  // case
      NodeId c = open(NodeKind::other, cm);
      node(c).tag = "case";
      skip_case_pattern();
      for (NodeId s : parse_block()) add_child(c, s);
      add_child(n, close(c));
      any_case = true;
    }
    if (!any_case) fail("expected at least one 'case'");
    if (at(TokKind::dedent)) take();
    return close(n);
  }

  /// Case patterns are consumed without building structure: skip tokens up
  /// to the ':' that opens the case body (bracket-depth aware).
  void skip_case_pattern() {
    int depth = 0;
    bool progressed = false;
    for (;;) {
      if (at(TokKind::eof) || at(TokKind::newline) || at(TokKind::dedent))
        fail("malformed case pattern");
      if (peek().kind == TokKind::op) {
        const std::string& t = peek().text;
        if (t == "(" || t == "[" || t == "{") ++depth;
        if (t == ")" || t == "]" || t == "}") --depth;
        if (t == ":" && depth == 0) {
          if (!progressed) fail("empty case pattern");
          return;
        }
      }
      take();
      progressed = true;
    }
  }

  void parse_simple_line(std::vector<NodeId>& out) {
    for (;;) {
      out.push_back(parse_simple_stmt());
      if (accept_op(";")) {
        if (at(TokKind::newline) || at(TokKind::eof)) break;
        continue;
      }
      break;
    }
    expect_newline();
  }

  NodeId parse_simple_stmt() {
    Mark m = here();
    if (at_kw("return")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "return";
      if (!at_expr_end()) add_child(n, parse_testlist_star());
      return close(n);
    }
    if (at_kw("pass") || at_kw("break") || at_kw("continue")) {
      std::string kw = take().text;
      NodeId n = open(NodeKind::other, m);
      node(n).tag = kw;
      return close(n);
    }
    if (at_kw("global") || at_kw("nonlocal")) {
      std::string kw = take().text;
      NodeId n = open(NodeKind::other, m);
      node(n).tag = kw;
      expect_name("after global/nonlocal");
      while (accept_op(",")) expect_name("in name list");
      return close(n);
    }
    if (at_kw("del")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "del";
      add_child(n, parse_target_list());
      return close(n);
    }
    if (at_kw("assert")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "assert";
      add_child(n, parse_test());
      if (accept_op(",")) add_child(n, parse_test());
      return close(n);
    }
    if (at_kw("raise")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "raise";
      if (!at_expr_end()) {
        add_child(n, parse_test());
        if (accept_kw("from")) add_child(n, parse_test());
      }
      return close(n);
    }
    if (at_kw("import")) return parse_import(m);
    if (at_kw("from")) return parse_from_import(m);
    if (at_kw("yield")) return parse_yield_expr();
    return parse_expr_or_assignment(m);
  }

  NodeId parse_import(Mark m) {
    take();  // import
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "import";
    do {
      Mark am = here();
      std::string first = expect_name("after 'import'");
      std::string dotted = first;
      while (accept_op(".")) dotted += "." + expect_name("in module path");
      std::string local = first;  // `import a.b` binds `a`
      std::string canonical = first;
      if (accept_kw("as")) {
        local = expect_name("after 'as'");
        canonical = dotted;
      }
      NodeId alias = open(NodeKind::other, am);
      node(alias).tag = "alias";
      node(alias).value = canonical;
      NodeId nm = open(NodeKind::name, am);
      node(nm).value = local;
      close(nm);
      add_child(alias, nm);
      add_child(n, close(alias));
    } while (accept_op(","));
    return close(n);
  }

  NodeId parse_from_import(Mark m) {
    take();  // from
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "import_from";
    std::string module;
    while (at_op(".") || at_op("...")) module += take().text;
    if (peek().kind == TokKind::name && !k_keywords.count(peek().text)) {
      module += expect_name("in module path");
      while (accept_op(".")) module += "." + expect_name("in module path");
    }
    node(n).value = module;
    if (!accept_kw("import")) fail("expected 'import' in from-import");
    auto add_alias = [&](const std::string& orig, const std::string& local,
                         Mark am) {
      NodeId alias = open(NodeKind::other, am);
      node(alias).tag = "alias";
      std::string canonical = module;
      if (!canonical.empty() && canonical.back() != '.') canonical += ".";
      canonical += orig;
      node(alias).value = canonical;
      NodeId nm = open(NodeKind::name, am);
      node(nm).value = local;
      close(nm);
      add_child(alias, nm);
      add_child(n, close(alias));
    };
    if (accept_op("*")) {
      Mark am = here();
      add_alias("*", "*", am);
      return close(n);
    }
    bool parens = accept_op("(");
    do {
      if (parens && at_op(")")) break;
      Mark am = here();
      std::string orig = expect_name("after 'import'");
      std::string local = orig;
      if (accept_kw("as")) local = expect_name("after 'as'");
      add_alias(orig, local, am);
    } while (accept_op(","));
    if (parens) expect_op(")", "after import names");
    return close(n);
  }

  NodeId parse_yield_expr() {
    Mark m = here();
    take();  // yield
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "yield";
    if (accept_kw("from")) {
      add_child(n, parse_test());
    } else if (!at_expr_end()) {
      add_child(n, parse_testlist_star());
    }
    return close(n);
  }

  NodeId parse_expr_or_assignment(Mark m) {
    NodeId first = parse_testlist_star();
    if (at_op(":")) {
      take();
      NodeId ann = parse_test();
      NodeId n = open(NodeKind::assignment, m);
      node(n).flags |= node_flag_annotated;
      add_child(n, first);
      add_child(n, ann);
      if (accept_op("=")) {
        add_child(n, at_kw("yield") ? parse_yield_expr() : parse_testlist_star());
      } else {
        node(n).flags |= node_flag_no_value;
      }
      return close(n);
    }
    if (at_op("=")) {
      std::vector<NodeId> exprs{first};
      while (accept_op("="))
        exprs.push_back(at_kw("yield") ? parse_yield_expr()
                                       : parse_testlist_star());
      NodeId n = open(NodeKind::assignment, m);
      for (NodeId e : exprs) add_child(n, e);
      return close(n);
    }
    if (peek().kind == TokKind::op && k_aug_ops.count(peek().text)) {
      take();
      NodeId n = open(NodeKind::assignment, m);
      node(n).flags |= node_flag_augmented;
      add_child(n, first);
      add_child(n, at_kw("yield") ? parse_yield_expr() : parse_testlist_star());
      return close(n);
    }
    return first;  // plain expression statement
  }

  // ---- expressions -------------------------------------------------------

  /// Assignment/loop targets are starred or plain primaries (names,
  /// attributes, subscripts, parenthesized patterns) -- binary operators
  /// never join them, so a bare `in` after the target is left for the
  /// enclosing for statement or comprehension to consume.
  NodeId parse_target_list() {
    Mark m = here();
    NodeId first = parse_target_atom();
    if (!at_op(",")) return first;
    NodeId tup = open(NodeKind::other, m);
    node(tup).tag = "tuple";
    add_child(tup, first);
    while (accept_op(",")) {
      if (at_expr_end() || at_op("=") || at_kw("in")) break;
      add_child(tup, parse_target_atom());
    }
    return close(tup);
  }

  NodeId parse_target_atom() {
    if (at_op("*")) {
      Mark m = here();
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "starred";
      add_child(n, parse_target_atom());
      return close(n);
    }
    return parse_primary();
  }

  /// test (',' test)* with optional star elements; builds a tuple node when
  /// more than one element or a trailing comma is present.
  NodeId parse_testlist_star() {
    Mark m = here();
    NodeId first = parse_test_or_star();
    if (!at_op(",")) return first;
    NodeId tup = open(NodeKind::other, m);
    node(tup).tag = "tuple";
    add_child(tup, first);
    while (accept_op(",")) {
      if (at_expr_end() || at_op("=")) break;
      add_child(tup, parse_test_or_star());
    }
    return close(tup);
  }

  NodeId parse_test_or_star() {
    if (at_op("*")) {
      Mark m = here();
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "starred";
      add_child(n, parse_test());
      return close(n);
    }
    return parse_test();
  }

  NodeId parse_namedexpr() {
    Mark m = here();
    NodeId lhs = parse_test();
    if (at_op(":=")) {
      take();
      NodeId n = open(NodeKind::assignment, m);
      node(n).flags |= node_flag_walrus;
      add_child(n, lhs);
      add_child(n, parse_test());
      return close(n);
    }
    return lhs;
  }

  NodeId parse_test() {
    DepthGuard guard(*this);
    if (at_kw("lambda")) return parse_lambda();
    Mark m = here();
    NodeId body = parse_or_test();
    if (at_kw("if")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "ifexp";
      add_child(n, body);
      add_child(n, parse_or_test());
      if (!accept_kw("else")) fail("expected 'else' in conditional expression");
      add_child(n, parse_test());
      return close(n);
    }
    return body;
  }

  NodeId parse_lambda() {
    Mark m = here();
    take();  // lambda
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "lambda";
    add_child(n, parse_params(/*allow_annotations=*/false, ":"));
    expect_op(":", "after lambda parameters");
    add_child(n, parse_test());
    return close(n);
  }

  NodeId parse_binary_chain(NodeId (Parser::*sub)(),
                            std::initializer_list<std::string_view> ops,
                            const char* tag) {
    Mark m = here();
    NodeId lhs = (this->*sub)();
    for (;;) {
      bool matched = false;
      for (std::string_view op : ops) {
        if (at_op(op)) {
          std::string op_text = take().text;
          NodeId n = open(NodeKind::other, m);
          node(n).tag = tag;
          node(n).value = op_text;
          add_child(n, lhs);
          add_child(n, (this->*sub)());
          lhs = close(n);
          matched = true;
          break;
        }
      }
      if (!matched) return lhs;
    }
  }

  NodeId parse_or_test() {
    Mark m = here();
    NodeId lhs = parse_and_test();
    while (at_kw("or")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "boolop";
      node(n).value = "or";
      add_child(n, lhs);
      add_child(n, parse_and_test());
      lhs = close(n);
    }
    return lhs;
  }

  NodeId parse_and_test() {
    Mark m = here();
    NodeId lhs = parse_not_test();
    while (at_kw("and")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "boolop";
      node(n).value = "and";
      add_child(n, lhs);
      add_child(n, parse_not_test());
      lhs = close(n);
    }
    return lhs;
  }

  NodeId parse_not_test() {
    if (at_kw("not")) {
      Mark m = here();
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "unaryop";
      node(n).value = "not";
      add_child(n, parse_not_test());
      return close(n);
    }
    return parse_comparison();
  }

  NodeId parse_comparison() {
    Mark m = here();
    NodeId lhs = parse_bitor();
    for (;;) {
      std::string op;
      if (at_op("<") || at_op(">") || at_op("<=") || at_op(">=") ||
          at_op("==") || at_op("!=")) {
        op = take().text;
      } else if (at_kw("in")) {
        take();
        op = "in";
      } else if (at_kw("not") && peek(1).kind == TokKind::name &&
                 peek(1).text == "in") {
        take();
        take();
        op = "not in";
      } else if (at_kw("is")) {
        take();
        op = "is";
        if (at_kw("not")) {
          take();
          op = "is not";
        }
      } else {
        return lhs;
      }
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "compare";
      node(n).value = op;
      add_child(n, lhs);
      add_child(n, parse_bitor());
      lhs = close(n);
    }
  }

  NodeId parse_bitor() {
    return parse_binary_chain(&Parser::parse_bitxor, {"|"}, "binop");
  }
  NodeId parse_bitxor() {
    return parse_binary_chain(&Parser::parse_bitand, {"^"}, "binop");
  }
  NodeId parse_bitand() {
    return parse_binary_chain(&Parser::parse_shift, {"&"}, "binop");
  }
  NodeId parse_shift() {
    return parse_binary_chain(&Parser::parse_arith, {"<<", ">>"}, "binop");
  }
  NodeId parse_arith() {
    return parse_binary_chain(&Parser::parse_term, {"+", "-"}, "binop");
  }
  NodeId parse_term() {
    return parse_binary_chain(&Parser::parse_factor,
                              {"*", "//", "/", "%", "@"}, "binop");
  }

  NodeId parse_factor() {
    DepthGuard guard(*this);
    if (at_op("+") || at_op("-") || at_op("~")) {
      Mark m = here();
      std::string op = take().text;
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "unaryop";
      node(n).value = op;
      add_child(n, parse_factor());
      return close(n);
    }
    return parse_power();
  }

  NodeId parse_power() {
    Mark m = here();
    NodeId base = parse_await_primary();
    if (at_op("**")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "binop";
      node(n).value = "**";
      add_child(n, base);
      add_child(n, parse_factor());
      return close(n);
    }
    return base;
  }

  NodeId parse_await_primary() {
    if (at_kw("await")) {
      Mark m = here();
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "await";
      add_child(n, parse_await_primary());
      return close(n);
    }
    return parse_primary();
  }

  NodeId parse_primary() {
    DepthGuard guard(*this);
    Mark m = here();
    NodeId cur = parse_atom();
    for (;;) {
      if (at_op("(")) {
        take();
        NodeId call = open(NodeKind::call, m);
        // Span must start at the callee, not at '('.
        node(call).span.begin = node(cur).span.begin;
        node(call).span.begin_offset = node(cur).span.begin_offset;
        add_child(call, cur);
        parse_call_args(call);
        expect_op(")", "after call arguments");
        cur = close(call);
      } else if (at_op(".")) {
        take();
        std::string attr = expect_name("after '.'");
        NodeId n = open(NodeKind::attribute_access, m);
        node(n).span.begin = node(cur).span.begin;
        node(n).span.begin_offset = node(cur).span.begin_offset;
        node(n).value = std::move(attr);
        add_child(n, cur);
        cur = close(n);
      } else if (at_op("[")) {
        take();
        NodeId n = open(NodeKind::subscript, m);
        node(n).span.begin = node(cur).span.begin;
        node(n).span.begin_offset = node(cur).span.begin_offset;
        add_child(n, cur);
        add_child(n, parse_subscript_index());
        expect_op("]", "after subscript");
        cur = close(n);
      } else {
        return cur;
      }
    }
  }

  void parse_call_args(NodeId call) {
    bool first = true;
    while (!at_op(")")) {
      NodeId arg = parse_call_arg();
      // Generator expression argument: f(x for x in xs)
      if (first && at_kw("for")) arg = parse_comprehension_tail(arg, here());
      add_child(call, arg);
      first = false;
      if (!accept_op(",")) break;
    }
  }

  NodeId parse_call_arg() {
    Mark m = here();
    if (at_op("**")) {
      take();
      NodeId n = open(NodeKind::starred_kwargs, m);
      add_child(n, parse_test());
      return close(n);
    }
    if (at_op("*")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "starred";
      add_child(n, parse_test());
      return close(n);
    }
    if (peek().kind == TokKind::name && !k_keywords.count(peek().text) &&
        peek(1).kind == TokKind::op && peek(1).text == "=") {
      std::string name = take().text;
      take();  // '='
      NodeId n = open(NodeKind::keyword_argument, m);
      node(n).value = std::move(name);
      add_child(n, parse_test());
      return close(n);
    }
    return parse_namedexpr();
  }

  NodeId parse_subscript_index() {
    Mark m = here();
    auto parse_slice_part = [&]() -> NodeId {
      Mark sm = here();
      NodeId lower = k_no_node;
      if (!at_op(":")) lower = parse_test();
      if (!at_op(":")) return lower;  // plain index
      NodeId sl = open(NodeKind::other, sm);
      node(sl).tag = "slice";
      if (lower != k_no_node) add_child(sl, lower);
      take();  // first ':'
      if (!at_op("]") && !at_op(",") && !at_op(":")) add_child(sl, parse_test());
      if (accept_op(":")) {
        if (!at_op("]") && !at_op(",")) add_child(sl, parse_test());
      }
      return close(sl);
    };
    NodeId first = parse_slice_part();
    if (!at_op(",")) return first;
    NodeId tup = open(NodeKind::other, m);
    node(tup).tag = "tuple";
    add_child(tup, first);
    while (accept_op(",")) {
      if (at_op("]")) break;
      add_child(tup, parse_slice_part());
    }
    return close(tup);
  }

  /// Wraps an element expression into a comprehension node, consuming the
  /// trailing `for ... in ... [if ...]` clauses.  `extra` optionally is a
  /// second leading child (dict comprehensions pass key and value).
  NodeId parse_comprehension_tail(NodeId elt, Mark m,
                                  NodeId extra = k_no_node) {
    NodeId comp = open(NodeKind::other, m);
    node(comp).tag = "comprehension";
    node(comp).span.begin = node(elt).span.begin;
    node(comp).span.begin_offset = node(elt).span.begin_offset;
    add_child(comp, elt);
    if (extra != k_no_node) add_child(comp, extra);
    for (;;) {
      if (at_kw("async")) take();
      if (!accept_kw("for")) break;
      Mark fm = here();
      NodeId clause = open(NodeKind::other, fm);
      node(clause).tag = "comp_for";
      add_child(clause, parse_target_list());
      if (!accept_kw("in")) fail("expected 'in' in comprehension");
      add_child(clause, parse_or_test());
      close(clause);
      add_child(comp, clause);
      while (at_kw("if")) {
        take();
        Mark im = here();
        NodeId ic = open(NodeKind::other, im);
        node(ic).tag = "comp_if";
        add_child(ic, parse_or_test_namedexpr());
        close(ic);
        add_child(comp, ic);
      }
      if (!at_kw("for") && !at_kw("async")) break;
    }
    return close(comp);
  }

  NodeId parse_or_test_namedexpr() {
    Mark m = here();
    NodeId lhs = parse_or_test();
    if (at_op(":=")) {
      take();
      NodeId n = open(NodeKind::assignment, m);
      node(n).flags |= node_flag_walrus;
      add_child(n, lhs);
      add_child(n, parse_or_test());
      return close(n);
    }
    return lhs;
  }

  NodeId parse_atom() {
    Mark m = here();
    const Token& t = peek();
    if (t.kind == TokKind::name) {
      if (k_keywords.count(t.text)) {
        if (t.text == "True" || t.text == "False" || t.text == "None") {
          Token tok = take();
          NodeId n = leaf_from_prev(NodeKind::other, tok);
          node(n).tag = "const";
          node(n).value = tok.text;
          return n;
        }
        if (t.text == "lambda") return parse_lambda();
        if (t.text == "yield") return parse_yield_expr();
        if (t.text == "await") return parse_await_primary();
        if (t.text == "not") return parse_not_test();
        fail("unexpected keyword '" + t.text + "' in expression");
      }
      Token tok = take();
      NodeId n = leaf_from_prev(NodeKind::name, tok);
      node(n).value = tok.text;
      return n;
    }
    if (t.kind == TokKind::number) {
      Token tok = take();
      NodeId n = leaf_from_prev(NodeKind::number_literal, tok);
      node(n).value = tok.text;
      return n;
    }
    if (t.kind == TokKind::str || t.kind == TokKind::fstr) {
      return parse_string_group(m);
    }
    if (t.kind == TokKind::op) {
      if (t.text == "...") {
        Token tok = take();
        NodeId n = leaf_from_prev(NodeKind::other, tok);
        node(n).tag = "const";
        node(n).value = "...";
        return n;
      }
      if (t.text == "(") return parse_paren_atom(m);
      if (t.text == "[") return parse_list_atom(m);
      if (t.text == "{") return parse_brace_atom(m);
    }
    fail("unexpected token in expression");
  }

  /// One or more adjacent string literals (implicit concatenation).  Pure
  /// string literals merge into a single string_literal node; any f-string in
  /// the group makes the result an `other`/"fstring" node whose value is
  /// unavailable to constant resolution.
  NodeId parse_string_group(Mark m) {
    std::string value;
    bool any_f = false;
    bool any_bytes = false;
    SourcePos end{};
    std::size_t end_off = 0;
    while (at(TokKind::str) || at(TokKind::fstr)) {
      const Token tok = take();
      if (tok.kind == TokKind::fstr) any_f = true;
      any_bytes = any_bytes || tok.is_bytes;
      value += tok.value;
      end = tok.end;
      end_off = tok.end_offset;
    }
    NodeId n = open(any_f ? NodeKind::other : NodeKind::string_literal, m);
    if (any_f) {
      node(n).tag = "fstring";
      node(n).flags |= node_flag_fstring;
    }
    if (any_bytes) node(n).flags |= node_flag_bytes;
    node(n).value = std::move(value);
    node(n).span.end = end;
    node(n).span.end_offset = end_off;
    return n;
  }

  NodeId parse_paren_atom(Mark m) {
    take();  // (
    if (at_op(")")) {
      take();
      NodeId n = open(NodeKind::other, m);
      node(n).tag = "tuple";
      node(n).span.begin = m.pos;
      node(n).span.begin_offset = m.off;
      return close(n);
    }
    if (at_kw("yield")) {
      NodeId y = parse_yield_expr();
      expect_op(")", "after yield expression");
      return y;
    }
    NodeId first = at_op("*") ? parse_test_or_star() : parse_namedexpr();
    if (at_kw("for") || at_kw("async")) {
      NodeId comp = parse_comprehension_tail(first, m);
      expect_op(")", "after generator expression");
      return comp;
    }
    if (at_op(",")) {
      NodeId tup = open(NodeKind::other, m);
      node(tup).tag = "tuple";
      node(tup).span.begin = node(first).span.begin;
      node(tup).span.begin_offset = node(first).span.begin_offset;
      add_child(tup, first);
      while (accept_op(",")) {
        if (at_op(")")) break;
        add_child(tup, parse_test_or_star());
      }
      expect_op(")", "after tuple");
      return close(tup);
    }
    expect_op(")", "after parenthesized expression");
    return first;  // plain grouping keeps the inner node
  }

  NodeId parse_list_atom(Mark m) {
    take();  // [
    NodeId n = open(NodeKind::list_literal, m);
    if (accept_op("]")) return close(n);
    NodeId first = parse_test_or_star();
    if (at_kw("for") || at_kw("async")) {
      // Morph into a comprehension; drop the provisional list node by
      // reusing it as the comprehension wrapper.
      NodeId comp = parse_comprehension_tail(first, m);
      expect_op("]", "after list comprehension");
      node(comp).span.begin = m.pos;
      node(comp).span.begin_offset = m.off;
      close(comp);
      node(n).kind = NodeKind::other;
      node(n).tag = "group";
      add_child(n, comp);
      return close(n);
    }
    add_child(n, first);
    while (accept_op(",")) {
      if (at_op("]")) break;
      add_child(n, parse_test_or_star());
    }
    expect_op("]", "after list literal");
    return close(n);
  }

  NodeId parse_brace_atom(Mark m) {
    take();  // {
    if (at_op("}")) {
      NodeId n = open(NodeKind::mapping_literal, m);
      node(n).span.begin = m.pos;
      node(n).span.begin_offset = m.off;
      take();
      return close(n);
    }
    if (at_op("**")) {
      NodeId n = open(NodeKind::mapping_literal, m);
      node(n).span.begin = m.pos;
      node(n).span.begin_offset = m.off;
      parse_dict_entries(n);
      expect_op("}", "after dict literal");
      return close(n);
    }
    NodeId first = parse_test_or_star();
    if (at_op(":")) {
      take();
      NodeId value = parse_test();
      if (at_kw("for") || at_kw("async")) {
        NodeId comp = parse_comprehension_tail(first, m, value);
        expect_op("}", "after dict comprehension");
        return comp;
      }
      NodeId n = open(NodeKind::mapping_literal, m);
      node(n).span.begin = m.pos;
      node(n).span.begin_offset = m.off;
      add_child(n, first);
      add_child(n, value);
      if (accept_op(",")) parse_dict_entries(n);
      expect_op("}", "after dict literal");
      return close(n);
    }
    if (at_kw("for") || at_kw("async")) {
      NodeId comp = parse_comprehension_tail(first, m);
      expect_op("}", "after set comprehension");
      return comp;
    }
    // Set literal.
    NodeId n = open(NodeKind::other, m);
    node(n).tag = "set";
    node(n).span.begin = m.pos;
    node(n).span.begin_offset = m.off;
    add_child(n, first);
    while (accept_op(",")) {
      if (at_op("}")) break;
      add_child(n, parse_test_or_star());
    }
    expect_op("}", "after set literal");
    return close(n);
  }

  /// Remaining `key: value` / `**expr` entries of a dict literal.  Children
  /// layout: key/value pairs appended in order; a `**expr` entry contributes
  /// a single starred_kwargs child.
  void parse_dict_entries(NodeId dict) {
    while (!at_op("}")) {
      if (at_op("**")) {
        Mark m = here();
        take();
        NodeId n = open(NodeKind::starred_kwargs, m);
        add_child(n, parse_test());
        add_child(dict, close(n));
      } else {
        add_child(dict, parse_test());
        expect_op(":", "in dict literal");
        add_child(dict, parse_test());
      }
      if (!accept_op(",")) break;
    }
  }

  // ---- parent/scope fixup -------------------------------------------------

  void fixup_parents_and_scopes() {
    tree_.scopes_.clear();
    ScopeInfo module_scope;
    module_scope.kind = ScopeKind::module;
    module_scope.name = "<module>";
    module_scope.span = tree_.nodes_[tree_.root_].span;
    module_scope.node = tree_.root_;
    tree_.scopes_.push_back(module_scope);

    struct Item {
      NodeId id;
      NodeId parent;
      ScopeId scope;
    };
    std::vector<Item> stack{{tree_.root_, k_no_node, 0}};
    while (!stack.empty()) {
      Item it = stack.back();
      stack.pop_back();
      SyntaxNode& n = tree_.nodes_[it.id];
      n.parent = it.parent;
      n.scope = it.scope;

      ScopeId inner = it.scope;
      bool has_inner = false;
      if (n.kind == NodeKind::function_def || n.kind == NodeKind::class_def ||
          (n.kind == NodeKind::other &&
           (n.tag == "lambda" || n.tag == "comprehension"))) {
        ScopeInfo s;
        s.kind = n.kind == NodeKind::class_def ? ScopeKind::cls
                                               : ScopeKind::function;
        s.name = n.kind == NodeKind::function_def || n.kind == NodeKind::class_def
                     ? n.value
                     : (n.tag == "lambda" ? "<lambda>" : "<comp>");
        s.span = n.span;
        s.parent = it.scope;
        s.node = it.id;
        tree_.scopes_.push_back(std::move(s));
        inner = static_cast<ScopeId>(tree_.scopes_.size() - 1);
        has_inner = true;
      }

      for (auto cit = n.children.rbegin(); cit != n.children.rend(); ++cit) {
        ScopeId child_scope = inner;
        if (has_inner) {
          // Decorators and class bases evaluate in the enclosing scope.
          const SyntaxNode& c = tree_.nodes_[*cit];
          if (c.kind == NodeKind::other &&
              (c.tag == "decorators" || c.tag == "bases"))
            child_scope = it.scope;
        }
        stack.push_back({*cit, it.id, child_scope});
      }
    }
  }

  EnrichedTree tree_;
  std::vector<Token> tokens_;
  const Deadline& deadline_;
  std::size_t pos_ = 0;
  SourcePos prev_end_{1, 0};
  std::size_t prev_end_off_ = 0;
  int depth_ = 0;
  std::uint64_t steps_ = 0;
};

EnrichedTree parse_source(std::string source, std::string path,
                          const Deadline& deadline) {
  Parser parser(std::move(source), std::move(path), deadline);
  return parser.run();
}

}  // namespace llmlint
