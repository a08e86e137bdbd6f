#include "lexer.hpp"

#include <array>
#include <cctype>
#include <cstring>

namespace llmlint::detail {
namespace {

bool is_ident_start(unsigned char c) {
  return std::isalpha(c) || c == '_' || c >= 0x80;
}
bool is_ident_cont(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Operators ordered longest-first so greedy matching is correct.
constexpr std::array<const char*, 48> k_operators = {
    "**=", "//=", ">>=", "<<=", "...", "!=", ">=", "<=", "==", "->", ":=",
    "+=",  "-=",  "*=",  "/=",  "%=",  "@=", "&=", "|=", "^=", "**", "//",
    "<<",  ">>",  "+",   "-",   "*",   "/",  "%",  "@",  "<",  ">",  "&",
    "|",   "^",   "~",   "=",   "(",   ")",  "[",  "]",  "{",  "}",  ",",
    ":",   ".",   ";",   "!"};

/// Decode one backslash escape starting at src[i] (the backslash).  Appends
/// the decoded bytes to out and returns the index just past the escape.
std::size_t decode_escape(const std::string& src, std::size_t i,
                          std::string& out) {
  // i points at '\\'; there is at least one more character.
  char c = src[i + 1];
  auto hexval = [](char h) -> int {
    if (h >= '0' && h <= '9') return h - '0';
    if (h >= 'a' && h <= 'f') return h - 'a' + 10;
    if (h >= 'A' && h <= 'F') return h - 'A' + 10;
    return -1;
  };
  auto append_codepoint = [&out](unsigned long cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  };
  switch (c) {
    case 'n': out.push_back('\n'); return i + 2;
    case 't': out.push_back('\t'); return i + 2;
    case 'r': out.push_back('\r'); return i + 2;
    case 'a': out.push_back('\a'); return i + 2;
    case 'b': out.push_back('\b'); return i + 2;
    case 'f': out.push_back('\f'); return i + 2;
    case 'v': out.push_back('\v'); return i + 2;
    case '\\': out.push_back('\\'); return i + 2;
    case '\'': out.push_back('\''); return i + 2;
    case '"': out.push_back('"'); return i + 2;
    case '\n': return i + 2;  // line continuation inside a literal
    case 'x': {
      int h1 = i + 2 < src.size() ? hexval(src[i + 2]) : -1;
      int h2 = i + 3 < src.size() ? hexval(src[i + 3]) : -1;
      if (h1 >= 0 && h2 >= 0) {
        out.push_back(static_cast<char>(h1 * 16 + h2));
        return i + 4;
      }
      break;
    }
    case 'u':
    case 'U': {
      std::size_t n = (c == 'u') ? 4 : 8;
      unsigned long cp = 0;
      bool good = i + 1 + n < src.size() + 1;
      for (std::size_t k = 0; good && k < n; ++k) {
        int h = (i + 2 + k < src.size()) ? hexval(src[i + 2 + k]) : -1;
        if (h < 0) good = false;
        else cp = cp * 16 + static_cast<unsigned long>(h);
      }
      if (good && cp <= 0x10FFFF) {
        append_codepoint(cp);
        return i + 2 + n;
      }
      break;
    }
    default:
      if (c >= '0' && c <= '7') {  // octal, up to 3 digits
        unsigned v = 0;
        std::size_t k = i + 1;
        while (k < src.size() && k < i + 4 && src[k] >= '0' && src[k] <= '7') {
          v = v * 8 + static_cast<unsigned>(src[k] - '0');
          ++k;
        }
        out.push_back(static_cast<char>(v));
        return k;
      }
      break;
  }
  // Unknown escape: keep the backslash, like Python does.
  out.push_back('\\');
  out.push_back(c);
  return i + 2;
}

class Lexer {
 public:
  Lexer(const std::string& src, std::vector<Token>& out, LexError& err,
        const Deadline& deadline)
      : src_(src), out_(out), err_(err), deadline_(deadline) {}

  bool run() {
    indents_.push_back(0);
    // Skip a UTF-8 BOM if present.
    if (src_.size() >= 3 && static_cast<unsigned char>(src_[0]) == 0xEF &&
        static_cast<unsigned char>(src_[1]) == 0xBB &&
        static_cast<unsigned char>(src_[2]) == 0xBF) {
      i_ = 3;
      col_ = 3;
    }
    at_line_start_ = true;
    while (i_ <= src_.size()) {
      if ((++steps_ & 0x3FF) == 0) deadline_.check();
      if (i_ == src_.size()) {
        finish();
        return true;
      }
      if (at_line_start_ && depth_ == 0) {
        if (!handle_indentation()) return false;
        if (i_ >= src_.size()) {
          finish();
          return true;
        }
        at_line_start_ = false;
      }
      if (!next_token()) return false;
    }
    finish();
    return true;
  }

 private:
  SourcePos pos() const { return SourcePos{line_, col_}; }

  char cur() const { return src_[i_]; }
  char at(std::size_t k) const { return k < src_.size() ? src_[k] : '\0'; }

  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 0;
    } else {
      ++col_;
    }
    ++i_;
  }

  void advance_n(std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) advance();
  }

  void emit(TokKind kind, std::size_t start, SourcePos start_pos,
            std::string text = {}, std::string value = {},
            bool is_bytes = false) {
    Token t;
    t.kind = kind;
    t.text = std::move(text);
    t.value = std::move(value);
    t.is_bytes = is_bytes;
    t.pos = start_pos;
    t.end = pos();
    t.offset = start;
    t.end_offset = i_;
    out_.push_back(std::move(t));
  }

  bool fail(const std::string& msg, SourcePos at) {
    err_ = LexError{msg, at};
    return false;
  }

  /// Measure leading whitespace of the current physical line and emit
  /// INDENT/DEDENT tokens.  Blank / comment-only lines are skipped entirely.
  bool handle_indentation() {
    for (;;) {
      std::size_t line_begin = i_;
      SourcePos line_pos = pos();
      int width = 0;
      while (i_ < src_.size()) {
        char c = src_[i_];
        if (c == ' ') {
          ++width;
          advance();
        } else if (c == '\t') {
          width = (width / 8 + 1) * 8;
          advance();
        } else if (c == '\f') {
          width = 0;
          advance();
        } else {
          break;
        }
      }
      if (i_ >= src_.size()) return true;
      char c = src_[i_];
      if (c == '\n' || c == '\r') {
        consume_newline_char();
        continue;  // blank line
      }
      if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n' && src_[i_] != '\r') advance();
        if (i_ < src_.size()) consume_newline_char();
        continue;  // comment-only line
      }
      if (width > indents_.back()) {
        indents_.push_back(width);
        emit(TokKind::indent, line_begin, line_pos);
      } else {
        while (width < indents_.back()) {
          indents_.pop_back();
          emit(TokKind::dedent, line_begin, line_pos);
        }
        if (width != indents_.back())
          return fail("unindent does not match any outer indentation level",
                      line_pos);
      }
      return true;
    }
  }

  void consume_newline_char() {
    if (src_[i_] == '\r') {
      ++i_;  // '\r' or '\r\n' counts as one newline
      if (i_ < src_.size() && src_[i_] == '\n') ++i_;
      ++line_;
      col_ = 0;
    } else {
      advance();  // '\n'
    }
  }

  bool next_token() {
    char c = cur();
    // Whitespace between tokens.
    if (c == ' ' || c == '\t' || c == '\f') {
      advance();
      return true;
    }
    if (c == '\\' && (at(i_ + 1) == '\n' || at(i_ + 1) == '\r')) {
      advance();  // backslash
      consume_newline_char();
      return true;
    }
    if (c == '#') {
      while (i_ < src_.size() && src_[i_] != '\n' && src_[i_] != '\r') advance();
      return true;
    }
    if (c == '\n' || c == '\r') {
      if (depth_ == 0) {
        std::size_t start = i_;
        SourcePos p = pos();
        consume_newline_char();
        if (!logical_line_empty()) emit(TokKind::newline, start, p);
        at_line_start_ = true;
      } else {
        consume_newline_char();
      }
      return true;
    }
    if (is_ident_start(static_cast<unsigned char>(c))) return lex_name_or_string();
    if (is_digit(static_cast<unsigned char>(c)) ||
        (c == '.' && is_digit(static_cast<unsigned char>(at(i_ + 1)))))
      return lex_number();
    if (c == '"' || c == '\'') return lex_string(/*prefix=*/"");
    return lex_operator();
  }

  bool logical_line_empty() const {
    // True when nothing has been emitted since the last newline/indent/dedent.
    if (out_.empty()) return true;
    TokKind k = out_.back().kind;
    return k == TokKind::newline || k == TokKind::indent ||
           k == TokKind::dedent;
  }

  bool lex_name_or_string() {
    std::size_t start = i_;
    SourcePos p = pos();
    while (i_ < src_.size() && is_ident_cont(static_cast<unsigned char>(src_[i_])))
      advance();
    std::string word = src_.substr(start, i_ - start);
    // String prefix? (r, b, u, f and combinations, any case, up to 3 chars)
    if (word.size() <= 3 && i_ < src_.size() &&
        (src_[i_] == '"' || src_[i_] == '\'')) {
      bool prefix_ok = true;
      for (char pc : word) {
        char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(pc)));
        if (lc != 'r' && lc != 'b' && lc != 'u' && lc != 'f') {
          prefix_ok = false;
          break;
        }
      }
      if (prefix_ok) {
        i_ = start;  // rewind; lex_string re-consumes the prefix
        col_ = p.column;
        line_ = p.line;
        return lex_string(word);
      }
    }
    emit(TokKind::name, start, p, std::move(word));
    return true;
  }

  bool lex_string(const std::string& prefix) {
    std::size_t start = i_;
    SourcePos p = pos();
    advance_n(prefix.size());
    bool raw = false, is_bytes = false, is_f = false;
    for (char pc : prefix) {
      char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(pc)));
      if (lc == 'r') raw = true;
      if (lc == 'b') is_bytes = true;
      if (lc == 'f') is_f = true;
    }
    char quote = cur();
    bool triple = at(i_ + 1) == quote && at(i_ + 2) == quote;
    advance_n(triple ? 3 : 1);
    std::size_t body_start = i_;
    for (;;) {
      if ((++steps_ & 0x3FF) == 0) deadline_.check();
      if (i_ >= src_.size())
        return fail("unterminated string literal", p);
      char c = cur();
      if (c == '\\' && i_ + 1 < src_.size()) {
        // Backslash always shields the next character from terminating the
        // literal, raw strings included.
        advance();
        consume_literal_char();
        continue;
      }
      if (!triple && (c == '\n' || c == '\r'))
        return fail("EOL while scanning string literal", p);
      if (c == quote) {
        if (!triple) break;
        if (at(i_ + 1) == quote && at(i_ + 2) == quote) break;
      }
      consume_literal_char();
    }
    std::size_t body_end = i_;
    advance_n(triple ? 3 : 1);
    std::string body = src_.substr(body_start, body_end - body_start);
    std::string value;
    if (raw || is_f) {
      value = body;
    } else {
      value.reserve(body.size());
      for (std::size_t k = 0; k < body.size();) {
        if (body[k] == '\\' && k + 1 < body.size()) {
          k = decode_escape(body, k, value);
        } else {
          value.push_back(body[k]);
          ++k;
        }
      }
    }
    emit(is_f ? TokKind::fstr : TokKind::str, start, p,
         src_.substr(start, i_ - start), std::move(value), is_bytes);
    return true;
  }

  void consume_literal_char() {
    // Like advance() but treats '\r' as a line break as well.
    if (src_[i_] == '\r') {
      ++i_;
      ++line_;
      col_ = 0;
      if (i_ < src_.size() && src_[i_] == '\n') ++i_;
    } else {
      advance();
    }
  }

  bool lex_number() {
    std::size_t start = i_;
    SourcePos p = pos();
    auto take_while = [this](auto pred) {
      while (i_ < src_.size() && pred(static_cast<unsigned char>(src_[i_])))
        advance();
    };
    if (cur() == '0' && (at(i_ + 1) == 'x' || at(i_ + 1) == 'X' ||
                         at(i_ + 1) == 'o' || at(i_ + 1) == 'O' ||
                         at(i_ + 1) == 'b' || at(i_ + 1) == 'B')) {
      advance_n(2);
      take_while([](unsigned char c) { return std::isalnum(c) || c == '_'; });
    } else {
      take_while([](unsigned char c) { return is_digit(c) || c == '_'; });
      if (i_ < src_.size() && cur() == '.') {
        advance();
        take_while([](unsigned char c) { return is_digit(c) || c == '_'; });
      }
      if (i_ < src_.size() && (cur() == 'e' || cur() == 'E')) {
        std::size_t save_i = i_;
        int save_line = line_, save_col = col_;
        advance();
        if (i_ < src_.size() && (cur() == '+' || cur() == '-')) advance();
        if (i_ < src_.size() && is_digit(static_cast<unsigned char>(cur()))) {
          take_while([](unsigned char c) { return is_digit(c) || c == '_'; });
        } else {
          i_ = save_i;  // not an exponent after all (e.g. `1 .e` nonsense)
          line_ = save_line;
          col_ = save_col;
        }
      }
      if (i_ < src_.size() && (cur() == 'j' || cur() == 'J')) advance();
    }
    emit(TokKind::number, start, p, src_.substr(start, i_ - start));
    return true;
  }

  bool lex_operator() {
    std::size_t start = i_;
    SourcePos p = pos();
    for (const char* op : k_operators) {
      std::size_t n = std::strlen(op);
      if (src_.compare(i_, n, op) == 0) {
        if (op[0] == '!' && n == 1) break;  // lone '!' is invalid
        advance_n(n);
        char c0 = op[0];
        if (c0 == '(' || c0 == '[' || c0 == '{') ++depth_;
        if (c0 == ')' || c0 == ']' || c0 == '}') {
          if (depth_ == 0) return fail("unmatched closing bracket", p);
          --depth_;
        }
        emit(TokKind::op, start, p, op);
        return true;
      }
    }
    return fail("invalid character in source", p);
  }

  void finish() {
    // Synthesize a trailing newline for a non-empty final line, then pop the
    // indent stack.
    if (!logical_line_empty()) emit(TokKind::newline, i_, pos());
    while (indents_.size() > 1) {
      indents_.pop_back();
      emit(TokKind::dedent, i_, pos());
    }
    emit(TokKind::eof, i_, pos());
  }

  const std::string& src_;
  std::vector<Token>& out_;
  LexError& err_;
  const Deadline& deadline_;

  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 0;
  int depth_ = 0;
  bool at_line_start_ = true;
  std::vector<int> indents_;
  std::uint64_t steps_ = 0;
};

}  // namespace

bool tokenize(const std::string& source, std::vector<Token>& out,
              LexError& error, const Deadline& deadline) {
  out.clear();
  Lexer lexer(source, out, error, deadline);
  return lexer.run();
}

}  // namespace llmlint::detail
