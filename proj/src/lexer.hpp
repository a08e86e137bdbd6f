// Internal Python tokenizer: logical-line oriented, emitting NEWLINE /
// INDENT / DEDENT the way CPython's tokenizer does.  Not installed; used by
// the parser only.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llmlint/syntax.hpp"

namespace llmlint::detail {

enum class TokKind : std::uint8_t {
  name,      // identifier or keyword (parser decides)
  number,
  str,       // plain or bytes string literal (value decoded)
  fstr,      // f-string literal (value left raw)
  op,        // operator / delimiter
  newline,   // end of a logical line
  indent,
  dedent,
  eof,
};

struct Token {
  TokKind kind = TokKind::eof;
  std::string text;   // spelling (identifier, operator, raw literal)
  std::string value;  // decoded value for str tokens
  bool is_bytes = false;
  SourcePos pos;      // start position
  SourcePos end;      // end position (exclusive)
  std::size_t offset = 0;
  std::size_t end_offset = 0;
};

struct LexError {
  std::string message;
  SourcePos pos;
};

/// Tokenize the whole source.  Returns false (with `error` filled) on
/// malformed input; on success the stream ends with eof (preceded by a
/// synthesized newline and dedents when needed).
bool tokenize(const std::string& source, std::vector<Token>& out,
              LexError& error, const Deadline& deadline);

}  // namespace llmlint::detail
