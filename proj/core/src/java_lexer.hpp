#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ebtforge::detail {

enum class Tok {
    Ident,  // identifiers and keywords
    Number,
    String,  // string, char and text-block literals
    Op,      // operators and punctuation
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string_view text;
    int line = 1;
    int column = 1;
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] bool is(std::string_view t) const { return kind != Tok::End && text == t; }
    [[nodiscard]] bool is_op(std::string_view t) const { return kind == Tok::Op && text == t; }
};

/// Tokenizes Java source. Comments are dropped. Never fails: unterminated
/// literals run to end of line, unknown bytes become single-character ops.
/// The returned tokens view into `src`, which must outlive them. The last
/// token is always Tok::End.
std::vector<Token> lex_java(std::string_view src);

bool is_java_keyword(std::string_view word);

}  // namespace ebtforge::detail
