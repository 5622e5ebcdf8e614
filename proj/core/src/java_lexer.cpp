#include "java_lexer.hpp"

#include <array>
#include <cctype>

namespace ebtforge::detail {

namespace {

bool ident_start(unsigned char c) {
    return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80;
}

bool ident_part(unsigned char c) {
    return ident_start(c) || std::isdigit(c);
}

// Longest first within each leading character.
constexpr std::array<std::string_view, 44> kOperators = {
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=",
    "+=",   "-=",  "*=",  "/=",  "&=",  "|=", "^=", "%=", "<<", ">>", "(",  ")",  "{",  "}",  "[",
    "]",    ";",   ",",   ".",   "@",   "=",  ">",  "<",  "!",  "~",  "?",  ":",  "+",  "-",
};
constexpr std::array<std::string_view, 6> kSingleOperators = {"*", "/", "&", "|", "^", "%"};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_trivia();
            if (pos_ >= src_.size()) break;
            out.push_back(next());
        }
        Token end;
        end.kind = Tok::End;
        end.line = line_;
        end.column = col_;
        end.begin = end.end = src_.size();
        out.push_back(end);
        return out;
    }

private:
    [[nodiscard]] char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_trivia() {
        while (pos_ < src_.size()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f') {
                advance();
            } else if (c == '/' && peek(1) == '/') {
                while (pos_ < src_.size() && peek() != '\n') advance();
            } else if (c == '/' && peek(1) == '*') {
                advance();
                advance();
                while (pos_ < src_.size() && !(peek() == '*' && peek(1) == '/')) advance();
                if (pos_ < src_.size()) {
                    advance();
                    advance();
                }
            } else {
                break;
            }
        }
    }

    Token next() {
        Token t;
        t.line = line_;
        t.column = col_;
        t.begin = pos_;
        auto c = static_cast<unsigned char>(peek());
        if (ident_start(c)) {
            t.kind = Tok::Ident;
            while (pos_ < src_.size() && ident_part(static_cast<unsigned char>(peek()))) advance();
        } else if (std::isdigit(c) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
            t.kind = Tok::Number;
            lex_number();
        } else if (c == '"' && peek(1) == '"' && peek(2) == '"') {
            t.kind = Tok::String;
            lex_text_block();
        } else if (c == '"' || c == '\'') {
            t.kind = Tok::String;
            lex_quoted(static_cast<char>(c));
        } else {
            t.kind = Tok::Op;
            lex_operator();
        }
        t.end = pos_;
        t.text = src_.substr(t.begin, t.end - t.begin);
        return t;
    }

    void lex_number() {
        if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X' || peek(1) == 'b' || peek(1) == 'B')) {
            advance();
            advance();
        }
        while (pos_ < src_.size()) {
            char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
                // exponent sign: 1e-5, 0x1p+3
                bool exp = (c == 'e' || c == 'E' || c == 'p' || c == 'P') && (peek(1) == '+' || peek(1) == '-');
                advance();
                if (exp) advance();
            } else if (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
                advance();
            } else if (c == '.' && !ident_start(static_cast<unsigned char>(peek(1))) && peek(1) != '.') {
                // trailing dot: "1." is a double literal
                advance();
            } else {
                break;
            }
        }
    }

    void lex_quoted(char quote) {
        advance();
        while (pos_ < src_.size() && peek() != '\n') {
            char c = peek();
            if (c == '\\' && pos_ + 1 < src_.size()) {
                advance();
                advance();
                continue;
            }
            advance();
            if (c == quote) return;
        }
    }

    void lex_text_block() {
        advance();
        advance();
        advance();
        while (pos_ < src_.size()) {
            if (peek() == '\\' && pos_ + 1 < src_.size()) {
                advance();
                advance();
                continue;
            }
            if (peek() == '"' && peek(1) == '"' && peek(2) == '"') {
                advance();
                advance();
                advance();
                return;
            }
            advance();
        }
    }

    void lex_operator() {
        std::string_view rest = src_.substr(pos_);
        for (std::string_view op : kOperators) {
            if (rest.starts_with(op)) {
                for (std::size_t i = 0; i < op.size(); ++i) advance();
                return;
            }
        }
        for (std::string_view op : kSingleOperators) {
            if (rest.starts_with(op)) {
                advance();
                return;
            }
        }
        // Unknown byte (or a stray UTF-8 continuation); consume one.
        advance();
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

}  // namespace

std::vector<Token> lex_java(std::string_view src) {
    return Lexer(src).run();
}

bool is_java_keyword(std::string_view w) {
    static constexpr std::array<std::string_view, 51> kKeywords = {
        "abstract", "assert",     "boolean",   "break",     "byte",     "case",      "catch",
        "char",     "class",      "const",     "continue",  "default",  "do",        "double",
        "else",     "enum",       "extends",   "final",     "finally",  "float",     "for",
        "goto",     "if",         "implements", "import",   "instanceof", "int",     "interface",
        "long",     "native",     "new",       "package",   "private",  "protected", "public",
        "return",   "short",      "static",    "strictfp",  "super",    "switch",    "synchronized",
        "this",     "throw",      "throws",    "transient", "try",      "void",      "volatile",
        "while",    "_",
    };
    for (auto k : kKeywords) {
        if (k == w) return true;
    }
    return false;
}

}  // namespace ebtforge::detail
