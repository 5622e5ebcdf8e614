// Recursive-descent parser for the supported Java subset.
//
// Declarations are parsed structurally; method bodies are parsed statement by
// statement with local recovery, so a construct the parser does not model
// becomes an Opaque statement and its siblings survive. The only unit-level
// failures are "no type declaration" and an unterminated type body.

#include <algorithm>
#include <array>
#include <optional>

#include "ebtforge/errors.hpp"
#include "ebtforge/source_model.hpp"
#include "java_lexer.hpp"

namespace ebtforge {

namespace {

using detail::Tok;
using detail::Token;

// Speculation or statement-level failure; caught and recovered locally.
struct Fail {};
// Hit end of input while inside a body; becomes a unit-level ParseError.
struct Unterminated {
    int line;
};

constexpr std::array<std::string_view, 8> kPrimitives = {"boolean", "byte", "char",   "short",
                                                         "int",     "long", "float", "double"};

bool is_primitive(std::string_view w) {
    return std::find(kPrimitives.begin(), kPrimitives.end(), w) != kPrimitives.end() || w == "void";
}

constexpr std::array<std::string_view, 12> kAssignOps = {"=",  "+=", "-=",  "*=",  "/=",   "%=",
                                                         "&=", "|=", "^=",  "<<=", ">>=", ">>>="};

bool is_assign_op(const Token& t) {
    return t.kind == Tok::Op && std::find(kAssignOps.begin(), kAssignOps.end(), t.text) != kAssignOps.end();
}

int binary_prec(const Token& t) {
    if (t.kind == Tok::Ident) return t.text == "instanceof" ? 9 : -1;
    if (t.kind != Tok::Op) return -1;
    std::string_view op = t.text;
    if (op == "||") return 3;
    if (op == "&&") return 4;
    if (op == "|") return 5;
    if (op == "^") return 6;
    if (op == "&") return 7;
    if (op == "==" || op == "!=") return 8;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 9;
    if (op == "<<" || op == ">>" || op == ">>>") return 10;
    if (op == "+" || op == "-") return 11;
    if (op == "*" || op == "/" || op == "%") return 12;
    return -1;
}

bool is_modifier_keyword(std::string_view w) {
    static constexpr std::array<std::string_view, 13> kMods = {
        "public", "protected", "private",  "static",   "final",  "abstract", "native",
        "synchronized", "transient", "volatile", "strictfp", "default", "sealed"};
    return std::find(kMods.begin(), kMods.end(), w) != kMods.end();
}

bool is_type_keyword(std::string_view w) {
    return w == "class" || w == "interface" || w == "enum" || w == "record";
}

std::string simple_type_name(std::string_view type_text) {
    std::string t(type_text);
    if (auto lt = t.find('<'); lt != std::string::npos) t.erase(lt);
    if (auto dot = t.rfind('.'); dot != std::string::npos) t.erase(0, dot + 1);
    return t;
}

struct Modifiers {
    std::size_t begin_tok = 0;       // first token (annotations included)
    std::size_t after_annotations = 0;  // first token after leading annotations
    Visibility visibility = Visibility::Package;
    bool has_visibility = false;
    bool is_static = false;
};

class Parser {
public:
    Parser(std::string_view src, std::string path) : src_(src), path_(std::move(path)), toks_(detail::lex_java(src)) {}

    void parse_unit(SourceUnit& unit) {
        try {
            parse_unit_inner(unit);
        } catch (const Unterminated& u) {
            throw ParseError(path_, u.line, "unexpected end of file");
        } catch (const Fail&) {
            throw ParseError(path_, cur().line, "malformed declaration");
        }
    }

    ExprPtr parse_standalone_expression() {
        try {
            ExprPtr e = parse_expr();
            if (cur().kind != Tok::End) throw Fail{};
            return e;
        } catch (const Fail&) {
            throw ParseError("<expr>", cur().line, "not a well-formed expression: " + std::string(src_));
        } catch (const Unterminated& u) {
            throw ParseError("<expr>", u.line, "unexpected end of expression");
        }
    }

private:
    // ---- token helpers -------------------------------------------------
    [[nodiscard]] const Token& cur() const { return toks_[pos_]; }
    [[nodiscard]] const Token& peek(std::size_t ahead = 1) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    [[nodiscard]] const Token& prev() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }
    void advance() {
        if (cur().kind != Tok::End) ++pos_;
    }
    bool accept(std::string_view text) {
        if (cur().kind != Tok::End && cur().kind != Tok::String && cur().text == text) {
            advance();
            return true;
        }
        return false;
    }
    void expect(std::string_view text) {
        if (cur().kind == Tok::End) throw Unterminated{cur().line};
        if (!accept(text)) throw Fail{};
    }
    std::string_view ident() {
        if (cur().kind != Tok::Ident) {
            if (cur().kind == Tok::End) throw Unterminated{cur().line};
            throw Fail{};
        }
        auto t = cur().text;
        advance();
        return t;
    }
    [[nodiscard]] std::string_view slice(std::size_t from_tok, std::size_t to_tok_excl) const {
        if (to_tok_excl <= from_tok) return {};
        std::size_t b = toks_[from_tok].begin;
        std::size_t e = toks_[to_tok_excl - 1].end;
        return src_.substr(b, e - b);
    }
    [[nodiscard]] int end_line_of(const Token& t) const {
        return t.line + static_cast<int>(std::count(t.text.begin(), t.text.end(), '\n'));
    }
    [[nodiscard]] SrcLoc loc_of(const Token& t) const { return SrcLoc{path_, t.line, t.column}; }

    // Skips a balanced (...), [...] or {...} group starting at the current token.
    void skip_balanced() {
        std::string_view open = cur().text;
        std::string_view close = open == "(" ? ")" : open == "[" ? "]" : "}";
        int start_line = cur().line;
        int depth = 0;
        do {
            if (cur().kind == Tok::End) throw Unterminated{start_line};
            if (cur().kind == Tok::Op) {
                if (cur().text == open) ++depth;
                else if (cur().text == close) --depth;
            }
            advance();
        } while (depth > 0);
    }

    // Skips <...> type arguments, splitting >> and >>> as needed.
    void skip_type_args() {
        int depth = 0;
        do {
            const Token& t = cur();
            if (t.kind == Tok::End) throw Fail{};
            if (t.kind == Tok::Op) {
                if (t.text == "<") ++depth;
                else if (t.text == ">") --depth;
                else if (t.text == ">>") depth -= 2;
                else if (t.text == ">>>") depth -= 3;
                else if (t.text == "(" ) skip_balanced_noadvance_guard();
                else if (t.text != "," && t.text != "?" && t.text != "." && t.text != "[" && t.text != "]" &&
                         t.text != "&" && t.text != "@")
                    throw Fail{};
            } else if (t.kind != Tok::Ident) {
                throw Fail{};
            }
            if (depth < 0) throw Fail{};
            advance();
        } while (depth > 0);
    }
    // Annotation arguments inside type arguments: @Size(max = 3) String.
    void skip_balanced_noadvance_guard() {
        skip_balanced();
        --pos_;  // the caller advances past the closing paren
    }

    void skip_annotation() {
        expect("@");
        ident();
        while (cur().is_op(".") && peek().kind == Tok::Ident) {
            advance();
            advance();
        }
        if (cur().is_op("(")) skip_balanced();
    }

    // ---- types ---------------------------------------------------------
    // Parses a type and returns normalized text. Throws Fail when the tokens
    // do not form a type.
    std::string parse_type(bool allow_varargs = false) {
        std::size_t start = pos_;
        while (cur().is_op("@") && !peek().is("interface")) skip_annotation();
        std::size_t type_start = pos_;
        if (cur().kind != Tok::Ident) throw Fail{};
        std::string_view first = cur().text;
        if (detail::is_java_keyword(first) && !is_primitive(first)) throw Fail{};
        advance();
        if (!is_primitive(first)) {
            if (cur().is_op("<")) skip_type_args();
            while (cur().is_op(".") && peek().kind == Tok::Ident && !detail::is_java_keyword(peek().text)) {
                advance();
                advance();
                if (cur().is_op("<")) skip_type_args();
            }
        }
        while (cur().is_op("[") && peek().is_op("]")) {
            advance();
            advance();
        }
        if (allow_varargs && cur().is_op("...")) advance();
        (void)start;
        return type_text(type_start, pos_);
    }

    [[nodiscard]] std::string type_text(std::size_t from, std::size_t to) const {
        std::string out;
        for (std::size_t k = from; k < to; ++k) {
            const Token& t = toks_[k];
            if (k > from) {
                const Token& p = toks_[k - 1];
                bool word = t.kind == Tok::Ident;
                bool prev_word = p.kind == Tok::Ident;
                if ((word && prev_word) || p.is_op(",") || (word && p.is_op("?")) || t.is_op("&") ||
                    p.is_op("&"))
                    out += ' ';
            }
            out += t.text;
        }
        return out;
    }

    // ---- declarations --------------------------------------------------
    Modifiers parse_modifiers() {
        Modifiers m;
        m.begin_tok = pos_;
        bool seen_keyword = false;
        m.after_annotations = pos_;
        while (true) {
            if (cur().is_op("@") && !peek().is("interface")) {
                skip_annotation();
                if (!seen_keyword) m.after_annotations = pos_;
                continue;
            }
            if (cur().kind == Tok::Ident && is_modifier_keyword(cur().text)) {
                // `default` starts a member only in interfaces; `default:` never reaches here.
                std::string_view w = cur().text;
                if (w == "public") m.visibility = Visibility::Public, m.has_visibility = true;
                else if (w == "protected") m.visibility = Visibility::Protected, m.has_visibility = true;
                else if (w == "private") m.visibility = Visibility::Private, m.has_visibility = true;
                else if (w == "static") m.is_static = true;
                seen_keyword = true;
                advance();
                continue;
            }
            if (cur().is("non") && peek().is_op("-") && peek(2).is("sealed")) {
                advance();
                advance();
                advance();
                seen_keyword = true;
                continue;
            }
            break;
        }
        return m;
    }

    void parse_unit_inner(SourceUnit& unit) {
        while (cur().is_op("@") && !peek().is("interface")) {
            std::size_t save = pos_;
            skip_annotation();
            if (!cur().is("package")) {
                pos_ = save;
                break;
            }
        }
        if (accept("package")) {
            std::string pkg(ident());
            while (accept(".")) pkg += "." + std::string(ident());
            expect(";");
            unit.package_name = pkg;
        }
        while (cur().is("import")) {
            std::size_t start = pos_;
            while (!cur().is_op(";")) {
                if (cur().kind == Tok::End) throw Unterminated{toks_[start].line};
                advance();
            }
            advance();
            unit.imports.emplace_back(slice(start, pos_));
        }
        while (cur().kind != Tok::End) {
            if (accept(";")) continue;
            Modifiers mods = parse_modifiers();
            if ((cur().kind == Tok::Ident && is_type_keyword(cur().text)) ||
                (cur().is_op("@") && peek().is("interface"))) {
                parse_type_decl(unit, "", mods);
                continue;
            }
            throw ParseError(path_, cur().line, "expected a type declaration");
        }
        if (unit.types.empty()) {
            throw ParseError(path_, toks_.front().kind == Tok::End ? 1 : toks_.front().line,
                             "no type declaration recognized");
        }
    }

    void parse_type_decl(SourceUnit& unit, const std::string& outer, const Modifiers& mods) {
        const Token& kw = toks_[mods.after_annotations];
        TypeKind kind = TypeKind::Class;
        if (cur().is_op("@")) {
            advance();
            kind = TypeKind::Annotation;
        } else if (cur().is("interface")) {
            kind = TypeKind::Interface;
        } else if (cur().is("enum")) {
            kind = TypeKind::Enum;
        } else if (cur().is("record")) {
            kind = TypeKind::Record;
        }
        advance();
        std::string name(ident());
        std::size_t type_index = unit.types.size();
        {
            TypeDecl decl;
            decl.name = outer.empty() ? name : outer + "." + name;
            decl.kind = kind;
            decl.loc = loc_of(kw);
            unit.types.push_back(std::move(decl));
        }
        int decl_line = kw.line;
        // Header: type parameters, record components, extends/implements/permits.
        while (!cur().is_op("{")) {
            if (cur().kind == Tok::End) throw Unterminated{decl_line};
            if (cur().is_op("<")) {
                skip_type_args();
            } else if (cur().is_op("(")) {
                skip_balanced();
            } else if (cur().is_op(";")) {
                throw Fail{};
            } else {
                advance();
            }
        }
        advance();  // {
        std::string qualified = unit.types[type_index].name;
        if (kind == TypeKind::Enum) skip_enum_constants(decl_line);
        while (!cur().is_op("}")) {
            if (cur().kind == Tok::End) throw Unterminated{decl_line};
            parse_member(unit, type_index, qualified, name, kind);
        }
        unit.types[type_index].end_line = cur().line;
        advance();  // }
    }

    void skip_enum_constants(int decl_line) {
        while (true) {
            const Token& t = cur();
            if (t.kind == Tok::End) throw Unterminated{decl_line};
            if (t.is_op(";")) {
                advance();
                return;
            }
            if (t.is_op("}")) return;
            if (t.is_op("(") || t.is_op("{")) {
                skip_balanced();
                continue;
            }
            advance();
        }
    }

    void parse_member(SourceUnit& unit, std::size_t type_index, const std::string& qualified,
                      const std::string& simple, TypeKind kind) {
        if (accept(";")) return;
        std::size_t member_start = pos_;
        std::size_t types_before = unit.types.size();
        try {
            Modifiers mods = parse_modifiers();
            if (cur().is_op("{")) {  // initializer block
                skip_balanced();
                return;
            }
            bool nested_type = (cur().kind == Tok::Ident && is_type_keyword(cur().text) &&
                                (!cur().is("record") || peek().kind == Tok::Ident)) ||
                               (cur().is_op("@") && peek().is("interface"));
            if (nested_type) {
                parse_type_decl(unit, qualified, mods);
                return;
            }
            if (cur().is_op("<")) skip_type_args();  // generic method
            bool is_ctor = cur().is(simple) && (peek().is_op("(") || (kind == TypeKind::Record && peek().is_op("{")));
            std::string method_name;
            if (is_ctor) {
                method_name = simple;
                advance();
            } else {
                parse_type();
                if (cur().kind != Tok::Ident || detail::is_java_keyword(cur().text)) throw Fail{};
                method_name = std::string(cur().text);
                advance();
                if (!cur().is_op("(")) {
                    skip_field_rest();
                    return;
                }
            }
            MethodDecl m;
            m.name = method_name;
            m.class_name = qualified;
            m.is_constructor = is_ctor;
            m.is_static = mods.is_static;
            if (mods.has_visibility) {
                m.visibility = mods.visibility;
            } else if (kind == TypeKind::Interface || kind == TypeKind::Annotation) {
                m.visibility = Visibility::Public;
            } else if (kind == TypeKind::Enum && is_ctor) {
                m.visibility = Visibility::Private;
            }
            const Token& first = toks_[mods.begin_tok];
            const Token& decl = toks_[mods.after_annotations];
            m.loc = loc_of(decl);
            m.decl_start_line = first.line;
            m.begin_offset = first.begin;
            if (cur().is_op("(")) m.params = parse_params();
            while (cur().is_op("[") && peek().is_op("]")) {
                advance();
                advance();
            }
            if (accept("throws")) {
                while (!cur().is_op("{") && !cur().is_op(";")) {
                    if (cur().kind == Tok::End) throw Unterminated{decl.line};
                    if (cur().is_op("<")) skip_type_args();
                    else advance();
                }
            }
            if (accept("default")) {  // annotation element default
                while (!cur().is_op(";")) {
                    if (cur().kind == Tok::End) throw Unterminated{decl.line};
                    if (cur().is_op("{") || cur().is_op("(")) skip_balanced();
                    else advance();
                }
            }
            std::size_t header_end = cur().begin;
            if (cur().is_op("{")) {
                m.has_body = true;
                m.body = parse_block();
            } else {
                expect(";");
            }
            m.end_line = end_line_of(prev());
            m.end_offset = prev().end;
            std::string sig(src_.substr(first.begin, header_end - first.begin));
            while (!sig.empty() && (sig.back() == ' ' || sig.back() == '\n' || sig.back() == '\t' || sig.back() == '\r'))
                sig.pop_back();
            m.signature_text = std::move(sig);
            unit.types[type_index].methods.push_back(std::move(m));
        } catch (const Fail&) {
            unit.types.resize(types_before);
            pos_ = member_start;
            skip_member();
        }
    }

    std::vector<Param> parse_params() {
        std::vector<Param> params;
        expect("(");
        while (!cur().is_op(")")) {
            if (cur().kind == Tok::End) throw Unterminated{cur().line};
            while (cur().is_op("@")) skip_annotation();
            while (accept("final")) {
                while (cur().is_op("@")) skip_annotation();
            }
            std::string type = parse_type(true);
            if (cur().is("this")) {  // receiver parameter
                advance();
            } else {
                Param p;
                p.type = std::move(type);
                p.name = std::string(ident());
                while (cur().is_op("[") && peek().is_op("]")) {
                    advance();
                    advance();
                    p.type += "[]";
                }
                params.push_back(std::move(p));
            }
            if (!accept(",")) break;
        }
        expect(")");
        return params;
    }

    void skip_field_rest() {
        int start_line = cur().line;
        while (!cur().is_op(";")) {
            if (cur().kind == Tok::End) throw Unterminated{start_line};
            if (cur().is_op("{") || cur().is_op("(") || cur().is_op("[")) skip_balanced();
            else advance();
        }
        advance();
    }

    // Recovery for an unparseable member: skip to ';' or past a balanced body.
    void skip_member() {
        int start_line = cur().line;
        while (true) {
            const Token& t = cur();
            if (t.kind == Tok::End) throw Unterminated{start_line};
            if (t.is_op(";")) {
                advance();
                return;
            }
            if (t.is_op("}")) return;
            if (t.is_op("{")) {
                skip_balanced();
                return;
            }
            if (t.is_op("(") || t.is_op("[")) {
                skip_balanced();
                continue;
            }
            advance();
        }
    }

    // ---- statements ----------------------------------------------------
    Block parse_block() {
        int open_line = cur().line;
        expect("{");
        Block b;
        while (!cur().is_op("}")) {
            if (cur().kind == Tok::End) throw Unterminated{open_line};
            parse_statement(b.stmts);
        }
        advance();
        return b;
    }

    // Single statement as a block (for unbraced if/loop bodies).
    Block parse_body() {
        if (cur().is_op("{")) return parse_block();
        Block b;
        parse_statement(b.stmts);
        return b;
    }

    Stmt finish(Stmt::Node node, std::size_t start) {
        Stmt s;
        s.node = std::move(node);
        s.loc = loc_of(toks_[start]);
        const Token& last = toks_[pos_ > start ? pos_ - 1 : start];
        s.end_line = end_line_of(last);
        s.begin_offset = toks_[start].begin;
        s.end_offset = last.end;
        return s;
    }

    void parse_statement(std::vector<Stmt>& out) {
        std::size_t start = pos_;
        std::size_t out_size = out.size();
        try {
            parse_statement_inner(out, start);
        } catch (const Fail&) {
            out.resize(out_size);
            pos_ = start;
            skip_statement();
            out.push_back(finish(stmt::Opaque{std::string(slice(start, pos_))}, start));
        }
    }

    void parse_statement_inner(std::vector<Stmt>& out, std::size_t start) {
        const Token& t = cur();
        if (t.is_op(";")) {
            advance();
            return;
        }
        if (t.is_op("{")) {
            Block b = parse_block();
            out.push_back(finish(stmt::Nested{std::move(b)}, start));
            return;
        }
        if (t.kind == Tok::Ident) {
            std::string_view w = t.text;
            if (w == "if") return out.push_back(parse_if(start));
            if (w == "while") {
                advance();
                expect("(");
                ExprPtr cond = parse_expr();
                expect(")");
                Block body = parse_body();
                return out.push_back(finish(stmt::Loop{stmt::LoopKind::While, cond, std::move(body)}, start));
            }
            if (w == "do") {
                advance();
                Block body = parse_body();
                expect("while");
                expect("(");
                ExprPtr cond = parse_expr();
                expect(")");
                expect(";");
                return out.push_back(finish(stmt::Loop{stmt::LoopKind::DoWhile, cond, std::move(body)}, start));
            }
            if (w == "for") return out.push_back(parse_for(start));
            if (w == "try") return out.push_back(parse_try(start));
            if (w == "synchronized" && peek().is_op("(")) {
                advance();
                expect("(");
                ExprPtr monitor = parse_expr();
                expect(")");
                Block body = parse_block();
                return out.push_back(finish(stmt::Synchronized{monitor, std::move(body)}, start));
            }
            if (w == "throw") {
                advance();
                ExprPtr e = parse_expr();
                expect(";");
                std::string type = "Throwable";
                if (const auto* n = e->as<expr::New>()) type = simple_type_name(n->type);
                return out.push_back(finish(stmt::Throw{e, type}, start));
            }
            if (w == "return") {
                advance();
                ExprPtr e;
                if (!cur().is_op(";")) e = parse_expr();
                expect(";");
                return out.push_back(finish(stmt::Return{e}, start));
            }
            if (w == "switch" || w == "break" || w == "continue" || w == "assert" ||
                (w == "yield" && !peek().is_op("=") && !peek().is_op("("))) {
                throw Fail{};
            }
            // local class / record / interface / enum declarations
            if (is_type_keyword(w) && peek().kind == Tok::Ident) throw Fail{};
            if ((w == "abstract" || w == "static" || w == "final") && is_type_keyword(peek().text)) throw Fail{};
            if (peek().is_op(":") && !detail::is_java_keyword(w)) {  // label
                advance();
                advance();
                parse_statement_inner(out, pos_);
                return;
            }
            if (try_local_decl(out, start)) return;
        }
        ExprPtr e = parse_expr();
        expect(";");
        out.push_back(finish(expr_statement(e), start));
    }

    static Stmt::Node expr_statement(const ExprPtr& e) {
        if (const auto* b = e->as<expr::Binary>()) {
            if (b->op == "=") return stmt::Assign{b->lhs, b->rhs};
            if (b->op.size() >= 2 && b->op.back() == '=' && b->op != "==" && b->op != "!=" && b->op != "<=" &&
                b->op != ">=") {
                std::string base_op = b->op.substr(0, b->op.size() - 1);
                return stmt::Assign{b->lhs, make_binary(base_op, b->lhs, b->rhs)};
            }
        }
        return stmt::ExprStmt{e};
    }

    Stmt parse_if(std::size_t start) {
        expect("if");
        expect("(");
        ExprPtr cond = parse_expr();
        expect(")");
        Block then_block = parse_body();
        std::optional<Block> else_block;
        if (accept("else")) else_block = parse_body();
        return finish(stmt::If{cond, std::move(then_block), std::move(else_block)}, start);
    }

    Stmt parse_for(std::size_t start) {
        expect("for");
        expect("(");
        // for-each: [final] Type name :
        std::size_t save = pos_;
        try {
            parse_local_modifiers();
            parse_type();
            ident();
            if (accept(":")) {
                parse_expr();
                expect(")");
                Block body = parse_body();
                return finish(stmt::Loop{stmt::LoopKind::ForEach, nullptr, std::move(body)}, start);
            }
        } catch (const Fail&) {
        }
        pos_ = save;
        skip_until_depth0(";");
        ExprPtr cond;
        if (!cur().is_op(";")) cond = parse_expr();
        expect(";");
        skip_until_depth0(")");
        expect(")");
        Block body = parse_body();
        return finish(stmt::Loop{stmt::LoopKind::For, cond, std::move(body)}, start);
    }

    void skip_until_depth0(std::string_view stop) {
        int start_line = cur().line;
        while (!cur().is_op(stop)) {
            if (cur().kind == Tok::End) throw Unterminated{start_line};
            if (cur().is_op("(") || cur().is_op("[") || cur().is_op("{")) skip_balanced();
            else if (cur().is_op(")") || cur().is_op("]") || cur().is_op("}")) throw Fail{};
            else advance();
        }
    }

    Stmt parse_try(std::size_t start) {
        expect("try");
        stmt::Try t;
        std::vector<Stmt> resources;
        if (accept("(")) {
            while (!cur().is_op(")")) {
                std::size_t res_start = pos_;
                if (!try_local_decl(resources, res_start, /*resource=*/true)) parse_expr();
                if (!accept(";")) break;
            }
            expect(")");
        }
        t.body = parse_block();
        t.body.stmts.insert(t.body.stmts.begin(), std::make_move_iterator(resources.begin()),
                            std::make_move_iterator(resources.end()));
        while (cur().is("catch")) {
            stmt::Catch c;
            c.line = cur().line;
            advance();
            expect("(");
            parse_local_modifiers();
            std::size_t types_start = pos_;
            parse_type();
            while (accept("|")) parse_type();
            c.types = type_text(types_start, pos_);
            c.var = std::string(ident());
            expect(")");
            c.body = parse_block();
            t.catches.push_back(std::move(c));
        }
        if (accept("finally")) t.finally_block = parse_block();
        return finish(std::move(t), start);
    }

    void parse_local_modifiers() {
        while (true) {
            if (cur().is_op("@")) {
                skip_annotation();
            } else if (cur().is("final")) {
                advance();
            } else {
                break;
            }
        }
    }

    // Local variable declaration(s). Restores position and returns false when
    // the tokens are not a declaration.
    bool try_local_decl(std::vector<Stmt>& out, std::size_t start, bool resource = false) {
        std::size_t save = pos_;
        std::string type;
        try {
            parse_local_modifiers();
            type = parse_type();
            if (cur().kind != Tok::Ident || detail::is_java_keyword(cur().text)) throw Fail{};
            const Token& after = peek();
            if (!(after.is_op("=") || after.is_op(";") || after.is_op(",") || after.is_op("[") ||
                  (resource && after.is_op(")")))) {
                throw Fail{};
            }
        } catch (const Fail&) {
            pos_ = save;
            return false;
        }
        std::vector<stmt::LocalDecl> decls;
        while (true) {
            stmt::LocalDecl d;
            d.name = std::string(ident());
            d.type = type;
            while (cur().is_op("[") && peek().is_op("]")) {
                advance();
                advance();
                d.type += "[]";
            }
            if (accept("=")) {
                if (cur().is_op("{")) {
                    std::size_t b = pos_;
                    skip_balanced();
                    d.init = make_opaque(std::string(slice(b, pos_)));
                } else {
                    d.init = parse_expr();
                }
            }
            decls.push_back(std::move(d));
            if (resource) break;
            if (accept(",")) continue;
            expect(";");
            break;
        }
        for (auto& d : decls) out.push_back(finish(std::move(d), start));
        return true;
    }

    // Recovery: consume one statement's worth of tokens.
    void skip_statement() {
        int start_line = cur().line;
        int depth = 0;
        bool brace_at_top = false;
        while (true) {
            const Token& t = cur();
            if (t.kind == Tok::End) throw Unterminated{start_line};
            if (t.kind == Tok::Op) {
                if (t.text == "(" || t.text == "[" || t.text == "{") {
                    if (t.text == "{" && depth == 0) brace_at_top = true;
                    ++depth;
                } else if (t.text == ")" || t.text == "]" || t.text == "}") {
                    if (depth == 0) {
                        if (t.text == "}") return;  // enclosing block's brace
                        advance();
                        continue;
                    }
                    --depth;
                    if (t.text == "}" && depth == 0 && brace_at_top) {
                        advance();
                        brace_at_top = false;
                        const Token& n = cur();
                        bool continues = n.is_op(";") || n.is_op(")") || n.is_op(",") || n.is_op(".") ||
                                         n.is("else") || n.is("catch") || n.is("finally") || n.is("while");
                        if (!continues) return;
                        continue;
                    }
                } else if (t.text == ";" && depth == 0) {
                    advance();
                    return;
                }
            }
            advance();
        }
    }

    // ---- expressions ---------------------------------------------------
    ExprPtr parse_expr() { return parse_assignment(); }

    ExprPtr parse_assignment() {
        ExprPtr lhs = parse_ternary();
        if (is_assign_op(cur())) {
            std::string op(cur().text);
            advance();
            ExprPtr rhs = parse_assignment();
            return make_binary(op, lhs, rhs);
        }
        return lhs;
    }

    ExprPtr parse_ternary() {
        ExprPtr cond = parse_binary(3);
        if (accept("?")) {
            ExprPtr then_expr = parse_assignment();
            expect(":");
            ExprPtr else_expr = parse_ternary();
            return make_ternary(cond, then_expr, else_expr);
        }
        return cond;
    }

    ExprPtr parse_binary(int min_prec) {
        ExprPtr lhs = parse_unary();
        while (true) {
            int p = binary_prec(cur());
            if (p < min_prec) break;
            if (cur().is("instanceof")) {
                advance();
                accept("final");
                std::size_t ts = pos_;
                parse_type();
                std::string text = type_text(ts, pos_);
                if (cur().kind == Tok::Ident && !detail::is_java_keyword(cur().text)) {
                    text += " " + std::string(cur().text);
                    advance();
                }
                lhs = make_binary("instanceof", lhs, make_literal(text));
                continue;
            }
            std::string op(cur().text);
            advance();
            ExprPtr rhs = parse_binary(p + 1);
            lhs = make_binary(op, lhs, rhs);
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        const Token& t = cur();
        if (t.kind == Tok::Op &&
            (t.text == "!" || t.text == "~" || t.text == "-" || t.text == "+" || t.text == "++" || t.text == "--")) {
            std::string op(t.text);
            advance();
            return make_unary(op, parse_unary());
        }
        if (t.is_op("(")) {
            if (auto cast = try_cast()) return cast;
        }
        std::size_t start = pos_;
        return parse_postfix(parse_primary(), start);
    }

    ExprPtr try_cast() {
        std::size_t save = pos_;
        if (is_lambda_start()) return nullptr;
        try {
            advance();  // (
            std::size_t ts = pos_;
            std::string type = parse_type();
            bool primitive = is_primitive(toks_[ts].text);
            while (accept("&")) parse_type();  // intersection cast
            type = type_text(ts, pos_);
            if (!cur().is_op(")")) throw Fail{};
            advance();
            const Token& n = cur();
            bool follows = primitive ? (n.kind != Tok::Op || n.is_op("(") || n.is_op("!") || n.is_op("~") ||
                                        n.is_op("-") || n.is_op("+") || n.is_op("++") || n.is_op("--"))
                                     : (n.kind == Tok::Ident || n.kind == Tok::Number || n.kind == Tok::String ||
                                        n.is_op("(") || n.is_op("!") || n.is_op("~"));
            if (!follows || (n.kind == Tok::Ident && (n.text == "instanceof"))) throw Fail{};
            return make_unary("(" + type + ")", parse_unary());
        } catch (const Fail&) {
            pos_ = save;
            return nullptr;
        }
    }

    [[nodiscard]] bool is_lambda_start() const {
        const Token& t = cur();
        if (t.kind == Tok::Ident && !detail::is_java_keyword(t.text) && peek().is_op("->")) return true;
        if (!t.is_op("(")) return false;
        int depth = 0;
        for (std::size_t k = pos_; k < toks_.size(); ++k) {
            const Token& x = toks_[k];
            if (x.kind == Tok::End) return false;
            if (x.is_op("(")) ++depth;
            else if (x.is_op(")")) {
                if (--depth == 0) return k + 1 < toks_.size() && toks_[k + 1].is_op("->");
            }
        }
        return false;
    }

    ExprPtr parse_lambda() {
        std::size_t start = pos_;
        if (cur().is_op("(")) skip_balanced();
        else advance();
        expect("->");
        if (cur().is_op("{")) skip_balanced();
        else parse_expr();
        return make_opaque(std::string(slice(start, pos_)));
    }

    ExprPtr parse_primary() {
        const Token& t = cur();
        if (t.kind == Tok::End) throw Unterminated{t.line};
        if (is_lambda_start()) return parse_lambda();
        if (t.kind == Tok::Number || t.kind == Tok::String) {
            advance();
            return make_literal(std::string(t.text));
        }
        if (t.is_op("(")) {
            advance();
            ExprPtr e = parse_expr();
            expect(")");
            return e;
        }
        if (t.kind != Tok::Ident) throw Fail{};
        std::string_view w = t.text;
        if (w == "true" || w == "false" || w == "null") {
            advance();
            return make_literal(std::string(w));
        }
        if (w == "new") return parse_new();
        if (w == "switch") {
            std::size_t start = pos_;
            advance();
            if (!cur().is_op("(")) throw Fail{};
            skip_balanced();
            if (!cur().is_op("{")) throw Fail{};
            skip_balanced();
            return make_opaque(std::string(slice(start, pos_)));
        }
        if (w == "this" || w == "super") {
            advance();
            if (cur().is_op("(")) return make_call(nullptr, std::string(w), parse_args());
            return make_name(std::string(w));
        }
        if (is_primitive(w)) {
            // int.class, int[].class, int[]::new
            std::size_t start = pos_;
            advance();
            while (cur().is_op("[") && peek().is_op("]")) {
                advance();
                advance();
            }
            if (cur().is_op("::")) {
                advance();
                ident();
                return make_opaque(std::string(slice(start, pos_)));
            }
            if (pos_ == start + 1 && cur().is_op(".") && peek().is("class")) return make_name(std::string(w));
            if (cur().is_op(".") && peek().is("class")) {
                advance();
                advance();
                return make_opaque(std::string(slice(start, pos_)));
            }
            throw Fail{};
        }
        if (detail::is_java_keyword(w)) throw Fail{};
        advance();
        if (cur().is_op("(")) return make_call(nullptr, std::string(w), parse_args());
        return make_name(std::string(w));
    }

    ExprPtr parse_new() {
        std::size_t start = pos_;
        expect("new");
        if (cur().is_op("<")) skip_type_args();
        while (cur().is_op("@")) skip_annotation();
        std::size_t ts = pos_;
        if (cur().kind != Tok::Ident) throw Fail{};
        advance();
        if (!is_primitive(toks_[ts].text)) {
            if (cur().is_op("<")) skip_type_args();
            while (cur().is_op(".") && peek().kind == Tok::Ident) {
                advance();
                advance();
                if (cur().is_op("<")) skip_type_args();
            }
        }
        std::string type = type_text(ts, pos_);
        if (cur().is_op("[")) {  // array creation
            while (cur().is_op("[")) skip_balanced();
            if (cur().is_op("{")) skip_balanced();
            return make_opaque(std::string(slice(start, pos_)));
        }
        std::vector<ExprPtr> args = parse_args();
        if (cur().is_op("{")) {  // anonymous class
            skip_balanced();
            return make_opaque(std::string(slice(start, pos_)));
        }
        return make_new(type, std::move(args));
    }

    std::vector<ExprPtr> parse_args() {
        expect("(");
        std::vector<ExprPtr> args;
        if (accept(")")) return args;
        while (true) {
            args.push_back(parse_expr());
            if (accept(",")) continue;
            expect(")");
            return args;
        }
    }

    ExprPtr parse_postfix(ExprPtr e, std::size_t start) {
        while (true) {
            const Token& t = cur();
            if (t.is_op(".")) {
                advance();
                if (cur().is_op("<")) {
                    std::size_t ta = pos_;
                    skip_type_args();
                    std::string targs = type_text(ta, pos_);
                    std::string name(ident());
                    e = make_call(e, targs + name, parse_args());
                    continue;
                }
                if (cur().is("new")) {
                    parse_new();
                    e = make_opaque(std::string(slice(start, pos_)));
                    continue;
                }
                if (cur().kind != Tok::Ident) throw Fail{};
                std::string name(cur().text);
                advance();
                if (cur().is_op("(")) e = make_call(e, name, parse_args());
                else e = make_field(e, name);
                continue;
            }
            if (t.is_op("[")) {
                if (peek().is_op("]")) {  // String[].class, Foo[]::new
                    while (cur().is_op("[") && peek().is_op("]")) {
                        advance();
                        advance();
                    }
                    if (accept("::")) {
                        ident();
                    } else {
                        expect(".");
                        expect("class");
                    }
                    e = make_opaque(std::string(slice(start, pos_)));
                    continue;
                }
                advance();
                ExprPtr idx = parse_expr();
                expect("]");
                e = make_index(e, idx);
                continue;
            }
            if (t.is_op("++") || t.is_op("--")) {
                std::string op(t.text);
                advance();
                e = make_unary(op, e, /*postfix=*/true);
                continue;
            }
            if (t.is_op("::")) {
                advance();
                if (cur().is_op("<")) skip_type_args();
                ident();
                e = make_opaque(std::string(slice(start, pos_)));
                continue;
            }
            if (t.is_op("<") && e->is<expr::Name>()) {
                // Generic type used as a method-reference qualifier: List<String>::size
                std::size_t save = pos_;
                try {
                    skip_type_args();
                    if (cur().is_op("::")) continue;
                } catch (const Fail&) {
                }
                pos_ = save;
            }
            return e;
        }
    }

    std::string_view src_;
    std::string path_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

}  // namespace

SourceUnit parse_compilation_unit(std::string text, std::string path) {
    SourceUnit unit;
    unit.path = path;
    unit.raw_text = std::move(text);
    Parser parser(unit.raw_text, path);
    parser.parse_unit(unit);
    return unit;
}

ExprPtr parse_expression(std::string_view text) {
    Parser parser(text, "<expr>");
    return parser.parse_standalone_expression();
}

}  // namespace ebtforge
