#pragma once

// Simplified Java syntax model: enough structure for throw enumeration,
// path walking and guard extraction. Anything outside the supported subset
// is kept as verbatim text in an Opaque node.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ebtforge {

struct SrcLoc {
    std::string file;  // repo-relative, forward slashes
    int line = 1;      // 1-based
    int column = 1;    // 1-based

    friend bool operator==(const SrcLoc&, const SrcLoc&) = default;
};

std::string to_string(const SrcLoc& loc);

// ---------------------------------------------------------------------------
// Expressions

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

namespace expr {

struct Name {
    std::string id;
};
struct Literal {
    std::string text;
};
struct FieldAccess {
    ExprPtr base;
    std::string field;
};
struct MethodCall {
    ExprPtr base;  // null for unqualified calls
    std::string name;
    std::vector<ExprPtr> args;
};
struct ArrayAccess {
    ExprPtr base;
    ExprPtr index;
};
struct Binary {
    std::string op;
    ExprPtr lhs;
    ExprPtr rhs;
};
// Prefix operators (!, -, +, ~, ++, --), casts (op is "(Type)"), and postfix
// ++/-- (postfix = true).
struct Unary {
    std::string op;
    ExprPtr operand;
    bool postfix = false;
};
struct Ternary {
    ExprPtr cond;
    ExprPtr then_expr;
    ExprPtr else_expr;
};
struct New {
    std::string type;
    std::vector<ExprPtr> args;
};
struct Opaque {
    std::string text;
};

}  // namespace expr

struct Expr {
    using Node = std::variant<expr::Name, expr::Literal, expr::FieldAccess, expr::MethodCall,
                              expr::ArrayAccess, expr::Binary, expr::Unary, expr::Ternary,
                              expr::New, expr::Opaque>;
    Node node;

    template <typename T>
    [[nodiscard]] const T* as() const {
        return std::get_if<T>(&node);
    }
    template <typename T>
    [[nodiscard]] bool is() const {
        return std::holds_alternative<T>(node);
    }
};

/// Structural equality; null pointers compare equal only to null.
bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

ExprPtr make_name(std::string id);
ExprPtr make_literal(std::string text);
ExprPtr make_field(ExprPtr base, std::string field);
ExprPtr make_call(ExprPtr base, std::string name, std::vector<ExprPtr> args);
ExprPtr make_index(ExprPtr base, ExprPtr index);
ExprPtr make_binary(std::string op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_unary(std::string op, ExprPtr operand, bool postfix = false);
ExprPtr make_ternary(ExprPtr cond, ExprPtr then_expr, ExprPtr else_expr);
ExprPtr make_new(std::string type, std::vector<ExprPtr> args);
ExprPtr make_opaque(std::string text);

/// True if `e` or any sub-expression is Opaque.
bool contains_opaque(const ExprPtr& e);

/// Direct sub-expressions in source order. Opaque nodes have none.
std::vector<ExprPtr> expr_children(const Expr& e);

/// Visits `e` and every sub-expression, pre-order.
template <typename F>
void walk_expr(const ExprPtr& e, F&& fn) {
    if (!e) return;
    fn(*e);
    for (const auto& c : expr_children(*e)) walk_expr(c, fn);
}

/// Canonical source text: single spaces around binary operators and only the
/// parentheses needed to keep the tree's shape under Java precedence.
std::string render_expr(const ExprPtr& e);

/// Parses a standalone Java expression. Throws ParseError when the text is
/// not a single well-formed expression.
ExprPtr parse_expression(std::string_view text);

// ---------------------------------------------------------------------------
// Statements

struct Stmt;

struct Block {
    std::vector<Stmt> stmts;
};

namespace stmt {

struct If {
    ExprPtr cond;
    Block then_block;
    std::optional<Block> else_block;
};
struct Throw {
    ExprPtr expr;
    std::string exception_type;  // simple name; "Throwable" when not a `new` expression
};
struct Assign {
    ExprPtr lhs;
    ExprPtr rhs;  // compound assignments are lowered: `x += y` becomes x = x + y
};
struct LocalDecl {
    std::string name;
    std::string type;
    ExprPtr init;  // may be null
};
struct ExprStmt {
    ExprPtr expr;
};
struct Return {
    ExprPtr value;  // may be null
};
enum class LoopKind { While, For, DoWhile, ForEach };
struct Loop {
    LoopKind kind = LoopKind::While;
    ExprPtr cond;  // null when absent (for-each, `for(;;)`)
    Block body;
};
struct Catch {
    std::string types;  // "IOException | TimeoutException"
    std::string var;
    Block body;
    int line = 0;
};
struct Try {
    Block body;  // resources are lowered to leading LocalDecls
    std::vector<Catch> catches;
    std::optional<Block> finally_block;
};
struct Synchronized {
    ExprPtr monitor;
    Block body;
};
struct Nested {
    Block block;
};
struct Opaque {
    std::string text;
};

}  // namespace stmt

struct Stmt {
    using Node = std::variant<stmt::If, stmt::Throw, stmt::Assign, stmt::LocalDecl, stmt::ExprStmt,
                              stmt::Return, stmt::Loop, stmt::Try, stmt::Synchronized, stmt::Nested,
                              stmt::Opaque>;
    Node node;
    SrcLoc loc;
    int end_line = 0;
    std::size_t begin_offset = 0;  // byte range in SourceUnit::raw_text
    std::size_t end_offset = 0;

    template <typename T>
    [[nodiscard]] const T* as() const {
        return std::get_if<T>(&node);
    }
    [[nodiscard]] bool spans(int line) const { return loc.line <= line && line <= end_line; }
};

/// Child blocks of a statement in source order (then, else, body, catches,
/// finally ...). Empty for leaf statements.
std::vector<const Block*> child_blocks(const Stmt& s);

/// Expressions held directly by a statement (condition, initializer,
/// operands). Child blocks are not entered.
std::vector<ExprPtr> stmt_exprs(const Stmt& s);

/// Visits every statement in `block` depth-first, pre-order.
template <typename F>
void for_each_stmt(const Block& block, F&& fn) {
    for (const auto& s : block.stmts) {
        fn(s);
        for (const Block* child : child_blocks(s)) for_each_stmt(*child, fn);
    }
}

// ---------------------------------------------------------------------------
// Declarations

enum class Visibility { Public, Protected, Package, Private };
std::string_view to_string(Visibility v);

struct Param {
    std::string name;
    std::string type;
};

struct MethodDecl {
    std::string name;
    std::string class_name;  // enclosing type, qualified within the file ("Outer.Inner")
    std::vector<Param> params;
    Visibility visibility = Visibility::Package;
    bool is_static = false;
    bool is_constructor = false;
    bool has_body = false;
    Block body;
    SrcLoc loc;               // first token of the declaration after annotations
    int decl_start_line = 0;  // includes leading annotations
    int end_line = 0;
    std::size_t begin_offset = 0;  // start of annotations
    std::size_t end_offset = 0;    // one past the closing brace (or ';')
    std::string signature_text;    // verbatim header, annotations included, body excluded

    [[nodiscard]] bool spans(int line) const { return decl_start_line <= line && line <= end_line; }
};

enum class TypeKind { Class, Interface, Enum, Record, Annotation };
std::string_view to_string(TypeKind k);

struct TypeDecl {
    std::string name;  // qualified within the file: "Outer.Inner"
    TypeKind kind = TypeKind::Class;
    std::vector<MethodDecl> methods;
    SrcLoc loc;
    int end_line = 0;

    [[nodiscard]] std::string simple_name() const;
};

struct SourceUnit {
    std::string path;  // repo-relative
    std::string package_name;
    std::vector<std::string> imports;  // verbatim import lines
    std::vector<TypeDecl> types;       // nested types flattened after their outer type
    std::string raw_text;

    [[nodiscard]] int line_count() const;
    [[nodiscard]] std::string_view line_text(int line) const;  // without the newline
    [[nodiscard]] std::string_view slice(std::size_t begin, std::size_t end) const;
    [[nodiscard]] std::string_view method_text(const MethodDecl& m) const {
        return slice(m.begin_offset, m.end_offset);
    }
    [[nodiscard]] std::string_view stmt_text(const Stmt& s) const {
        return slice(s.begin_offset, s.end_offset);
    }
};

/// Parses Java source. Method bodies never fail: unsupported or malformed
/// statements degrade to Opaque. Throws ParseError when no type declaration
/// is recognized or a type body is left unterminated.
SourceUnit parse_compilation_unit(std::string text, std::string path);

/// Method whose header line equals `line`, else the method whose span
/// contains it. Throws NotFoundError.
const MethodDecl& locate_method(const SourceUnit& unit, int line);

struct ThrowSite {
    const stmt::Throw* stmt = nullptr;
    const Stmt* node = nullptr;
    const MethodDecl* method = nullptr;
    const TypeDecl* type = nullptr;
};

/// The throw statement starting on `line`. Throws NotFoundError.
ThrowSite locate_throw_site(const SourceUnit& unit, int line);

/// Stable handle to a method: its file plus header line.
struct MethodRef {
    std::string file;
    int line = 0;
    std::string class_name;  // qualified ("com.acme.Scheduler")
    std::string name;
    bool is_constructor = false;
    int decl_start_line = 0;
    int end_line = 0;

    [[nodiscard]] bool spans(int l) const { return decl_start_line <= l && l <= end_line; }

    friend bool operator==(const MethodRef& a, const MethodRef& b) {
        return a.file == b.file && a.line == b.line;
    }
};

/// A throw statement: the unit of work for test generation.
struct ThrowTarget {
    SrcLoc throw_loc;
    std::string exception_type;
    MethodRef enclosing_method;
    std::string enclosing_class;  // qualified
    bool public_entry = false;

    /// "<SimpleClass>_L<line>", used for output and scratch names.
    [[nodiscard]] std::string id() const;
    /// "<file>:<line>", the instrumentation marker for this throw.
    [[nodiscard]] std::string marker() const;
};

MethodRef make_method_ref(const SourceUnit& unit, const MethodDecl& m);

/// Qualified class name for a type declared in `unit`.
std::string qualified_class_name(const SourceUnit& unit, const TypeDecl& type);

/// Resolves `line` to a throw statement and wraps it as a target.
ThrowTarget locate_throw(const SourceUnit& unit, int line);

/// Counts Opaque nodes (statements and expressions) inside a block.
std::size_t count_opaque(const Block& block);

}  // namespace ebtforge
