#include "ebtforge/source_model.hpp"

#include <algorithm>
#include <limits>

#include "ebtforge/errors.hpp"

namespace ebtforge {

std::string to_string(const SrcLoc& loc) {
    return loc.file + ":" + std::to_string(loc.line);
}

// ---- expressions -----------------------------------------------------------

namespace {

ExprPtr wrap(Expr::Node node) {
    return std::make_shared<const Expr>(Expr{std::move(node)});
}

bool args_equal(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!structurally_equal(a[i], b[i])) return false;
    }
    return true;
}

}  // namespace

ExprPtr make_name(std::string id) { return wrap(expr::Name{std::move(id)}); }
ExprPtr make_literal(std::string text) { return wrap(expr::Literal{std::move(text)}); }
ExprPtr make_field(ExprPtr base, std::string field) {
    return wrap(expr::FieldAccess{std::move(base), std::move(field)});
}
ExprPtr make_call(ExprPtr base, std::string name, std::vector<ExprPtr> args) {
    return wrap(expr::MethodCall{std::move(base), std::move(name), std::move(args)});
}
ExprPtr make_index(ExprPtr base, ExprPtr index) { return wrap(expr::ArrayAccess{std::move(base), std::move(index)}); }
ExprPtr make_binary(std::string op, ExprPtr lhs, ExprPtr rhs) {
    return wrap(expr::Binary{std::move(op), std::move(lhs), std::move(rhs)});
}
ExprPtr make_unary(std::string op, ExprPtr operand, bool postfix) {
    return wrap(expr::Unary{std::move(op), std::move(operand), postfix});
}
ExprPtr make_ternary(ExprPtr cond, ExprPtr then_expr, ExprPtr else_expr) {
    return wrap(expr::Ternary{std::move(cond), std::move(then_expr), std::move(else_expr)});
}
ExprPtr make_new(std::string type, std::vector<ExprPtr> args) {
    return wrap(expr::New{std::move(type), std::move(args)});
}
ExprPtr make_opaque(std::string text) { return wrap(expr::Opaque{std::move(text)}); }

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    if (a == b) return true;
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const T& y = std::get<T>(b->node);
            if constexpr (std::is_same_v<T, expr::Name>) {
                return x.id == y.id;
            } else if constexpr (std::is_same_v<T, expr::Literal> || std::is_same_v<T, expr::Opaque>) {
                return x.text == y.text;
            } else if constexpr (std::is_same_v<T, expr::FieldAccess>) {
                return x.field == y.field && structurally_equal(x.base, y.base);
            } else if constexpr (std::is_same_v<T, expr::MethodCall>) {
                return x.name == y.name && structurally_equal(x.base, y.base) && args_equal(x.args, y.args);
            } else if constexpr (std::is_same_v<T, expr::ArrayAccess>) {
                return structurally_equal(x.base, y.base) && structurally_equal(x.index, y.index);
            } else if constexpr (std::is_same_v<T, expr::Binary>) {
                return x.op == y.op && structurally_equal(x.lhs, y.lhs) && structurally_equal(x.rhs, y.rhs);
            } else if constexpr (std::is_same_v<T, expr::Unary>) {
                return x.op == y.op && x.postfix == y.postfix && structurally_equal(x.operand, y.operand);
            } else if constexpr (std::is_same_v<T, expr::Ternary>) {
                return structurally_equal(x.cond, y.cond) && structurally_equal(x.then_expr, y.then_expr) &&
                       structurally_equal(x.else_expr, y.else_expr);
            } else {
                static_assert(std::is_same_v<T, expr::New>);
                return x.type == y.type && args_equal(x.args, y.args);
            }
        },
        a->node);
}

bool contains_opaque(const ExprPtr& e) {
    bool found = false;
    walk_expr(e, [&](const Expr& x) { found = found || x.is<expr::Opaque>(); });
    return found;
}

std::vector<ExprPtr> expr_children(const Expr& e) {
    return std::visit(
        [](const auto& x) -> std::vector<ExprPtr> {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, expr::FieldAccess>) {
                return {x.base};
            } else if constexpr (std::is_same_v<T, expr::MethodCall>) {
                std::vector<ExprPtr> out;
                if (x.base) out.push_back(x.base);
                out.insert(out.end(), x.args.begin(), x.args.end());
                return out;
            } else if constexpr (std::is_same_v<T, expr::New>) {
                return x.args;
            } else if constexpr (std::is_same_v<T, expr::ArrayAccess>) {
                return {x.base, x.index};
            } else if constexpr (std::is_same_v<T, expr::Binary>) {
                return {x.lhs, x.rhs};
            } else if constexpr (std::is_same_v<T, expr::Unary>) {
                return {x.operand};
            } else if constexpr (std::is_same_v<T, expr::Ternary>) {
                return {x.cond, x.then_expr, x.else_expr};
            } else {
                return {};
            }
        },
        e.node);
}

// ---- statements ------------------------------------------------------------

std::vector<ExprPtr> stmt_exprs(const Stmt& s) {
    std::vector<ExprPtr> out;
    auto add = [&](const ExprPtr& e) {
        if (e) out.push_back(e);
    };
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, stmt::If> || std::is_same_v<T, stmt::Loop>) {
                add(x.cond);
            } else if constexpr (std::is_same_v<T, stmt::Throw> || std::is_same_v<T, stmt::ExprStmt>) {
                add(x.expr);
            } else if constexpr (std::is_same_v<T, stmt::Assign>) {
                add(x.lhs);
                add(x.rhs);
            } else if constexpr (std::is_same_v<T, stmt::LocalDecl>) {
                add(x.init);
            } else if constexpr (std::is_same_v<T, stmt::Return>) {
                add(x.value);
            } else if constexpr (std::is_same_v<T, stmt::Synchronized>) {
                add(x.monitor);
            }
        },
        s.node);
    return out;
}

std::vector<const Block*> child_blocks(const Stmt& s) {
    std::vector<const Block*> out;
    if (const auto* i = s.as<stmt::If>()) {
        out.push_back(&i->then_block);
        if (i->else_block) out.push_back(&*i->else_block);
    } else if (const auto* l = s.as<stmt::Loop>()) {
        out.push_back(&l->body);
    } else if (const auto* t = s.as<stmt::Try>()) {
        out.push_back(&t->body);
        for (const auto& c : t->catches) out.push_back(&c.body);
        if (t->finally_block) out.push_back(&*t->finally_block);
    } else if (const auto* y = s.as<stmt::Synchronized>()) {
        out.push_back(&y->body);
    } else if (const auto* n = s.as<stmt::Nested>()) {
        out.push_back(&n->block);
    }
    return out;
}

std::size_t count_opaque(const Block& block) {
    std::size_t n = 0;
    for_each_stmt(block, [&](const Stmt& s) {
        if (s.as<stmt::Opaque>()) ++n;
        for (const auto& e : stmt_exprs(s)) {
            walk_expr(e, [&](const Expr& x) { n += x.is<expr::Opaque>() ? 1 : 0; });
        }
    });
    return n;
}

// ---- declarations ----------------------------------------------------------

std::string_view to_string(Visibility v) {
    switch (v) {
        case Visibility::Public: return "public";
        case Visibility::Protected: return "protected";
        case Visibility::Package: return "package";
        case Visibility::Private: return "private";
    }
    return "package";
}

std::string_view to_string(TypeKind k) {
    switch (k) {
        case TypeKind::Class: return "class";
        case TypeKind::Interface: return "interface";
        case TypeKind::Enum: return "enum";
        case TypeKind::Record: return "record";
        case TypeKind::Annotation: return "annotation";
    }
    return "class";
}

std::string TypeDecl::simple_name() const {
    auto dot = name.rfind('.');
    return dot == std::string::npos ? name : name.substr(dot + 1);
}

int SourceUnit::line_count() const {
    if (raw_text.empty()) return 0;
    int n = static_cast<int>(std::count(raw_text.begin(), raw_text.end(), '\n'));
    return raw_text.back() == '\n' ? n : n + 1;
}

std::string_view SourceUnit::line_text(int line) const {
    std::string_view text = raw_text;
    std::size_t pos = 0;
    for (int l = 1; l < line; ++l) {
        pos = text.find('\n', pos);
        if (pos == std::string_view::npos) return {};
        ++pos;
    }
    std::size_t end = text.find('\n', pos);
    std::string_view out = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    return out;
}

std::string_view SourceUnit::slice(std::size_t begin, std::size_t end) const {
    std::string_view text = raw_text;
    if (begin >= text.size() || end <= begin) return {};
    return text.substr(begin, std::min(end, text.size()) - begin);
}

std::string qualified_class_name(const SourceUnit& unit, const TypeDecl& type) {
    return unit.package_name.empty() ? type.name : unit.package_name + "." + type.name;
}

MethodRef make_method_ref(const SourceUnit& unit, const MethodDecl& m) {
    MethodRef ref;
    ref.file = unit.path;
    ref.line = m.loc.line;
    ref.class_name = unit.package_name.empty() ? m.class_name : unit.package_name + "." + m.class_name;
    ref.name = m.name;
    ref.is_constructor = m.is_constructor;
    ref.decl_start_line = m.decl_start_line;
    ref.end_line = m.end_line;
    return ref;
}

std::string ThrowTarget::id() const {
    std::string cls = enclosing_class;
    if (auto dot = cls.rfind('.'); dot != std::string::npos) cls.erase(0, dot + 1);
    return cls + "_L" + std::to_string(throw_loc.line);
}

std::string ThrowTarget::marker() const {
    return throw_loc.file + ":" + std::to_string(throw_loc.line);
}

const MethodDecl& locate_method(const SourceUnit& unit, int line) {
    const MethodDecl* containing = nullptr;
    int best_span = std::numeric_limits<int>::max();
    for (const auto& type : unit.types) {
        for (const auto& m : type.methods) {
            if (m.loc.line == line) return m;
            if (m.spans(line) && m.end_line - m.decl_start_line < best_span) {
                containing = &m;
                best_span = m.end_line - m.decl_start_line;
            }
        }
    }
    if (containing) return *containing;
    throw NotFoundError("no method at " + unit.path + ":" + std::to_string(line));
}

ThrowSite locate_throw_site(const SourceUnit& unit, int line) {
    for (const auto& type : unit.types) {
        for (const auto& m : type.methods) {
            if (!m.spans(line)) continue;
            ThrowSite found;
            for_each_stmt(m.body, [&](const Stmt& s) {
                if (found.stmt) return;
                if (const auto* t = s.as<stmt::Throw>(); t && s.loc.line == line) {
                    found = ThrowSite{t, &s, &m, &type};
                }
            });
            if (found.stmt) return found;
        }
    }
    throw NotFoundError("no throw statement at " + unit.path + ":" + std::to_string(line));
}

ThrowTarget locate_throw(const SourceUnit& unit, int line) {
    ThrowSite site = locate_throw_site(unit, line);
    ThrowTarget t;
    t.throw_loc = site.node->loc;
    t.exception_type = site.stmt->exception_type;
    t.enclosing_method = make_method_ref(unit, *site.method);
    t.enclosing_class = qualified_class_name(unit, *site.type);
    t.public_entry = site.method->visibility == Visibility::Public;
    return t;
}

}  // namespace ebtforge
