#include "ebtforge/guard_engine.hpp"

#include <algorithm>
#include <functional>
#include <optional>

#include <fmt/format.h>

#include "ebtforge/errors.hpp"
#include "util.hpp"

namespace ebtforge {

// ---- environment and substitution ------------------------------------------

void SymbolicEnv::bind(const std::string& name, ExprPtr value) {
    frames_.back().emplace_back(name, std::move(value));
}

ExprPtr SymbolicEnv::lookup(const std::string& name) const {
    const auto& f = frames_.back();
    for (auto it = f.rbegin(); it != f.rend(); ++it) {
        if (it->first == name) return it->second;
    }
    return nullptr;
}

void SymbolicEnv::push_frame() {
    frames_.emplace_back();
}

namespace {

using NameFn = std::function<ExprPtr(const expr::Name&)>;

std::vector<ExprPtr> map_all(const std::vector<ExprPtr>& xs, const NameFn& fn, bool& changed);

// Rebuilds `e` with names replaced by fn's non-null results. Unchanged
// subtrees are shared, not copied.
ExprPtr map_names(const ExprPtr& e, const NameFn& fn) {
    if (!e) return e;
    return std::visit(
        [&](const auto& x) -> ExprPtr {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, expr::Name>) {
                ExprPtr r = fn(x);
                return r ? r : e;
            } else if constexpr (std::is_same_v<T, expr::Literal> || std::is_same_v<T, expr::Opaque>) {
                return e;
            } else if constexpr (std::is_same_v<T, expr::FieldAccess>) {
                ExprPtr b = map_names(x.base, fn);
                return b == x.base ? e : make_field(b, x.field);
            } else if constexpr (std::is_same_v<T, expr::MethodCall>) {
                bool changed = false;
                ExprPtr b = map_names(x.base, fn);
                auto args = map_all(x.args, fn, changed);
                return (b == x.base && !changed) ? e : make_call(b, x.name, std::move(args));
            } else if constexpr (std::is_same_v<T, expr::New>) {
                bool changed = false;
                auto args = map_all(x.args, fn, changed);
                return changed ? make_new(x.type, std::move(args)) : e;
            } else if constexpr (std::is_same_v<T, expr::ArrayAccess>) {
                ExprPtr b = map_names(x.base, fn);
                ExprPtr i = map_names(x.index, fn);
                return (b == x.base && i == x.index) ? e : make_index(b, i);
            } else if constexpr (std::is_same_v<T, expr::Binary>) {
                ExprPtr l = map_names(x.lhs, fn);
                ExprPtr r = map_names(x.rhs, fn);
                return (l == x.lhs && r == x.rhs) ? e : make_binary(x.op, l, r);
            } else if constexpr (std::is_same_v<T, expr::Unary>) {
                ExprPtr o = map_names(x.operand, fn);
                return o == x.operand ? e : make_unary(x.op, o, x.postfix);
            } else {
                ExprPtr c = map_names(x.cond, fn);
                ExprPtr t = map_names(x.then_expr, fn);
                ExprPtr f = map_names(x.else_expr, fn);
                return (c == x.cond && t == x.then_expr && f == x.else_expr) ? e : make_ternary(c, t, f);
            }
        },
        e->node);
}

std::vector<ExprPtr> map_all(const std::vector<ExprPtr>& xs, const NameFn& fn, bool& changed) {
    std::vector<ExprPtr> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
        out.push_back(map_names(x, fn));
        changed = changed || out.back() != x;
    }
    return out;
}

Substitution substitute_at(const ExprPtr& e, const SymbolicEnv& env, int depth, int cap) {
    bool complete = true;
    ExprPtr out = map_names(e, [&](const expr::Name& n) -> ExprPtr {
        ExprPtr bound = env.lookup(n.id);
        if (!bound) return nullptr;
        if (depth >= cap) {
            complete = false;
            return nullptr;
        }
        Substitution inner = substitute_at(bound, env, depth + 1, cap);
        complete = complete && inner.complete;
        return inner.expr;
    });
    return {out, complete};
}

// Bindings recorded by build_guard are already closed over the env at the
// time they were made, so one pass resolves them. Re-substituting would
// wrongly apply later rebindings to earlier values.
ExprPtr close_over(const ExprPtr& e, const SymbolicEnv& env) {
    return map_names(e, [&](const expr::Name& n) { return env.lookup(n.id); });
}

}  // namespace

Substitution substitute(const ExprPtr& e, const SymbolicEnv& env, int depth_cap) {
    if (depth_cap < 1) throw UsageError("depth_cap must be >= 1");
    return substitute_at(e, env, 0, depth_cap);
}

ExprPtr negate(const ExprPtr& e) {
    if (const auto* b = e->as<expr::Binary>()) {
        static const std::pair<const char*, const char*> kFlip[] = {
            {"==", "!="}, {"!=", "=="}, {"<", ">="}, {">=", "<"}, {">", "<="}, {"<=", ">"},
        };
        for (auto [from, to] : kFlip) {
            if (b->op == from) return make_binary(to, b->lhs, b->rhs);
        }
    }
    if (const auto* u = e->as<expr::Unary>(); u && u->op == "!" && !u->postfix) return u->operand;
    if (const auto* l = e->as<expr::Literal>()) {
        if (l->text == "true") return make_literal("false");
        if (l->text == "false") return make_literal("true");
    }
    return make_unary("!", e);
}

// ---- collecting path facts -------------------------------------------------

namespace {

std::string simple_name(std::string_view qualified) {
    auto dot = qualified.rfind('.');
    return std::string(dot == std::string_view::npos ? qualified : qualified.substr(dot + 1));
}

struct ResolvedMethod {
    const SourceUnit* unit = nullptr;
    const MethodDecl* method = nullptr;
};

ResolvedMethod resolve_frame(const StackFrame& frame, const RepoIndex& index) {
    for (const auto& unit : index.units) {
        if (!frame.file.empty() && !detail::path_has_suffix(unit.path, frame.file)) continue;
        for (const auto& type : unit.types) {
            for (const auto& m : type.methods) {
                if (frame_matches(frame, make_method_ref(unit, m)) && m.spans(frame.line)) return {&unit, &m};
            }
        }
    }
    throw AnalysisError(fmt::format("frame {} ({}) does not resolve to a method in the index", frame.render(),
                                    frame.class_name));
}

// The call in `s`'s own expressions that enters `callee`, or null.
const Expr* call_into(const Stmt& s, const MethodDecl& callee) {
    const Expr* found = nullptr;
    std::string callee_class = simple_name(callee.class_name);
    for (const auto& e : stmt_exprs(s)) {
        walk_expr(e, [&](const Expr& x) {
            if (found) return;
            if (const auto* c = x.as<expr::MethodCall>()) {
                bool ctor_chain = callee.is_constructor && !c->base && (c->name == "this" || c->name == "super");
                if ((!callee.is_constructor && c->name == callee.name) || ctor_chain) found = &x;
            } else if (const auto* n = x.as<expr::New>(); n && callee.is_constructor) {
                std::string t = n->type.substr(0, n->type.find('<'));
                if (simple_name(t) == callee_class) found = &x;
            }
        });
    }
    return found;
}

std::vector<ExprPtr> args_of(const Expr& call) {
    if (const auto* c = call.as<expr::MethodCall>()) return c->args;
    if (const auto* n = call.as<expr::New>()) return n->args;
    return {};
}

// Statement path from `block` down to `target`: each step is the block and
// the index of the statement that is or contains the target.
bool find_path(const Block& block, const Stmt* target, std::vector<std::pair<const Block*, std::size_t>>& path) {
    for (std::size_t i = 0; i < block.stmts.size(); ++i) {
        const Stmt& s = block.stmts[i];
        path.emplace_back(&block, i);
        if (&s == target) return true;
        for (const Block* child : child_blocks(s)) {
            if (find_path(*child, target, path)) return true;
        }
        path.pop_back();
    }
    return false;
}

void add_binding(const Stmt& s, std::vector<guard::Event>& events) {
    if (s.as<stmt::Opaque>()) {
        events.emplace_back(guard::Blocked{std::get<stmt::Opaque>(s.node).text, s.loc});
    } else if (const auto* d = s.as<stmt::LocalDecl>()) {
        if (d->init) events.emplace_back(guard::Binding{d->name, d->init, s.loc});
    } else if (const auto* a = s.as<stmt::Assign>()) {
        if (const auto* n = a->lhs->as<expr::Name>()) events.emplace_back(guard::Binding{n->id, a->rhs, s.loc});
    } else if (const auto* es = s.as<stmt::ExprStmt>()) {
        const auto* u = es->expr->as<expr::Unary>();
        if (!u || (u->op != "++" && u->op != "--")) return;
        if (const auto* n = u->operand->as<expr::Name>()) {
            std::string op = u->op == "++" ? "+" : "-";
            events.emplace_back(guard::Binding{n->id, make_binary(op, u->operand, make_literal("1")), s.loc});
        }
    }
}

void collect_events(const std::vector<std::pair<const Block*, std::size_t>>& path, const Stmt* exit,
                    std::vector<guard::Event>& events) {
    for (std::size_t level = 0; level < path.size(); ++level) {
        auto [block, idx] = path[level];
        for (std::size_t i = 0; i < idx; ++i) add_binding(block->stmts[i], events);
        const Stmt& s = block->stmts[idx];
        if (&s == exit) return;
        const Block* next = path[level + 1].first;
        if (const auto* iff = s.as<stmt::If>()) {
            Polarity p = next == &iff->then_block ? Polarity::Positive : Polarity::Negated;
            events.emplace_back(guard::Condition{iff->cond, p, s.loc});
        } else if (const auto* loop = s.as<stmt::Loop>()) {
            bool checked_first = loop->kind == stmt::LoopKind::While || loop->kind == stmt::LoopKind::For;
            if (checked_first && loop->cond) events.emplace_back(guard::Condition{loop->cond, Polarity::Positive, s.loc});
        }
    }
}

}  // namespace

std::vector<FrameGuardNodes> collect_guard_nodes(const StackTrace& trace, const RepoIndex& index,
                                                 const ThrowTarget& target) {
    if (trace.frames.empty()) throw AnalysisError("empty stack trace");
    const SourceUnit* target_unit = index.find_unit(target.throw_loc.file);
    if (!target_unit) throw AnalysisError("target file not indexed: " + target.throw_loc.file);
    ThrowSite site = locate_throw_site(*target_unit, target.throw_loc.line);

    std::vector<FrameGuardNodes> out(trace.frames.size());
    for (std::size_t i = 0; i < trace.frames.size(); ++i) {
        FrameGuardNodes& f = out[i];
        f.frame = trace.frames[i];
        if (i + 1 == trace.frames.size()) {
            f.unit = target_unit;
            f.method = site.method;
            f.exit = site.node;
        } else {
            ResolvedMethod r = resolve_frame(f.frame, index);
            f.unit = r.unit;
            f.method = r.method;
        }
    }

    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
        FrameGuardNodes& f = out[i];
        const MethodDecl& callee = *out[i + 1].method;
        const Stmt* exit = nullptr;
        const Expr* call = nullptr;
        // Prefer the statement on the recorded line, else the first call site.
        for (bool line_only : {true, false}) {
            for_each_stmt(f.method->body, [&](const Stmt& s) {
                if (exit || (line_only && !s.spans(f.frame.line))) return;
                if (const Expr* c = call_into(s, callee)) {
                    exit = &s;
                    call = c;
                }
            });
            if (exit) break;
        }
        if (!exit) {
            throw AnalysisError(fmt::format("frame {}: no call to {} found in {}", f.frame.render(), callee.name,
                                            f.method->name));
        }
        f.exit = exit;
        f.call_args = args_of(*call);
    }

    for (auto& f : out) {
        std::vector<std::pair<const Block*, std::size_t>> path;
        if (!find_path(f.method->body, f.exit, path)) {
            throw AnalysisError(fmt::format("frame {}: exit point not inside {}", f.frame.render(), f.method->name));
        }
        collect_events(path, f.exit, f.events);
    }
    return out;
}

GuardFormula build_guard(const StackTrace& trace, const RepoIndex& index, const ThrowTarget& target) {
    std::vector<FrameGuardNodes> frames = collect_guard_nodes(trace, index, target);
    GuardFormula formula;
    SymbolicEnv env;
    std::vector<ExprPtr> actuals;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const FrameGuardNodes& f = frames[i];
        if (i > 0) {
            env.push_frame();
            const auto& params = f.method->params;
            for (std::size_t k = 0; k < params.size() && k < actuals.size(); ++k) env.bind(params[k].name, actuals[k]);
        }
        for (const auto& ev : f.events) {
            if (const auto* b = std::get_if<guard::Binding>(&ev)) {
                ExprPtr v = close_over(b->value, env);
                formula.complete = formula.complete && !contains_opaque(v);
                env.bind(b->name, v);
            } else if (const auto* c = std::get_if<guard::Condition>(&ev)) {
                ExprPtr cond = close_over(c->cond, env);
                formula.complete = formula.complete && !contains_opaque(cond);
                const auto* lit = cond->as<expr::Literal>();
                bool trivially_true = lit && lit->text == (c->polarity == Polarity::Positive ? "true" : "false");
                if (!trivially_true) formula.literals.push_back({cond, c->polarity, c->loc});
            } else {
                formula.complete = false;
            }
        }
        actuals.clear();
        for (const auto& a : f.call_args) actuals.push_back(close_over(a, env));
    }
    return formula;
}

// ---- rendering -------------------------------------------------------------

std::string render_literal(const GuardLiteral& lit) {
    return render_expr(lit.polarity == Polarity::Positive ? lit.expr : negate(lit.expr));
}

std::string render_guard(const GuardFormula& formula) {
    std::string out;
    for (const auto& lit : formula.literals) {
        ExprPtr e = lit.polarity == Polarity::Positive ? lit.expr : negate(lit.expr);
        std::string text = render_expr(e);
        // Operands binding looser than && need parentheses once joined.
        bool loose = e->is<expr::Ternary>();
        if (const auto* b = e->as<expr::Binary>()) loose = b->op == "||" || (b->op.back() == '=' && b->op != "==" &&
                                                                             b->op != "!=" && b->op != "<=" && b->op != ">=");
        if (loose && formula.literals.size() > 1) text = "(" + text + ")";
        if (!out.empty()) out += " && ";
        out += text;
    }
    if (out.empty()) out = "true";
    if (!formula.complete) out += " /* partial */";
    return out;
}

}  // namespace ebtforge
