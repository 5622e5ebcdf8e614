#include <cctype>
#include <string>

#include "ebtforge/source_model.hpp"

namespace ebtforge {

namespace {

// Java precedence, higher binds tighter. Primary and postfix forms are 14.
constexpr int kAssignPrec = 1;
constexpr int kTernaryPrec = 2;
constexpr int kUnaryPrec = 13;
constexpr int kPrimaryPrec = 14;

int binary_prec(const std::string& op) {
    if (op == "||") return 3;
    if (op == "&&") return 4;
    if (op == "|") return 5;
    if (op == "^") return 6;
    if (op == "&") return 7;
    if (op == "==" || op == "!=") return 8;
    if (op == "<" || op == ">" || op == "<=" || op == ">=" || op == "instanceof") return 9;
    if (op == "<<" || op == ">>" || op == ">>>") return 10;
    if (op == "+" || op == "-") return 11;
    if (op == "*" || op == "/" || op == "%") return 12;
    return kAssignPrec;  // = += -= ...
}

int prec(const Expr& e) {
    if (const auto* b = e.as<expr::Binary>()) return binary_prec(b->op);
    if (const auto* u = e.as<expr::Unary>()) return u->postfix ? kPrimaryPrec : kUnaryPrec;
    if (e.is<expr::Ternary>()) return kTernaryPrec;
    return kPrimaryPrec;
}

bool is_numeric_literal(const Expr& e) {
    const auto* lit = e.as<expr::Literal>();
    return lit && !lit->text.empty() && (std::isdigit(static_cast<unsigned char>(lit->text[0])) || lit->text[0] == '.');
}

bool is_primitive_cast(const std::string& op) {
    static const char* kPrims[] = {"(boolean)", "(byte)", "(char)",  "(short)",
                                   "(int)",     "(long)", "(float)", "(double)"};
    for (const char* p : kPrims) {
        if (op == p) return true;
    }
    return false;
}

std::string render(const ExprPtr& e);

std::string wrap_if(bool cond, std::string s) {
    return cond ? "(" + s + ")" : s;
}

std::string render_base(const ExprPtr& base) {
    return wrap_if(prec(*base) < kPrimaryPrec || is_numeric_literal(*base), render(base));
}

std::string render_args(const std::vector<ExprPtr>& args) {
    std::string out = "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += render(args[i]);
    }
    out += ")";
    return out;
}

struct Renderer {
    std::string operator()(const expr::Name& n) const { return n.id; }
    std::string operator()(const expr::Literal& l) const { return l.text; }
    std::string operator()(const expr::Opaque& o) const { return o.text; }
    std::string operator()(const expr::FieldAccess& f) const { return render_base(f.base) + "." + f.field; }
    std::string operator()(const expr::MethodCall& c) const {
        std::string out = c.base ? render_base(c.base) + "." : std::string();
        return out + c.name + render_args(c.args);
    }
    std::string operator()(const expr::ArrayAccess& a) const {
        return render_base(a.base) + "[" + render(a.index) + "]";
    }
    std::string operator()(const expr::New& n) const { return "new " + n.type + render_args(n.args); }
    std::string operator()(const expr::Binary& b) const {
        int p = binary_prec(b.op);
        bool right_assoc = p == kAssignPrec;
        int lp = prec(*b.lhs);
        int rp = prec(*b.rhs);
        std::string l = wrap_if(right_assoc ? lp <= p : lp < p, render(b.lhs));
        std::string r = wrap_if(right_assoc ? rp < p : rp <= p, render(b.rhs));
        return l + " " + b.op + " " + r;
    }
    std::string operator()(const expr::Unary& u) const {
        if (u.postfix) return wrap_if(prec(*u.operand) < kPrimaryPrec, render(u.operand)) + u.op;
        std::string operand = wrap_if(prec(*u.operand) < kUnaryPrec, render(u.operand));
        if (u.op.front() == '(') {
            // `(Foo) -x` would read back as a subtraction.
            if (!is_primitive_cast(u.op) && !operand.empty() && (operand[0] == '-' || operand[0] == '+'))
                operand = "(" + operand + ")";
            return u.op + " " + operand;
        }
        bool clash = !operand.empty() && ((u.op.back() == '-' && operand[0] == '-') ||
                                          (u.op.back() == '+' && operand[0] == '+'));
        return u.op + (clash ? " " : "") + operand;
    }
    std::string operator()(const expr::Ternary& t) const {
        std::string c = wrap_if(prec(*t.cond) <= kTernaryPrec, render(t.cond));
        std::string el = wrap_if(prec(*t.else_expr) < kTernaryPrec, render(t.else_expr));
        return c + " ? " + render(t.then_expr) + " : " + el;
    }
};

std::string render(const ExprPtr& e) {
    if (!e) return {};
    return std::visit(Renderer{}, e->node);
}

}  // namespace

std::string render_expr(const ExprPtr& e) {
    return render(e);
}

}  // namespace ebtforge
