#include "guard_oracle.hpp"

#include <cctype>
#include <random>
#include <stdexcept>

namespace ebtforge::testing {

namespace {

GExprPtr var(std::string n) {
    auto e = std::make_shared<GExpr>();
    e->kind = GExpr::Kind::Var;
    e->name = std::move(n);
    return e;
}

GExprPtr constant(int v) {
    auto e = std::make_shared<GExpr>();
    e->kind = GExpr::Kind::Const;
    e->value = v;
    return e;
}

GExprPtr binary(std::string op, GExprPtr l, GExprPtr r) {
    auto e = std::make_shared<GExpr>();
    e->kind = GExpr::Kind::Binary;
    e->op = std::move(op);
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
}

GExprPtr negation(GExprPtr x) {
    auto e = std::make_shared<GExpr>();
    e->kind = GExpr::Kind::Not;
    e->lhs = std::move(x);
    return e;
}

class Generator {
public:
    explicit Generator(std::uint64_t seed) : rng_(seed) {}

    GProgram run() {
        GProgram p;
        p.params = {"a", "b", "c"};
        depth_ = pick(0, 3);
        budget_ = pick(0, 3);
        p.body = block(0, p.params);
        p.if_depth = depth_;
        p.assignments = used_;
        return p;
    }

private:
    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

    GExprPtr arith(const std::vector<std::string>& vars, int depth) {
        if (depth >= 2 || coin(0.45)) {
            if (coin(0.7)) return var(vars[static_cast<std::size_t>(pick(0, static_cast<int>(vars.size()) - 1))]);
            return constant(pick(-2, 3));
        }
        static const char* ops[] = {"+", "-", "*"};
        return binary(ops[pick(0, 2)], arith(vars, depth + 1), arith(vars, depth + 1));
    }

    GExprPtr comparison(const std::vector<std::string>& vars) {
        static const char* ops[] = {"<", "<=", ">", ">=", "==", "!="};
        return binary(ops[pick(0, 5)], arith(vars, 0), arith(vars, 1));
    }

    GExprPtr condition(const std::vector<std::string>& vars) {
        GExprPtr c = comparison(vars);
        if (coin(0.25)) c = binary(coin() ? "&&" : "||", c, comparison(vars));
        if (coin(0.15)) c = negation(c);
        return c;
    }

    std::vector<GStmt> block(int level, std::vector<std::string> vars) {
        std::vector<GStmt> out;
        int n = budget_ == 0 ? 0 : pick(0, std::min(budget_, 2));
        if (level == depth_) n = budget_;  // spend the rest before the throw
        for (int i = 0; i < n; ++i) {
            GStmt s;
            s.expr = arith(vars, 0);
            if (coin()) {
                s.kind = GStmt::Kind::Decl;
                s.name = "t" + std::to_string(locals_++);
                vars.push_back(s.name);
            } else {
                s.kind = GStmt::Kind::Assign;
                s.name = vars[static_cast<std::size_t>(pick(0, static_cast<int>(vars.size()) - 1))];
            }
            out.push_back(std::move(s));
            --budget_;
            ++used_;
        }
        if (level == depth_) {
            GStmt t;
            t.kind = GStmt::Kind::Throw;
            out.push_back(std::move(t));
            return out;
        }
        GStmt s;
        s.kind = GStmt::Kind::If;
        s.expr = condition(vars);
        if (coin()) {
            s.then_block = block(level + 1, vars);
        } else {
            GStmt r;
            r.kind = GStmt::Kind::Return;
            s.then_block.push_back(std::move(r));
            s.else_block = block(level + 1, vars);
        }
        out.push_back(std::move(s));
        return out;
    }

    std::mt19937_64 rng_;
    int depth_ = 0;
    int budget_ = 0;
    int used_ = 0;
    int locals_ = 0;
};

std::string expr_java(const GExprPtr& e, bool top = true) {
    switch (e->kind) {
        case GExpr::Kind::Var: return e->name;
        case GExpr::Kind::Const: return std::to_string(e->value);
        case GExpr::Kind::Not: return "!(" + expr_java(e->lhs, true) + ")";
        case GExpr::Kind::Binary: {
            std::string s = expr_java(e->lhs, false) + " " + e->op + " " + expr_java(e->rhs, false);
            return top ? s : "(" + s + ")";
        }
    }
    return {};
}

void block_java(const std::vector<GStmt>& b, int indent, std::string& out) {
    std::string pad(static_cast<std::size_t>(indent) * 4, ' ');
    for (const auto& s : b) {
        switch (s.kind) {
            case GStmt::Kind::Decl: out += pad + "int " + s.name + " = " + expr_java(s.expr) + ";\n"; break;
            case GStmt::Kind::Assign: out += pad + s.name + " = " + expr_java(s.expr) + ";\n"; break;
            case GStmt::Kind::Throw: out += pad + "throw new IllegalStateException(\"target\");\n"; break;
            case GStmt::Kind::Return: out += pad + "return;\n"; break;
            case GStmt::Kind::If:
                out += pad + "if (" + expr_java(s.expr) + ") {\n";
                block_java(s.then_block, indent + 1, out);
                if (!s.else_block.empty()) {
                    out += pad + "} else {\n";
                    block_java(s.else_block, indent + 1, out);
                }
                out += pad + "}\n";
                break;
        }
    }
}

long eval_expr(const GExprPtr& e, const std::map<std::string, long>& env) {
    switch (e->kind) {
        case GExpr::Kind::Var: return env.at(e->name);
        case GExpr::Kind::Const: return e->value;
        case GExpr::Kind::Not: return eval_expr(e->lhs, env) ? 0 : 1;
        case GExpr::Kind::Binary: {
            long l = eval_expr(e->lhs, env);
            if (e->op == "&&") return l && eval_expr(e->rhs, env);
            if (e->op == "||") return l || eval_expr(e->rhs, env);
            long r = eval_expr(e->rhs, env);
            if (e->op == "+") return l + r;
            if (e->op == "-") return l - r;
            if (e->op == "*") return l * r;
            if (e->op == "<") return l < r;
            if (e->op == "<=") return l <= r;
            if (e->op == ">") return l > r;
            if (e->op == ">=") return l >= r;
            if (e->op == "==") return l == r;
            if (e->op == "!=") return l != r;
            throw std::logic_error("unknown operator " + e->op);
        }
    }
    return 0;
}

enum class Flow { Normal, Returned, Threw };

Flow exec(const std::vector<GStmt>& b, std::map<std::string, long> env) {
    for (const auto& s : b) {
        switch (s.kind) {
            case GStmt::Kind::Decl:
            case GStmt::Kind::Assign: env[s.name] = eval_expr(s.expr, env); break;
            case GStmt::Kind::Throw: return Flow::Threw;
            case GStmt::Kind::Return: return Flow::Returned;
            case GStmt::Kind::If: {
                // Inner blocks see a copy: no assignment inside an if precedes
                // code after it in these programs.
                Flow f = exec(eval_expr(s.expr, env) ? s.then_block : s.else_block, env);
                if (f != Flow::Normal) return f;
                break;
            }
        }
    }
    return Flow::Normal;
}

// ---- guard text evaluator --------------------------------------------------

struct Value {
    bool is_bool = false;
    long v = 0;
};

class GuardParser {
public:
    GuardParser(std::string_view text, const std::map<std::string, int>& env) : s_(text), env_(env) {}

    Value parse() {
        Value v = ternary();
        skip();
        if (pos_ != s_.size()) throw std::runtime_error("trailing input");
        return v;
    }

private:
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(std::string_view tok) {
        skip();
        if (s_.substr(pos_, tok.size()) != tok) return false;
        // Keep "<" from eating the start of "<=", "!" from "!=", and so on.
        if (tok.size() == 1 && pos_ + 1 < s_.size()) {
            char next = s_[pos_ + 1];
            if ((tok == "<" || tok == ">" || tok == "!" || tok == "=") && next == '=') return false;
            if ((tok == "&" && next == '&') || (tok == "|" && next == '|')) return false;
        }
        pos_ += tok.size();
        return true;
    }

    Value ternary() {
        Value c = logical_or();
        if (!eat("?")) return c;
        Value a = ternary();
        if (!eat(":")) throw std::runtime_error("expected ':'");
        Value b = ternary();
        return c.v ? a : b;
    }
    Value logical_or() {
        Value l = logical_and();
        while (eat("||")) {
            Value r = logical_and();
            l = {true, (l.v || r.v) ? 1 : 0};
        }
        return l;
    }
    Value logical_and() {
        Value l = equality();
        while (eat("&&")) {
            Value r = equality();
            l = {true, (l.v && r.v) ? 1 : 0};
        }
        return l;
    }
    Value equality() {
        Value l = relational();
        for (;;) {
            if (eat("==")) {
                Value r = relational();
                l = {true, l.v == r.v};
            } else if (eat("!=")) {
                Value r = relational();
                l = {true, l.v != r.v};
            } else {
                return l;
            }
        }
    }
    Value relational() {
        Value l = additive();
        for (;;) {
            if (eat("<=")) {
                l = {true, l.v <= additive().v};
            } else if (eat(">=")) {
                l = {true, l.v >= additive().v};
            } else if (eat("<")) {
                l = {true, l.v < additive().v};
            } else if (eat(">")) {
                l = {true, l.v > additive().v};
            } else {
                return l;
            }
        }
    }
    Value additive() {
        Value l = multiplicative();
        for (;;) {
            if (eat("+")) {
                l = {false, l.v + multiplicative().v};
            } else if (eat("-")) {
                l = {false, l.v - multiplicative().v};
            } else {
                return l;
            }
        }
    }
    Value multiplicative() {
        Value l = unary();
        while (eat("*")) l = {false, l.v * unary().v};
        return l;
    }
    Value unary() {
        if (eat("!")) return {true, unary().v ? 0 : 1};
        if (eat("-")) return {false, -unary().v};
        if (eat("+")) return unary();
        return primary();
    }
    Value primary() {
        skip();
        if (eat("(")) {
            Value v = ternary();
            if (!eat(")")) throw std::runtime_error("expected ')'");
            return v;
        }
        if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
            long v = 0;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) v = v * 10 + (s_[pos_++] - '0');
            return {false, v};
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        std::string word(s_.substr(start, pos_ - start));
        if (word.empty()) throw std::runtime_error("unexpected character");
        if (word == "true") return {true, 1};
        if (word == "false") return {true, 0};
        auto it = env_.find(word);
        if (it == env_.end()) throw std::runtime_error("unbound " + word);
        return {false, it->second};
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    const std::map<std::string, int>& env_;
};

}  // namespace

std::string GProgram::java(const std::string& class_name) const {
    std::string out = "package gen;\n\npublic class " + class_name + " {\n\n    public void run(";
    for (std::size_t i = 0; i < params.size(); ++i) out += (i ? ", int " : "int ") + params[i];
    out += ") {\n";
    block_java(body, 2, out);
    out += "    }\n}\n";
    return out;
}

GProgram generate_program(std::uint64_t seed) { return Generator(seed).run(); }

bool reaches_throw(const GProgram& program, const std::vector<int>& args) {
    std::map<std::string, long> env;
    for (std::size_t i = 0; i < program.params.size(); ++i) env[program.params[i]] = args.at(i);
    return exec(program.body, env) == Flow::Threw;
}

std::optional<bool> eval_guard(std::string_view guard, const std::map<std::string, int>& env) {
    if (guard.find("/*") != std::string_view::npos) return std::nullopt;
    try {
        return GuardParser(guard, env).parse().v != 0;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace ebtforge::testing
