#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Straight-line integer programs with one throw, an interpreter that
// decides reachability by execution, and an evaluator for rendered guard
// text. None of this shares code with the guard engine under test.
namespace ebtforge::testing {

struct GExpr;
using GExprPtr = std::shared_ptr<const GExpr>;

struct GExpr {
    enum class Kind { Var, Const, Binary, Not };
    Kind kind = Kind::Const;
    std::string name;  // Var
    int value = 0;     // Const
    std::string op;    // Binary: + - * < <= > >= == != && ||
    GExprPtr lhs, rhs;
};

struct GStmt {
    enum class Kind { Decl, Assign, If, Throw, Return };
    Kind kind = Kind::Return;
    std::string name;  // Decl, Assign
    GExprPtr expr;     // Decl, Assign, If condition
    std::vector<GStmt> then_block, else_block;
};

struct GProgram {
    std::vector<std::string> params;
    std::vector<GStmt> body;
    int if_depth = 0;     // ifs enclosing the throw
    int assignments = 0;  // Decl + Assign statements

    /// A compilation unit declaring `class_name` in package "gen".
    [[nodiscard]] std::string java(const std::string& class_name) const;
};

/// Nested ifs up to 3 deep around the throw, at most 3 assignments.
GProgram generate_program(std::uint64_t seed);

/// Executes the program; true when the throw statement runs.
bool reaches_throw(const GProgram& program, const std::vector<int>& args);

/// Evaluates guard text (Java operators over ints and booleans). nullopt
/// when the text does not parse or names an unbound variable.
std::optional<bool> eval_guard(std::string_view guard, const std::map<std::string, int>& env);

}  // namespace ebtforge::testing
