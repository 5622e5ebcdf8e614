#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ebtforge/repo_scanner.hpp"
#include "ebtforge/source_model.hpp"
#include "ebtforge/trace_store.hpp"

namespace ebtforge {

/// Variable bindings for one frame at a time. push_frame() opens a fresh
/// scope: bindings of enclosing frames are no longer visible, since call
/// arguments are bound to the callee's formals explicitly.
class SymbolicEnv {
public:
    /// Rebinding a name shadows the earlier binding.
    void bind(const std::string& name, ExprPtr value);
    /// The most recent binding in the current frame, or null.
    [[nodiscard]] ExprPtr lookup(const std::string& name) const;
    void push_frame();
    [[nodiscard]] int frame_depth() const { return static_cast<int>(frames_.size()) - 1; }
    /// Current frame's bindings in insertion order.
    [[nodiscard]] const std::vector<std::pair<std::string, ExprPtr>>& bindings() const { return frames_.back(); }

private:
    std::vector<std::vector<std::pair<std::string, ExprPtr>>> frames_{1};
};

struct Substitution {
    ExprPtr expr;
    bool complete = true;  // false when depth_cap cut a chain short
};

/// Replaces every bound Name by its binding, recursively, up to depth_cap
/// nested replacements. Opaque nodes are left untouched.
Substitution substitute(const ExprPtr& e, const SymbolicEnv& env, int depth_cap = 8);

/// Operator-aware logical negation: == and != swap, < and >= swap, > and
/// <= swap, !x becomes x, true/false swap; anything else is wrapped in !(...).
ExprPtr negate(const ExprPtr& e);

enum class Polarity { Positive, Negated };

struct GuardLiteral {
    ExprPtr expr;
    Polarity polarity = Polarity::Positive;
    SrcLoc origin;
};

struct GuardFormula {
    std::vector<GuardLiteral> literals;
    bool complete = true;  // false when an Opaque node blocked a condition or binding
};

namespace guard {

struct Condition {
    ExprPtr cond;
    Polarity polarity = Polarity::Positive;
    SrcLoc loc;
};
struct Binding {
    std::string name;
    ExprPtr value;
    SrcLoc loc;
};
/// An Opaque statement on the path before the exit point.
struct Blocked {
    std::string text;
    SrcLoc loc;
};

using Event = std::variant<Condition, Binding, Blocked>;

}  // namespace guard

struct FrameGuardNodes {
    StackFrame frame;
    const SourceUnit* unit = nullptr;
    const MethodDecl* method = nullptr;
    const Stmt* exit = nullptr;           // call site into the next frame, or the throw
    std::vector<guard::Event> events;     // source-encounter order
    std::vector<ExprPtr> call_args;       // actuals passed to the next frame
};

/// Per-frame path facts from method entry to each frame's exit point.
/// Throws AnalysisError when a frame cannot be resolved or its exit point
/// is missing.
std::vector<FrameGuardNodes> collect_guard_nodes(const StackTrace& trace, const RepoIndex& index,
                                                 const ThrowTarget& target);

/// Path condition guarding the target throw along `trace`.
GuardFormula build_guard(const StackTrace& trace, const RepoIndex& index, const ThrowTarget& target);

std::string render_literal(const GuardLiteral& lit);

/// "&&"-joined literals, "true" when empty, " /* partial */" appended
/// when incomplete.
std::string render_guard(const GuardFormula& formula);

}  // namespace ebtforge
