#pragma once

#include <string>
#include <vector>

#include "lslh/absdom.hpp"
#include "lslh/concrete.hpp"
#include "lslh/lang.hpp"
#include "lslh/taint.hpp"

namespace lslh {

enum class Mode { Seq, Spec };

struct AbstractState {
    bool bottom = true;
    std::vector<AbstractValue> rho;  // by Program slot
    std::vector<TaintVector> mu;
    AbstractMemory<AbstractValue> mv;
    AbstractMemory<TaintVector> mt;

    bool operator==(const AbstractState& o) const;
};

struct AbsObs {
    Observation::Kind kind = Observation::Kind::None;
    AbstractValue v;
    TaintVector t;  // sliced for memory accesses
    bool has_h() const { return kind != Observation::Kind::None && t.contains(Label::H); }
};

struct AbsSucc {
    int loc;  // -1 when the successor is blocked (pc = ⊥)
    AbstractState s;
};

struct AbsStep {
    std::vector<AbsSucc> succ;
    AbsObs obs;
};

struct AnalysisOptions {
    int widen_threshold = 16;  // strict growths before a register is widened; 0 disables
    size_t iteration_budget = 200000;
    bool guard_refinement = true;  // x <- (y Lshr k); beqz x idiom in sequential mode
};

struct AnalysisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AnalysisContext {
    const Program* prog = nullptr;
    const Policy* policy = nullptr;
    std::vector<BaseInfo> bases;
    std::vector<std::string> base_names;
    ObsSlice slice;
    std::vector<std::pair<int, int>> ceil_align;
    AnalysisOptions opts;

    AnalysisContext(const Program& p, const Policy& pol, AnalysisOptions o = {});
    AnalysisContext(const Program& p, const Policy& pol, ObsSlice s, AnalysisOptions o = {});
    int width() const { return prog->width; }
    int nbases() const { return int(bases.size()); }
};

AbstractState initial_abstract_state(const AnalysisContext& cx);
AbstractValue eval_value(const AnalysisContext& cx, const AbstractState& s, const Expr& e);
TaintVector eval_taint(const AnalysisContext& cx, const AbstractState& s, const Expr& e);
AbstractState state_join(const AbstractState& a, const AbstractState& b);

AbsStep abs_step(const AnalysisContext& cx, const AbstractState& s, int loc, Mode mode);

// Ω: one state per location, index end() holds states that left the program.
using Config = std::vector<AbstractState>;

Config initial_config(const AnalysisContext& cx);

struct FixpointStats {
    size_t iterations = 0;
    size_t widenings = 0;
};

// Least fixpoint (with widening) of the abstract transition from Ω0.
Config fixpoint(const AnalysisContext& cx, Mode mode, FixpointStats* stats = nullptr);

// Widening bookkeeping shared by fixpoint drivers.
class Widener {
public:
    Widener(const AnalysisContext& cx);
    // Joins incoming into the stored state at loc; returns true if it changed.
    bool absorb(Config& omega, int loc, const AbstractState& incoming);
    // Replaces the stored state at loc by next (synchronous iteration).
    void replace(Config& omega, int loc, AbstractState next);
    size_t widenings() const { return widenings_; }

private:
    void widen(const AbstractState& old, AbstractState& next, int loc);
    const AnalysisContext& cx_;
    std::vector<std::vector<int>> growth_;
    size_t widenings_ = 0;
};

// Concretisation checks used by soundness tests.
bool state_contains(const AnalysisContext& cx, const AbstractState& a, const ConcreteState& s);

std::string render_state(const AnalysisContext& cx, const AbstractState& s);
std::string render_taint_compact(const TaintVector& t);

}  // namespace lslh
