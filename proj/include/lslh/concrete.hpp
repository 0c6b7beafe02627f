#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lslh/lang.hpp"
#include "lslh/taint.hpp"

namespace lslh {

// A machine word or the empty value ε produced by hardened accesses.
struct Word {
    uint64_t v = 0;
    bool empty = false;
    static Word eps() { return {0, true}; }
    bool operator==(const Word&) const = default;
    bool operator<(const Word& o) const { return empty != o.empty ? empty < o.empty : v < o.v; }
};

struct Cell {
    Word val;
    TaintVector taint;
    bool operator==(const Cell&) const = default;
};

enum class Status : uint8_t { Running, Halted, EpsBranch, Trap };

struct ConcreteState {
    std::vector<Word> regs;          // by Program slot
    std::vector<TaintVector> taint;  // by Program slot
    std::map<uint64_t, Cell> memory;
    int pc = 0;
    uint64_t mem = 0;
    bool f = false;  // misspeculating
    Status status = Status::Running;
    bool touched_unallocated = false;
    // allocated ranges [start, start+size) and the base each belongs to
    struct Region {
        uint64_t start;
        int64_t size;
        int base;
        bool operator==(const Region&) const = default;
    };
    std::vector<Region> regions;

    bool halted() const { return status != Status::Running; }
    bool operator==(const ConcreteState&) const = default;
};

enum class Directive : uint8_t { Step, Force };

struct Observation {
    enum class Kind : uint8_t { None, Branch, Load, Store };
    Kind kind = Kind::None;
    Word value;          // observed bits (already projected for memory accesses)
    TaintVector taint;   // taint of the observed bits
    bool operator==(const Observation&) const = default;
};

struct ExecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Observed address bits [lo, hi]; default lo = 6 when n > 6 (cache lines), else 0.
struct ObsSlice {
    int lo = 0, hi = 0;
};
ObsSlice default_slice(int n);

struct ExecContext {
    const Program* prog = nullptr;
    const Policy* policy = nullptr;
    std::vector<BaseInfo> bases;
    ObsSlice slice;
    // location -> (destination slot, k) for the ceil-align idiom ending there
    std::vector<std::pair<int, int>> ceil_align;

    ExecContext(const Program& p, const Policy& pol);
    ExecContext(const Program& p, const Policy& pol, ObsSlice s);
    int width() const { return prog->width; }
};

// Detects `b <- (a And 2^k-1); c <- (2^k Minus b); d <- (a Add c)` ending at loc.
std::optional<std::pair<int, int>> match_ceil_align(const Program& p, int loc);

// Initial values. Unnamed registers and cells start at 0.
struct InitAssign {
    std::map<std::string, uint64_t> regs;
    std::map<std::string, std::vector<uint64_t>> regions;
};

ConcreteState initial_state(const ExecContext& cx, const InitAssign& init);

struct StepResult {
    ConcreteState state;
    Observation obs;
};

StepResult step(const ExecContext& cx, const ConcreteState& s, Directive d);
void step_in_place(const ExecContext& cx, ConcreteState& s, Directive d, Observation& obs);

struct TraceEntry {
    int pc;
    Directive dir;
    Observation obs;
    bool f_before;
};

struct Trace {
    std::vector<TraceEntry> steps;
    std::vector<ConcreteState> states;  // states[0] is the initial state
};

// Runs until halt or until the directives run out. With no directives the
// program is stepped sequentially up to max_steps.
Trace run(const ExecContext& cx, const ConcreteState& s0, const std::vector<Directive>& dirs);
Trace run_sequential(const ExecContext& cx, const ConcreteState& s0, size_t max_steps);

Word load_cell(const ConcreteState& s, uint64_t addr, int n, TaintVector* taint);

std::string render_word(const Word& w);
std::string render_obs(const Observation& o);
std::string render_directive(Directive d);
std::vector<Directive> parse_directives(const std::string& s);

}  // namespace lslh
