#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lslh/concrete.hpp"
#include "lslh/lang.hpp"

namespace lslh {

// Finite universe of initial states and trace bounds.
struct EnumBounds {
    std::vector<uint64_t> default_values;                  // empty: every n-bit word
    std::map<std::string, std::vector<uint64_t>> values;  // per register, or per region (each cell)
    size_t max_steps = 64;                                 // per trace
    size_t step_budget = 10'000'000;                       // over the whole check
};

enum class Verdict { Pass, Violation, Inconclusive };
const char* verdict_name(Verdict v);

struct Witness {
    InitAssign init;
    std::optional<InitAssign> other;  // second P-equivalent state (SNI)
    std::vector<Directive> dirs;      // directives up to and including the offending step
    size_t step = 0;                  // index of the offending step
    int pc = 0;
    Observation obs, other_obs;
};

struct CheckResult {
    Verdict verdict = Verdict::Pass;
    std::optional<Witness> witness;
    size_t initial_states = 0;
    size_t steps = 0;
    std::string note;
};

// One enumerated input variable: a policy register or one cell of a region.
struct EnumVar {
    std::string name;
    int cell = -1;  // -1 for registers
    bool secret = false;
    std::vector<uint64_t> universe;
};

std::vector<EnumVar> enum_vars(const ExecContext& cx, const EnumBounds& b);
InitAssign make_assign(const std::vector<EnumVar>& vars, const std::vector<size_t>& idx);

CheckResult check_ss(const ExecContext& cx, const EnumBounds& b);
CheckResult check_sni(const ExecContext& cx, const EnumBounds& b);

// Re-executes a witness; true if the recorded violation reproduces.
bool replay_ss(const ExecContext& cx, const Witness& w);
bool replay_sni(const ExecContext& cx, const Witness& w);

// Random tiny programs (loop-free unless allow_loops) over registers s0 s1 (secret), p (public),
// t0 t1 (scratch) and a public region a.
struct RandomProgramOptions {
    int width = 3;
    int min_len = 3;
    int max_len = 8;
    int region_size = 2;
    bool allow_fence = true;
    bool allow_loops = false;  // backward branch targets
};

struct RandomCase {
    Program prog;
    Policy policy;
    EnumBounds bounds;
};

RandomCase random_case(std::mt19937_64& rng, const RandomProgramOptions& o = {});

// Random concrete inputs within the policy, for sampling-based checks.
InitAssign random_assign(std::mt19937_64& rng, const ExecContext& cx);

struct ImplicationResult {
    size_t programs = 0, ss_pass = 0, sni_fail = 0, inconclusive = 0;
    std::optional<size_t> counterexample;  // index of a program passing SS but failing SNI
};

ImplicationResult check_ss_implies_sni(const std::vector<RandomCase>& corpus);

}  // namespace lslh
