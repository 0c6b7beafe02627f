#include "lslh/oracle.hpp"

#include <algorithm>
#include <tuple>
#include <unordered_map>

namespace lslh {

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Violation: return "violation";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

std::vector<EnumVar> enum_vars(const ExecContext& cx, const EnumBounds& b) {
    const Program& p = *cx.prog;
    std::vector<uint64_t> all;
    if (b.default_values.empty()) {
        if (p.width > 16) throw std::invalid_argument("enumeration needs explicit value universes above 16 bits");
        for (uint64_t v = 0; v <= word_mask(p.width); ++v) all.push_back(v);
    } else {
        all = b.default_values;
    }
    // Policy ranges restrict every universe: the analysis assumes them too.
    auto universe = [&](const std::string& name, const std::optional<Range>& range) {
        auto it = b.values.find(name);
        std::vector<uint64_t> u = it != b.values.end() ? it->second : all;
        if (range)
            std::erase_if(u, [&](uint64_t v) {
                int64_t z = to_signed(v, p.width);
                return z < range->lo || z > range->hi;
            });
        return u;
    };
    std::vector<EnumVar> vars;
    for (const auto& [name, rp] : cx.policy->regs) {
        if (p.slot_of(name) < 0 || cx.policy->region(name)) continue;
        vars.push_back({name, -1, rp.secret, universe(name, rp.range)});
    }
    for (const auto& bi : cx.bases) {
        if (!bi.formal) continue;
        auto u = universe(bi.name, bi.range);
        for (int64_t k = 0; k < bi.size; ++k) vars.push_back({bi.name, int(k), bi.secret, u});
    }
    for (const auto& v : vars)
        if (v.universe.empty()) throw std::invalid_argument("empty value universe for " + v.name);
    return vars;
}

InitAssign make_assign(const std::vector<EnumVar>& vars, const std::vector<size_t>& idx) {
    InitAssign a;
    for (size_t k = 0; k < vars.size(); ++k) {
        const EnumVar& v = vars[k];
        const uint64_t val = v.universe[idx[k]];
        if (v.cell < 0) {
            a.regs[v.name] = val;
        } else {
            auto& cells = a.regions[v.name];
            if (cells.size() <= size_t(v.cell)) cells.resize(size_t(v.cell) + 1, 0);
            cells[size_t(v.cell)] = val;
        }
    }
    return a;
}

namespace {

// Odometer over the selected variables; returns false after the last combination.
bool advance(const std::vector<EnumVar>& vars, const std::vector<size_t>& which, std::vector<size_t>& idx) {
    for (size_t k = which.size(); k-- > 0;) {
        size_t v = which[k];
        if (++idx[v] < vars[v].universe.size()) return true;
        idx[v] = 0;
    }
    return false;
}

struct Budget {
    size_t limit, used = 0;
    bool exhausted = false;
    bool take() {
        if (++used > limit) exhausted = true;
        return !exhausted;
    }
};

bool is_branch(const ExecContext& cx, const ConcreteState& s) {
    return !s.halted() && s.pc >= 0 && s.pc < cx.prog->size() && cx.prog->code[s.pc].kind == InstrKind::Beqz;
}

template <class T>
void put(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_taint(std::string& out, const TaintVector& t) {
    for (int i = 0; i < t.size(); ++i) out += char(t[i]);
}

std::string state_key(const ConcreteState& s) {
    std::string k;
    put(k, s.pc);
    put(k, s.mem);
    put(k, s.f);
    put(k, s.status);
    put(k, s.touched_unallocated);
    for (size_t i = 0; i < s.regs.size(); ++i) {
        put(k, s.regs[i].v);
        put(k, s.regs[i].empty);
        put_taint(k, s.taint[i]);
    }
    for (auto& [addr, c] : s.memory) {
        put(k, addr);
        put(k, c.val.v);
        put(k, c.val.empty);
        put_taint(k, c.taint);
    }
    for (auto& r : s.regions) {
        put(k, r.start);
        put(k, r.size);
        put(k, r.base);
    }
    return k;
}

// Speculative safety only depends on the states reachable from the initial
// state, so a state already explored with at least as many remaining steps
// can be skipped. This keeps forced loops from blowing up the path count.
struct SsSearch {
    const ExecContext& cx;
    const EnumBounds& b;
    Budget& budget;
    std::vector<Directive> dirs;
    bool truncated = false;
    std::optional<Witness> found;
    std::unordered_map<std::string, size_t> seen;  // state -> shallowest depth explored

    void dfs(const ConcreteState& s) {
        if (found || budget.exhausted) return;
        if (s.halted()) return;
        if (dirs.size() >= b.max_steps) {
            truncated = true;
            return;
        }
        auto [it, fresh] = seen.try_emplace(state_key(s), dirs.size());
        if (!fresh) {
            if (it->second <= dirs.size()) return;
            it->second = dirs.size();
        }
        const bool br = is_branch(cx, s);
        for (Directive d : {Directive::Step, Directive::Force}) {
            if (d == Directive::Force && !br) break;
            if (!budget.take()) return;
            ConcreteState t = s;
            Observation o;
            step_in_place(cx, t, d, o);
            dirs.push_back(d);
            if (s.f && o.kind != Observation::Kind::None && o.taint.contains(Label::H)) {
                Witness w;
                w.dirs = dirs;
                w.step = dirs.size() - 1;
                w.pc = s.pc;
                w.obs = o;
                found = w;
                dirs.pop_back();
                return;
            }
            dfs(t);
            dirs.pop_back();
            if (found) return;
        }
    }
};

}  // namespace

CheckResult check_ss(const ExecContext& cx, const EnumBounds& b) {
    CheckResult r;
    auto vars = enum_vars(cx, b);
    std::vector<size_t> idx(vars.size(), 0), all(vars.size());
    for (size_t k = 0; k < vars.size(); ++k) all[k] = k;
    Budget budget{b.step_budget};
    bool truncated = false;
    do {
        ++r.initial_states;
        InitAssign init = make_assign(vars, idx);
        SsSearch search{cx, b, budget, {}, false, std::nullopt, {}};
        search.dfs(initial_state(cx, init));
        truncated = truncated || search.truncated;
        if (search.found) {
            r.verdict = Verdict::Violation;
            r.witness = *search.found;
            r.witness->init = init;
            r.steps = budget.used;
            return r;
        }
        if (budget.exhausted) break;
    } while (advance(vars, all, idx));
    r.steps = budget.used;
    if (budget.exhausted) {
        r.verdict = Verdict::Inconclusive;
        r.note = "step budget exhausted";
    } else if (truncated) {
        r.verdict = Verdict::Inconclusive;
        r.note = "trace bound reached";
    }
    return r;
}

namespace {

using ObsKey = std::tuple<int, bool, uint64_t, int, int>;

ObsKey obs_key(const Observation& o, const ConcreteState& s) {
    return {int(o.kind), o.value.empty, o.value.v, int(s.status), s.pc};
}

struct Member {
    ConcreteState s;
    size_t init;  // index into the group's assignments
};

struct SniSearch {
    const ExecContext& cx;
    const EnumBounds& b;
    Budget& budget;
    const std::vector<InitAssign>& inits;
    std::vector<Directive> dirs;
    bool truncated = false;
    std::optional<Witness> found;

    void dfs(const std::vector<Member>& group) {
        if (found || budget.exhausted) return;
        const ConcreteState& lead = group.front().s;
        if (lead.halted()) return;
        if (dirs.size() >= b.max_steps) {
            truncated = true;
            return;
        }
        const bool br = is_branch(cx, lead);
        for (Directive d : {Directive::Step, Directive::Force}) {
            if (d == Directive::Force && !br) break;
            std::vector<Member> next = group;
            std::vector<Observation> obs(group.size());
            for (size_t k = 0; k < next.size(); ++k) {
                if (!budget.take()) return;
                step_in_place(cx, next[k].s, d, obs[k]);
            }
            dirs.push_back(d);
            const ObsKey k0 = obs_key(obs[0], next[0].s);
            for (size_t k = 1; k < next.size(); ++k) {
                if (obs_key(obs[k], next[k].s) == k0) continue;
                Witness w;
                w.init = inits[next[0].init];
                w.other = inits[next[k].init];
                w.dirs = dirs;
                w.step = dirs.size() - 1;
                w.pc = lead.pc;
                w.obs = obs[0];
                w.other_obs = obs[k];
                found = w;
                return;
            }
            dfs(next);
            dirs.pop_back();
            if (found) return;
        }
    }
};

// Sequential observations plus the final status; nullopt if the trace does not end.
std::optional<std::vector<ObsKey>> seq_key(const ExecContext& cx, const ConcreteState& s0, size_t max_steps,
                                          Budget& budget) {
    std::vector<ObsKey> key;
    ConcreteState s = s0;
    while (!s.halted()) {
        if (key.size() >= max_steps || !budget.take()) return std::nullopt;
        Observation o;
        step_in_place(cx, s, Directive::Step, o);
        key.push_back(obs_key(o, s));
    }
    return key;
}

}  // namespace

CheckResult check_sni(const ExecContext& cx, const EnumBounds& b) {
    CheckResult r;
    auto vars = enum_vars(cx, b);
    std::vector<size_t> pub, sec;
    for (size_t k = 0; k < vars.size(); ++k) (vars[k].secret ? sec : pub).push_back(k);
    std::vector<size_t> idx(vars.size(), 0);
    Budget budget{b.step_budget};
    bool truncated = false;
    do {
        // all secret completions of this public assignment, grouped by sequential observations
        for (size_t k : sec) idx[k] = 0;
        std::vector<InitAssign> inits;
        std::map<std::vector<ObsKey>, std::vector<Member>> groups;
        do {
            ++r.initial_states;
            InitAssign init = make_assign(vars, idx);
            ConcreteState s0 = initial_state(cx, init);
            auto key = seq_key(cx, s0, b.max_steps, budget);
            if (budget.exhausted) break;
            if (!key) {
                truncated = true;
                continue;
            }
            inits.push_back(init);
            groups[*key].push_back(Member{std::move(s0), inits.size() - 1});
        } while (advance(vars, sec, idx));
        for (auto& [key, group] : groups) {
            if (group.size() < 2 || budget.exhausted) continue;
            SniSearch search{cx, b, budget, inits, {}, false, std::nullopt};
            search.dfs(group);
            truncated = truncated || search.truncated;
            if (search.found) {
                r.verdict = Verdict::Violation;
                r.witness = search.found;
                r.steps = budget.used;
                return r;
            }
        }
        if (budget.exhausted) break;
    } while (advance(vars, pub, idx));
    r.steps = budget.used;
    if (budget.exhausted) {
        r.verdict = Verdict::Inconclusive;
        r.note = "step budget exhausted";
    } else if (truncated) {
        r.verdict = Verdict::Inconclusive;
        r.note = "trace bound reached";
    }
    return r;
}

bool replay_ss(const ExecContext& cx, const Witness& w) {
    Trace tr = run(cx, initial_state(cx, w.init), w.dirs);
    if (tr.steps.size() != w.dirs.size()) return false;
    const TraceEntry& e = tr.steps[w.step];
    return e.f_before && e.pc == w.pc && e.obs == w.obs && e.obs.taint.contains(Label::H);
}

bool replay_sni(const ExecContext& cx, const Witness& w) {
    if (!w.other) return false;
    ConcreteState a = initial_state(cx, w.init), b = initial_state(cx, *w.other);
    // P-equivalence: public registers and cells agree
    for (const auto& [name, rp] : cx.policy->regs) {
        if (rp.secret) continue;
        auto x = w.init.regs.find(name), y = w.other->regs.find(name);
        uint64_t vx = x == w.init.regs.end() ? 0 : x->second, vy = y == w.other->regs.end() ? 0 : y->second;
        if (vx != vy) return false;
    }
    for (const auto& rg : cx.policy->regions) {
        if (rg.secret) continue;
        auto x = w.init.regions.find(rg.name), y = w.other->regions.find(rg.name);
        std::vector<uint64_t> vx = x == w.init.regions.end() ? std::vector<uint64_t>{} : x->second;
        std::vector<uint64_t> vy = y == w.other->regions.end() ? std::vector<uint64_t>{} : y->second;
        vx.resize(size_t(rg.size), 0);
        vy.resize(size_t(rg.size), 0);
        if (vx != vy) return false;
    }
    Trace sa = run_sequential(cx, a, 1 << 16), sb = run_sequential(cx, b, 1 << 16);
    if (!sa.states.back().halted() || !sb.states.back().halted()) return false;
    if (sa.steps.size() != sb.steps.size()) return false;
    for (size_t k = 0; k < sa.steps.size(); ++k)
        if (obs_key(sa.steps[k].obs, sa.states[k + 1]) != obs_key(sb.steps[k].obs, sb.states[k + 1])) return false;
    Trace ta = run(cx, a, w.dirs), tb = run(cx, b, w.dirs);
    if (ta.steps.size() != w.dirs.size() || tb.steps.size() != w.dirs.size()) return false;
    for (size_t k = 0; k < w.step; ++k)
        if (obs_key(ta.steps[k].obs, ta.states[k + 1]) != obs_key(tb.steps[k].obs, tb.states[k + 1])) return false;
    return obs_key(ta.steps[w.step].obs, ta.states[w.step + 1]) != obs_key(tb.steps[w.step].obs, tb.states[w.step + 1]);
}

namespace {

const char* kRandRegs[] = {"s0", "s1", "p", "t0", "t1", "a"};

ExprPtr rand_operand(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> pick(0, 9);
    int k = pick(rng);
    if (k < 7) return Expr::reg_ref(kRandRegs[k % 6]);
    return Expr::constant(std::uniform_int_distribution<int64_t>(0, int64_t(word_mask(n)))(rng));
}

ExprPtr rand_expr(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> shape(0, 9);
    int k = shape(rng);
    if (k < 3) return rand_operand(rng, n);
    if (k == 3) return Expr::unary(Op::Not, Expr::reg_ref(kRandRegs[std::uniform_int_distribution<int>(0, 4)(rng)]));
    Op op = kBinaryOps[std::uniform_int_distribution<size_t>(0, std::size(kBinaryOps) - 1)(rng)];
    ExprPtr lhs = rand_operand(rng, n);
    ExprPtr rhs = rand_operand(rng, n);
    if (op == Op::Div || op == Op::Mod)
        rhs = Expr::constant(std::uniform_int_distribution<int64_t>(1, int64_t(word_mask(n)))(rng));
    return Expr::binary(op, lhs, rhs);
}

ExprPtr rand_address(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> shape(0, 3);
    const char* idx = kRandRegs[std::uniform_int_distribution<int>(0, 4)(rng)];
    switch (shape(rng)) {
        case 0: return Expr::reg_ref("a");
        case 1: return Expr::binary(Op::Add, Expr::reg_ref("a"), Expr::reg_ref(idx));
        case 2: return Expr::binary(Op::Add, Expr::reg_ref("a"), Expr::binary(Op::And, Expr::reg_ref(idx), Expr::constant(1)));
        default: return rand_expr(rng, n);
    }
}

}  // namespace

RandomCase random_case(std::mt19937_64& rng, const RandomProgramOptions& o) {
    const int n = o.width;
    const int len = std::uniform_int_distribution<int>(o.min_len, o.max_len)(rng);
    Program p;
    p.width = n;
    const char* dests[] = {"s0", "s1", "p", "t0", "t1"};
    std::uniform_int_distribution<int> dest(0, 4);
    for (int i = 0; i < len; ++i) {
        Instr ins;
        int k = std::uniform_int_distribution<int>(0, 99)(rng);
        if (k < 35) {
            ins.kind = InstrKind::Asgn;
            ins.x = dests[dest(rng)];
            ins.e = rand_expr(rng, n);
        } else if (k < 55) {
            ins.kind = InstrKind::Load;
            ins.x = dests[dest(rng)];
            ins.e = rand_address(rng, n);
        } else if (k < 65) {
            ins.kind = InstrKind::Store;
            ins.x = dests[dest(rng)];
            ins.e = rand_address(rng, n);
        } else if (k < 85) {
            ins.kind = InstrKind::Beqz;
            ins.x = dests[dest(rng)];
            ins.target = std::uniform_int_distribution<int>(i + 1, len)(rng);
            if (o.allow_loops && i > 0 && k < 70) ins.target = std::uniform_int_distribution<int>(0, i - 1)(rng);
        } else if (k < 92) {
            ins.kind = InstrKind::CondAsgn;
            ins.x = dests[dest(rng)];
            ins.e = rand_operand(rng, n);
            ins.cond = Expr::reg_ref(dests[dest(rng)]);
        } else if (k < 94 || (k >= 97 && !o.allow_fence)) {
            ins.kind = InstrKind::Jmp;
            ins.target = std::uniform_int_distribution<int>(i + 1, len)(rng);
            if (o.allow_loops && i > 0 && k < 90) ins.target = std::uniform_int_distribution<int>(0, i - 1)(rng);
        } else if (k < 97) {
            ins.kind = InstrKind::Alloc;
            ins.x = dests[dest(rng)];
            ins.size = std::uniform_int_distribution<int>(1, 2)(rng);
        } else {
            ins.kind = InstrKind::Fence;
        }
        p.code.push_back(ins);
    }
    p.finalize();
    RandomCase c;
    c.prog = std::move(p);
    c.policy.width = n;
    c.policy.regs["s0"] = RegPolicy{true, std::nullopt};
    c.policy.regs["s1"] = RegPolicy{true, std::nullopt};
    c.policy.regs["p"] = RegPolicy{false, std::nullopt};
    c.policy.regions.push_back(RegionPolicy{"a", o.region_size, false, std::nullopt});
    c.bounds.values["a"] = {0, 3};
    c.bounds.max_steps = size_t(len) + 2;
    return c;
}

InitAssign random_assign(std::mt19937_64& rng, const ExecContext& cx) {
    const uint64_t m = word_mask(cx.width());
    std::uniform_int_distribution<uint64_t> word(0, m);
    InitAssign a;
    for (const auto& [name, rp] : cx.policy->regs) {
        uint64_t v = word(rng);
        if (rp.range) v = from_signed(std::uniform_int_distribution<int64_t>(rp.range->lo, rp.range->hi)(rng), cx.width());
        a.regs[name] = v;
    }
    for (const auto& rg : cx.policy->regions) {
        auto& cells = a.regions[rg.name];
        for (int64_t k = 0; k < rg.size; ++k) {
            uint64_t v = word(rng);
            if (rg.range) v = from_signed(std::uniform_int_distribution<int64_t>(rg.range->lo, rg.range->hi)(rng), cx.width());
            cells.push_back(v);
        }
    }
    return a;
}

ImplicationResult check_ss_implies_sni(const std::vector<RandomCase>& corpus) {
    ImplicationResult r;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const RandomCase& c = corpus[i];
        ExecContext cx(c.prog, c.policy);
        ++r.programs;
        CheckResult ss = check_ss(cx, c.bounds);
        if (ss.verdict == Verdict::Inconclusive) {
            ++r.inconclusive;
            continue;
        }
        if (ss.verdict != Verdict::Pass) continue;
        ++r.ss_pass;
        CheckResult sni = check_sni(cx, c.bounds);
        if (sni.verdict == Verdict::Inconclusive) ++r.inconclusive;
        if (sni.verdict == Verdict::Violation) {
            ++r.sni_fail;
            if (!r.counterexample) r.counterexample = i;
        }
    }
    return r;
}

}  // namespace lslh
