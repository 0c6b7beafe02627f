#include "lslh/concrete.hpp"

#include <sstream>

namespace lslh {

ObsSlice default_slice(int n) { return n > 6 ? ObsSlice{6, n - 1} : ObsSlice{0, n - 1}; }

namespace {

bool is_reg(const ExprPtr& e) { return e && e->kind == Expr::Kind::Reg; }
bool is_const(const ExprPtr& e, int64_t v) { return e && e->kind == Expr::Kind::Const && e->value == v; }

std::vector<std::pair<int, int>> ceil_align_table(const Program& p) {
    std::vector<std::pair<int, int>> t(p.size(), {-1, 0});
    for (int i = 0; i < p.size(); ++i)
        if (auto m = match_ceil_align(p, i)) t[i] = *m;
    return t;
}

}  // namespace

std::optional<std::pair<int, int>> match_ceil_align(const Program& p, int loc) {
    if (loc < 2 || loc >= p.size()) return std::nullopt;
    const Instr& i0 = p.code[loc - 2];
    const Instr& i1 = p.code[loc - 1];
    const Instr& i2 = p.code[loc];
    for (const Instr* ins : {&i0, &i1, &i2})
        if (ins->kind != InstrKind::Asgn || ins->e->kind != Expr::Kind::Binary || ins->hardened) return std::nullopt;
    // b <- (a And 2^k-1)
    if (i0.e->op != Op::And || !is_reg(i0.e->lhs) || i0.e->rhs->kind != Expr::Kind::Const) return std::nullopt;
    const std::string a = i0.e->lhs->reg;
    const int64_t mask = i0.e->rhs->value;
    int k = 0;
    while (k < 63 && (int64_t(1) << k) - 1 < mask) ++k;
    if (k < 1 || k >= p.width || (int64_t(1) << k) - 1 != mask) return std::nullopt;
    const std::string b = i0.x;
    if (b == a) return std::nullopt;
    // c <- (2^k Minus b)
    if (i1.e->op != Op::Minus || !is_const(i1.e->lhs, int64_t(1) << k) || !is_reg(i1.e->rhs) || i1.e->rhs->reg != b)
        return std::nullopt;
    const std::string c = i1.x;
    if (c == a) return std::nullopt;
    // d <- (a Add c)
    if (i2.e->op != Op::Add || !is_reg(i2.e->lhs) || !is_reg(i2.e->rhs)) return std::nullopt;
    const std::string l = i2.e->lhs->reg, r = i2.e->rhs->reg;
    if (!((l == a && r == c) || (l == c && r == a))) return std::nullopt;
    if (pred(p, loc - 1) != std::vector<int>{loc - 2} || pred(p, loc) != std::vector<int>{loc - 1}) return std::nullopt;
    return std::make_pair(i2.xslot, k);
}

ExecContext::ExecContext(const Program& p, const Policy& pol) : ExecContext(p, pol, default_slice(p.width)) {}

ExecContext::ExecContext(const Program& p, const Policy& pol, ObsSlice s)
    : prog(&p), policy(&pol), bases(base_table(p, pol)), slice(s), ceil_align(ceil_align_table(p)) {
    if (s.lo < 0 || s.hi >= p.width || s.lo > s.hi) throw std::invalid_argument("observation slice out of range");
}

ConcreteState initial_state(const ExecContext& cx, const InitAssign& init) {
    const Program& p = *cx.prog;
    const int n = p.width;
    const uint64_t m = word_mask(n);
    ConcreteState s;
    s.regs.assign(p.regs.size(), Word{});
    s.taint.assign(p.regs.size(), TaintVector(n, Label::L));
    for (size_t r = 0; r < p.regs.size(); ++r) {
        auto it = init.regs.find(p.regs[r]);
        if (it != init.regs.end()) s.regs[r].v = it->second & m;
        if (cx.policy->is_secret_reg(p.regs[r])) s.taint[r] = TaintVector(n, Label::H);
    }
    for (size_t b = 0; b < cx.bases.size(); ++b) {
        const BaseInfo& bi = cx.bases[b];
        if (!bi.formal) continue;
        const uint64_t start = s.mem;
        const bool full = start == 0 && !s.regions.empty();
        if (full || uint64_t(bi.size) - 1 > m - start) throw ExecError("regions exceed the address space");
        s.regions.push_back({start, bi.size, int(b)});
        auto vals = init.regions.find(bi.name);
        const TaintVector t(n, bi.secret ? Label::H : Label::L);
        for (int64_t k = 0; k < bi.size; ++k) {
            uint64_t v = 0;
            if (vals != init.regions.end() && size_t(k) < vals->second.size()) v = vals->second[size_t(k)] & m;
            s.memory[(start + uint64_t(k)) & m] = Cell{Word{v, false}, t};
        }
        s.mem = (s.mem + uint64_t(bi.size)) & m;
        int slot = p.slot_of(bi.name);
        if (slot >= 0) {
            s.regs[slot] = Word{start, false};
            s.taint[slot] = TaintVector(n, Label::L);
        }
    }
    return s;
}

Word load_cell(const ConcreteState& s, uint64_t addr, int n, TaintVector* taint) {
    auto it = s.memory.find(addr);
    if (it != s.memory.end()) {
        if (taint) *taint = it->second.taint;
        return it->second.val;
    }
    const uint64_t m = word_mask(n);
    for (const auto& r : s.regions)
        if (((addr - r.start) & m) < uint64_t(r.size)) {
            if (taint) *taint = TaintVector(n, Label::L);
            return Word{};
        }
    if (taint) *taint = TaintVector(n, Label::H);
    return Word{};
}

namespace {

struct Eval {
    Word w;
    TaintVector t;
};

Eval eval(const Expr& e, const ConcreteState& s, int n, bool* trap) {
    switch (e.kind) {
        case Expr::Kind::Const: {
            uint64_t v = from_signed(e.value, n);
            return {Word{v, false}, TaintVector::of_value(v, n)};
        }
        case Expr::Kind::Reg: return {s.regs[e.slot], s.taint[e.slot]};
        case Expr::Kind::Unary: {
            Eval a = eval(*e.lhs, s, n, trap);
            TaintVector t = taint_apply(e.op, a.t, a.t);
            if (a.w.empty) return {Word::eps(), t};
            return {Word{*word_apply(e.op, a.w.v, 0, n), false}, t};
        }
        case Expr::Kind::Binary: {
            Eval a = eval(*e.lhs, s, n, trap);
            Eval b = eval(*e.rhs, s, n, trap);
            TaintVector t = taint_apply(e.op, a.t, b.t);
            if (a.w.empty || b.w.empty) return {Word::eps(), TaintVector(n, Label::Bot)};
            auto r = word_apply(e.op, a.w.v, b.w.v, n);
            if (!r) {
                *trap = true;
                return {Word::eps(), TaintVector(n, Label::Bot)};
            }
            return {Word{*r, false}, t};
        }
    }
    return {};
}

Observation mem_obs(Observation::Kind k, const Word& addr, const TaintVector& t, const ObsSlice& sl) {
    Observation o;
    o.kind = k;
    o.value = addr.empty ? addr : Word{(addr.v >> sl.lo) & word_mask(sl.hi - sl.lo + 1), false};
    o.taint = taint_slice(t, sl.lo, sl.hi);
    return o;
}

}  // namespace

void step_in_place(const ExecContext& cx, ConcreteState& s, Directive d, Observation& obs) {
    const Program& p = *cx.prog;
    const int n = p.width;
    const uint64_t m = word_mask(n);
    if (s.halted()) throw ExecError("step from a halted state");
    if (s.pc < 0 || s.pc >= p.size()) {
        s.status = Status::Halted;
        throw ExecError("step from a halted state");
    }
    const int pc = s.pc;
    const Instr& ins = p.code[pc];
    if (d == Directive::Force && ins.kind != InstrKind::Beqz)
        throw ExecError("force directive at non-branch location " + std::to_string(pc));
    obs = Observation{};
    obs.taint = TaintVector(1);
    const bool blocked = ins.hardened && s.f;  // the hardening mask is all ones
    const TaintVector ones = TaintVector::of_value(m, n);
    bool trap = false;
    auto finish = [&](int next) {
        if (trap) {
            s.status = Status::Trap;
            obs = Observation{};
            obs.taint = TaintVector(1);
            return;
        }
        s.pc = next;
        if (next >= p.size()) s.status = Status::Halted;
    };
    switch (ins.kind) {
        case InstrKind::Asgn: {
            Eval v = eval(*ins.e, s, n, &trap);
            s.regs[ins.xslot] = v.w;
            s.taint[ins.xslot] = v.t;
            const auto& ca = cx.ceil_align[pc];
            if (ca.first >= 0) s.taint[ca.first] = sanitize_ceil_align(s.taint[ca.first], ca.second);
            finish(pc + 1);
            return;
        }
        case InstrKind::Load: {
            Eval a = eval(*ins.e, s, n, &trap);
            if (blocked) {
                obs = mem_obs(Observation::Kind::Load, Word{m, false}, ones, cx.slice);
                s.regs[ins.xslot] = Word::eps();
                s.taint[ins.xslot] = TaintVector(n, Label::Bot);
            } else {
                obs = mem_obs(Observation::Kind::Load, a.w, a.t, cx.slice);
                TaintVector ct(n, Label::Bot);
                Word w = Word::eps();
                if (!a.w.empty) {
                    w = load_cell(s, a.w.v, n, &ct);
                    bool mapped = s.memory.count(a.w.v) > 0;
                    if (!mapped) {
                        bool inside = false;
                        for (const auto& r : s.regions)
                            if (((a.w.v - r.start) & m) < uint64_t(r.size)) inside = true;
                        if (!inside) s.touched_unallocated = true;
                    }
                }
                s.regs[ins.xslot] = w;
                s.taint[ins.xslot] = a.t.contains(Label::H) ? TaintVector(n, Label::H) : ct;
            }
            finish(pc + 1);
            return;
        }
        case InstrKind::Store: {
            Eval a = eval(*ins.e, s, n, &trap);
            if (blocked) {
                obs = mem_obs(Observation::Kind::Store, Word{m, false}, ones, cx.slice);
            } else {
                obs = mem_obs(Observation::Kind::Store, a.w, a.t, cx.slice);
                if (!a.w.empty && !trap) {
                    TaintVector t = a.t.contains(Label::H) ? TaintVector(n, Label::H) : s.taint[ins.xslot];
                    s.memory[a.w.v] = Cell{s.regs[ins.xslot], t};
                }
            }
            finish(pc + 1);
            return;
        }
        case InstrKind::Jmp: finish(ins.target); return;
        case InstrKind::Beqz: {
            Word c = s.regs[ins.xslot];
            TaintVector t = s.taint[ins.xslot];
            if (blocked) {
                c = Word{m, false};
                t = ones;
            }
            obs.kind = Observation::Kind::Branch;
            obs.value = c;
            obs.taint = t;
            if (c.empty) {
                s.status = Status::EpsBranch;
                return;
            }
            bool zero = c.v == 0;
            int next = (d == Directive::Step) == zero ? ins.target : pc + 1;
            if (d == Directive::Force) s.f = true;
            finish(next);
            return;
        }
        case InstrKind::CondAsgn: {
            Eval v = eval(*ins.e, s, n, &trap);
            Eval c = eval(*ins.cond, s, n, &trap);
            if (c.w.empty) {
                s.regs[ins.xslot] = Word::eps();
                s.taint[ins.xslot] = c.t.contains(Label::H) ? TaintVector(n, Label::H) : TaintVector(n, Label::Bot);
            } else {
                if (c.w.v != 0) s.regs[ins.xslot] = v.w;
                if (c.t.contains(Label::H)) s.taint[ins.xslot] = TaintVector(n, Label::H);
                else if (c.w.v != 0) s.taint[ins.xslot] = v.t;
            }
            finish(pc + 1);
            return;
        }
        case InstrKind::Fence:
            if (s.f) {
                s.pc = -1;
                s.status = Status::Halted;
                return;
            }
            finish(pc + 1);
            return;
        case InstrKind::Alloc: {
            // regions never wrap around the address space
            const bool full = s.mem == 0 && !s.regions.empty();
            if (full || uint64_t(ins.size) - 1 > m - s.mem) {
                trap = true;
                finish(pc + 1);
                return;
            }
            s.regs[ins.xslot] = Word{s.mem, false};
            s.taint[ins.xslot] = TaintVector(n, Label::L);
            s.regions.push_back({s.mem, ins.size, base_of_alloc(cx.bases, pc)});
            s.mem = (s.mem + uint64_t(ins.size)) & m;
            finish(pc + 1);
            return;
        }
    }
}

StepResult step(const ExecContext& cx, const ConcreteState& s, Directive d) {
    StepResult r{s, {}};
    step_in_place(cx, r.state, d, r.obs);
    return r;
}

Trace run(const ExecContext& cx, const ConcreteState& s0, const std::vector<Directive>& dirs) {
    Trace tr;
    tr.states.push_back(s0);
    for (Directive d : dirs) {
        const ConcreteState& cur = tr.states.back();
        if (cur.halted()) break;
        TraceEntry e{cur.pc, d, {}, cur.f};
        ConcreteState next = cur;
        step_in_place(cx, next, d, e.obs);
        tr.steps.push_back(e);
        tr.states.push_back(std::move(next));
    }
    return tr;
}

Trace run_sequential(const ExecContext& cx, const ConcreteState& s0, size_t max_steps) {
    return run(cx, s0, std::vector<Directive>(max_steps, Directive::Step));
}

std::string render_word(const Word& w) { return w.empty ? "ε" : std::to_string(w.v); }

std::string render_obs(const Observation& o) {
    switch (o.kind) {
        case Observation::Kind::None: return "-";
        case Observation::Kind::Branch: return "branch(" + render_word(o.value) + ")";
        case Observation::Kind::Load: return "load(" + render_word(o.value) + ")";
        case Observation::Kind::Store: return "store(" + render_word(o.value) + ")";
    }
    return "?";
}

std::string render_directive(Directive d) { return d == Directive::Step ? "s" : "f"; }

std::vector<Directive> parse_directives(const std::string& s) {
    std::vector<Directive> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok.erase(0, tok.find_first_not_of(' '));
        tok.erase(tok.find_last_not_of(' ') + 1);
        if (tok == "s" || tok == "step") out.push_back(Directive::Step);
        else if (tok == "f" || tok == "force") out.push_back(Directive::Force);
        else if (!tok.empty()) throw std::invalid_argument("bad directive '" + tok + "'");
    }
    return out;
}

}  // namespace lslh
