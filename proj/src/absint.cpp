#include "lslh/absint.hpp"

#include <algorithm>
#include <set>

namespace lslh {

bool AbstractState::operator==(const AbstractState& o) const {
    if (bottom || o.bottom) return bottom == o.bottom;
    return rho == o.rho && mu == o.mu && mv == o.mv && mt == o.mt;
}

AnalysisContext::AnalysisContext(const Program& p, const Policy& pol, AnalysisOptions o)
    : AnalysisContext(p, pol, default_slice(p.width), o) {}

AnalysisContext::AnalysisContext(const Program& p, const Policy& pol, ObsSlice s, AnalysisOptions o)
    : prog(&p), policy(&pol), bases(base_table(p, pol)), slice(s), opts(o) {
    for (const auto& b : bases) base_names.push_back(b.name);
    ExecContext ex(p, pol, s);
    ceil_align = ex.ceil_align;
}

namespace {

AbstractValue value_join(const AbstractValue& a, const AbstractValue& b) { return clamp_eps(value_lub(a, b)); }

DI range_di(const std::optional<Range>& r, int n) {
    if (!r) return DI::top(n);
    return DI(Interval{std::max(r->lo, imin(n)), std::min(r->hi, imax(n))});
}

}  // namespace

AbstractState initial_abstract_state(const AnalysisContext& cx) {
    const Program& p = *cx.prog;
    const int n = p.width;
    const int nb = cx.nbases();
    AbstractState s;
    s.bottom = false;
    s.rho.assign(p.regs.size(), AbstractValue::number(DI::top(n), nb));
    s.mu.assign(p.regs.size(), TaintVector(n, Label::L));
    for (size_t r = 0; r < p.regs.size(); ++r) {
        auto it = cx.policy->regs.find(p.regs[r]);
        if (it == cx.policy->regs.end()) continue;
        s.rho[r] = AbstractValue::number(range_di(it->second.range, n), nb);
        if (it->second.secret) s.mu[r] = TaintVector(n, Label::H);
    }
    std::vector<int64_t> sizes;
    for (const auto& b : cx.bases) sizes.push_back(b.size);
    s.mv = AbstractMemory<AbstractValue>(sizes, AbstractValue::top(nb, n), AbstractValue::bottom(nb));
    s.mt = AbstractMemory<TaintVector>(sizes, TaintVector(n, Label::H), TaintVector(n, Label::Bot));
    for (int b = 0; b < nb; ++b) {
        const BaseInfo& bi = cx.bases[b];
        if (bi.formal) {
            s.mv.fill(b, AbstractValue::number(range_di(bi.range, n), nb));
            s.mt.fill(b, TaintVector(n, bi.secret ? Label::H : Label::L));
            int slot = p.slot_of(bi.name);
            if (slot >= 0) {
                s.rho[slot] = AbstractValue::pointer(b, 0, nb);
                s.mu[slot] = TaintVector(n, Label::L);
            }
        } else {
            s.mv.fill(b, AbstractValue::number(DI::point(0), nb));
            s.mt.fill(b, TaintVector(n, Label::L));
        }
    }
    return s;
}

AbstractValue eval_value(const AnalysisContext& cx, const AbstractState& s, const Expr& e) {
    const int n = cx.width();
    if (s.bottom) return AbstractValue::bottom(cx.nbases());
    switch (e.kind) {
        case Expr::Kind::Const: return AbstractValue::number(DI::point(to_signed(from_signed(e.value, n), n)), cx.nbases());
        case Expr::Kind::Reg: return s.rho[e.slot];
        case Expr::Kind::Unary: {
            AbstractValue a = eval_value(cx, s, *e.lhs);
            return value_apply(e.op, a, a, n);
        }
        case Expr::Kind::Binary:
            return value_apply(e.op, eval_value(cx, s, *e.lhs), eval_value(cx, s, *e.rhs), n);
    }
    return {};
}

TaintVector eval_taint(const AnalysisContext& cx, const AbstractState& s, const Expr& e) {
    const int n = cx.width();
    if (s.bottom) return TaintVector(n, Label::Bot);
    switch (e.kind) {
        case Expr::Kind::Const: return TaintVector::of_value(from_signed(e.value, n), n);
        case Expr::Kind::Reg: return s.mu[e.slot];
        case Expr::Kind::Unary: {
            TaintVector a = eval_taint(cx, s, *e.lhs);
            return taint_apply(e.op, a, a);
        }
        case Expr::Kind::Binary: return taint_apply(e.op, eval_taint(cx, s, *e.lhs), eval_taint(cx, s, *e.rhs));
    }
    return {};
}

AbstractState state_join(const AbstractState& a, const AbstractState& b) {
    if (a.bottom) return b;
    if (b.bottom) return a;
    AbstractState r = a;
    for (size_t k = 0; k < r.rho.size(); ++k) {
        r.rho[k] = value_join(a.rho[k], b.rho[k]);
        r.mu[k] = taint_lub(a.mu[k], b.mu[k]);
    }
    r.mv.join_with(b.mv, value_join);
    r.mt.join_with(b.mt, taint_lub);
    return r;
}

namespace {

AbsObs mem_obs(const AnalysisContext& cx, Observation::Kind k, const AbstractValue& v, const TaintVector& t) {
    return AbsObs{k, v, taint_slice(t, cx.slice.lo, cx.slice.hi)};
}

DI nonzero(int n) { return DI::of({{imin(n), -1}, {1, imax(n)}}); }

// Refines register slot r of s by intersecting its ε component; returns false if unreachable.
bool refine_eps(AbstractState& s, int r, const DI& allowed) {
    AbstractValue& v = s.rho[r];
    v.eps = di_glb(v.eps, allowed);
    return !v.is_bottom();
}

}  // namespace

AbsStep abs_step(const AnalysisContext& cx, const AbstractState& s, int loc, Mode mode) {
    const Program& p = *cx.prog;
    const int n = p.width;
    AbsStep out;
    if (s.bottom || loc < 0 || loc >= p.size()) return out;
    const Instr& ins = p.code[loc];
    switch (ins.kind) {
        case InstrKind::Asgn: {
            AbstractState t = s;
            t.rho[ins.xslot] = clamp_eps(eval_value(cx, s, *ins.e));
            t.mu[ins.xslot] = eval_taint(cx, s, *ins.e);
            const auto& ca = cx.ceil_align[loc];
            if (ca.first >= 0) t.mu[ca.first] = sanitize_ceil_align(t.mu[ca.first], ca.second);
            out.succ.push_back({loc + 1, std::move(t)});
            break;
        }
        case InstrKind::Load: {
            AbstractValue addr = eval_value(cx, s, *ins.e);
            TaintVector at = eval_taint(cx, s, *ins.e);
            out.obs = mem_obs(cx, Observation::Kind::Load, addr, at);
            AbstractState t = s;
            t.rho[ins.xslot] = clamp_eps(s.mv.load(addr, value_lub));
            t.mu[ins.xslot] = at.contains(Label::H) ? TaintVector(n, Label::H) : s.mt.load(addr, taint_lub);
            out.succ.push_back({loc + 1, std::move(t)});
            break;
        }
        case InstrKind::Store: {
            AbstractValue addr = eval_value(cx, s, *ins.e);
            TaintVector at = eval_taint(cx, s, *ins.e);
            out.obs = mem_obs(cx, Observation::Kind::Store, addr, at);
            AbstractState t = s;
            t.mv.store(addr, s.rho[ins.xslot], value_join);
            t.mt.store(addr, at.contains(Label::H) ? TaintVector(n, Label::H) : s.mu[ins.xslot], taint_lub);
            out.succ.push_back({loc + 1, std::move(t)});
            break;
        }
        case InstrKind::Jmp: out.succ.push_back({ins.target, s}); break;
        case InstrKind::Beqz: {
            out.obs = AbsObs{Observation::Kind::Branch, s.rho[ins.xslot], s.mu[ins.xslot]};
            AbstractState taken = s, fall = s;
            bool taken_ok = true, fall_ok = true;
            if (mode == Mode::Seq) {
                taken_ok = refine_eps(taken, ins.xslot, DI::point(0));
                fall_ok = refine_eps(fall, ins.xslot, nonzero(n));
                // x <- (y Lshr k) immediately before: x = 0 iff y is in [0, 2^k - 1]
                if (cx.opts.guard_refinement && loc > 0 && pred(p, loc) == std::vector<int>{loc - 1}) {
                    const Instr& g = p.code[loc - 1];
                    if (g.kind == InstrKind::Asgn && g.xslot == ins.xslot && g.e->kind == Expr::Kind::Binary &&
                        g.e->op == Op::Lshr && g.e->lhs->kind == Expr::Kind::Reg && g.e->lhs->slot != ins.xslot &&
                        g.e->rhs->kind == Expr::Kind::Const && g.e->rhs->value >= 0 && g.e->rhs->value < n) {
                        const int y = g.e->lhs->slot;
                        const int64_t hi = (int64_t(1) << g.e->rhs->value) - 1;
                        if (taken_ok) taken_ok = refine_eps(taken, y, DI(Interval{0, hi}));
                        if (fall_ok && hi < imax(n)) {
                            DI rest = DI::of({{imin(n), -1}, {hi + 1, imax(n)}});
                            fall_ok = refine_eps(fall, y, rest);
                        }
                    }
                }
            }
            if (fall_ok) out.succ.push_back({loc + 1, std::move(fall)});
            if (taken_ok) out.succ.push_back({ins.target, std::move(taken)});
            break;
        }
        case InstrKind::CondAsgn: {
            AbstractValue v = eval_value(cx, s, *ins.e);
            AbstractValue c = eval_value(cx, s, *ins.cond);
            TaintVector tv = eval_taint(cx, s, *ins.e);
            TaintVector tc = eval_taint(cx, s, *ins.cond);
            const bool may_zero = c.eps.contains(0) || !c.is_number();
            const bool may_nonzero = !(c.is_number() && c.eps.intervals().size() == 1 && c.eps.min() == 0 && c.eps.max() == 0) && !c.is_bottom();
            AbstractState t = s;
            AbstractValue& x = t.rho[ins.xslot];
            if (may_nonzero && !may_zero) x = clamp_eps(v);
            else if (may_nonzero) x = value_join(x, v);
            if (tc.contains(Label::H)) t.mu[ins.xslot] = TaintVector(n, Label::H);
            else if (may_nonzero && !may_zero) t.mu[ins.xslot] = tv;
            else if (may_nonzero) t.mu[ins.xslot] = taint_lub(t.mu[ins.xslot], tv);
            out.succ.push_back({loc + 1, std::move(t)});
            break;
        }
        case InstrKind::Fence:
            out.succ.push_back({loc + 1, s});
            if (mode == Mode::Spec) out.succ.push_back({-1, s});
            break;
        case InstrKind::Alloc: {
            AbstractState t = s;
            t.rho[ins.xslot] = AbstractValue::pointer(base_of_alloc(cx.bases, loc), 0, cx.nbases());
            t.mu[ins.xslot] = TaintVector(n, Label::L);
            out.succ.push_back({loc + 1, std::move(t)});
            break;
        }
    }
    return out;
}

Config initial_config(const AnalysisContext& cx) {
    Config c(cx.prog->end() + 1);
    c[0] = initial_abstract_state(cx);
    return c;
}

Widener::Widener(const AnalysisContext& cx)
    : cx_(cx), growth_(cx.prog->end() + 1, std::vector<int>(cx.prog->regs.size(), 0)) {}

void Widener::widen(const AbstractState& old, AbstractState& next, int loc) {
    if (cx_.opts.widen_threshold <= 0 || old.bottom || next.bottom) return;
    const int n = cx_.width();
    for (size_t r = 0; r < next.rho.size(); ++r) {
        if (next.rho[r] == old.rho[r] || !value_leq(old.rho[r], next.rho[r])) continue;
        if (++growth_[loc][r] <= cx_.opts.widen_threshold) continue;
        AbstractValue& v = next.rho[r];
        bool changed = false;
        for (DI& d : v.base)
            if (!d.empty() && !d.is_top(n)) {
                d = DI::top(n);
                changed = true;
            }
        if (!v.eps.empty() && !v.eps.is_top(n)) {
            v.eps = DI::top(n);
            changed = true;
        }
        if (changed) ++widenings_;
    }
}

bool Widener::absorb(Config& omega, int loc, const AbstractState& incoming) {
    AbstractState next = state_join(omega[loc], incoming);
    if (next == omega[loc]) return false;
    widen(omega[loc], next, loc);
    omega[loc] = std::move(next);
    return true;
}

void Widener::replace(Config& omega, int loc, AbstractState next) {
    widen(omega[loc], next, loc);
    omega[loc] = std::move(next);
}

Config fixpoint(const AnalysisContext& cx, Mode mode, FixpointStats* stats) {
    const Program& p = *cx.prog;
    Config omega = initial_config(cx);
    const auto order = reverse_postorder(p);
    std::vector<int> rank(p.end() + 1);
    for (size_t k = 0; k < order.size(); ++k) rank[order[k]] = int(k);
    std::set<std::pair<int, int>> work{{rank[0], 0}};
    Widener widener(cx);
    size_t iters = 0;
    while (!work.empty()) {
        int loc = work.begin()->second;
        work.erase(work.begin());
        if (++iters > cx.opts.iteration_budget) throw AnalysisError("iteration budget exceeded");
        AbsStep st = abs_step(cx, omega[loc], loc, mode);
        for (auto& sc : st.succ) {
            if (sc.loc < 0) continue;
            if (widener.absorb(omega, sc.loc, sc.s)) work.insert({rank[sc.loc], sc.loc});
        }
    }
    if (stats) {
        stats->iterations = iters;
        stats->widenings = widener.widenings();
    }
    return omega;
}

bool state_contains(const AnalysisContext& cx, const AbstractState& a, const ConcreteState& s) {
    if (a.bottom) return false;
    const int n = cx.width();
    std::vector<std::vector<uint64_t>> addrs(cx.bases.size());
    for (const auto& r : s.regions)
        if (r.base >= 0) addrs[r.base].push_back(r.start);
    for (size_t r = 0; r < a.rho.size(); ++r) {
        if (!taint_leq(s.taint[r], a.mu[r])) return false;
        if (!s.regs[r].empty && !value_contains(a.rho[r], s.regs[r].v, addrs, n)) return false;
    }
    for (const auto& reg : s.regions) {
        if (reg.base < 0) continue;
        for (int64_t k = 0; k < reg.size; ++k) {
            TaintVector t;
            Word w = load_cell(s, (reg.start + uint64_t(k)) & word_mask(n), n, &t);
            if (!taint_leq(t, a.mt.cell(reg.base, k))) return false;
            if (!w.empty && !value_contains(a.mv.cell(reg.base, k), w.v, addrs, n)) return false;
        }
    }
    return true;
}

std::string render_taint_compact(const TaintVector& t) {
    for (int i = 1; i < t.size(); ++i)
        if (t[i] != t[0]) return render_taint(t);
    return std::string(label_str(t[0])) + "⃗";
}

std::string render_state(const AnalysisContext& cx, const AbstractState& s) {
    if (s.bottom) return "⊥\n";
    std::string out;
    const int n = cx.width();
    for (size_t r = 0; r < s.rho.size(); ++r)
        out += "  " + cx.prog->regs[r] + " = " + render_value(s.rho[r], cx.base_names, n) + " : " +
               render_taint_compact(s.mu[r]) + "\n";
    return out;
}

}  // namespace lslh
