#include "lslh/hardener.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

namespace lslh {

const char* reason_name(HardenReason r) {
    return r == HardenReason::HObservation ? "H-observation" : "OOB-store";
}

Config phase1(const AnalysisContext& cx, FixpointStats* stats) { return fixpoint(cx, Mode::Seq, stats); }

bool is_access(const Program& p, int loc) {
    if (loc < 0 || loc >= p.size()) return false;
    auto k = p.code[loc].kind;
    return k == InstrKind::Load || k == InstrKind::Store;
}

bool oob_store(const AnalysisContext& cx, const AbstractState& s, int loc) {
    const Instr& ins = cx.prog->code[loc];
    if (s.bottom || ins.kind != InstrKind::Store) return false;
    return !s.mv.in_bounds(eval_value(cx, s, *ins.e));
}

HardenList harden_set(const AnalysisContext& cx, const Config& omega) {
    HardenList out;
    const Program& p = *cx.prog;
    for (int i = 0; i < p.size(); ++i) {
        if (omega[i].bottom || p.code[i].hardened) continue;
        AbsStep st = abs_step(cx, omega[i], i, Mode::Spec);
        if (st.obs.has_h()) out[i] = HardenReason::HObservation;
        else if (oob_store(cx, omega[i], i)) out[i] = HardenReason::OobStore;
    }
    return out;
}

AbsStep switch_step(const AnalysisContext& cx, const AbstractState& s, int loc, const Config& seq) {
    const Program& p = *cx.prog;
    if (!is_access(p, loc)) throw std::invalid_argument("switch rule applied to a non-access location");
    const Instr& ins = p.code[loc];
    const int n = p.width;
    AbsStep out;
    if (s.bottom) return out;
    const AbstractState& q = seq[loc];
    AbstractValue addr = q.bottom ? AbstractValue::bottom(cx.nbases()) : eval_value(cx, q, *ins.e);
    TaintVector at = q.bottom ? TaintVector(n, Label::Bot) : eval_taint(cx, q, *ins.e);
    AbstractState t = s;
    if (ins.kind == InstrKind::Load) {
        out.obs = AbsObs{Observation::Kind::Load, addr, taint_slice(at, cx.slice.lo, cx.slice.hi)};
        // x takes its value after the sequential step at loc; an unreachable
        // sequential state means the load only runs while misspeculating,
        // where it yields the empty value.
        AbsStep sq = abs_step(cx, q, loc, Mode::Seq);
        if (sq.succ.empty()) {
            t.rho[ins.xslot] = AbstractValue::bottom(cx.nbases());
            t.mu[ins.xslot] = TaintVector(n, Label::Bot);
        } else {
            t.rho[ins.xslot] = sq.succ[0].s.rho[ins.xslot];
            t.mu[ins.xslot] = sq.succ[0].s.mu[ins.xslot];
        }
    } else {
        out.obs = AbsObs{Observation::Kind::Store, addr, taint_slice(at, cx.slice.lo, cx.slice.hi)};
        if (!q.bottom) {
            t.mv.store(addr, s.rho[ins.xslot], [](const AbstractValue& a, const AbstractValue& b) {
                return clamp_eps(value_lub(a, b));
            });
            t.mt.store(addr, at.contains(Label::H) ? TaintVector(n, Label::H) : s.mu[ins.xslot], taint_lub);
        }
    }
    out.succ.push_back({loc + 1, std::move(t)});
    return out;
}

Config trans(const AnalysisContext& cx, const Config& omega, const HardenList& h, const Config& seq,
             Widener* widener) {
    const Program& p = *cx.prog;
    Config next(omega.size());
    next[0] = omega[0];
    for (int j = 0; j < p.size(); ++j) {
        if (omega[j].bottom) continue;
        const bool sw = is_access(p, j) && (h.count(j) || p.code[j].hardened);
        AbsStep st = sw ? switch_step(cx, omega[j], j, seq) : abs_step(cx, omega[j], j, Mode::Spec);
        for (auto& sc : st.succ)
            if (sc.loc >= 0) next[sc.loc] = state_join(next[sc.loc], sc.s);
    }
    // With widening the plain synchronous sequence is no longer increasing:
    // a widened state travels around a loop and meets older, smaller ones,
    // which can cycle forever. Joining with the previous iterate restores
    // monotonicity.
    if (widener)
        for (size_t i = 0; i < next.size(); ++i) {
            AbstractState s = state_join(omega[i], next[i]);
            next[i] = omega[i];
            widener->replace(next, int(i), std::move(s));
        }
    return next;
}

Phase2Result algorithm1(const AnalysisContext& cx, const Config& seq) {
    Phase2Result r;
    Config cur = initial_config(cx);
    Config old;  // ⊥ configuration: differs from cur in size
    HardenList hcur, hold;
    bool first = true;
    Widener widener(cx);
    while (first || !(cur == old) || hcur != hold) {
        first = false;
        if (++r.iterations > cx.opts.iteration_budget) throw AnalysisError("iteration budget exceeded");
        old = cur;
        hold = hcur;
        for (auto& [loc, why] : harden_set(cx, cur)) hcur.emplace(loc, why);
        cur = trans(cx, cur, hcur, seq, &widener);
    }
    r.hardened = std::move(hcur);
    r.omega = std::move(cur);
    return r;
}

PipelineResult light_slh(const AnalysisContext& cx) {
    PipelineResult r;
    r.seq = phase1(cx);
    r.phase2 = algorithm1(cx, r.seq);
    return r;
}

RowSpec parse_row(const Program& p, const std::string& spec) {
    const auto at = spec.rfind('@');
    if (at == std::string::npos) throw std::invalid_argument("row '" + spec + "' lacks @location");
    RowSpec r;
    std::string where = spec.substr(at + 1);
    while (!where.empty() && std::isspace((unsigned char)where.back())) where.pop_back();
    while (!where.empty() && std::isspace((unsigned char)where.front())) where.erase(where.begin());
    if (!where.empty() && where.back() == '+') {
        r.post = true;
        where.pop_back();
    }
    if (where == "end") {
        r.loc = p.end();
    } else {
        if (where.empty() || !std::all_of(where.begin(), where.end(), [](char c) { return std::isdigit((unsigned char)c); }))
            throw std::invalid_argument("row '" + spec + "' has a bad location");
        r.loc = std::stoi(where);
    }
    if (r.loc > p.end() || (r.post && r.loc >= p.end()))
        throw std::invalid_argument("row '" + spec + "' is outside the program");
    r.expr = bind_expr(p, parse_expr(spec.substr(0, at)));
    r.text = render_expr(*r.expr);
    return r;
}

std::vector<RowSpec> parse_rows(const Program& p, const std::string& specs) {
    std::vector<RowSpec> out;
    std::string cur;
    int depth = 0;
    for (char c : specs) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            out.push_back(parse_row(p, cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(parse_row(p, cur));
    return out;
}

AnalysisTables analyze_all(const AnalysisContext& cx) {
    AnalysisTables t;
    t.seq = phase1(cx);
    t.spec = fixpoint(cx, Mode::Spec);
    t.phase2 = algorithm1(cx, t.seq);
    return t;
}

namespace {

enum class Column { Seq, Spec, Hk };

TableCell make_cell(const AnalysisContext& cx, const AnalysisTables& t, const RowSpec& r, Column col) {
    const Program& p = *cx.prog;
    const Config& omega = col == Column::Seq ? t.seq : col == Column::Spec ? t.spec : t.phase2.omega;
    const Mode mode = col == Column::Seq ? Mode::Seq : Mode::Spec;
    auto switched = [&](int loc) {
        return col == Column::Hk && is_access(p, loc) && (t.phase2.hardened.count(loc) || p.code[loc].hardened);
    };
    TableCell c;
    AbstractState s;
    if (r.post) {
        AbsStep st = switched(r.loc) ? switch_step(cx, omega[r.loc], r.loc, t.seq)
                                     : abs_step(cx, omega[r.loc], r.loc, mode);
        for (auto& sc : st.succ)
            if (sc.loc == r.loc + 1) s = state_join(s, sc.s);
    } else {
        s = omega[r.loc];
    }
    if (s.bottom) return c;
    c.bottom = false;
    c.v = eval_value(cx, s, *r.expr);
    c.t = eval_taint(cx, s, *r.expr);
    if (!r.post && is_access(p, r.loc) && expr_equal(*r.expr, *p.code[r.loc].e))
        c.boxed = abs_step(cx, omega[r.loc], r.loc, mode).obs.has_h();
    if (col == Column::Hk && r.expr->kind == Expr::Kind::Reg) {
        int src = r.post ? r.loc : r.loc - 1;
        bool edge = r.post || (src >= 0 && pred(p, r.loc) == std::vector<int>{src});
        c.recovered = edge && switched(src) && p.code[src].kind == InstrKind::Load && p.code[src].xslot == r.expr->slot;
    }
    return c;
}

size_t display_width(const std::string& s) {
    size_t w = 0;
    for (size_t i = 0; i < s.size();) {
        unsigned char c = s[i];
        int len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
        uint32_t cp = c;
        if (len == 3 && i + 2 < s.size()) cp = ((c & 0x0F) << 12) | ((s[i + 1] & 0x3F) << 6) | (s[i + 2] & 0x3F);
        if (!(cp >= 0x20D0 && cp <= 0x20FF)) ++w;  // combining marks take no column
        i += size_t(len);
    }
    return w;
}

std::string pad(const std::string& s, size_t w) { return s + std::string(w > display_width(s) ? w - display_width(s) : 0, ' '); }

}  // namespace

std::vector<TableRow> analysis_table(const AnalysisContext& cx, const AnalysisTables& t,
                                     const std::vector<RowSpec>& rows) {
    std::vector<TableRow> out;
    for (const auto& r : rows) {
        TableRow row;
        row.label = r.text + "@" + (r.loc == cx.prog->end() ? std::string("end") : std::to_string(r.loc)) +
                    (r.post ? "+" : "");
        row.seq = make_cell(cx, t, r, Column::Seq);
        row.spec = make_cell(cx, t, r, Column::Spec);
        row.hk = make_cell(cx, t, r, Column::Hk);
        out.push_back(std::move(row));
    }
    return out;
}

std::string render_cell(const AnalysisContext& cx, const TableCell& c) {
    if (c.bottom) return "⊥";
    std::string s = render_value(c.v, cx.base_names, cx.width(), true) + " " + render_taint_compact(c.t);
    if (c.boxed) s = "[" + s + "]";
    if (c.recovered) s += " *";
    return s;
}

std::string render_table(const AnalysisContext& cx, const std::vector<TableRow>& rows) {
    std::vector<std::array<std::string, 4>> cells{{"Expr", "Seq", "Spec", "Spec hk."}};
    for (const auto& r : rows)
        cells.push_back({r.label, render_cell(cx, r.seq), render_cell(cx, r.spec), render_cell(cx, r.hk)});
    std::array<size_t, 4> w{};
    for (const auto& row : cells)
        for (size_t k = 0; k < 4; ++k) w[k] = std::max(w[k], display_width(row[k]));
    std::string out;
    for (const auto& row : cells) {
        std::string line;
        for (size_t k = 0; k < 4; ++k) line += (k ? "  " : "") + (k == 3 ? row[k] : pad(row[k], w[k]));
        out += line + "\n";
    }
    return out;
}

Program transform(const Program& p, const HardenList& h) {
    Program q = p;
    for (auto& [loc, why] : h) {
        if (loc < 0 || loc >= p.size()) throw std::invalid_argument("hardening location out of range");
        auto k = p.code[loc].kind;
        if (k != InstrKind::Load && k != InstrKind::Store && k != InstrKind::Beqz)
            throw std::invalid_argument("location " + std::to_string(loc) + " is not a load, store or branch");
        q.code[loc].hardened = true;
    }
    return q;
}

namespace {

std::string fresh_name(const Program& p, std::string base) {
    while (p.slot_of(base) >= 0) base += "_";
    return base;
}

}  // namespace

Program lower_flag(const Program& p, const HardenList& h, std::vector<int>* loc_map) {
    const int n = p.width;
    const std::string flag = fresh_name(p, "flag");
    const std::string cnd = fresh_name(p, "hcond");
    auto hard = [&](int i) { return p.code[i].hardened || h.count(i) > 0; };
    auto flag_ref = [&] { return Expr::reg_ref(flag); };
    auto is_zero = [&](const std::string& x) {
        ExprPtr r = Expr::reg_ref(x);
        ExprPtr neg = Expr::binary(Op::Minus, Expr::constant(0), r);
        ExprPtr nz = Expr::binary(Op::Or, r, neg);
        return Expr::binary(Op::Lshr, Expr::unary(Op::Not, nz), Expr::constant(n - 1));
    };
    auto set_flag_if = [&](ExprPtr c) {
        Instr i;
        i.kind = InstrKind::CondAsgn;
        i.x = flag;
        i.e = Expr::constant(-1);
        i.cond = std::move(c);
        return i;
    };

    // Branch targets are patched after layout: the sentinel -2 - k refers to
    // original location k, -100000 - k to the trampoline of branch k.
    constexpr int kTramp = -100000;
    std::vector<Instr> code;
    std::vector<int> map(p.size() + 1, 0);
    Instr init;
    init.kind = InstrKind::Asgn;
    init.x = flag;
    init.e = Expr::constant(0);
    code.push_back(init);
    std::vector<int> branches;
    for (int i = 0; i < p.size(); ++i) {
        map[i] = int(code.size());
        Instr ins = p.code[i];
        ins.hardened = false;
        switch (ins.kind) {
            case InstrKind::Load:
            case InstrKind::Store:
                if (hard(i)) ins.e = Expr::binary(Op::Or, ins.e, flag_ref());
                code.push_back(ins);
                break;
            case InstrKind::Jmp:
                ins.target = -2 - ins.target;
                code.push_back(ins);
                break;
            case InstrKind::Beqz: {
                if (hard(i)) {
                    Instr c;
                    c.kind = InstrKind::Asgn;
                    c.x = cnd;
                    c.e = Expr::binary(Op::Or, Expr::reg_ref(ins.x), flag_ref());
                    code.push_back(c);
                }
                Instr b = ins;
                if (hard(i)) b.x = cnd;
                b.target = kTramp - i;
                code.push_back(b);
                code.push_back(set_flag_if(is_zero(ins.x)));
                branches.push_back(i);
                break;
            }
            default: code.push_back(ins); break;
        }
    }
    const int body_end = int(code.size());
    Instr halt;
    halt.kind = InstrKind::Jmp;
    halt.target = -2 - p.size();
    if (!branches.empty()) code.push_back(halt);
    std::map<int, int> tramp;
    for (int i : branches) {
        tramp[i] = int(code.size());
        code.push_back(set_flag_if(Expr::reg_ref(p.code[i].x)));
        Instr j;
        j.kind = InstrKind::Jmp;
        j.target = -2 - p.code[i].target;
        code.push_back(j);
    }
    const int new_end = int(code.size());
    map[p.size()] = branches.empty() ? body_end : new_end;
    for (auto& ins : code) {
        if (ins.kind != InstrKind::Jmp && ins.kind != InstrKind::Beqz) continue;
        if (ins.target <= kTramp) ins.target = tramp[kTramp - ins.target];
        else if (ins.target <= -2) {
            int orig = -2 - ins.target;
            ins.target = orig == p.size() ? new_end : map[orig];
        }
    }
    Program q;
    q.code = std::move(code);
    q.width = p.width;
    q.finalize();
    if (loc_map) *loc_map = map;
    return q;
}

}  // namespace lslh
