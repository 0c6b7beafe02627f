// Acceptance checks: one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace lslh;

namespace {

struct Outcome {
    bool ok;
    std::string detail;
};

// 1. every taint operator is well-defined at n = 1, 2, 3
Outcome welldef() {
    int failures = 0;
    uint64_t instances = 0;
    for (Op op : kAllOps)
        for (int n = 1; n <= 3; ++n) {
            auto r = check_well_defined(op, n);
            failures += !r.ok;
            instances += r.instances;
        }
    return {failures == 0, std::to_string(failures) + " counterexamples over " + std::to_string(instances) +
                               " instances"};
}

// 2. bit-level taints of the alignment/masking example
Outcome align_index() {
    test::Example ex("align_index");
    ExecContext cx(ex.prog, ex.policy, ObsSlice{2, 3});
    const int a = ex.prog.slot_of("addr"), s = ex.prog.slot_of("secret");
    bool ok = true;
    for (uint64_t addr = 0; addr < 16; ++addr)
        for (uint64_t sec = 0; sec < 16; ++sec) {
            Trace t = run_sequential(cx, initial_state(cx, {{{"addr", addr}, {"secret", sec}}, {}}), 8);
            ok = ok && render_taint(t.states[2].taint[a]) == "(L,L,0,0)";
            ok = ok && render_taint(t.states[3].taint[s]) == "(0,0,H,H)";
            const Observation& o = t.steps[3].obs;
            ok = ok && o.kind == Observation::Kind::Load && !o.taint.contains(Label::H);
        }
    AnalysisContext ax(ex.prog, ex.policy, ObsSlice{2, 3});
    Config seq = fixpoint(ax, Mode::Seq);
    ExprPtr sum = bind_expr(ex.prog, parse_expr("(addr Add secret)"));
    ok = ok && render_taint(eval_taint(ax, seq[3], *sum)) == "(L,L,H,H)";
    ok = ok && !abs_step(ax, seq[3], 3, Mode::Spec).obs.has_h();
    return {ok, "addr (L,L,0,0), secret (0,0,H,H), address (L,L,H,H), no H in bits 2..3"};
}

// 3. value-domain example
Outcome alloc_offsets() {
    test::Example ex("alloc_offsets");
    AnalysisContext cx(ex.prog, ex.policy);
    AnalysisTables t = analyze_all(cx);
    auto rows = analysis_table(cx, t, parse_rows(ex.prog, "y@2,z@3,c@4,d@end"));
    const char* want[] = {"{(s,{[3],[6]})} L⃗", "{(s,{[3,4],[6,7]})} L⃗", "{(ε,[1,3])} L⃗",
                          "{(s,{[3],[6]}),(ε,[1,3])} L⃗"};
    bool ok = rows.size() == 4;
    std::string d;
    for (size_t i = 0; i < rows.size(); ++i) {
        std::string got = render_cell(cx, rows[i].seq);
        ok = ok && got == want[i];
        d += (i ? " " : "") + rows[i].label + "=" + got;
    }
    return {ok, d};
}

// 4. the three-column table and the hardening set
Outcome nested_lookup() {
    test::Example ex("nested_lookup");
    AnalysisContext cx(ex.prog, ex.policy);
    AnalysisTables t = analyze_all(cx);
    auto rows = analysis_table(cx, t, parse_rows(ex.prog, "x@3,(a Add x)@3,y@4,(b Add y)@4,z@5,(c Add z)@5,w@5+"));
    // [value taint], boxed cells in brackets, values recovered from phase 1 starred
    const char* want[][3] = {
        {"{(ε,[0,7])} L⃗", "{(ε,[0,15])} L⃗", "{(ε,[0,15])} L⃗"},
        {"{(a,[0,7])} L⃗", "{(a,[0,15])} L⃗", "{(a,[0,15])} L⃗"},
        {"{(ε,[0,255])} L⃗", "⊤ H⃗", "⊤ H⃗"},
        {"{(b,[0,255])} L⃗", "[⊤ H⃗]", "[⊤ H⃗]"},
        {"{(ε,[0,255])} L⃗", "⊤ H⃗", "{(ε,[0,255])} L⃗ *"},
        {"{(c,[0,255])} L⃗", "[⊤ H⃗]", "{(c,[0,255])} L⃗"},
        {"{(ε,[0,255])} L⃗", "⊤ H⃗", "{(ε,[0,255])} L⃗"},
    };
    int mismatches = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        mismatches += render_cell(cx, rows[i].seq) != want[i][0];
        mismatches += render_cell(cx, rows[i].spec) != want[i][1];
        mismatches += render_cell(cx, rows[i].hk) != want[i][2];
    }
    const HardenList& h = t.phase2.hardened;
    bool set_ok = h.size() == 1 && h.count(4) && render_instr(ex.prog.at(4), ex.prog.end()) == "load z, (b Add y)";
    return {mismatches == 0 && rows.size() == 7 && set_ok,
            std::to_string(21 - mismatches) + "/21 cells match, hardened {" +
                (h.empty() ? std::string() : std::to_string(h.begin()->first)) + (h.size() > 1 ? ",..." : "") + "}"};
}

std::vector<RandomCase> random_corpus(size_t count, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<RandomCase> out;
    RandomProgramOptions o;  // n = 3, 3..8 instructions, loop-free, 2 secret registers
    for (size_t i = 0; i < count; ++i) out.push_back(random_case(rng, o));
    return out;
}

// 5. SS implies SNI on random loop-free programs
Outcome implication(const std::vector<RandomCase>& corpus) {
    ImplicationResult r = check_ss_implies_sni(corpus);
    std::ostringstream d;
    d << r.programs << " programs, " << r.ss_pass << " pass SS, " << r.sni_fail << " of those fail SNI, "
      << r.inconclusive << " inconclusive";
    return {r.programs >= 500 && r.sni_fail == 0 && r.inconclusive == 0, d.str()};
}

// 6. hardened programs are speculatively safe
Outcome hardened_safe(const std::vector<RandomCase>& corpus) {
    size_t checked = 0, failures = 0;
    auto check = [&](const Program& p, const Policy& pol, const EnumBounds& b) {
        AnalysisContext cx(p, pol);
        Program h = transform(p, light_slh(cx).phase2.hardened);
        ExecContext ecx(h, pol);
        ++checked;
        failures += check_ss(ecx, b).verdict != Verdict::Pass;
    };
    for (const auto& c : corpus) check(c.prog, c.policy, c.bounds);
    for (const char* name : test::kCorpus) {
        test::Example ex(name);
        check(ex.prog, ex.policy, test::load_bounds(name));
    }
    return {failures == 0, std::to_string(checked) + " programs, " + std::to_string(failures) + " not passing SS"};
}

// 7. the copy loop needs exactly its store hardened
Outcome chacha() {
    test::Example ex("chacha");
    AnalysisContext cx(ex.prog, ex.policy);
    HardenList h = light_slh(cx).phase2.hardened;
    bool ok = h.size() == 1 && ex.prog.code[h.begin()->first].kind == InstrKind::Store &&
              h.begin()->second == HardenReason::OobStore;
    std::string d;
    for (auto& [loc, why] : h) d += (d.empty() ? "" : ", ") + std::to_string(loc) + ":" + reason_name(why);
    return {ok, "hardened " + d};
}

// 8. gather with a secret-sized window versus a fixed window
Outcome scatter_gather() {
    auto analyse = [](const char* name, bool& h_high, size_t& hardened_loads, size_t& loads) {
        test::Example ex(name);
        AnalysisContext cx(ex.prog, ex.policy);
        PipelineResult r = light_slh(cx);
        h_high = false;
        hardened_loads = loads = 0;
        for (int i = 0; i < ex.prog.size(); ++i) {
            if (ex.prog.code[i].kind != InstrKind::Load) continue;
            ++loads;
            hardened_loads += r.phase2.hardened.count(i);
            TaintVector t = eval_taint(cx, r.seq[i], *ex.prog.code[i].e);
            for (int b = cx.slice.lo; b < cx.width(); ++b) h_high = h_high || t[b] == Label::H;
        }
    };
    bool var_h, fix_h;
    size_t var_hard, var_loads, fix_hard, fix_loads;
    analyse("sg_variable", var_h, var_hard, var_loads);
    analyse("sg_fixed", fix_h, fix_hard, fix_loads);
    std::ostringstream d;
    d << "variable: H on a line bit " << (var_h ? "yes" : "no") << ", " << var_hard << "/" << var_loads
      << " gather loads hardened; fixed: H on a line bit " << (fix_h ? "yes" : "no") << ", " << fix_hard << "/"
      << fix_loads << " hardened";
    return {var_h && var_hard == var_loads && var_loads > 0 && !fix_h && fix_hard == 0, d.str()};
}

// 9. random traces stay inside the speculative fixpoint
Outcome inclusion() {
    std::mt19937_64 rng(2024);
    RandomProgramOptions o;
    o.allow_loops = true;
    o.max_len = 10;
    size_t programs = 200, traces = 0, states = 0, failures = 0;
    for (size_t i = 0; i < programs; ++i) {
        RandomCase c = random_case(rng, o);
        ExecContext ecx(c.prog, c.policy);
        AnalysisContext cx(c.prog, c.policy);
        Config spec = fixpoint(cx, Mode::Spec);
        for (int t = 0; t < 100; ++t, ++traces) {
            ConcreteState s = initial_state(ecx, random_assign(rng, ecx));
            for (int k = 0; k < 200 && !s.halted(); ++k, ++states) {
                if (!state_contains(cx, spec[s.pc], s)) {
                    ++failures;
                    break;
                }
                bool br = c.prog.code[s.pc].kind == InstrKind::Beqz;
                Observation obs;
                step_in_place(ecx, s, br && rng() % 2 ? Directive::Force : Directive::Step, obs);
            }
            if (s.status == Status::Halted && s.pc >= 0 && !state_contains(cx, spec[s.pc], s)) ++failures;
        }
    }
    return {failures == 0, std::to_string(programs) + " programs, " + std::to_string(traces) + " traces, " + std::to_string(states) + " states, " +
                               std::to_string(failures) + " inclusion failures"};
}

// 10. interval and DI operators are sound
Outcome domain_soundness() {
    uint64_t cases = 0, violations = 0;
    for (int n = 1; n <= 6; ++n) {
        const int64_t lo = imin(n), w = int64_t(1) << n;
        for (Op op : kAllOps) {
            std::vector<int64_t> table(size_t(w * w));
            std::vector<char> defined(size_t(w * w));
            for (int64_t i = 0; i < w; ++i)
                for (int64_t j = 0; j < w; ++j) {
                    auto r = word_apply(op, from_signed(lo + i, n), from_signed(lo + j, n), n);
                    defined[size_t(i * w + j)] = r.has_value();
                    table[size_t(i * w + j)] = r ? to_signed(*r, n) : 0;
                }
            for (int64_t a1 = 0; a1 < w; ++a1)
                for (int64_t a2 = a1; a2 < w; ++a2)
                    for (int64_t b1 = 0; b1 < w; ++b1)
                        for (int64_t b2 = b1; b2 < w; ++b2) {
                            Interval r = interval_apply(op, {lo + a1, lo + a2}, {lo + b1, lo + b2}, n);
                            ++cases;
                            bool bad = false;
                            for (int64_t i = a1; i <= a2 && !bad; ++i)
                                for (int64_t j = b1; j <= b2 && !bad; ++j)
                                    bad = defined[size_t(i * w + j)] && !r.contains(table[size_t(i * w + j)]);
                            violations += bad;
                            if (is_unary(op)) b1 = w;
                        }
        }
    }
    // DIs: every pair of subsets of the 3-bit range
    const int n = 3;
    std::vector<DI> dis;
    for (uint32_t mask = 0; mask < 256; ++mask) {
        std::vector<Interval> ivs;
        for (int k = 0; k < 8; ++k)
            if (mask >> k & 1) ivs.push_back({imin(n) + k, imin(n) + k});
        dis.push_back(DI::of(ivs));
    }
    for (Op op : kAllOps)
        for (const DI& a : dis)
            for (const DI& b : dis) {
                DI r = di_apply(op, a, b, n);
                ++cases;
                bool bad = false;
                for (auto& ia : a.intervals())
                    for (int64_t x = ia.lo; x <= ia.hi; ++x)
                        for (auto& ib : b.intervals())
                            for (int64_t y = ib.lo; y <= ib.hi; ++y) {
                                auto z = word_apply(op, from_signed(x, n), from_signed(y, n), n);
                                bad = bad || (z && !r.contains(to_signed(*z, n)));
                            }
                violations += bad;
            }
    return {violations == 0, std::to_string(cases) + " operand pairs, " + std::to_string(violations) + " violations"};
}

}  // namespace

int main() {
    const auto corpus = random_corpus(500, 20240601);
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"taint operators well-defined, n in {1,2,3}", welldef},
        {"bit-level taints of the alignment example", align_index},
        {"value-domain example", alloc_offsets},
        {"three-column table and hardening set", nested_lookup},
        {"SS implies SNI on 500 random programs", [&] { return implication(corpus); }},
        {"hardened programs pass SS", [&] { return hardened_safe(corpus); }},
        {"copy loop: only the store, OOB-store", chacha},
        {"scatter-gather variable vs fixed window", scatter_gather},
        {"trace inclusion in the speculative fixpoint", inclusion},
        {"interval/DI operator soundness", domain_soundness},
    };
    int failed = 0, k = 0;
    for (const auto& [name, fn] : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d: %s  %s (%s; %.1fs)\n", ++k, o.ok ? "PASS" : "FAIL", name, o.detail.c_str(), sec);
        std::fflush(stdout);
        failed += !o.ok;
    }
    std::printf("%d/%d criteria passed\n", k - failed, k);
    return failed ? 1 : 0;
}
