#include <doctest.h>

#include "support.hpp"

using namespace lslh;

namespace {

struct Run {
    test::Example ex;
    ExecContext cx;
    Run(const std::string& prog, const std::string& pol, int n) : ex(prog, pol, n), cx(ex.prog, ex.policy) {}
    ConcreteState init(const InitAssign& a = {}) { return initial_state(cx, a); }
    uint64_t reg(const ConcreteState& s, const std::string& r) { return s.regs[ex.prog.slot_of(r)].v; }
    const TaintVector& taint(const ConcreteState& s, const std::string& r) { return s.taint[ex.prog.slot_of(r)]; }
};

}  // namespace

TEST_SUITE("concrete") {

TEST_CASE("default observation slice") {
    CHECK(default_slice(64).lo == 6);
    CHECK(default_slice(64).hi == 63);
    CHECK(default_slice(4).lo == 0);
    CHECK(default_slice(4).hi == 3);
}

TEST_CASE("registers, regions and unallocated reads") {
    Run r("0: load x, (a Add 1)\n1: load y, 200\n2: z <- (k Add 1)\n", "reg k secret\nregion a 2 public\n", 8);
    ConcreteState s = r.init({{{"k", 4}}, {{"a", {7, 9}}}});
    CHECK(r.reg(s, "a") == 0);
    Trace t = run_sequential(r.cx, s, 10);
    const ConcreteState& e = t.states.back();
    CHECK(e.status == Status::Halted);
    CHECK(r.reg(e, "x") == 9);
    CHECK(render_taint(r.taint(e, "x")) == render_taint(TaintVector(8, Label::L)));
    CHECK(r.reg(e, "y") == 0);
    CHECK(r.taint(e, "y") == TaintVector(8, Label::H));
    CHECK(e.touched_unallocated);
    CHECK(r.reg(e, "z") == 5);
    CHECK(r.taint(e, "z").contains(Label::H));
    // load observation is the sliced address
    CHECK(t.steps[0].obs.kind == Observation::Kind::Load);
    CHECK(t.steps[0].obs.value.v == 0);
}

TEST_CASE("force mispredicts and sets the speculation flag") {
    Run r("0: beqz x, end\n1: load y, s\n", "reg s secret\n", 4);
    ConcreteState s = r.init({{{"s", 9}}, {}});
    Trace t = run(r.cx, s, {Directive::Force, Directive::Step});
    REQUIRE(t.steps.size() == 2);
    CHECK(t.states[1].f);
    CHECK(t.steps[1].f_before);
    CHECK(t.steps[1].obs.value.v == 9);
    CHECK(t.steps[1].obs.taint.contains(Label::H));
    CHECK_THROWS_AS(step(r.cx, t.states[1], Directive::Force), ExecError);
}

TEST_CASE("hardened instructions under misspeculation") {
    Run r("0: beqz x, end\n1: hardened load y, s\n2: hardened store s, s\n3: hardened beqz s, end\n",
          "reg s secret\n", 4);
    ConcreteState s = r.init({{{"s", 9}}, {}});
    Trace t = run(r.cx, s, {Directive::Force, Directive::Step, Directive::Step, Directive::Step});
    REQUIRE(t.steps.size() == 4);
    CHECK(t.steps[1].obs.value.v == 15);
    CHECK_FALSE(t.steps[1].obs.taint.contains(Label::H));
    CHECK(t.states[2].regs[r.ex.prog.slot_of("y")].empty);
    CHECK(t.states[3].memory.empty());  // store suppressed
    CHECK(t.steps[3].obs.kind == Observation::Kind::Branch);
    CHECK(t.steps[3].obs.value.v == 15);
    CHECK(t.steps[3].obs.taint == TaintVector::of_value(15, 4));
    // sequentially, hardening changes nothing
    Trace q = run_sequential(r.cx, r.init({{{"x", 1}, {"s", 3}}, {}}), 10);
    CHECK(q.steps[1].obs.value.v == 3);
}

TEST_CASE("empty values propagate and stop branches") {
    Run r("0: beqz x, end\n1: hardened load y, s\n2: z <- (y Add 1)\n3: beqz z, end\n", "", 4);
    Trace t = run(r.cx, r.init(), {Directive::Force, Directive::Step, Directive::Step, Directive::Step});
    CHECK(t.states[3].regs[r.ex.prog.slot_of("z")].empty);
    CHECK(t.states.back().status == Status::EpsBranch);
}

TEST_CASE("fence stops misspeculation only") {
    Run r("0: beqz x, end\n1: fence\n2: y <- 1\n", "", 4);
    Trace t = run(r.cx, r.init(), {Directive::Force, Directive::Step});
    CHECK(t.states.back().pc == -1);
    CHECK(t.states.back().halted());
    Trace q = run_sequential(r.cx, r.init({{{"x", 1}}, {}}), 10);
    CHECK(q.states.back().pc == 3);
}

TEST_CASE("division by zero traps") {
    Run r("0: y <- (x Div 0)\n1: y <- 1\n", "", 4);
    Trace t = run_sequential(r.cx, r.init(), 10);
    CHECK(t.states.back().status == Status::Trap);
    CHECK(t.steps.size() == 1);
}

TEST_CASE("allocation is deterministic and never wraps") {
    Run r("0: alloc p, 4\n1: alloc q, 4\n2: alloc w, 9\n", "region a 4 public\n", 4);
    Trace t1 = run_sequential(r.cx, r.init(), 10);
    Trace t2 = run_sequential(r.cx, r.init(), 10);
    CHECK(t1.states == t2.states);
    CHECK(r.reg(t1.states[1], "p") == 4);
    CHECK(r.reg(t1.states[2], "q") == 8);
    CHECK(t1.states.back().status == Status::Trap);
    test::Example big("0: x <- 1\n", "region a 9 public\nregion b 9 public\n", 4);
    ExecContext bx(big.prog, big.policy);
    CHECK_THROWS_AS(initial_state(bx, {}), ExecError);
}

TEST_CASE("conditional assignment") {
    Run r("0: cmov d, y if b\n", "reg b secret\n", 4);
    Trace t0 = run_sequential(r.cx, r.init({{{"y", 5}, {"b", 0}, {"d", 2}}, {}}), 4);
    Trace t1 = run_sequential(r.cx, r.init({{{"y", 5}, {"b", 1}, {"d", 2}}, {}}), 4);
    CHECK(r.reg(t0.states.back(), "d") == 2);
    CHECK(r.reg(t1.states.back(), "d") == 5);
    CHECK(r.taint(t0.states.back(), "d") == TaintVector(4, Label::H));
}

TEST_CASE("ceil-align idiom clears the low address bits") {
    Run r("0: m <- (raw And 63)\n1: c <- (64 Minus m)\n2: buf <- (raw Add c)\n", "reg raw secret\n", 16);
    Trace t = run_sequential(r.cx, r.init({{{"raw", 100}}, {}}), 4);
    CHECK(r.reg(t.states.back(), "buf") == 128);
    const TaintVector& bt = r.taint(t.states.back(), "buf");
    for (int i = 0; i < 6; ++i) CHECK(bt[i] == Label::Zero);
    CHECK(match_ceil_align(r.ex.prog, 2).has_value());
    CHECK_FALSE(match_ceil_align(r.ex.prog, 1).has_value());
}

TEST_CASE("aligned index load observes no secret bits through a 2-bit line") {
    test::Example ex("align_index");
    ExecContext cx(ex.prog, ex.policy, ObsSlice{2, 3});
    for (uint64_t addr = 0; addr < 16; ++addr)
        for (uint64_t sec = 0; sec < 16; ++sec) {
            Trace t = run_sequential(cx, initial_state(cx, {{{"addr", addr}, {"secret", sec}}, {}}), 8);
            const Observation& o = t.steps.back().obs;
            REQUIRE(o.kind == Observation::Kind::Load);
            CHECK_FALSE(o.taint.contains(Label::H));
            CHECK(o.value.v == (((addr & 12) + 4) >> 2 & 3));
        }
}

TEST_CASE("directives parse") {
    CHECK(parse_directives("s,f, step,force").size() == 4);
    CHECK_THROWS(parse_directives("s,x"));
}

}
