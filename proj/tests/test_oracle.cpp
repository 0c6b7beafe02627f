#include <doctest.h>

#include <random>

#include "support.hpp"

using namespace lslh;

TEST_SUITE("oracle") {

TEST_CASE("the gadget violates both properties with replayable witnesses") {
    test::Example ex("v1_gadget");
    ExecContext cx(ex.prog, ex.policy);
    EnumBounds b = test::load_bounds("v1_gadget");
    CheckResult ss = check_ss(cx, b);
    REQUIRE(ss.verdict == Verdict::Violation);
    REQUIRE(ss.witness);
    CHECK(ss.witness->pc == 2);
    CHECK(replay_ss(cx, *ss.witness));
    CheckResult sni = check_sni(cx, b);
    REQUIRE(sni.verdict == Verdict::Violation);
    REQUIRE(sni.witness->other);
    CHECK(replay_sni(cx, *sni.witness));
    // deterministic: same first witness twice
    CheckResult again = check_ss(cx, b);
    CHECK(again.witness->init.regs == ss.witness->init.regs);
    CHECK(again.witness->dirs == ss.witness->dirs);
}

TEST_CASE("masked gadget passes") {
    test::Example ex("masked_gadget");
    ExecContext cx(ex.prog, ex.policy);
    EnumBounds b = test::load_bounds("masked_gadget");
    CHECK(check_ss(cx, b).verdict == Verdict::Pass);
    CHECK(check_sni(cx, b).verdict == Verdict::Pass);
}

TEST_CASE("sequential leaks are not SNI violations") {
    test::Example ex("0: load y, s\n", "reg s secret\n", 3);
    ExecContext cx(ex.prog, ex.policy);
    EnumBounds b;
    CHECK(check_sni(cx, b).verdict == Verdict::Pass);
    CHECK(check_ss(cx, b).verdict == Verdict::Pass);  // not misspeculating
}

TEST_CASE("bounds: trace bound and step budget give inconclusive") {
    // a loop that revisits the same state is explored completely
    test::Example spin("0: beqz x, 0\n", "", 3);
    ExecContext sx(spin.prog, spin.policy);
    EnumBounds b;
    b.default_values = {0};
    b.max_steps = 5;
    CHECK(check_ss(sx, b).verdict == Verdict::Pass);
    test::Example count("0: x <- (x Add 1)\n1: beqz y, 0\n", "", 8);
    ExecContext cx(count.prog, count.policy);
    CheckResult r = check_ss(cx, b);
    CHECK(r.verdict == Verdict::Inconclusive);
    CHECK(r.note == "trace bound reached");
    test::Example loop("0: x <- (x Add 1)\n1: beqz y, 0\n", "", 8);
    ExecContext lx(loop.prog, loop.policy);
    EnumBounds tight;
    tight.step_budget = 50;
    CHECK(check_sni(lx, tight).verdict == Verdict::Inconclusive);
}

TEST_CASE("enumeration respects policy ranges and per-variable universes") {
    test::Example ex("nested_lookup");
    ExecContext cx(ex.prog, ex.policy);
    EnumBounds b = test::load_bounds("nested_lookup");
    auto vars = enum_vars(cx, b);
    size_t combos = 1;
    for (auto& v : vars) combos *= v.universe.size();
    CHECK(combos == 16 * 256);
    test::Example ranged("0: x <- k\n", "reg k secret range 1 2\n", 4);
    ExecContext rx(ranged.prog, ranged.policy);
    auto rv = enum_vars(rx, EnumBounds{});
    REQUIRE(rv.size() == 1);
    CHECK(rv[0].universe == std::vector<uint64_t>{1, 2});
    CHECK(rv[0].secret);
}

TEST_CASE("random programs are well formed and loop-free by default") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        RandomCase c = random_case(rng);
        CHECK(c.prog.size() <= 8);
        CHECK(c.prog.width == 3);
        for (int l = 0; l < c.prog.size(); ++l)
            for (int s : successors(c.prog, l)) CHECK(s > l);
        int secrets = 0;
        for (auto& [name, rp] : c.policy.regs) secrets += rp.secret;
        CHECK(secrets == 2);
    }
}

TEST_CASE("SS implies SNI on a small random corpus") {
    std::mt19937_64 rng(9);
    std::vector<RandomCase> corpus;
    for (int i = 0; i < 60; ++i) corpus.push_back(random_case(rng));
    ImplicationResult r = check_ss_implies_sni(corpus);
    CHECK(r.programs == 60);
    CHECK(r.sni_fail == 0);
    CHECK_FALSE(r.counterexample);
    CHECK(r.ss_pass > 0);
}

}
