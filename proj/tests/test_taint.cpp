#include <doctest.h>

#include "support.hpp"

using namespace lslh;

namespace {

const Label kLabels[] = {Label::Bot, Label::Zero, Label::One, Label::L, Label::H};

std::vector<TaintVector> all_vectors(int n) {
    std::vector<TaintVector> out;
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 5;
    for (int code = 0; code < total; ++code) {
        TaintVector t(n);
        int c = code;
        for (int i = 0; i < n; ++i, c /= 5) t[i] = kLabels[c % 5];
        out.push_back(t);
    }
    return out;
}

}  // namespace

TEST_SUITE("taint") {

TEST_CASE("label lattice laws hold exhaustively") {
    for (Label a : kLabels) {
        CHECK(label_leq(Label::Bot, a));
        CHECK(label_leq(a, Label::H));
        CHECK(label_lub(a, a) == a);
        for (Label b : kLabels) {
            CHECK(label_lub(a, b) == label_lub(b, a));
            CHECK(label_leq(a, label_lub(a, b)));
            CHECK(label_leq(a, b) == (label_lub(a, b) == b));
            for (Label c : kLabels) CHECK(label_lub(label_lub(a, b), c) == label_lub(a, label_lub(b, c)));
        }
    }
    CHECK_FALSE(label_leq(Label::Zero, Label::One));
    CHECK(label_lub(Label::Zero, Label::One) == Label::L);
}

TEST_CASE("vectors render most significant bit first") {
    TaintVector t = TaintVector::of_value(0b0011, 4);
    CHECK(render_taint(t) == "(0,0,1,1)");
    CHECK(parse_taint("(L,H,0,1)")[0] == Label::One);
    CHECK(parse_taint("(L,H,0,1)")[3] == Label::L);
    CHECK(render_taint(taint_slice(parse_taint("(L,H,0,1)"), 2, 3)) == "(L,H)");
    CHECK(legal(t, 3));
    CHECK_FALSE(legal(t, 2));
}

TEST_CASE("operators are well-defined exhaustively at widths 1 and 2") {
    for (Op op : kAllOps)
        for (int n : {1, 2}) {
            CAPTURE(op_name(op));
            CAPTURE(n);
            auto r = check_well_defined(op, n);
            CHECK(r.ok);
            CHECK(r.instances > 0);
        }
}

TEST_CASE("rules as printed fail the checker, with a concrete counterexample") {
    for (Op op : {Op::Minus, Op::Shl}) {
        TaintRule rule = rule_for(op, 3);
        rule.taint = op == Op::Minus ? literal::minus : literal::shl;
        auto r = check_well_defined(rule, 3);
        REQUIRE_FALSE(r.ok);
        REQUIRE(r.cex);
        CHECK((r.cex->clause == 1 || r.cex->clause == 2));
    }
    // 0 - 0 with concrete labels must give the concrete 0 vector
    TaintVector z = TaintVector::of_value(0, 3);
    CHECK(taint_apply(Op::Minus, z, z) == z);
}

TEST_CASE("results are monotone in the inputs") {
    const int n = 2;
    auto vs = all_vectors(n);
    for (Op op : kAllOps) {
        CAPTURE(op_name(op));
        for (const auto& a : vs)
            for (const auto& b : vs)
                for (const auto& a2 : vs) {
                    if (!taint_leq(a, a2)) continue;
                    REQUIRE(taint_leq(taint_apply(op, a, b), taint_apply(op, a2, b)));
                }
    }
}

TEST_CASE("concrete operands give the concrete result") {
    for (Op op : kAllOps)
        for (uint64_t a = 0; a < 8; ++a)
            for (uint64_t b = 0; b < 8; ++b) {
                auto r = word_apply(op, a, b, 3);
                if (!r) continue;
                CAPTURE(op_name(op));
                CHECK(taint_apply(op, TaintVector::of_value(a, 3), TaintVector::of_value(b, 3)) ==
                      TaintVector::of_value(*r, 3));
            }
}

TEST_CASE("alignment and masking keep the high address bits public") {
    const int n = 4;
    TaintVector addr(n, Label::L), secret(n, Label::H);
    addr = taint_apply(Op::And, addr, TaintVector::of_value(0b1100, n));
    addr = taint_apply(Op::Add, addr, TaintVector::of_value(0b0100, n));
    secret = taint_apply(Op::And, secret, TaintVector::of_value(0b0011, n));
    CHECK(render_taint(addr) == "(L,L,0,0)");
    CHECK(render_taint(secret) == "(0,0,H,H)");
    TaintVector sum = taint_apply(Op::Add, addr, secret);
    CHECK(render_taint(sum) == "(L,L,H,H)");
    CHECK_FALSE(taint_slice(sum, 2, 3).contains(Label::H));
}

TEST_CASE("sanitizers clear the fixed bits") {
    TaintVector h(8, Label::H);
    CHECK(render_taint(sanitize_ceil_align(h, 6)) == "(H,H,0,0,0,0,0,0)");
    CHECK(render_taint(sanitize_range(h, 3)) == "(0,0,0,0,0,H,H,H)");
}

}
