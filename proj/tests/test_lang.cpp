#include <doctest.h>

#include "support.hpp"

using namespace lslh;

TEST_SUITE("lang") {

TEST_CASE("words wrap modulo 2^n with unsigned division") {
    CHECK(*word_apply(Op::Add, 7, 1, 3) == 0);
    CHECK(*word_apply(Op::Minus, 0, 1, 3) == 7);
    CHECK(*word_apply(Op::Div, 7, 2, 3) == 3);
    CHECK(*word_apply(Op::Mod, 7, 3, 3) == 1);
    CHECK_FALSE(word_apply(Op::Div, 5, 0, 3).has_value());
    CHECK_FALSE(word_apply(Op::Mod, 5, 0, 3).has_value());
    CHECK(*word_apply(Op::Ashr, 4, 1, 3) == 6);
    CHECK(*word_apply(Op::Lshr, 4, 1, 3) == 2);
    CHECK(*word_apply(Op::Shl, 1, 5, 3) == 0);
    CHECK(*word_apply(Op::Not, 5, 0, 3) == 2);
    CHECK(to_signed(7, 3) == -1);
    CHECK(from_signed(-1, 3) == 7);
}

TEST_CASE("expressions round-trip through the printer") {
    for (const char* src : {"(a Add (b Mul 3))", "Not x", "((x Lshr 3) And 1)", "-1", "(0 Minus x)"}) {
        ExprPtr e = parse_expr(src);
        CHECK(render_expr(*e) == src);
        CHECK(expr_equal(*parse_expr(render_expr(*e)), *e));
    }
    CHECK_THROWS_AS(parse_expr("a Add b Add c"), ParseError);
    CHECK_THROWS_AS(parse_expr("(a Add"), ParseError);
}

TEST_CASE("programs round-trip and resolve end") {
    const char* src =
        "0: x <- 0\n1: beqz x, end\n2: load y, (s Add x)\n3: store y, s\n4: cmov y, x if s\n"
        "5: fence\n6: alloc q, 4\n7: hardened load z, q\n8: jmp 0\n";
    Program p = parse_program(src, 8);
    CHECK(p.size() == 9);
    CHECK(p.code[1].target == p.end());
    CHECK(p.code[7].hardened);
    Program q = parse_program(render_program(p), 8);
    CHECK(render_program(q) == render_program(p));
    CHECK(p.regs == std::vector<std::string>{"q", "s", "x", "y", "z"});
}

TEST_CASE("parse errors carry line numbers") {
    try {
        parse_program("0: x <- 1\n1: load y\n", 4);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
    CHECK_THROWS_AS(parse_program("0: x <- 1\n2: x <- 2\n", 4), ParseError);
    CHECK_THROWS_AS(parse_program("0: jmp 5\n", 4), ParseError);
    CHECK_THROWS_AS(parse_program("0: alloc x, 0\n", 4), ParseError);
    CHECK_THROWS_AS(parse_program("0: load <- 1\n", 4), ParseError);
}

TEST_CASE("control flow: pred is the inverse of successors") {
    Program p = parse_program("0: beqz x, 3\n1: jmp 0\n2: x <- 1\n3: beqz x, 3\n", 4);
    for (int i = 0; i <= p.end(); ++i)
        for (int j : successors(p, i)) {
            auto pr = pred(p, j);
            CHECK(std::find(pr.begin(), pr.end(), i) != pr.end());
        }
    CHECK(pred(p, 0) == std::vector<int>{1});
    CHECK(successors(p, p.end()).empty());
    auto rpo = reverse_postorder(p);
    CHECK(rpo.front() == 0);
}

TEST_CASE("policies: levels, ranges, sites and bases") {
    Policy pol = parse_policy("width 8\nreg k secret range 0 3\nregion a 4 public\nsite 0 s\n");
    CHECK(pol.width == 8);
    CHECK(pol.is_secret_reg("k"));
    CHECK_FALSE(pol.is_secret_reg("zz"));
    CHECK(pol.regs.at("k").range == Range{0, 3});
    Program p = parse_program("0: alloc x, 10\n1: alloc x, 2\n", 8);
    auto bases = base_table(p, pol);
    REQUIRE(bases.size() == 3);
    CHECK(bases[0].name == "a");
    CHECK(bases[1].name == "s");
    CHECK(bases[2].name == "x@1");
    CHECK(base_of_alloc(bases, 1) == 2);
    CHECK_THROWS(base_table(parse_program("0: x <- 1\n", 8), pol));
    CHECK_THROWS_AS(parse_policy("reg k hidden\n"), ParseError);
    CHECK_THROWS_AS(parse_policy("reg k public range 3 1\n"), ParseError);
    CHECK_THROWS_AS(parse_policy("reg k public\nregion k 2 public\n"), ParseError);
}

TEST_CASE("bind_expr resolves slots and rejects unknown registers") {
    Program p = parse_program("0: y <- (x Add 1)\n", 4);
    ExprPtr e = bind_expr(p, parse_expr("(x Add y)"));
    CHECK(e->lhs->slot == p.slot_of("x"));
    CHECK(e->rhs->slot == p.slot_of("y"));
    CHECK_THROWS(bind_expr(p, parse_expr("(q Add 1)")));
}

TEST_CASE("every shipped example parses") {
    for (const char* name : test::kCorpus) {
        CAPTURE(name);
        CHECK_NOTHROW(test::Example{name});
    }
}

}
