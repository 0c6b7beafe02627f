#include <doctest.h>

#include <random>

#include "support.hpp"

using namespace lslh;

namespace {

// All DIs over the n-bit signed range, from every subset of its values.
std::vector<DI> all_dis(int n) {
    const int64_t lo = imin(n);
    const int w = 1 << n;
    std::vector<DI> out;
    for (uint32_t mask = 0; mask < (1u << w); ++mask) {
        std::vector<Interval> ivs;
        for (int k = 0; k < w; ++k)
            if (mask >> k & 1) ivs.push_back({lo + k, lo + k});
        out.push_back(DI::of(ivs));
    }
    return out;
}

std::vector<int64_t> members(const DI& d) {
    std::vector<int64_t> out;
    for (auto& i : d.intervals())
        for (int64_t z = i.lo; z <= i.hi; ++z) out.push_back(z);
    return out;
}

}  // namespace

TEST_SUITE("absdom") {

TEST_CASE("DIs normalise to sorted, gapped intervals") {
    DI d = DI::of({{5, 6}, {0, 1}, {2, 3}, {7, 8}, {10, 10}});
    REQUIRE(d.intervals().size() == 3);
    CHECK(d.intervals()[0] == Interval{0, 3});
    CHECK(d.intervals()[1] == Interval{5, 8});
    CHECK(d.intervals()[2] == Interval{10, 10});
    CHECK(render_di(DI::of({{3, 3}, {6, 6}})) == "{[3],[6]}");
    CHECK(DI().empty());
    CHECK(DI::top(4).is_top(4));
}

TEST_CASE("DI lattice laws and operator soundness, every subset at n = 3") {
    const int n = 3;
    auto dis = all_dis(n);
    for (const DI& a : dis)
        for (const DI& b : dis) {
            DI j = di_lub(a, b), m = di_glb(a, b);
            REQUIRE(di_leq(a, j));
            REQUIRE(di_leq(m, a));
            REQUIRE(j == di_lub(b, a));
            REQUIRE(di_leq(a, b) == (j == b));
        }
    std::mt19937_64 rng(7);
    for (Op op : kAllOps) {
        CAPTURE(op_name(op));
        for (int trial = 0; trial < 4000; ++trial) {
            const DI& a = dis[rng() % dis.size()];
            const DI& b = is_unary(op) ? a : dis[rng() % dis.size()];
            DI r = di_apply(op, a, b, n);
            for (int64_t x : members(a))
                for (int64_t y : members(b)) {
                    auto z = word_apply(op, from_signed(x, n), from_signed(y, n), n);
                    if (z) REQUIRE(r.contains(to_signed(*z, n)));
                }
        }
    }
}

TEST_CASE("interval operators are sound, all interval pairs at n = 4") {
    const int n = 4;
    const int64_t lo = imin(n), hi = imax(n);
    for (Op op : kAllOps) {
        CAPTURE(op_name(op));
        for (int64_t a1 = lo; a1 <= hi; ++a1)
            for (int64_t a2 = a1; a2 <= hi; ++a2)
                for (int64_t b1 = lo; b1 <= hi; ++b1)
                    for (int64_t b2 = b1; b2 <= hi; ++b2) {
                        Interval r = interval_apply(op, {a1, a2}, {b1, b2}, n);
                        for (int64_t x = a1; x <= a2; ++x)
                            for (int64_t y = b1; y <= b2; ++y) {
                                auto z = word_apply(op, from_signed(x, n), from_signed(y, n), n);
                                if (z && !r.contains(to_signed(*z, n))) {
                                    CAPTURE(x);
                                    CAPTURE(y);
                                    FAIL("interval result misses a concrete value");
                                }
                            }
                        if (is_unary(op)) break;
                    }
    }
}

TEST_CASE("Mul by a constant keeps element-wise precision") {
    DI a = DI::of({{1, 2}});
    DI r = di_apply(Op::Mul, a, DI::point(3), 8);
    CHECK(render_di(r) == "{[3],[6]}");
}

TEST_CASE("abstract values: pointers, numbers and membership") {
    const int n = 8;
    AbstractValue p = AbstractValue::pointer(0, 3, 2);
    AbstractValue k = AbstractValue::number(DI::of({{0, 0}, {3, 3}}), 2);
    AbstractValue s = value_apply(Op::Add, p, k, n);
    CHECK(render_value(s, {"s", "t"}, n) == "{(s:{[3],[6]})}");
    CHECK(render_value(s, {"s", "t"}, n, true) == "{(s,{[3],[6]})}");
    std::vector<std::vector<uint64_t>> addrs{{100}, {200}};
    CHECK(value_contains(s, 103, addrs, n));
    CHECK(value_contains(s, 106, addrs, n));
    CHECK_FALSE(value_contains(s, 104, addrs, n));
    AbstractValue j = value_lub(s, AbstractValue::number(DI::of({{1, 3}}), 2));
    CHECK(value_leq(s, j));
    CHECK(AbstractValue::top(2, n).is_top(n));
    CHECK(clamp_eps(AbstractValue::number(DI::of({{1, 1}, {5, 5}}), 2)).eps == DI::of({{1, 5}}));
}

TEST_CASE("abstract memory: in-bounds stores are weak, out-of-bounds stores smash") {
    AbstractMemory<int> m({2, 3}, 99, 0);
    auto join = [](int a, int b) { return std::max(a, b); };
    AbstractValue a1 = AbstractValue::pointer(1, 2, 2);
    CHECK(m.in_bounds(a1));
    m.store(a1, 5, join);
    CHECK(m.cell(1, 2) == 5);
    CHECK(m.load(a1, join) == 5);
    AbstractValue out = AbstractValue::pointer(0, 2, 2);
    CHECK_FALSE(m.in_bounds(out));
    CHECK(m.load(out, join) == 99);
    m.store(out, 1, join);
    CHECK(m.cell(0, 0) == 99);
}

}
