#include "lslh/absdom.hpp"

#include <algorithm>

namespace lslh {

using i128 = __int128;

Interval itv_top(int n) { return {imin(n), imax(n)}; }
bool itv_is_top(const Interval& i, int n) { return i.lo == imin(n) && i.hi == imax(n); }

namespace {

bool fits(i128 v, int n) { return v >= imin(n) && v <= imax(n); }

int64_t shr_word(Op op, int64_t a, int64_t b, int n) {
    return to_signed(*word_apply(op, from_signed(a, n), from_signed(b, n), n), n);
}

Interval mod_itv(const Interval& a, const Interval& b, int n) {
    // unsigned remainder: bounded by a when a is non-negative, and by b-1 when b is positive
    if (a.lo >= 0) return {0, b.lo > 0 ? std::min(a.hi, b.hi - 1) : a.hi};
    if (b.lo > 0) return {0, b.hi - 1};
    return itv_top(n);
}

Interval and_itv(const Interval& a, const Interval& b, int n) {
    if (a.lo >= 0 && b.lo >= 0) return {0, std::min(a.hi, b.hi)};
    if (a.lo >= 0 && b.hi < 0) {
        // a & m = a - (a & ~m) with 0 <= a & ~m <= Not(m)
        i128 lo = i128(a.lo) - (i128(-1) - b.lo);
        return {int64_t(std::max<i128>(0, lo)), a.hi};
    }
    if (a.lo >= 0) return {0, a.hi};
    if (b.lo >= 0) return {0, b.hi};
    return itv_top(n);
}

}  // namespace

Interval interval_apply(Op op, const Interval& a, const Interval& b, int n) {
    const Interval top = itv_top(n);
    switch (op) {
        case Op::Not: return {-1 - a.hi, -1 - a.lo};
        case Op::Add: {
            i128 lo = i128(a.lo) + b.lo, hi = i128(a.hi) + b.hi;
            if (!fits(lo, n) || !fits(hi, n)) return top;
            return {int64_t(lo), int64_t(hi)};
        }
        case Op::Minus: {
            i128 lo = i128(a.lo) - b.hi, hi = i128(a.hi) - b.lo;
            if (!fits(lo, n) || !fits(hi, n)) return top;
            return {int64_t(lo), int64_t(hi)};
        }
        case Op::Mul: {
            i128 c[] = {i128(a.lo) * b.lo, i128(a.lo) * b.hi, i128(a.hi) * b.lo, i128(a.hi) * b.hi};
            for (i128 x : c)
                if (!fits(x, n)) return top;
            return {int64_t(*std::min_element(c, c + 4)), int64_t(*std::max_element(c, c + 4))};
        }
        case Op::Div: return top;
        case Op::Mod: return mod_itv(a, b, n);
        case Op::And: return and_itv(a, b, n);
        case Op::Ashr: {
            if (a.hi < 0 || b.lo < 0) return top;
            int64_t c[] = {shr_word(op, a.lo, b.lo, n), shr_word(op, a.lo, b.hi, n), shr_word(op, a.hi, b.lo, n),
                           shr_word(op, a.hi, b.hi, n)};
            return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
        }
        default: break;
    }
    // remaining bitwise operators need non-negative operands
    if (a.lo < 0 || b.lo < 0) return top;
    switch (op) {
        case Op::Or: return {std::max(a.lo, b.lo), imax(n)};
        case Op::Xor: return top;
        case Op::Shl: {
            if (a.hi == 0) return {0, 0};
            if (b.hi >= n) return top;
            i128 hi = i128(a.hi) << b.hi;
            if (hi > imax(n)) return top;
            return {int64_t(i128(a.lo) << b.lo), int64_t(hi)};
        }
        case Op::Lshr: {
            int64_t lo = b.hi >= n ? 0 : a.lo >> b.hi;
            int64_t hi = b.lo >= n ? 0 : a.hi >> b.lo;
            return {lo, hi};
        }
        default: return top;
    }
}

DI DI::of(std::vector<Interval> ivs) {
    std::sort(ivs.begin(), ivs.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    DI d;
    for (const Interval& i : ivs) {
        if (!d.ivs_.empty() && i128(i.lo) <= i128(d.ivs_.back().hi) + 1)
            d.ivs_.back().hi = std::max(d.ivs_.back().hi, i.hi);
        else
            d.ivs_.push_back(i);
    }
    if (d.ivs_.size() > kMaxIntervals) return d.hull();
    return d;
}

bool DI::contains(int64_t z) const {
    auto it = std::upper_bound(ivs_.begin(), ivs_.end(), z, [](int64_t v, const Interval& i) { return v < i.lo; });
    if (it == ivs_.begin()) return false;
    return std::prev(it)->hi >= z;
}

DI DI::hull() const {
    if (ivs_.empty()) return {};
    return DI(Interval{ivs_.front().lo, ivs_.back().hi});
}

DI di_lub(const DI& a, const DI& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    std::vector<Interval> all = a.intervals();
    all.insert(all.end(), b.intervals().begin(), b.intervals().end());
    return DI::of(std::move(all));
}

DI di_glb(const DI& a, const DI& b) {
    std::vector<Interval> out;
    size_t i = 0, j = 0;
    const auto& x = a.intervals();
    const auto& y = b.intervals();
    while (i < x.size() && j < y.size()) {
        int64_t lo = std::max(x[i].lo, y[j].lo), hi = std::min(x[i].hi, y[j].hi);
        if (lo <= hi) out.push_back({lo, hi});
        if (x[i].hi < y[j].hi) ++i;
        else ++j;
    }
    return DI::of(std::move(out));
}

bool di_leq(const DI& a, const DI& b) {
    for (const Interval& i : a.intervals()) {
        bool covered = false;
        for (const Interval& j : b.intervals())
            if (j.lo <= i.lo && i.hi <= j.hi) {
                covered = true;
                break;
            }
        if (!covered) return false;
    }
    return true;
}

namespace {

constexpr uint64_t kEnumLimit = 256;

// Products with a single constant, enumerated exactly; nullopt if not applicable.
std::optional<DI> mul_by_point(const DI& d, int64_t l, int n) {
    for (const Interval& i : d.intervals())
        if (i.card() > kEnumLimit) return std::nullopt;
    std::vector<Interval> out;
    for (const Interval& i : d.intervals())
        for (int64_t z = i.lo;; ++z) {
            i128 p = i128(z) * l;
            if (!fits(p, n)) return DI::top(n);
            out.push_back({int64_t(p), int64_t(p)});
            if (z == i.hi) break;
        }
    return DI::of(std::move(out));
}

}  // namespace

DI di_apply(Op op, const DI& a, const DI& b, int n) {
    if (a.empty()) return {};
    if (op == Op::Not) {
        std::vector<Interval> out;
        for (const Interval& i : a.intervals()) out.push_back(interval_apply(op, i, i, n));
        return DI::of(std::move(out));
    }
    if (b.empty()) return {};
    if (op == Op::Mul) {
        if (b.is_singleton_point())
            if (auto r = mul_by_point(a, b.min(), n)) return *r;
        if (a.is_singleton_point())
            if (auto r = mul_by_point(b, a.min(), n)) return *r;
    }
    std::vector<Interval> out;
    for (const Interval& i : a.intervals())
        for (const Interval& j : b.intervals()) {
            Interval r = interval_apply(op, i, j, n);
            if (itv_is_top(r, n)) return DI::top(n);
            out.push_back(r);
        }
    return DI::of(std::move(out));
}

std::string render_di(const DI& d, bool compact) {
    auto one = [](const Interval& i) {
        return i.lo == i.hi ? "[" + std::to_string(i.lo) + "]"
                            : "[" + std::to_string(i.lo) + "," + std::to_string(i.hi) + "]";
    };
    if (compact && d.intervals().size() == 1) return one(d.intervals()[0]);
    std::string s = "{";
    for (size_t k = 0; k < d.intervals().size(); ++k) {
        if (k) s += ",";
        s += one(d.intervals()[k]);
    }
    return s + "}";
}

AbstractValue AbstractValue::bottom(int nbases) {
    AbstractValue v;
    v.base.resize(nbases);
    return v;
}

AbstractValue AbstractValue::top(int nbases, int n) {
    AbstractValue v;
    v.base.assign(nbases, DI::top(n));
    v.eps = DI::top(n);
    return v;
}

AbstractValue AbstractValue::number(DI d, int nbases) {
    AbstractValue v = bottom(nbases);
    v.eps = std::move(d);
    return v;
}

AbstractValue AbstractValue::pointer(int b, int64_t off, int nbases) {
    AbstractValue v = bottom(nbases);
    v.base[b] = DI::point(off);
    return v;
}

bool AbstractValue::is_number() const {
    for (const DI& d : base)
        if (!d.empty()) return false;
    return true;
}

bool AbstractValue::is_bottom() const { return is_number() && eps.empty(); }

bool AbstractValue::is_top(int n) const {
    for (const DI& d : base)
        if (!d.is_top(n)) return false;
    return eps.is_top(n);
}

AbstractValue value_lub(const AbstractValue& a, const AbstractValue& b) {
    AbstractValue r = a;
    for (size_t k = 0; k < r.base.size(); ++k) r.base[k] = di_lub(a.base[k], b.base[k]);
    r.eps = di_lub(a.eps, b.eps);
    return r;
}

AbstractValue value_glb(const AbstractValue& a, const AbstractValue& b) {
    AbstractValue r = a;
    for (size_t k = 0; k < r.base.size(); ++k) r.base[k] = di_glb(a.base[k], b.base[k]);
    r.eps = di_glb(a.eps, b.eps);
    return r;
}

bool value_leq(const AbstractValue& a, const AbstractValue& b) {
    for (size_t k = 0; k < a.base.size(); ++k)
        if (!di_leq(a.base[k], b.base[k])) return false;
    return di_leq(a.eps, b.eps);
}

AbstractValue clamp_eps(AbstractValue v) {
    v.eps = v.eps.hull();
    return v;
}

namespace {

// Offsets of (A + o) & m for a negative mask m: the result is A + o - j with
// 0 <= j <= Not(m).
DI offset_and_negative(const DI& off, const DI& mask, int n) {
    const i128 kmax = i128(-1) - mask.min();
    std::vector<Interval> out;
    for (const Interval& i : off.intervals()) {
        i128 lo = i128(i.lo) - kmax;
        if (!fits(lo, n)) return DI::top(n);
        out.push_back({int64_t(lo), i.hi});
    }
    return DI::of(std::move(out));
}

}  // namespace

AbstractValue value_apply(Op op, const AbstractValue& a, const AbstractValue& b, int n) {
    const int nb = int(a.base.size());
    if (a.is_bottom() || (!is_unary(op) && b.is_bottom())) return AbstractValue::bottom(nb);
    if (is_unary(op)) {
        if (!a.is_number()) return AbstractValue::top(nb, n);
        return AbstractValue::number(di_apply(op, a.eps, a.eps, n), nb);
    }
    const bool na = a.is_number(), nbn = b.is_number();
    if (na && nbn) return AbstractValue::number(di_apply(op, a.eps, b.eps, n), nb);
    auto shift_all = [&](const AbstractValue& ptr, const DI& k) {
        AbstractValue r = ptr;
        for (DI& d : r.base) d = di_apply(op, d, k, n);
        r.eps = di_apply(op, ptr.eps, k, n);
        return r;
    };
    switch (op) {
        case Op::Add:
            if (nbn) return shift_all(a, b.eps);
            if (na) return shift_all(b, a.eps);
            return AbstractValue::top(nb, n);
        case Op::Minus:
            if (nbn) return shift_all(a, b.eps);
            return AbstractValue::top(nb, n);
        case Op::And: {
            if (!na && !nbn) return AbstractValue::top(nb, n);
            const AbstractValue& ptr = na ? b : a;
            const DI& mask = na ? a.eps : b.eps;
            if (mask.min() >= 0) return AbstractValue::number(DI(Interval{0, mask.max()}), nb);
            if (mask.max() >= 0) return AbstractValue::number(DI::top(n), nb);
            AbstractValue r = ptr;
            for (DI& d : r.base) d = d.empty() ? d : offset_and_negative(d, mask, n);
            r.eps = di_apply(Op::And, ptr.eps, mask, n);
            return r;
        }
        default: return AbstractValue::top(nb, n);
    }
}

std::string render_value(const AbstractValue& v, const std::vector<std::string>& base_names, int n, bool compact) {
    if (v.is_bottom()) return "⊥";
    if (v.is_top(n)) return "⊤";
    std::string s = "{";
    bool first = true;
    auto part = [&](const std::string& name, const DI& d) {
        if (d.empty()) return;
        if (!first) s += ",";
        first = false;
        s += "(" + name + (compact ? "," : ":") + render_di(d, compact) + ")";
    };
    for (size_t b = 0; b < v.base.size(); ++b)
        part(b < base_names.size() ? base_names[b] : "#" + std::to_string(b), v.base[b]);
    part("ε", v.eps);
    return s + "}";
}

bool value_contains(const AbstractValue& v, uint64_t z, const std::vector<std::vector<uint64_t>>& base_addrs, int n) {
    if (v.eps.contains(to_signed(z, n))) return true;
    for (size_t b = 0; b < v.base.size() && b < base_addrs.size(); ++b) {
        if (v.base[b].empty()) continue;
        for (uint64_t start : base_addrs[b])
            if (v.base[b].contains(to_signed(z - start, n))) return true;
    }
    return false;
}

}  // namespace lslh
