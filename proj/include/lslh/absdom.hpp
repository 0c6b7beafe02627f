#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lslh/lang.hpp"
#include "lslh/taint.hpp"

namespace lslh {

inline int64_t imin(int n) { return n >= 64 ? INT64_MIN : -(int64_t(1) << (n - 1)); }
inline int64_t imax(int n) { return n >= 64 ? INT64_MAX : (int64_t(1) << (n - 1)) - 1; }

// Signed n-bit interval [lo, hi].
struct Interval {
    int64_t lo = 0, hi = 0;
    bool operator==(const Interval&) const = default;
    bool contains(int64_t z) const { return lo <= z && z <= hi; }
    uint64_t card() const { return uint64_t(hi) - uint64_t(lo) + 1; }
};

Interval itv_top(int n);
bool itv_is_top(const Interval& i, int n);
// Operator over intervals; b is ignored for Not.
Interval interval_apply(Op op, const Interval& a, const Interval& b, int n);

// Disjoint interval set: sorted, non-adjacent intervals. Empty means ⊥.
class DI {
public:
    static constexpr size_t kMaxIntervals = 256;

    DI() = default;
    explicit DI(Interval i) : ivs_{i} {}
    static DI top(int n) { return DI(itv_top(n)); }
    static DI of(std::vector<Interval> ivs);  // normalises
    static DI point(int64_t z) { return DI(Interval{z, z}); }

    const std::vector<Interval>& intervals() const { return ivs_; }
    bool empty() const { return ivs_.empty(); }
    bool contains(int64_t z) const;
    bool is_top(int n) const { return ivs_.size() == 1 && itv_is_top(ivs_[0], n); }
    bool is_singleton_point() const { return ivs_.size() == 1 && ivs_[0].lo == ivs_[0].hi; }
    int64_t min() const { return ivs_.front().lo; }
    int64_t max() const { return ivs_.back().hi; }
    DI hull() const;

    bool operator==(const DI&) const = default;

private:
    std::vector<Interval> ivs_;
};

DI di_lub(const DI& a, const DI& b);
DI di_glb(const DI& a, const DI& b);
bool di_leq(const DI& a, const DI& b);
DI di_apply(Op op, const DI& a, const DI& b, int n);
std::string render_di(const DI& d, bool compact = false);

// Abstract value: one offset set per base plus the plain-number component ε.
struct AbstractValue {
    std::vector<DI> base;
    DI eps;

    static AbstractValue bottom(int nbases);
    static AbstractValue top(int nbases, int n);
    static AbstractValue number(DI d, int nbases);
    static AbstractValue pointer(int b, int64_t off, int nbases);

    bool is_number() const;
    bool is_bottom() const;
    bool is_top(int n) const;
    bool operator==(const AbstractValue&) const = default;
};

AbstractValue value_lub(const AbstractValue& a, const AbstractValue& b);
AbstractValue value_glb(const AbstractValue& a, const AbstractValue& b);
bool value_leq(const AbstractValue& a, const AbstractValue& b);
AbstractValue value_apply(Op op, const AbstractValue& a, const AbstractValue& b, int n);
// Restores the single-interval form of the ε component.
AbstractValue clamp_eps(AbstractValue v);
// Full form {(x:{[3],[6]}),(ε:{[1,3]})}; compact form {(ε,[0,7])}.
std::string render_value(const AbstractValue& v, const std::vector<std::string>& base_names, int n,
                         bool compact = false);

// γ membership: z is the n-bit word, base_addrs[b] the concrete start addresses of base b.
bool value_contains(const AbstractValue& v, uint64_t z, const std::vector<std::vector<uint64_t>>& base_addrs,
                    int n);

// Per-base cell arrays, copy-on-write per base.
template <class V>
class AbstractMemory {
public:
    AbstractMemory() = default;
    AbstractMemory(std::vector<int64_t> sizes, V top, V bot) : top_(std::move(top)), bot_(std::move(bot)) {
        for (int64_t s : sizes) cells_.push_back(std::make_shared<std::vector<V>>(size_t(s), bot_));
    }

    int nbases() const { return int(cells_.size()); }
    int64_t size(int b) const { return int64_t(cells_[b]->size()); }
    const V& cell(int b, int64_t off) const { return (*cells_[b])[size_t(off)]; }
    void set_cell(int b, int64_t off, V v) { mut(b)[size_t(off)] = std::move(v); }
    void fill(int b, const V& v) { mut(b).assign(cells_[b]->size(), v); }
    const V& top() const { return top_; }

    bool in_bounds(const AbstractValue& addr) const {
        if (!addr.eps.empty()) return false;
        for (int b = 0; b < nbases(); ++b)
            for (const Interval& i : addr.base[b].intervals())
                if (i.lo < 0 || i.hi >= size(b)) return false;
        return true;
    }

    template <class Join>
    V load(const AbstractValue& addr, Join join) const {
        if (!in_bounds(addr)) return top_;
        V r = bot_;
        for (int b = 0; b < nbases(); ++b)
            for (const Interval& i : addr.base[b].intervals())
                for (int64_t k = i.lo; k <= i.hi; ++k) r = join(r, cell(b, k));
        return r;
    }

    template <class Join>
    void store(const AbstractValue& addr, const V& w, Join join) {
        if (!in_bounds(addr)) {
            for (int b = 0; b < nbases(); ++b) fill(b, top_);
            return;
        }
        for (int b = 0; b < nbases(); ++b)
            for (const Interval& i : addr.base[b].intervals())
                for (int64_t k = i.lo; k <= i.hi; ++k) set_cell(b, k, join(cell(b, k), w));
    }

    template <class Join>
    void join_with(const AbstractMemory& o, Join join) {
        for (int b = 0; b < nbases(); ++b) {
            if (cells_[b] == o.cells_[b]) continue;
            auto& mine = mut(b);
            for (size_t k = 0; k < mine.size(); ++k) mine[k] = join(mine[k], (*o.cells_[b])[k]);
        }
    }

    bool operator==(const AbstractMemory& o) const {
        if (cells_.size() != o.cells_.size()) return false;
        for (size_t b = 0; b < cells_.size(); ++b)
            if (cells_[b] != o.cells_[b] && *cells_[b] != *o.cells_[b]) return false;
        return true;
    }

private:
    std::vector<V>& mut(int b) {
        if (cells_[b].use_count() > 1) cells_[b] = std::make_shared<std::vector<V>>(*cells_[b]);
        return *cells_[b];
    }

    std::vector<std::shared_ptr<std::vector<V>>> cells_;
    V top_{}, bot_{};
};

}  // namespace lslh
