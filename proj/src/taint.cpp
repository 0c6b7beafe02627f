#include "lslh/taint.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace lslh {

bool label_leq(Label a, Label b) {
    if (a == b || a == Label::Bot) return true;
    switch (a) {
        case Label::Zero:
        case Label::One: return b == Label::L || b == Label::H;
        case Label::L: return b == Label::H;
        default: return false;
    }
}

Label label_lub(Label a, Label b) {
    if (label_leq(a, b)) return b;
    if (label_leq(b, a)) return a;
    return Label::L;  // 0 ⊔ 1
}

std::string_view label_str(Label l) {
    switch (l) {
        case Label::Bot: return "⊥";
        case Label::Zero: return "0";
        case Label::One: return "1";
        case Label::L: return "L";
        case Label::H: return "H";
    }
    return "?";
}

TaintVector::TaintVector(int n, Label fill) : n_(uint8_t(n)) {
    if (n < 1 || n > 64) throw std::invalid_argument("taint vector length must be in [1, 64]");
    l_.fill(Label::Bot);
    for (int i = 0; i < n; ++i) l_[i] = fill;
}

TaintVector TaintVector::of_value(uint64_t v, int n) {
    TaintVector t(n);
    for (int i = 0; i < n; ++i) t[i] = (v >> i) & 1 ? Label::One : Label::Zero;
    return t;
}

bool TaintVector::contains(Label x) const {
    for (int i = 0; i < n_; ++i)
        if (l_[i] == x) return true;
    return false;
}

bool TaintVector::operator==(const TaintVector& o) const {
    return n_ == o.n_ && std::equal(l_.begin(), l_.begin() + n_, o.l_.begin());
}

bool TaintVector::operator<(const TaintVector& o) const {
    if (n_ != o.n_) return n_ < o.n_;
    return std::lexicographical_compare(l_.begin(), l_.begin() + n_, o.l_.begin(), o.l_.begin() + n_);
}

std::string render_taint(const TaintVector& t) {
    std::string s = "(";
    for (int i = t.size() - 1; i >= 0; --i) {
        s += label_str(t[i]);
        if (i) s += ",";
    }
    return s + ")";
}

TaintVector parse_taint(std::string_view s) {
    std::vector<Label> msb_first;
    size_t i = 0;
    while (i < s.size()) {
        if (s.compare(i, 3, "⊥") == 0) {
            msb_first.push_back(Label::Bot);
            i += 3;
            continue;
        }
        char c = s[i++];
        switch (c) {
            case '(': case ')': case ',': case ' ': break;
            case '0': msb_first.push_back(Label::Zero); break;
            case '1': msb_first.push_back(Label::One); break;
            case 'L': case 'l': msb_first.push_back(Label::L); break;
            case 'H': case 'h': msb_first.push_back(Label::H); break;
            case 'B': case '_': msb_first.push_back(Label::Bot); break;
            default: throw std::invalid_argument(std::string("bad taint label '") + c + "'");
        }
    }
    if (msb_first.empty() || msb_first.size() > 64) throw std::invalid_argument("taint vector length must be in [1, 64]");
    int n = int(msb_first.size());
    TaintVector t(n);
    for (int k = 0; k < n; ++k) t[n - 1 - k] = msb_first[k];
    return t;
}

bool taint_leq(const TaintVector& a, const TaintVector& b) {
    if (a.size() != b.size()) return false;
    for (int i = 0; i < a.size(); ++i)
        if (!label_leq(a[i], b[i])) return false;
    return true;
}

TaintVector taint_lub(const TaintVector& a, const TaintVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("taint vector length mismatch");
    TaintVector r(a.size());
    for (int i = 0; i < a.size(); ++i) r[i] = label_lub(a[i], b[i]);
    return r;
}

TaintVector taint_slice(const TaintVector& t, int lo, int hi) {
    if (lo < 0 || hi >= t.size() || lo > hi) throw std::invalid_argument("bad taint slice");
    TaintVector r(hi - lo + 1);
    for (int i = lo; i <= hi; ++i) r[i - lo] = t[i];
    return r;
}

bool legal(const TaintVector& t, uint64_t v) {
    for (int i = 0; i < t.size(); ++i) {
        Label l = t[i];
        if (l == Label::Bot) return false;
        if (l == Label::Zero && ((v >> i) & 1)) return false;
        if (l == Label::One && !((v >> i) & 1)) return false;
    }
    return (v & ~word_mask(t.size())) == 0;
}

uint64_t non_h_mask(const TaintVector& t) {
    uint64_t m = 0;
    for (int i = 0; i < t.size(); ++i)
        if (t[i] != Label::H) m |= uint64_t(1) << i;
    return m;
}

int min_index(const TaintVector& a, Label t) {
    for (int i = 0; i < a.size(); ++i)
        if (label_leq(t, a[i])) return i;
    return a.size();
}

uint64_t num(const TaintVector& a) {
    int k = min_index(a, Label::L);
    uint64_t v = 0;
    for (int i = 0; i < k; ++i)
        if (a[i] == Label::One) v |= uint64_t(1) << i;
    return v;
}

namespace {

bool has_symbolic(const TaintVector& a) { return a.contains(Label::L) || a.contains(Label::H); }

Label presence(Label x, Label y, Label z) {
    if (x == Label::H || y == Label::H || z == Label::H) return Label::H;
    if (x == Label::L || y == Label::L || z == Label::L) return Label::L;
    return Label::Bot;
}

int bit(Label l) { return l == Label::One ? 1 : 0; }

int count_one_up(std::initializer_list<Label> xs) {
    int c = 0;
    for (Label x : xs)
        if (label_leq(Label::One, x)) ++c;
    return c;
}

TaintVector add(const TaintVector& a, const TaintVector& b) {
    const int n = a.size();
    TaintVector r(n);
    Label c = Label::Zero;
    for (int i = 0; i < n; ++i) {
        Label p = presence(a[i], b[i], c);
        r[i] = p != Label::Bot ? p : ((bit(a[i]) + bit(b[i]) + bit(c)) & 1 ? Label::One : Label::Zero);
        Label next;
        if (count_one_up({a[i], b[i], c}) <= 1) next = Label::Zero;
        else if (p != Label::Bot) next = p;
        else next = Label::One;
        c = next;
    }
    return r;
}

TaintVector minus(const TaintVector& a, const TaintVector& b) {
    const int n = a.size();
    TaintVector r(n);
    Label c = Label::Zero;  // borrow
    for (int i = 0; i < n; ++i) {
        Label p = presence(a[i], b[i], c);
        r[i] = p != Label::Bot ? p : ((bit(a[i]) ^ bit(b[i]) ^ bit(c)) ? Label::One : Label::Zero);
        Label next;
        if (p == Label::Bot) {
            next = bit(a[i]) - bit(b[i]) - bit(c) < 0 ? Label::One : Label::Zero;
        } else if ((a[i] == Label::One && count_one_up({b[i], c}) <= 1) ||
                   (b[i] == Label::Zero && c == Label::Zero)) {
            next = Label::Zero;
        } else {
            next = p;
        }
        c = next;
    }
    return r;
}

TaintVector mul(const TaintVector& a, const TaintVector& b) {
    const int n = a.size();
    const int h = std::min(min_index(a, Label::H) + min_index(b, Label::One),
                           min_index(b, Label::H) + min_index(a, Label::One));
    const int l = std::min(min_index(a, Label::L) + min_index(b, Label::One),
                           min_index(b, Label::L) + min_index(a, Label::One));
    const uint64_t prod = num(a) * num(b);
    TaintVector r(n);
    for (int i = 0; i < n; ++i) {
        if (i >= h) r[i] = Label::H;
        else if (i >= l) r[i] = Label::L;
        else r[i] = (prod >> i) & 1 ? Label::One : Label::Zero;
    }
    return r;
}

TaintVector divmod(Op op, const TaintVector& a, const TaintVector& b) {
    const int n = a.size();
    if (a.contains(Label::H) || b.contains(Label::H)) return TaintVector(n, Label::H);
    if (a.contains(Label::L) || b.contains(Label::L)) return TaintVector(n, Label::L);
    uint64_t d = num(b);
    if (d == 0) return TaintVector(n, Label::Bot);
    return TaintVector::of_value(op == Op::Div ? num(a) / d : num(a) % d, n);
}

TaintVector reversed(const TaintVector& a) {
    const int n = a.size();
    TaintVector r(n);
    for (int i = 0; i < n; ++i) r[i] = a[n - 1 - i];
    return r;
}

// Shift left. When H is in the amount, every bit that can receive a one is
// secret-dependent, hence H.
TaintVector shl(const TaintVector& a, const TaintVector& b, bool fix_h_amount) {
    const int n = a.size();
    const uint64_t s = num(b);
    TaintVector r(n, Label::Zero);
    if (!has_symbolic(b)) {
        if (s >= uint64_t(n)) return r;
        for (int i = int(s); i < n; ++i) r[i] = a[i - int(s)];
        return r;
    }
    if (s >= uint64_t(n)) return r;
    const int m1 = int(s) + min_index(a, Label::One);
    const int mh = int(s) + min_index(a, Label::H);
    const bool hb = fix_h_amount && b.contains(Label::H);
    for (int i = 0; i < n; ++i) {
        if (i >= mh || (hb && i >= m1)) r[i] = Label::H;
        else if (i >= m1) r[i] = Label::L;
    }
    return r;
}

TaintVector lshr(const TaintVector& a, const TaintVector& b) { return reversed(shl(reversed(a), b, true)); }

TaintVector ashr(const TaintVector& a, const TaintVector& b) {
    const int n = a.size();
    const Label sign = a[n - 1];
    const uint64_t s = num(b);
    TaintVector r(n);
    if (!has_symbolic(b)) {
        const uint64_t k = std::min<uint64_t>(s, uint64_t(n - 1));
        for (int i = 0; i < n; ++i) r[i] = uint64_t(i) + k <= uint64_t(n - 1) ? a[i + int(k)] : sign;
        return r;
    }
    // work from the most significant end: j = n-1-i
    const TaintVector ra = reversed(a);
    const Label differ = sign == Label::Zero ? Label::One : sign == Label::One ? Label::Zero : sign;
    const uint64_t mh = s + uint64_t(min_index(ra, Label::H));
    const uint64_t md = s + uint64_t(min_index(ra, differ));
    const bool hb = b.contains(Label::H);
    TaintVector rr(n);
    for (int j = 0; j < n; ++j) {
        if (uint64_t(j) >= mh || (hb && uint64_t(j) >= md)) rr[j] = Label::H;
        else if (uint64_t(j) >= md) rr[j] = Label::L;
        else rr[j] = sign;
    }
    return reversed(rr);
}

}  // namespace

TaintVector taint_not(const TaintVector& a) {
    TaintVector r(a.size());
    for (int i = 0; i < a.size(); ++i) {
        Label l = a[i];
        r[i] = l == Label::Zero ? Label::One : l == Label::One ? Label::Zero : l;
    }
    return r;
}

TaintVector taint_apply(Op op, const TaintVector& a, const TaintVector& b) {
    const int n = a.size();
    if (op == Op::Not) {
        if (a.contains(Label::Bot)) return TaintVector(n, Label::Bot);
        return taint_not(a);
    }
    if (b.size() != n) throw std::invalid_argument("taint vector length mismatch");
    if (a.contains(Label::Bot) || b.contains(Label::Bot)) return TaintVector(n, Label::Bot);
    TaintVector r(n);
    switch (op) {
        case Op::And:
            for (int i = 0; i < n; ++i) {
                if (a[i] == Label::Zero || b[i] == Label::Zero) r[i] = Label::Zero;
                else if (a[i] == Label::One && b[i] == Label::One) r[i] = Label::One;
                else r[i] = label_lub(a[i], b[i]);
            }
            return r;
        case Op::Or:
            for (int i = 0; i < n; ++i) {
                if (a[i] == Label::One || b[i] == Label::One) r[i] = Label::One;
                else if (a[i] == Label::Zero && b[i] == Label::Zero) r[i] = Label::Zero;
                else r[i] = label_lub(a[i], b[i]);
            }
            return r;
        case Op::Xor:
            for (int i = 0; i < n; ++i) {
                if (is_concrete(a[i]) && is_concrete(b[i])) r[i] = a[i] == b[i] ? Label::Zero : Label::One;
                else r[i] = label_lub(a[i], b[i]);
            }
            return r;
        case Op::Add: return add(a, b);
        case Op::Minus: return minus(a, b);
        case Op::Mul: return mul(a, b);
        case Op::Div:
        case Op::Mod: return divmod(op, a, b);
        case Op::Shl: return shl(a, b, true);
        case Op::Lshr: return lshr(a, b);
        case Op::Ashr: return ashr(a, b);
        case Op::Not: break;
    }
    return r;
}

TaintVector sanitize_ceil_align(const TaintVector& t, int k) {
    TaintVector r = t;
    for (int i = 0; i < std::min(k, t.size()); ++i) r[i] = Label::Zero;
    return r;
}

TaintVector sanitize_range(const TaintVector& t, int k) {
    TaintVector r = t;
    for (int i = std::max(k, 0); i < t.size(); ++i) r[i] = Label::Zero;
    return r;
}

namespace literal {

TaintVector minus(const TaintVector& a, const TaintVector& b) {
    const int n = a.size();
    if (a.contains(Label::Bot) || b.contains(Label::Bot)) return TaintVector(n, Label::Bot);
    TaintVector r(n);
    Label c = Label::Zero;
    for (int i = 0; i < n; ++i) {
        Label p = presence(a[i], b[i], c);
        r[i] = p != Label::Bot ? p : ((bit(a[i]) ^ bit(b[i]) ^ bit(c)) ? Label::One : Label::Zero);
        if (count_one_up({b[i], c}) <= 1 && a[i] == Label::One) c = Label::Zero;
        else if (p != Label::Bot) c = p;
        else c = Label::One;
    }
    return r;
}

TaintVector shl(const TaintVector& a, const TaintVector& b) {
    if (a.contains(Label::Bot) || b.contains(Label::Bot)) return TaintVector(a.size(), Label::Bot);
    return lslh::shl(a, b, false);
}

}  // namespace literal

TaintRule rule_for(Op op, int n) {
    TaintRule r;
    r.arity = is_unary(op) ? 1 : 2;
    r.taint = [op](const TaintVector& a, const TaintVector& b) { return taint_apply(op, a, b); };
    r.value = [op, n](uint64_t a, uint64_t b) { return word_apply(op, a, b, n); };
    return r;
}

namespace {

struct Candidate {
    TaintVector t;
    std::vector<uint64_t> vals;
    std::vector<int> cls;  // ~-class of each value
    int nclasses = 0;
    uint64_t mask = 0;
};

std::vector<Candidate> candidates(int n) {
    // every ⊥-free vector, enumerated with the most significant label varying slowest
    std::vector<Candidate> out;
    const Label labels[] = {Label::Zero, Label::One, Label::L, Label::H};
    uint64_t total = uint64_t(1) << (2 * n);
    for (uint64_t k = 0; k < total; ++k) {
        Candidate c;
        c.t = TaintVector(n);
        for (int i = 0; i < n; ++i) c.t[i] = labels[(k >> (2 * i)) & 3];
        c.mask = non_h_mask(c.t);
        std::vector<uint64_t> keys;
        for (uint64_t v = 0; v < (uint64_t(1) << n); ++v) {
            if (!legal(c.t, v)) continue;
            c.vals.push_back(v);
            uint64_t key = v & c.mask;
            auto it = std::find(keys.begin(), keys.end(), key);
            if (it == keys.end()) {
                keys.push_back(key);
                c.cls.push_back(int(keys.size()) - 1);
            } else {
                c.cls.push_back(int(it - keys.begin()));
            }
        }
        c.nclasses = int(keys.size());
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

WellDefResult check_well_defined(const TaintRule& rule, int n) {
    if (n < 1 || n > 8) throw std::invalid_argument("exhaustive check supports n in [1, 8]");
    WellDefResult res;
    const auto cands = candidates(n);
    const Candidate unit = [&] {
        Candidate c;
        c.t = TaintVector(n, Label::Zero);
        c.vals = {0};
        c.cls = {0};
        c.nclasses = 1;
        c.mask = word_mask(n);
        return c;
    }();
    struct Seen {
        bool set = false;
        uint64_t v1, v2, r;
    };
    std::vector<Seen> first;
    for (const Candidate& c1 : cands) {
        for (size_t j = 0; j < (rule.arity == 2 ? cands.size() : 1); ++j) {
            const Candidate& c2 = rule.arity == 2 ? cands[j] : unit;
            const TaintVector r = rule.taint(c1.t, c2.t);
            const uint64_t rmask = non_h_mask(r);
            first.assign(size_t(c1.nclasses) * c2.nclasses, Seen{});
            std::optional<Counterexample> clause2;
            for (size_t a = 0; a < c1.vals.size(); ++a) {
                for (size_t b = 0; b < c2.vals.size(); ++b) {
                    auto out = rule.value(c1.vals[a], c2.vals[b]);
                    if (!out) continue;
                    ++res.instances;
                    if (!legal(r, *out)) {
                        Counterexample cx;
                        cx.clause = 1;
                        cx.t1 = c1.t;
                        cx.t2 = c2.t;
                        cx.result = r;
                        cx.v1 = cx.v1p = c1.vals[a];
                        cx.v2 = cx.v2p = c2.vals[b];
                        cx.r = cx.rp = *out;
                        res.ok = false;
                        res.cex = cx;
                        return res;
                    }
                    Seen& s = first[size_t(c1.cls[a]) * c2.nclasses + c2.cls[b]];
                    if (!s.set) {
                        s = {true, c1.vals[a], c2.vals[b], *out};
                    } else if (!clause2 && ((s.r ^ *out) & rmask)) {
                        Counterexample cx;
                        cx.clause = 2;
                        cx.t1 = c1.t;
                        cx.t2 = c2.t;
                        cx.result = r;
                        cx.v1 = s.v1;
                        cx.v2 = s.v2;
                        cx.r = s.r;
                        cx.v1p = c1.vals[a];
                        cx.v2p = c2.vals[b];
                        cx.rp = *out;
                        clause2 = cx;
                    }
                }
            }
            if (clause2) {
                res.ok = false;
                res.cex = clause2;
                return res;
            }
        }
    }
    return res;
}

WellDefResult check_well_defined(Op op, int n) { return check_well_defined(rule_for(op, n), n); }

}  // namespace lslh
