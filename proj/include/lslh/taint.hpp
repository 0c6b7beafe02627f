#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "lslh/lang.hpp"

namespace lslh {

// Bit labels: ⊥ ⊑ 0,1 ⊑ L ⊑ H.
enum class Label : uint8_t { Bot, Zero, One, L, H };

bool label_leq(Label a, Label b);
Label label_lub(Label a, Label b);
inline bool is_concrete(Label l) { return l == Label::Zero || l == Label::One; }
std::string_view label_str(Label l);

// Fixed-capacity taint vector, index 0 is the least significant bit.
// Rendered most significant bit first, e.g. (L,L,0,0).
class TaintVector {
public:
    TaintVector() = default;
    explicit TaintVector(int n, Label fill = Label::Bot);
    static TaintVector of_value(uint64_t v, int n);

    int size() const { return n_; }
    Label operator[](int i) const { return l_[i]; }
    Label& operator[](int i) { return l_[i]; }
    bool contains(Label x) const;
    bool operator==(const TaintVector& o) const;
    bool operator<(const TaintVector& o) const;

private:
    uint8_t n_ = 0;
    std::array<Label, 64> l_{};
};

std::string render_taint(const TaintVector& t);
TaintVector parse_taint(std::string_view s);

bool taint_leq(const TaintVector& a, const TaintVector& b);
TaintVector taint_lub(const TaintVector& a, const TaintVector& b);

// Bits [lo, hi] of t as a vector of length hi-lo+1.
TaintVector taint_slice(const TaintVector& t, int lo, int hi);

// v is legal for t when every concrete label matches v and no label is ⊥.
bool legal(const TaintVector& t, uint64_t v);
// v ~_t v': v and v' agree on every bit not labelled H.
uint64_t non_h_mask(const TaintVector& t);

// Label propagation through an operator; b is ignored for Not.
// Throws std::invalid_argument on length mismatch.
TaintVector taint_apply(Op op, const TaintVector& a, const TaintVector& b);
TaintVector taint_not(const TaintVector& a);

// Sanitizers for idioms whose low or high bits are fixed regardless of input.
TaintVector sanitize_ceil_align(const TaintVector& t, int k);
TaintVector sanitize_range(const TaintVector& t, int k);

// Helpers shared by the rules; exposed for tests.
int min_index(const TaintVector& a, Label t);  // least i with t ⊑ a_i, else size
uint64_t num(const TaintVector& a);             // concrete bits below the first L

// Printed appendix rules that fail the well-definedness check; kept to
// document the counterexamples.
namespace literal {
TaintVector minus(const TaintVector& a, const TaintVector& b);
TaintVector shl(const TaintVector& a, const TaintVector& b);
}  // namespace literal

// A taint rule paired with the concrete operation it abstracts.
struct TaintRule {
    int arity = 2;
    std::function<TaintVector(const TaintVector&, const TaintVector&)> taint;
    // nullopt means the instance is outside the operator's domain (skipped)
    std::function<std::optional<uint64_t>(uint64_t, uint64_t)> value;
};

TaintRule rule_for(Op op, int n);

struct Counterexample {
    int clause = 0;  // 1: result not legal, 2: indistinguishable inputs give distinguishable results
    TaintVector t1, t2, result;
    uint64_t v1 = 0, v2 = 0, v1p = 0, v2p = 0;
    uint64_t r = 0, rp = 0;
};

struct WellDefResult {
    bool ok = true;
    uint64_t instances = 0;
    std::optional<Counterexample> cex;
};

// Exhaustive check over every pair of n-bit vectors and legal values.
// Returns the first violation in enumeration order.
WellDefResult check_well_defined(const TaintRule& rule, int n);
WellDefResult check_well_defined(Op op, int n);

}  // namespace lslh
