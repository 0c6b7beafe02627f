#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lslh {

enum class Op : uint8_t { Not, Add, Minus, Mul, Div, Mod, And, Or, Xor, Shl, Lshr, Ashr };

inline constexpr Op kAllOps[] = {Op::Not, Op::Add, Op::Minus, Op::Mul, Op::Div, Op::Mod,
                                 Op::And, Op::Or,  Op::Xor,   Op::Shl, Op::Lshr, Op::Ashr};
inline constexpr Op kBinaryOps[] = {Op::Add, Op::Minus, Op::Mul, Op::Div, Op::Mod, Op::And,
                                    Op::Or,  Op::Xor,   Op::Shl, Op::Lshr, Op::Ashr};

inline bool is_unary(Op op) { return op == Op::Not; }
std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

// n-bit machine words. Values are kept masked to n bits.
inline uint64_t word_mask(int n) { return n >= 64 ? ~uint64_t(0) : ((uint64_t(1) << n) - 1); }
inline int64_t to_signed(uint64_t v, int n) {
    v &= word_mask(n);
    if (n < 64 && (v >> (n - 1)) & 1) return int64_t(v) - (int64_t(1) << n);
    return int64_t(v);
}
inline uint64_t from_signed(int64_t v, int n) { return uint64_t(v) & word_mask(n); }

// Concrete n-bit operator. Returns nullopt for division or remainder by zero.
// Division and remainder are unsigned; Ashr fills with bit n-1.
std::optional<uint64_t> word_apply(Op op, uint64_t a, uint64_t b, int n);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind : uint8_t { Const, Reg, Unary, Binary };
    Kind kind = Kind::Const;
    int64_t value = 0;  // Const, as written (masked at evaluation)
    std::string reg;    // Reg
    int slot = -1;      // Reg: index into Program::regs
    Op op = Op::Add;
    ExprPtr lhs, rhs;

    static ExprPtr constant(int64_t v);
    static ExprPtr reg_ref(std::string name, int slot = -1);
    static ExprPtr unary(Op op, ExprPtr e);
    static ExprPtr binary(Op op, ExprPtr a, ExprPtr b);
};

bool expr_equal(const Expr& a, const Expr& b);
std::string render_expr(const Expr& e, bool top = true);
void collect_regs(const Expr& e, std::set<std::string>& out);

enum class InstrKind : uint8_t { Asgn, Load, Store, Jmp, Beqz, CondAsgn, Fence, Alloc };

struct Instr {
    InstrKind kind = InstrKind::Fence;
    std::string x;   // destination / stored / tested register
    int xslot = -1;
    ExprPtr e;       // Asgn/Load/Store/CondAsgn value or address
    ExprPtr cond;    // CondAsgn condition
    int target = 0;  // Jmp/Beqz; equals program size for `end`
    int64_t size = 0;
    bool hardened = false;
};

struct Program {
    std::vector<Instr> code;
    std::vector<std::string> regs;  // every register named in the code, sorted
    int width = 64;

    int size() const { return int(code.size()); }
    int end() const { return int(code.size()); }
    const Instr& at(int loc) const;
    int slot_of(std::string_view name) const;  // -1 if absent

    // Rebuilds register slots after the code was edited programmatically.
    void finalize();
};

struct ParseError : std::runtime_error {
    int line, col;
    ParseError(int line, int col, const std::string& msg);
};

Program parse_program(std::string_view text, int width = 64);
ExprPtr parse_expr(std::string_view text);
// Resolves register slots of e against p; throws for registers p does not use.
ExprPtr bind_expr(const Program& p, const ExprPtr& e);
std::string render_instr(const Instr& ins, int end_loc);
std::string render_program(const Program& p);

// Static control flow: locations range over [0, end]; end has no successors.
std::vector<int> successors(const Program& p, int loc);
std::vector<int> pred(const Program& p, int loc);
std::vector<int> reverse_postorder(const Program& p);

// Policies.
struct Range {
    int64_t lo, hi;
    bool operator==(const Range&) const = default;
};

struct RegPolicy {
    bool secret = false;
    std::optional<Range> range;
};

struct RegionPolicy {
    std::string name;
    int64_t size = 0;
    bool secret = false;
    std::optional<Range> range;
};

struct Policy {
    std::map<std::string, RegPolicy> regs;
    std::vector<RegionPolicy> regions;
    std::map<int, std::string> sites;  // optional names for Alloc sites, by location
    std::optional<int> width;

    const RegionPolicy* region(std::string_view name) const;
    bool is_secret_reg(std::string_view name) const;
};

Policy parse_policy(std::string_view text);

// Memory bases: formal regions first (policy order), then Alloc sites in
// location order. Base ids index this table.
struct BaseInfo {
    std::string name;  // region name, or the allocating register (x@loc if ambiguous)
    int loc = -1;      // -1 for formal regions
    int64_t size = 0;
    bool formal = false;
    bool secret = false;
    std::optional<Range> range;
};

std::vector<BaseInfo> base_table(const Program& p, const Policy& pol);
int base_of_alloc(const std::vector<BaseInfo>& bases, int loc);

std::string read_file(const std::string& path);

}  // namespace lslh
