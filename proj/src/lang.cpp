#include "lslh/lang.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace lslh {

namespace {

const char* const kOpNames[] = {"Not", "Add", "Minus", "Mul", "Div",  "Mod",
                                "And", "Or",  "Xor",   "Shl", "Lshr", "Ashr"};

}  // namespace

std::string_view op_name(Op op) { return kOpNames[int(op)]; }

std::optional<Op> op_from_name(std::string_view name) {
    for (Op op : kAllOps)
        if (op_name(op) == name) return op;
    return std::nullopt;
}

std::optional<uint64_t> word_apply(Op op, uint64_t a, uint64_t b, int n) {
    const uint64_t m = word_mask(n);
    a &= m;
    b &= m;
    switch (op) {
        case Op::Not: return ~a & m;
        case Op::Add: return (a + b) & m;
        case Op::Minus: return (a - b) & m;
        case Op::Mul: return (a * b) & m;
        case Op::Div:
            if (b == 0) return std::nullopt;
            return a / b;
        case Op::Mod:
            if (b == 0) return std::nullopt;
            return a % b;
        case Op::And: return a & b;
        case Op::Or: return a | b;
        case Op::Xor: return a ^ b;
        case Op::Shl: return b >= uint64_t(n) ? 0 : (a << b) & m;
        case Op::Lshr: return b >= uint64_t(n) ? 0 : a >> b;
        case Op::Ashr: {
            int64_t s = to_signed(a, n);
            uint64_t k = std::min<uint64_t>(b, uint64_t(n - 1));
            return from_signed(s >> k, n);
        }
    }
    return std::nullopt;
}

ExprPtr Expr::constant(int64_t v) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Const;
    e->value = v;
    return e;
}

ExprPtr Expr::reg_ref(std::string name, int slot) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Reg;
    e->reg = std::move(name);
    e->slot = slot;
    return e;
}

ExprPtr Expr::unary(Op op, ExprPtr a) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Unary;
    e->op = op;
    e->lhs = std::move(a);
    return e;
}

ExprPtr Expr::binary(Op op, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Binary;
    e->op = op;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
}

bool expr_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Expr::Kind::Const: return a.value == b.value;
        case Expr::Kind::Reg: return a.reg == b.reg;
        case Expr::Kind::Unary: return a.op == b.op && expr_equal(*a.lhs, *b.lhs);
        case Expr::Kind::Binary:
            return a.op == b.op && expr_equal(*a.lhs, *b.lhs) && expr_equal(*a.rhs, *b.rhs);
    }
    return false;
}

std::string render_expr(const Expr& e, bool top) {
    switch (e.kind) {
        case Expr::Kind::Const: return std::to_string(e.value);
        case Expr::Kind::Reg: return e.reg;
        case Expr::Kind::Unary: {
            std::string s = "Not " + render_expr(*e.lhs, false);
            return top ? s : "(" + s + ")";
        }
        case Expr::Kind::Binary:
            return "(" + render_expr(*e.lhs, false) + " " + std::string(op_name(e.op)) + " " +
                   render_expr(*e.rhs, false) + ")";
    }
    return "";
}

void collect_regs(const Expr& e, std::set<std::string>& out) {
    if (e.kind == Expr::Kind::Reg) out.insert(e.reg);
    if (e.lhs) collect_regs(*e.lhs, out);
    if (e.rhs) collect_regs(*e.rhs, out);
}

const Instr& Program::at(int loc) const {
    if (loc < 0 || loc >= size()) throw std::out_of_range("location " + std::to_string(loc) + " is not in the program");
    return code[loc];
}

int Program::slot_of(std::string_view name) const {
    auto it = std::lower_bound(regs.begin(), regs.end(), name);
    if (it == regs.end() || *it != name) return -1;
    return int(it - regs.begin());
}

namespace {

ExprPtr with_slots(const ExprPtr& e, const Program& p) {
    switch (e->kind) {
        case Expr::Kind::Const: return e;
        case Expr::Kind::Reg: return Expr::reg_ref(e->reg, p.slot_of(e->reg));
        case Expr::Kind::Unary: return Expr::unary(e->op, with_slots(e->lhs, p));
        case Expr::Kind::Binary: return Expr::binary(e->op, with_slots(e->lhs, p), with_slots(e->rhs, p));
    }
    return e;
}

}  // namespace

ExprPtr bind_expr(const Program& p, const ExprPtr& e) {
    std::set<std::string> names;
    collect_regs(*e, names);
    for (const auto& n : names)
        if (p.slot_of(n) < 0) throw std::invalid_argument("register '" + n + "' does not occur in the program");
    return with_slots(e, p);
}

void Program::finalize() {
    std::set<std::string> names;
    for (const Instr& ins : code) {
        if (!ins.x.empty()) names.insert(ins.x);
        if (ins.e) collect_regs(*ins.e, names);
        if (ins.cond) collect_regs(*ins.cond, names);
    }
    regs.assign(names.begin(), names.end());
    for (Instr& ins : code) {
        ins.xslot = ins.x.empty() ? -1 : slot_of(ins.x);
        if (ins.e) ins.e = with_slots(ins.e, *this);
        if (ins.cond) ins.cond = with_slots(ins.cond, *this);
    }
}

ParseError::ParseError(int line, int col, const std::string& msg)
    : std::runtime_error("line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + msg),
      line(line),
      col(col) {}

namespace {

bool is_ident_start(char c) { return std::isalpha((unsigned char)c) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum((unsigned char)c) || c == '_'; }

// Cursor over a single line of source text.
struct Lexer {
    std::string_view s;
    size_t i = 0;
    int line = 1;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line, int(i) + 1, msg); }

    void skip_ws() {
        while (i < s.size() && std::isspace((unsigned char)s[i])) ++i;
    }
    bool at_end() {
        skip_ws();
        return i >= s.size();
    }
    char peek() {
        skip_ws();
        return i < s.size() ? s[i] : '\0';
    }
    bool accept(std::string_view tok) {
        skip_ws();
        if (s.substr(i, tok.size()) == tok) {
            i += tok.size();
            return true;
        }
        return false;
    }
    void expect(std::string_view tok) {
        if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
    }
    std::string peek_word() {
        skip_ws();
        size_t j = i;
        if (j < s.size() && is_ident_start(s[j])) {
            while (j < s.size() && is_ident_char(s[j])) ++j;
        }
        return std::string(s.substr(i, j - i));
    }
    std::string word() {
        std::string w = peek_word();
        if (w.empty()) fail("expected identifier");
        i += w.size();
        return w;
    }
    bool accept_word(std::string_view w) {
        if (peek_word() == w) {
            i += w.size();
            return true;
        }
        return false;
    }
    int64_t number() {
        skip_ws();
        size_t start = i;
        bool neg = false;
        if (i < s.size() && s[i] == '-') {
            neg = true;
            ++i;
        }
        int base = 10;
        if (s.substr(i, 2) == "0x" || s.substr(i, 2) == "0X") {
            base = 16;
            i += 2;
        } else if (s.substr(i, 2) == "0b" || s.substr(i, 2) == "0B") {
            base = 2;
            i += 2;
        }
        size_t digits = i;
        uint64_t v = 0;
        while (i < s.size()) {
            char c = char(std::tolower((unsigned char)s[i]));
            int d;
            if (c >= '0' && c <= '9') d = c - '0';
            else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
            else break;
            if (d >= base) break;
            v = v * base + d;
            ++i;
        }
        if (i == digits) {
            i = start;
            fail("expected number");
        }
        if (i < s.size() && is_ident_char(s[i])) fail("malformed number");
        return neg ? -int64_t(v) : int64_t(v);
    }
    bool at_number() {
        skip_ws();
        if (i >= s.size()) return false;
        if (std::isdigit((unsigned char)s[i])) return true;
        return s[i] == '-' && i + 1 < s.size() && std::isdigit((unsigned char)s[i + 1]);
    }
};

bool is_keyword(const std::string& w) {
    return op_from_name(w) || w == "if" || w == "end" || w == "hardened";
}

ExprPtr parse_top(Lexer& lx);

ExprPtr parse_operand(Lexer& lx) {
    if (lx.accept_word("Not")) return Expr::unary(Op::Not, parse_operand(lx));
    if (lx.accept("(")) {
        ExprPtr e = parse_top(lx);
        lx.expect(")");
        return e;
    }
    if (lx.at_number()) return Expr::constant(lx.number());
    std::string w = lx.peek_word();
    if (w.empty()) lx.fail("expected expression");
    if (is_keyword(w)) lx.fail("unexpected keyword '" + w + "'");
    lx.i += w.size();
    return Expr::reg_ref(w);
}

ExprPtr parse_top(Lexer& lx) {
    ExprPtr a = parse_operand(lx);
    std::string w = lx.peek_word();
    auto op = op_from_name(w);
    if (op && !is_unary(*op)) {
        lx.i += w.size();
        ExprPtr b = parse_operand(lx);
        std::string w2 = lx.peek_word();
        auto op2 = op_from_name(w2);
        if (op2) lx.fail("ambiguous expression: parenthesize nested operators");
        return Expr::binary(*op, a, b);
    }
    return a;
}

std::string strip_comment(std::string_view line) {
    size_t h = line.find('#');
    if (h != std::string_view::npos) line = line.substr(0, h);
    return std::string(line);
}

}  // namespace

ExprPtr parse_expr(std::string_view text) {
    Lexer lx{text};
    ExprPtr e = parse_top(lx);
    if (!lx.at_end()) lx.fail("trailing input");
    return e;
}

Program parse_program(std::string_view text, int width) {
    if (width < 1 || width > 64) throw std::invalid_argument("word width must be in [1, 64]");
    std::map<int, std::pair<Instr, std::string>> instrs;  // loc -> (instr, raw target)
    std::map<int, int> lines;
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = strip_comment(raw);
        Lexer lx{line, 0, lineno};
        if (lx.at_end()) continue;
        if (!lx.at_number()) lx.fail("expected location number");
        int64_t loc = lx.number();
        if (loc < 0) lx.fail("negative location");
        lx.expect(":");
        Instr ins;
        std::string target;
        if (lx.accept_word("hardened")) ins.hardened = true;
        std::string w = lx.peek_word();
        if (w == "load" || w == "store") {
            lx.i += w.size();
            ins.kind = w == "load" ? InstrKind::Load : InstrKind::Store;
            ins.x = lx.word();
            lx.expect(",");
            ins.e = parse_top(lx);
        } else if (w == "jmp") {
            lx.i += w.size();
            ins.kind = InstrKind::Jmp;
            target = lx.at_number() ? std::to_string(lx.number()) : lx.word();
        } else if (w == "beqz") {
            lx.i += w.size();
            ins.kind = InstrKind::Beqz;
            ins.x = lx.word();
            lx.expect(",");
            target = lx.at_number() ? std::to_string(lx.number()) : lx.word();
        } else if (w == "cmov") {
            lx.i += w.size();
            ins.kind = InstrKind::CondAsgn;
            ins.x = lx.word();
            lx.expect(",");
            ins.e = parse_top(lx);
            if (!lx.accept_word("if")) lx.fail("expected 'if'");
            ins.cond = parse_top(lx);
        } else if (w == "fence") {
            lx.i += w.size();
            ins.kind = InstrKind::Fence;
        } else if (w == "alloc") {
            lx.i += w.size();
            ins.kind = InstrKind::Alloc;
            ins.x = lx.word();
            lx.expect(",");
            if (!lx.at_number()) lx.fail("non-constant Alloc size");
            ins.size = lx.number();
            if (ins.size <= 0) lx.fail("Alloc size must be positive");
        } else if (!w.empty()) {
            if (is_keyword(w)) lx.fail("unexpected keyword '" + w + "'");
            lx.i += w.size();
            ins.kind = InstrKind::Asgn;
            ins.x = w;
            lx.expect("<-");
            ins.e = parse_top(lx);
        } else {
            lx.fail("expected instruction");
        }
        if (!ins.x.empty() && is_keyword(ins.x)) lx.fail("register name '" + ins.x + "' is reserved");
        if (!lx.at_end()) lx.fail("trailing input");
        if (instrs.count(int(loc))) throw ParseError(lineno, 1, "duplicate location " + std::to_string(loc));
        instrs[int(loc)] = {ins, target};
        lines[int(loc)] = lineno;
    }
    Program p;
    p.width = width;
    int expect = 0;
    for (auto& [loc, pr] : instrs) {
        if (loc != expect) throw ParseError(lines[loc], 1, "location " + std::to_string(expect) + " is missing");
        ++expect;
    }
    const int n = int(instrs.size());
    for (auto& [loc, pr] : instrs) {
        Instr ins = pr.first;
        const std::string& t = pr.second;
        if (ins.kind == InstrKind::Jmp || ins.kind == InstrKind::Beqz) {
            if (t == "end") {
                ins.target = n;
            } else {
                bool numeric = !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit((unsigned char)c); });
                if (!numeric) throw ParseError(lines[loc], 1, "bad branch target '" + t + "'");
                ins.target = std::stoi(t);
                if (ins.target >= n && ins.target != n)
                    throw ParseError(lines[loc], 1, "dangling branch target " + t);
            }
        }
        p.code.push_back(ins);
    }
    p.finalize();
    return p;
}

std::string render_instr(const Instr& ins, int end_loc) {
    auto tgt = [&](int t) { return t == end_loc ? std::string("end") : std::to_string(t); };
    std::string s = ins.hardened ? "hardened " : "";
    switch (ins.kind) {
        case InstrKind::Asgn: return s + ins.x + " <- " + render_expr(*ins.e);
        case InstrKind::Load: return s + "load " + ins.x + ", " + render_expr(*ins.e);
        case InstrKind::Store: return s + "store " + ins.x + ", " + render_expr(*ins.e);
        case InstrKind::Jmp: return s + "jmp " + tgt(ins.target);
        case InstrKind::Beqz: return s + "beqz " + ins.x + ", " + tgt(ins.target);
        case InstrKind::CondAsgn:
            return s + "cmov " + ins.x + ", " + render_expr(*ins.e) + " if " + render_expr(*ins.cond);
        case InstrKind::Fence: return s + "fence";
        case InstrKind::Alloc: return s + "alloc " + ins.x + ", " + std::to_string(ins.size);
    }
    return s;
}

std::string render_program(const Program& p) {
    std::string out;
    for (int i = 0; i < p.size(); ++i) out += std::to_string(i) + ": " + render_instr(p.code[i], p.end()) + "\n";
    return out;
}

std::vector<int> successors(const Program& p, int loc) {
    if (loc < 0 || loc > p.end()) throw std::out_of_range("location " + std::to_string(loc) + " is not in the program");
    if (loc == p.end()) return {};
    const Instr& ins = p.code[loc];
    switch (ins.kind) {
        case InstrKind::Jmp: return {ins.target};
        case InstrKind::Beqz:
            if (ins.target == loc + 1) return {loc + 1};
            return {loc + 1, ins.target};
        default: return {loc + 1};
    }
}

std::vector<int> pred(const Program& p, int loc) {
    if (loc < 0 || loc > p.end()) throw std::out_of_range("location " + std::to_string(loc) + " is not in the program");
    std::vector<int> out;
    for (int j = 0; j < p.size(); ++j) {
        auto s = successors(p, j);
        if (std::find(s.begin(), s.end(), loc) != s.end()) out.push_back(j);
    }
    return out;
}

std::vector<int> reverse_postorder(const Program& p) {
    std::vector<int> order;
    std::vector<char> seen(p.end() + 1, 0);
    // iterative DFS from 0
    std::vector<std::pair<int, size_t>> stack{{0, 0}};
    seen[0] = 1;
    while (!stack.empty()) {
        auto& [v, k] = stack.back();
        auto s = successors(p, v);
        if (k < s.size()) {
            int w = s[k++];
            if (!seen[w]) {
                seen[w] = 1;
                stack.push_back({w, 0});
            }
        } else {
            order.push_back(v);
            stack.pop_back();
        }
    }
    std::reverse(order.begin(), order.end());
    for (int i = 0; i <= p.end(); ++i)
        if (!seen[i]) order.push_back(i);
    return order;
}

const RegionPolicy* Policy::region(std::string_view name) const {
    for (const auto& r : regions)
        if (r.name == name) return &r;
    return nullptr;
}

bool Policy::is_secret_reg(std::string_view name) const {
    auto it = regs.find(std::string(name));
    return it != regs.end() && it->second.secret;
}

Policy parse_policy(std::string_view text) {
    Policy pol;
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    auto level = [](Lexer& lx) {
        std::string w = lx.word();
        if (w == "public") return false;
        if (w == "secret") return true;
        lx.fail("expected 'public' or 'secret'");
    };
    auto range = [](Lexer& lx) -> std::optional<Range> {
        if (!lx.accept_word("range")) return std::nullopt;
        Range r{lx.number(), 0};
        r.hi = lx.number();
        if (r.lo > r.hi) lx.fail("empty range");
        return r;
    };
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = strip_comment(raw);
        Lexer lx{line, 0, lineno};
        if (lx.at_end()) continue;
        std::string kw = lx.word();
        if (kw == "reg") {
            std::string name = lx.word();
            if (is_keyword(name)) lx.fail("register name '" + name + "' is reserved");
            RegPolicy rp;
            rp.secret = level(lx);
            rp.range = range(lx);
            if (pol.regs.count(name) || pol.region(name)) lx.fail("duplicate policy entry for '" + name + "'");
            pol.regs[name] = rp;
        } else if (kw == "region") {
            RegionPolicy r;
            r.name = lx.word();
            if (is_keyword(r.name)) lx.fail("region name '" + r.name + "' is reserved");
            r.size = lx.number();
            if (r.size <= 0) lx.fail("region size must be positive");
            r.secret = level(lx);
            r.range = range(lx);
            if (pol.regs.count(r.name) || pol.region(r.name)) lx.fail("duplicate policy entry for '" + r.name + "'");
            pol.regions.push_back(r);
        } else if (kw == "site") {
            int64_t loc = lx.number();
            if (loc < 0) lx.fail("negative location");
            std::string name = lx.word();
            if (is_keyword(name)) lx.fail("site name '" + name + "' is reserved");
            if (pol.sites.count(int(loc))) lx.fail("duplicate site for location " + std::to_string(loc));
            pol.sites[int(loc)] = name;
        } else if (kw == "width") {
            int64_t w = lx.number();
            if (w < 1 || w > 64) lx.fail("width must be in [1, 64]");
            pol.width = int(w);
        } else {
            lx.fail("expected 'reg', 'region' or 'width'");
        }
        if (!lx.at_end()) lx.fail("trailing input");
    }
    return pol;
}

std::vector<BaseInfo> base_table(const Program& p, const Policy& pol) {
    std::vector<BaseInfo> out;
    for (const auto& r : pol.regions) {
        BaseInfo b;
        b.name = r.name;
        b.size = r.size;
        b.formal = true;
        b.secret = r.secret;
        b.range = r.range;
        out.push_back(b);
    }
    for (const auto& [loc, name] : pol.sites)
        if (loc >= p.size() || p.code[loc].kind != InstrKind::Alloc)
            throw std::invalid_argument("policy names a site at " + std::to_string(loc) + ", which is not an alloc");
    std::map<std::string, int> uses;
    for (const Instr& ins : p.code)
        if (ins.kind == InstrKind::Alloc) uses[ins.x]++;
    for (int i = 0; i < p.size(); ++i) {
        const Instr& ins = p.code[i];
        if (ins.kind != InstrKind::Alloc) continue;
        BaseInfo b;
        b.loc = i;
        b.size = ins.size;
        auto named = pol.sites.find(i);
        bool clash = uses[ins.x] > 1 || pol.region(ins.x);
        if (named != pol.sites.end()) b.name = named->second;
        else b.name = clash ? ins.x + "@" + std::to_string(i) : ins.x;
        out.push_back(b);
    }
    return out;
}

int base_of_alloc(const std::vector<BaseInfo>& bases, int loc) {
    for (size_t i = 0; i < bases.size(); ++i)
        if (!bases[i].formal && bases[i].loc == loc) return int(i);
    return -1;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace lslh
