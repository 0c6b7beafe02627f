#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lslh/hardener.hpp"
#include "lslh/oracle.hpp"

using json = nlohmann::ordered_json;
using namespace lslh;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string program, policy;
    int width = 0;
    std::string obs_bits;
    int widen = 16;
    std::string format;  // defaults per subcommand
};

struct Loaded {
    Policy policy;
    Program prog;
    ObsSlice slice;
};

int default_width() {
    if (const char* w = std::getenv("LSLH_WIDTH")) {
        char* end = nullptr;
        long v = std::strtol(w, &end, 10);
        if (*end || v < 1 || v > 64) throw UsageError("LSLH_WIDTH must be an integer in [1, 64]");
        return int(v);
    }
    return 64;
}

Loaded load(const Common& c) {
    Loaded l;
    try {
        l.policy = c.policy.empty() ? Policy{} : parse_policy(read_file(c.policy));
    } catch (const ParseError& e) {
        throw UsageError(c.policy + ":" + std::to_string(e.line) + ":" + std::to_string(e.col) + ": " + e.what());
    }
    int n = c.width ? c.width : l.policy.width.value_or(default_width());
    if (n < 1 || n > 64) throw UsageError("width must be in [1, 64]");
    try {
        l.prog = parse_program(read_file(c.program), n);
    } catch (const ParseError& e) {
        throw UsageError(c.program + ":" + std::to_string(e.line) + ":" + std::to_string(e.col) + ": " + e.what());
    }
    l.slice = default_slice(n);
    if (!c.obs_bits.empty()) {
        auto colon = c.obs_bits.find_first_of(":,");
        if (colon == std::string::npos) throw UsageError("--obs-bits expects a:b");
        try {
            l.slice.lo = std::stoi(c.obs_bits.substr(0, colon));
            l.slice.hi = std::stoi(c.obs_bits.substr(colon + 1));
        } catch (const std::exception&) {
            throw UsageError("--obs-bits expects a:b");
        }
        if (l.slice.lo < 0 || l.slice.lo > l.slice.hi || l.slice.hi >= n)
            throw UsageError("--obs-bits requires 0 <= a <= b < width");
    }
    return l;
}

AnalysisOptions analysis_opts(const Common& c) {
    AnalysisOptions o;
    o.widen_threshold = c.widen;
    return o;
}

void add_common(CLI::App* sub, Common& c, bool needs_policy = true) {
    sub->add_option("program", c.program, "µASM program file")->required()->check(CLI::ExistingFile);
    auto* pol = sub->add_option("policy", c.policy, "policy file")->check(CLI::ExistingFile);
    if (needs_policy) pol->required();
    sub->add_option("--width", c.width, "word width (default: policy, then LSLH_WIDTH, then 64)");
    sub->add_option("--obs-bits,--slice", c.obs_bits, "observed address bits a:b");
    sub->add_option("--widen", c.widen, "strict growths before widening (0 disables)");
    sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"text", "json"}));
}

// name=val or name[i]=val, comma separated
InitAssign parse_init(const std::string& s) {
    InitAssign a;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw UsageError("--init entry '" + tok + "' lacks '='");
        std::string lhs = tok.substr(0, eq);
        uint64_t v;
        try {
            v = uint64_t(std::stoll(tok.substr(eq + 1), nullptr, 0));
        } catch (const std::exception&) {
            throw UsageError("--init entry '" + tok + "' has a bad value");
        }
        auto br = lhs.find('[');
        if (br == std::string::npos) {
            a.regs[lhs] = v;
        } else {
            size_t idx = std::stoul(lhs.substr(br + 1));
            auto& cells = a.regions[lhs.substr(0, br)];
            if (cells.size() <= idx) cells.resize(idx + 1, 0);
            cells[idx] = v;
        }
    }
    return a;
}

json assign_json(const InitAssign& a) {
    json j;
    j["regs"] = json::object();
    for (auto& [k, v] : a.regs) j["regs"][k] = v;
    j["regions"] = json::object();
    for (auto& [k, v] : a.regions) j["regions"][k] = v;
    return j;
}

std::string obs_taint(const Observation& o) {
    return o.kind == Observation::Kind::None ? "-" : render_taint(o.taint);
}

json obs_json(const Observation& o) {
    return {{"observation", render_obs(o)}, {"taint", render_taint(o.taint)}};
}

// ---------------------------------------------------------------- exec

int run_exec(const Common& c, const std::string& init, const std::string& dirs, size_t max_steps) {
    Loaded l = load(c);
    ExecContext cx(l.prog, l.policy, l.slice);
    ConcreteState s0 = initial_state(cx, parse_init(init));
    Trace t = dirs.empty() ? run_sequential(cx, s0, max_steps) : run(cx, s0, parse_directives(dirs));
    const ConcreteState& last = t.states.back();
    if (c.format == "json") {
        json j;
        j["steps"] = json::array();
        for (auto& e : t.steps)
            j["steps"].push_back({{"pc", e.pc},
                                  {"instr", render_instr(l.prog.at(e.pc), l.prog.end())},
                                  {"directive", render_directive(e.dir)},
                                  {"misspeculating", e.f_before},
                                  {"observation", render_obs(e.obs)},
                                  {"taint", obs_taint(e.obs)}});
        j["final_pc"] = last.pc;
        j["halted"] = last.halted();
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    for (auto& e : t.steps)
        std::cout << e.pc << " | " << render_instr(l.prog.at(e.pc), l.prog.end()) << " | " << render_directive(e.dir)
                  << " | " << render_obs(e.obs) << " | " << obs_taint(e.obs) << "\n";
    std::cout << "final pc " << last.pc << (last.halted() ? " (halted)" : "") << "\n";
    return 0;
}

// ---------------------------------------------------------------- analyze

json cell_json(const AnalysisContext& cx, const TableCell& cell) {
    if (cell.bottom) return nullptr;
    return {{"value", render_value(cell.v, cx.base_names, cx.width(), true)},
            {"taint", render_taint(cell.t)},
            {"boxed", cell.boxed},
            {"recovered", cell.recovered}};
}

int run_analyze(const Common& c, const std::string& rows, const std::string& mode) {
    Loaded l = load(c);
    AnalysisContext cx(l.prog, l.policy, l.slice, analysis_opts(c));
    AnalysisTables t = analyze_all(cx);
    if (!rows.empty()) {
        auto table = analysis_table(cx, t, parse_rows(l.prog, rows));
        if (c.format == "json") {
            json j = json::array();
            for (auto& r : table)
                j.push_back({{"expr", r.label},
                             {"seq", cell_json(cx, r.seq)},
                             {"spec", cell_json(cx, r.spec)},
                             {"spec_hk", cell_json(cx, r.hk)}});
            std::cout << j.dump(2) << "\n";
        } else {
            std::cout << render_table(cx, table);
        }
        return 0;
    }
    const Config& omega = mode == "seq" ? t.seq : mode == "spec" ? t.spec : t.phase2.omega;
    if (c.format == "json") {
        json j = json::array();
        for (int i = 0; i <= l.prog.end(); ++i) {
            json loc{{"loc", i}};
            if (omega[i].bottom) {
                loc["state"] = nullptr;
            } else {
                json regs = json::object();
                for (size_t k = 0; k < l.prog.regs.size(); ++k)
                    regs[l.prog.regs[k]] = {{"value", render_value(omega[i].rho[k], cx.base_names, cx.width(), true)},
                                            {"taint", render_taint(omega[i].mu[k])}};
                loc["state"] = regs;
            }
            j.push_back(loc);
        }
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    for (int i = 0; i <= l.prog.end(); ++i) {
        std::cout << i << ": " << (i < l.prog.size() ? render_instr(l.prog.at(i), l.prog.end()) : "end") << "\n";
        std::cout << render_state(cx, omega[i]);
    }
    return 0;
}

// ---------------------------------------------------------------- harden

int run_harden(const Common& c, const std::string& emit, bool lower, bool strict) {
    Loaded l = load(c);
    AnalysisContext cx(l.prog, l.policy, l.slice, analysis_opts(c));
    PipelineResult r = light_slh(cx);
    const HardenList& h = r.phase2.hardened;
    if (lower || emit == "lowered") {
        std::cout << render_program(lower_flag(l.prog, h));
    } else if (emit == "marked") {
        std::cout << render_program(transform(l.prog, h));
    } else if (c.format == "text") {
        for (auto& [loc, why] : h)
            std::cout << loc << ": " << render_instr(l.prog.at(loc), l.prog.end()) << "  # " << reason_name(why)
                      << "\n";
    } else {
        json j;
        j["hardened"] = json::array();
        for (auto& [loc, why] : h)
            j["hardened"].push_back({{"location", loc},
                                     {"instruction", render_instr(l.prog.at(loc), l.prog.end())},
                                     {"reason", reason_name(why)}});
        std::cout << j.dump(2) << "\n";
    }
    return strict && !h.empty() ? 1 : 0;
}

// ---------------------------------------------------------------- check

EnumBounds load_bounds(const std::string& path, const std::string& values, size_t max_steps, size_t budget) {
    EnumBounds b;
    if (!path.empty()) {
        json j;
        try {
            j = json::parse(read_file(path));
        } catch (const json::exception& e) {
            throw UsageError(path + ": " + e.what());
        }
        if (j.contains("default")) b.default_values = j["default"].get<std::vector<uint64_t>>();
        if (j.contains("values"))
            for (auto& [k, v] : j["values"].items()) b.values[k] = v.get<std::vector<uint64_t>>();
        if (j.contains("max_steps")) b.max_steps = j["max_steps"].get<size_t>();
        if (j.contains("step_budget")) b.step_budget = j["step_budget"].get<size_t>();
    }
    if (!values.empty()) {
        b.default_values.clear();
        std::stringstream ss(values);
        std::string tok;
        while (std::getline(ss, tok, ',')) b.default_values.push_back(std::stoull(tok, nullptr, 0));
    }
    if (max_steps) b.max_steps = max_steps;
    if (budget) b.step_budget = budget;
    return b;
}

json result_json(const CheckResult& r) {
    json j{{"verdict", verdict_name(r.verdict)}, {"initial_states", r.initial_states}, {"steps", r.steps}};
    if (!r.note.empty()) j["note"] = r.note;
    if (r.witness) {
        const Witness& w = *r.witness;
        std::string dirs;
        for (auto d : w.dirs) dirs += (dirs.empty() ? "" : ",") + render_directive(d);
        json wj{{"init", assign_json(w.init)}, {"directives", dirs}, {"step", w.step}, {"pc", w.pc}};
        wj["observation"] = obs_json(w.obs);
        if (w.other) {
            wj["other_init"] = assign_json(*w.other);
            wj["other_observation"] = obs_json(w.other_obs);
        }
        j["witness"] = wj;
    }
    return j;
}

int verdict_code(Verdict v) { return v == Verdict::Pass ? 0 : 1; }

int run_check(const Common& c, const std::string& property, const EnumBounds& b, size_t count, uint64_t seed) {
    if (property == "ss-implies-sni") {
        std::vector<RandomCase> corpus;
        if (!c.program.empty()) {
            Loaded l = load(c);
            corpus.push_back({l.prog, l.policy, b});
        } else {
            std::mt19937_64 rng(seed);
            for (size_t i = 0; i < count; ++i) corpus.push_back(random_case(rng));
        }
        ImplicationResult r = check_ss_implies_sni(corpus);
        json j{{"property", property},
               {"programs", r.programs},
               {"ss_pass", r.ss_pass},
               {"sni_fail", r.sni_fail},
               {"inconclusive", r.inconclusive}};
        if (r.counterexample) {
            j["counterexample"] = *r.counterexample;
            if (c.program.empty()) j["program"] = render_program(corpus[*r.counterexample].prog);
        }
        std::cout << j.dump(2) << "\n";
        return r.counterexample ? 1 : 0;
    }
    if (c.program.empty()) throw UsageError("--property " + property + " needs a program and a policy");
    Loaded l = load(c);
    ExecContext cx(l.prog, l.policy, l.slice);
    CheckResult r = property == "ss" ? check_ss(cx, b) : check_sni(cx, b);
    if (c.format == "text") {
        std::cout << property << ": " << verdict_name(r.verdict) << " (" << r.initial_states << " initial states, "
                  << r.steps << " steps)\n";
        if (!r.note.empty()) std::cout << "note: " << r.note << "\n";
        if (r.witness) std::cout << result_json(r)["witness"].dump(2) << "\n";
    } else {
        json j{{"property", property}};
        j.update(result_json(r));
        std::cout << j.dump(2) << "\n";
    }
    return verdict_code(r.verdict);
}

// ---------------------------------------------------------------- welldef

int run_welldef(const std::vector<std::string>& ops, const std::vector<int>& widths, bool literal_rules,
                const std::string& format) {
    std::vector<Op> todo;
    if (ops.empty()) {
        todo.assign(std::begin(kAllOps), std::end(kAllOps));
    } else {
        for (auto& name : ops) {
            std::string lower = name;
            for (auto& ch : lower) ch = char(std::tolower((unsigned char)ch));
            std::optional<Op> op;
            for (Op o : kAllOps) {
                std::string n(op_name(o));
                for (auto& ch : n) ch = char(std::tolower((unsigned char)ch));
                if (n == lower) op = o;
            }
            if (!op) throw UsageError("unknown operator '" + name + "'");
            todo.push_back(*op);
        }
    }
    json report = json::array();
    bool all_ok = true;
    for (Op op : todo)
        for (int n : widths) {
            if (n < 1 || n > 8) throw UsageError("welldef widths must be in [1, 8]");
            TaintRule rule = rule_for(op, n);
            if (literal_rules) {
                if (op == Op::Minus) rule.taint = literal::minus;
                else if (op == Op::Shl) rule.taint = literal::shl;
            }
            WellDefResult r = check_well_defined(rule, n);
            all_ok = all_ok && r.ok;
            json j{{"op", std::string(op_name(op))}, {"width", n}, {"pass", r.ok}, {"instances", r.instances}};
            if (r.cex) {
                const Counterexample& x = *r.cex;
                j["counterexample"] = {{"clause", x.clause},
                                       {"a", render_taint(x.t1)},
                                       {"b", render_taint(x.t2)},
                                       {"result", render_taint(x.result)},
                                       {"values", {x.v1, x.v2, x.v1p, x.v2p}},
                                       {"results", {x.r, x.rp}}};
            }
            report.push_back(j);
        }
    if (format == "json") {
        std::cout << report.dump(2) << "\n";
    } else {
        for (auto& j : report)
            std::cout << j["op"].get<std::string>() << " n=" << j["width"].get<int>() << ": "
                      << (j["pass"].get<bool>() ? "pass" : "FAIL") << " (" << j["instances"].get<uint64_t>()
                      << " instances)\n";
    }
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bit-level taint analysis and speculative load hardening for µASM"};
    app.require_subcommand(1);

    Common c;

    auto* exec = app.add_subcommand("exec", "run a program under the speculative semantics");
    add_common(exec, c, false);
    std::string init, dirs;
    size_t exec_steps = 1000;
    exec->add_option("--init", init, "initial values: reg=val,region[i]=val");
    exec->add_option("--directives", dirs, "directive list, e.g. s,s,f,s (default: sequential run)");
    exec->add_option("--max-steps", exec_steps, "step limit for sequential runs");

    auto* analyze = app.add_subcommand("analyze", "dump the abstract fixpoints");
    add_common(analyze, c);
    std::string rows, mode = "hk";
    analyze->add_option("--rows", rows, "table rows: expr@loc or expr@loc+ (after loc), comma separated");
    analyze->add_option("--mode", mode, "configuration dumped without --rows")
        ->check(CLI::IsMember({"seq", "spec", "hk"}));

    auto* harden = app.add_subcommand("harden", "compute the hardening set");
    add_common(harden, c);
    std::string emit = "report";
    bool lower = false, strict = false;
    harden->add_option("--emit", emit, "report, marked or lowered")
        ->check(CLI::IsMember({"report", "marked", "lowered"}));
    harden->add_flag("--lower-flag", lower, "emit the flag-register SLH form");
    harden->add_flag("--strict", strict, "exit 1 when anything needs hardening");

    auto* check = app.add_subcommand("check", "check speculative safety or non-interference");
    std::string property = "ss", bounds_file, values;
    size_t max_steps = 0, budget = 0, count = 500;
    uint64_t seed = 1;
    check->add_option("program", c.program, "µASM program file")->check(CLI::ExistingFile);
    check->add_option("policy", c.policy, "policy file")->check(CLI::ExistingFile);
    check->add_option("--width", c.width, "word width");
    check->add_option("--obs-bits,--slice", c.obs_bits, "observed address bits a:b");
    check->add_option("--format", c.format, "output format")->check(CLI::IsMember({"text", "json"}));
    check->add_option("--property", property, "ss, sni or ss-implies-sni")
        ->check(CLI::IsMember({"ss", "sni", "ss-implies-sni"}));
    check->add_option("--bounds", bounds_file, "enumeration bounds (JSON)")->check(CLI::ExistingFile);
    check->add_option("--values", values, "default value universe, comma separated");
    check->add_option("--max-steps", max_steps, "trace bound");
    check->add_option("--budget", budget, "total step budget");
    check->add_option("--count", count, "random programs for ss-implies-sni without a program");
    check->add_option("--seed", seed, "random seed");

    auto* welldef = app.add_subcommand("welldef", "exhaustively check taint operator well-definedness");
    std::vector<std::string> ops;
    std::vector<int> widths{3};
    bool literal_rules = false;
    std::string wformat = "json";
    welldef->add_option("--op", ops, "operator name (repeatable; default: all)");
    welldef->add_flag("--all", "check every operator (the default)");
    welldef->add_option("--width", widths, "word width (repeatable)");
    welldef->add_flag("--literal", literal_rules, "use the rules exactly as printed for Minus and Shl");
    welldef->add_option("--format", wformat, "output format")->check(CLI::IsMember({"text", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (c.format.empty()) c.format = harden->parsed() || check->parsed() ? "json" : "text";

    try {
        if (exec->parsed()) return run_exec(c, init, dirs, exec_steps);
        if (analyze->parsed()) return run_analyze(c, rows, mode);
        if (harden->parsed()) return run_harden(c, emit, lower, strict);
        if (check->parsed()) return run_check(c, property, load_bounds(bounds_file, values, max_steps, budget), count, seed);
        if (welldef->parsed()) return run_welldef(ops, widths, literal_rules, wformat);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: line " << e.line << ":" << e.col << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
