#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lslh/hardener.hpp"
#include "lslh/oracle.hpp"

namespace py = pybind11;
using namespace lslh;

namespace {

Op parse_op(const std::string& name) {
    for (Op op : kAllOps) {
        std::string n(op_name(op));
        if (std::equal(n.begin(), n.end(), name.begin(), name.end(),
                       [](char a, char b) { return std::tolower(a) == std::tolower(b); }))
            return op;
    }
    throw py::value_error("unknown operator: " + name);
}

py::dict obs_dict(const Observation& o) {
    py::dict d;
    d["observation"] = render_obs(o);
    d["taint"] = o.kind == Observation::Kind::None ? std::string("-") : render_taint(o.taint);
    return d;
}

py::dict assign_dict(const InitAssign& a) {
    py::dict d;
    d["regs"] = a.regs;
    d["regions"] = a.regions;
    return d;
}

py::object cell_dict(const AnalysisContext& cx, const TableCell& c) {
    if (c.bottom) return py::none();
    py::dict d;
    d["value"] = render_value(c.v, cx.base_names, cx.width(), true);
    d["taint"] = render_taint(c.t);
    d["boxed"] = c.boxed;
    d["recovered"] = c.recovered;
    return d;
}

// A program together with its policy and observation slice; contexts point into it.
struct Model {
    Policy policy;
    Program prog;
    ObsSlice slice;

    Model(const std::string& program, const std::string& pol, std::optional<int> width,
          std::optional<std::pair<int, int>> obs_bits)
        : policy(parse_policy(pol)), prog(parse_program(program, width.value_or(policy.width.value_or(64)))) {
        slice = obs_bits ? ObsSlice{obs_bits->first, obs_bits->second} : default_slice(prog.width);
    }

    py::list harden() const {
        AnalysisContext cx(prog, policy, slice);
        py::list out;
        for (auto& [loc, why] : light_slh(cx).phase2.hardened) {
            py::dict d;
            d["location"] = loc;
            d["instruction"] = render_instr(prog.at(loc), prog.end());
            d["reason"] = reason_name(why);
            out.append(d);
        }
        return out;
    }

    std::string emit(bool lowered) const {
        AnalysisContext cx(prog, policy, slice);
        HardenList h = light_slh(cx).phase2.hardened;
        return render_program(lowered ? lower_flag(prog, h) : transform(prog, h));
    }

    py::list analyze(const std::string& rows) const {
        AnalysisContext cx(prog, policy, slice);
        AnalysisTables t = analyze_all(cx);
        py::list out;
        for (const TableRow& r : analysis_table(cx, t, parse_rows(prog, rows))) {
            py::dict d;
            d["expr"] = r.label;
            d["seq"] = cell_dict(cx, r.seq);
            d["spec"] = cell_dict(cx, r.spec);
            d["spec_hk"] = cell_dict(cx, r.hk);
            out.append(d);
        }
        return out;
    }

    py::dict run(const std::map<std::string, uint64_t>& regs,
                 const std::map<std::string, std::vector<uint64_t>>& regions, const std::string& directives,
                 size_t max_steps) const {
        ExecContext cx(prog, policy, slice);
        ConcreteState s0 = initial_state(cx, {regs, regions});
        Trace t = directives.empty() ? run_sequential(cx, s0, max_steps) : run_trace(cx, s0, directives);
        py::list steps;
        for (const TraceEntry& e : t.steps) {
            py::dict d = obs_dict(e.obs);
            d["pc"] = e.pc;
            d["instr"] = render_instr(prog.at(e.pc), prog.end());
            d["directive"] = render_directive(e.dir);
            d["misspeculating"] = e.f_before;
            steps.append(d);
        }
        py::dict out;
        out["steps"] = steps;
        out["final_pc"] = t.states.back().pc;
        out["halted"] = t.states.back().halted();
        return out;
    }

    static Trace run_trace(const ExecContext& cx, const ConcreteState& s0, const std::string& dirs) {
        return lslh::run(cx, s0, parse_directives(dirs));
    }

    py::dict check(const std::string& property, const std::optional<std::vector<uint64_t>>& values,
                   const std::map<std::string, std::vector<uint64_t>>& per_var, size_t max_steps,
                   size_t step_budget) const {
        EnumBounds b;
        if (values) b.default_values = *values;
        b.values = per_var;
        b.max_steps = max_steps;
        b.step_budget = step_budget;
        ExecContext cx(prog, policy, slice);
        CheckResult r;
        if (property == "ss")
            r = check_ss(cx, b);
        else if (property == "sni")
            r = check_sni(cx, b);
        else
            throw py::value_error("property must be 'ss' or 'sni'");
        py::dict out;
        out["property"] = property;
        out["verdict"] = verdict_name(r.verdict);
        out["initial_states"] = r.initial_states;
        out["steps"] = r.steps;
        if (!r.note.empty()) out["note"] = r.note;
        if (r.witness) {
            const Witness& w = *r.witness;
            py::dict wd;
            wd["init"] = assign_dict(w.init);
            std::vector<std::string> dirs;
            for (Directive d : w.dirs) dirs.push_back(render_directive(d));
            wd["directives"] = dirs;
            wd["step"] = w.step;
            wd["pc"] = w.pc;
            wd["observation"] = obs_dict(w.obs);
            if (w.other) {
                wd["other_init"] = assign_dict(*w.other);
                wd["other_observation"] = obs_dict(w.other_obs);
            }
            out["witness"] = wd;
        }
        return out;
    }
};

}  // namespace

PYBIND11_MODULE(lslh, m) {
    m.doc() = "Bit-level taint tracking, abstract interpretation and selective load hardening";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ExecError>(m, "ExecError", PyExc_RuntimeError);
    py::register_exception<AnalysisError>(m, "AnalysisError", PyExc_RuntimeError);

    m.def(
        "taint_apply",
        [](const std::string& op, const std::string& a, const std::optional<std::string>& b) {
            Op o = parse_op(op);
            TaintVector ta = parse_taint(a);
            if (is_unary(o)) return render_taint(taint_not(ta));
            if (!b) throw py::value_error("binary operator needs two taint vectors");
            TaintVector tb = parse_taint(*b);
            if (tb.size() != ta.size()) throw py::value_error("taint vectors differ in width");
            return render_taint(taint_apply(o, ta, tb));
        },
        py::arg("op"), py::arg("a"), py::arg("b") = py::none());
    m.def(
        "well_defined", [](const std::string& op, int n) { return check_well_defined(parse_op(op), n).ok; },
        py::arg("op"), py::arg("width"));
    m.def(
        "word_apply",
        [](const std::string& op, uint64_t a, uint64_t b, int n) { return lslh::word_apply(parse_op(op), a, b, n); },
        py::arg("op"), py::arg("a"), py::arg("b"), py::arg("width"));

    py::class_<Model>(m, "Model")
        .def(py::init<const std::string&, const std::string&, std::optional<int>,
                      std::optional<std::pair<int, int>>>(),
             py::arg("program"), py::arg("policy") = "", py::arg("width") = py::none(),
             py::arg("obs_bits") = py::none())
        .def_static(
            "load",
            [](const std::string& program_path, const std::string& policy_path, std::optional<int> width,
               std::optional<std::pair<int, int>> obs_bits) {
                return Model(read_file(program_path), policy_path.empty() ? "" : read_file(policy_path), width,
                             obs_bits);
            },
            py::arg("program_path"), py::arg("policy_path") = "", py::arg("width") = py::none(),
            py::arg("obs_bits") = py::none())
        .def_property_readonly("width", [](const Model& md) { return md.prog.width; })
        .def_property_readonly("registers", [](const Model& md) { return md.prog.regs; })
        .def_property_readonly("obs_bits", [](const Model& md) { return std::pair(md.slice.lo, md.slice.hi); })
        .def("__len__", [](const Model& md) { return md.prog.size(); })
        .def("render", [](const Model& md) { return render_program(md.prog); })
        .def("harden", &Model::harden)
        .def("marked", [](const Model& md) { return md.emit(false); })
        .def("lowered", [](const Model& md) { return md.emit(true); })
        .def("analyze", &Model::analyze, py::arg("rows"))
        .def("run", &Model::run, py::arg("regs") = std::map<std::string, uint64_t>{},
             py::arg("regions") = std::map<std::string, std::vector<uint64_t>>{}, py::arg("directives") = "",
             py::arg("max_steps") = 1000)
        .def("check", &Model::check, py::arg("property") = "ss", py::arg("values") = py::none(),
             py::arg("per_var") = std::map<std::string, std::vector<uint64_t>>{}, py::arg("max_steps") = 64,
             py::arg("step_budget") = 10'000'000);
}
