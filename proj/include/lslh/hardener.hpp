#pragma once

#include <map>
#include <string>

#include "lslh/absint.hpp"

namespace lslh {

enum class HardenReason { HObservation, OobStore };
const char* reason_name(HardenReason r);

// location -> why it must be hardened
using HardenList = std::map<int, HardenReason>;

Config phase1(const AnalysisContext& cx, FixpointStats* stats = nullptr);

// True if the store at loc may write outside every region under s.
bool oob_store(const AnalysisContext& cx, const AbstractState& s, int loc);

// H(Ω): speculative steps emitting an Ĥ observation, plus speculative
// out-of-bounds stores. Instructions already marked hardened are skipped.
HardenList harden_set(const AnalysisContext& cx, const Config& omega);

// Ld-Switch / St-Switch: the step of a hardened access that reuses phase-1 results.
AbsStep switch_step(const AnalysisContext& cx, const AbstractState& s, int loc, const Config& seq);

bool is_access(const Program& p, int loc);

// One synchronous application of the phase-2 transition.
Config trans(const AnalysisContext& cx, const Config& omega, const HardenList& h, const Config& seq,
             Widener* widener = nullptr);

struct Phase2Result {
    HardenList hardened;  // newly hardened locations
    Config omega;         // final configuration
    size_t iterations = 0;
};

Phase2Result algorithm1(const AnalysisContext& cx, const Config& seq);

struct PipelineResult {
    Config seq;
    Phase2Result phase2;
};

PipelineResult light_slh(const AnalysisContext& cx);

// Rows of the per-expression analysis table: `expr@loc` reads the state
// before loc, `expr@loc+` the state after loc along its fall-through edge.
struct RowSpec {
    std::string text;
    ExprPtr expr;
    int loc = 0;
    bool post = false;
};
RowSpec parse_row(const Program& p, const std::string& spec);
std::vector<RowSpec> parse_rows(const Program& p, const std::string& specs);  // comma separated

struct TableCell {
    bool bottom = true;
    AbstractValue v;
    TaintVector t;
    bool boxed = false;      // address of an access whose observation carries Ĥ
    bool recovered = false;  // value taken from the sequential analysis by a switch rule
};

struct TableRow {
    std::string label;
    TableCell seq, spec, hk;
};

struct AnalysisTables {
    Config seq, spec;
    Phase2Result phase2;
};

AnalysisTables analyze_all(const AnalysisContext& cx);
std::vector<TableRow> analysis_table(const AnalysisContext& cx, const AnalysisTables& t,
                                     const std::vector<RowSpec>& rows);
std::string render_cell(const AnalysisContext& cx, const TableCell& c);
std::string render_table(const AnalysisContext& cx, const std::vector<TableRow>& rows);

// Marks every location of h as hardened. Throws if a member is not load/store/beqz.
Program transform(const Program& p, const HardenList& h);

// Textual SLH form with an explicit speculation flag register.
Program lower_flag(const Program& p, const HardenList& h, std::vector<int>* loc_map = nullptr);

}  // namespace lslh
