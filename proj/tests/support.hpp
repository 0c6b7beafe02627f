#pragma once

#include <string>

#include "lslh/hardener.hpp"
#include "lslh/oracle.hpp"
#include <json.hpp>

#ifndef LSLH_CORPUS_DIR
#error "LSLH_CORPUS_DIR must be defined"
#endif

namespace lslh::test {

struct Example {
    Policy policy;
    Program prog;

    explicit Example(const std::string& name)
        : policy(parse_policy(read_file(std::string(LSLH_CORPUS_DIR) + "/" + name + ".policy"))),
          prog(parse_program(read_file(std::string(LSLH_CORPUS_DIR) + "/" + name + ".muasm"),
                             policy.width.value_or(64))) {}

    Example(const std::string& program, const std::string& pol, int width)
        : policy(parse_policy(pol)), prog(parse_program(program, width)) {}
};

inline EnumBounds load_bounds(const std::string& name) {
    // Same format the CLI reads; only the fields the corpus uses.
    EnumBounds b;
    const std::string text = read_file(std::string(LSLH_CORPUS_DIR) + "/" + name + ".bounds.json");
    auto j = nlohmann::json::parse(text);
    if (j.contains("default")) b.default_values = j["default"].get<std::vector<uint64_t>>();
    if (j.contains("values"))
        for (auto& [k, v] : j["values"].items()) b.values[k] = v.get<std::vector<uint64_t>>();
    if (j.contains("max_steps")) b.max_steps = j["max_steps"].get<size_t>();
    return b;
}

inline const char* const kCorpus[] = {"v1_gadget",     "masked_gadget",   "align_index",    "alloc_offsets", "struct_fields",
                                      "nested_lookup",     "chacha", "sg_variable", "sg_fixed"};

}  // namespace lslh::test
