#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ambivis/rules.hpp"
#include "ambivis/table.hpp"
#include "ambivis/vis.hpp"

namespace ambivis {

// Attribute slot of the compiled program. Every slot picks exactly one value
// from its domain (min_card 1) or may stay unassigned (min_card 0). Explicit
// nodes compile to singleton domains, Ambiguous nodes to their enumerated
// alternatives, Implicit nodes with retained params to the gold singleton and
// empty Implicit nodes to the full legal domain.
enum class slot_role {
    mark_type,
    task_value,
    enc_field,    // field of the channel map on `chan`
    sel_field,    // column of a standalone select, channel solver-assigned
    sel_channel,  // channel the select binds to; values are channel names
    bin_unit,     // unit for `column`
    agg_fn,       // aggregate on `chan`
    sort_dir      // direction on `chan`
};

struct slot {
    slot_role role;
    std::string entity;  // entity id for the ASP-style dump
    std::string attr;    // attribute key, e.g. "(encoding, field)"
    std::optional<channel> chan;
    std::optional<std::string> column;
    int select_id = -1;
    std::vector<std::string> domain;
    int min_card = 1;
};

struct entity_decl {
    std::string kind;
    std::string parent;
    std::string id;
};

struct constraint_program {
    std::string table_ref;
    const table* tab = nullptr;
    const design_rules* rules = nullptr;
    std::vector<entity_decl> entities;
    std::vector<slot> slots;
    std::vector<filter_predicate> filters;  // fixed predicates, no branching
};

// Domain index per slot, -1 for an unassigned optional slot.
using model_assignment = std::vector<int>;

struct solve_limits {
    std::size_t max_models = 1000000;
};

// Violation names raised by the hard-constraint check.
namespace violation {
inline constexpr const char* no_encodings = "no_encodings";
inline constexpr const char* missing_channel = "missing_channel";
inline constexpr const char* channel_incompat = "channel_incompat";
inline constexpr const char* field_conflict = "field_conflict";
inline constexpr const char* temporal_unbinned = "temporal_unbinned";
inline constexpr const char* missing_aggregate = "missing_aggregate";
inline constexpr const char* aggregate_incompat = "aggregate_incompat";
inline constexpr const char* bin_incompat = "bin_incompat";
inline constexpr const char* orphan_transform = "orphan_transform";
inline constexpr const char* task_mismatch = "task_mismatch";
inline constexpr const char* unknown_mark = "unknown_mark";
inline constexpr const char* unknown_bin_unit = "unknown_bin_unit";
inline constexpr const char* unknown_sort = "unknown_sort";
}  // namespace violation

// Translates a tree into attribute slots over finite domains. Raises
// unknown_column_error for out-of-table columns, missing_mark_error when the
// tree has no mark node, parse_error for malformed nodes.
constraint_program compile(const vis_tree& tree, const table& tab,
                           const design_rules& rules = default_rules());

// Exactly the assignments that pick one value per slot within domains,
// respect slot cardinalities, and trigger zero hard-constraint violations.
// Deterministic: backtracking in slot order with alternatives in declared
// order.
std::vector<model_assignment> enumerate_models(const constraint_program& program,
                                               const solve_limits& limits = {});

// Named violations for a complete assignment; empty means the assignment is
// a model.
std::vector<std::string> check_hard_constraints(const constraint_program& program,
                                                const model_assignment& assignment);

// Same checks applied to an already-flattened spec.
std::vector<std::string> spec_violations(const vis_spec& spec, const table& tab,
                                         const design_rules& rules = default_rules());

// Rebuilds the all-explicit tree described by an assignment.
resolved_tree reify(const constraint_program& program, const model_assignment& assignment);

// compile + enumerate + reify, deduplicated by canonical spec so the result
// size is the tree's ambiguity level.
std::vector<resolved_tree> resolve(const vis_tree& tree, const table& tab,
                                   const design_rules& rules = default_rules(),
                                   const solve_limits& limits = {});

// Human-readable program dump in answer-set notation: entity/attribute facts,
// choice rules, domain facts and the violation rule inventory.
std::string dump_asp(const constraint_program& program);

}  // namespace ambivis
