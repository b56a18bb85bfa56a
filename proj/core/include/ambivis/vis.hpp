#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambivis/rules.hpp"
#include "ambivis/table.hpp"

namespace ambivis {

// How an action surfaces in natural language: named outright, one of several
// candidate readings, or required but left unsaid.
enum class ambiguity_tag { explicit_, ambiguous, implicit };

std::string to_string(ambiguity_tag t);
ambiguity_tag ambiguity_tag_from_string(const std::string& s);

enum class op_kind {
    column_select,  // column chosen for the chart, channel decided by the solver
    value_filter,
    task,
    mark,
    channel_map,  // column bound to a concrete channel
    aggregate,
    bin,
    sort
};

std::string to_string(op_kind k);
op_kind op_kind_from_string(const std::string& s);

// Ambiguity categories for injected nodes, keyed by the pipeline step the
// ambiguity affects: data selection, chart type, channel encoding, data
// transformation.
std::string category_of(op_kind k);

struct filter_predicate {
    std::string column;
    std::string op;  // "in", "gt", "ge", "lt", "le", "eq"
    std::vector<std::string> values;

    bool operator==(const filter_predicate&) const = default;
};

// One visualization action. params holds the value alternatives for the op:
// column names for selects/channel maps, chart types for mark, tasks for
// task, units for bin, functions for aggregate, directions for sort.
// Explicit nodes carry exactly one param; Ambiguous nodes enumerate candidate
// readings; Implicit nodes either retain the gold params (hidden from the NL)
// or are empty and left to the solver.
struct action_node {
    ambiguity_tag tag = ambiguity_tag::explicit_;
    op_kind op = op_kind::mark;
    std::vector<std::string> params;
    std::optional<channel> chan;          // channel_map / aggregate / sort target
    std::optional<std::string> column;    // bin target
    std::optional<filter_predicate> pred; // value_filter payload
    std::string nl_hint;                  // surface phrase hint, e.g. a shared alias
    std::string category;                 // DS/CT/CE/DT for injected nodes, "" otherwise

    bool operator==(const action_node&) const = default;
};

struct vis_tree {
    std::string table_ref;
    std::vector<action_node> nodes;

    bool operator==(const vis_tree&) const = default;

    const action_node* find_mark() const;
    bool all_explicit() const;
    // Alphabetically ordered category labels of non-explicit injected nodes.
    std::vector<std::string> ambiguity_pattern() const;
};

// A fully disambiguated tree: every node explicit with singleton params.
using resolved_tree = vis_tree;

struct encoding {
    std::string column;
    data_type dtype = data_type::categorical;
    std::optional<std::string> bin_unit;
    std::optional<std::string> aggregate;

    bool operator==(const encoding&) const = default;
};

struct vis_spec {
    std::string table_ref;
    std::string mark;
    std::map<channel, encoding> encodings;
    std::vector<filter_predicate> filters;
    std::optional<std::pair<channel, std::string>> sort;
    std::optional<std::string> task;

    bool operator==(const vis_spec&) const = default;
};

// Normal form used for set comparison: lower-cased identifiers, channel-
// ordered encodings, sorted filters and filter values, defaults made
// explicit, dtype and task dropped. Equality and ordering go through key().
struct canonical_spec {
    std::string key_;
    nlohmann::json normalized;

    const std::string& key() const { return key_; }
    bool operator==(const canonical_spec& o) const { return key_ == o.key_; }
    bool operator<(const canonical_spec& o) const { return key_ < o.key_; }
};

canonical_spec canonicalize(const vis_spec& spec, const design_rules& rules = default_rules());

// Builds the all-explicit tree for a concrete spec: mark, one channel map per
// encoding, bin/aggregate/sort transform nodes, one filter node per
// predicate. Raises incompatible_spec_error listing violations if the spec
// breaks the chart grammar.
vis_tree build_seed_tree(const vis_spec& spec, const table& tab,
                         const design_rules& rules = default_rules());

// Projects a resolved tree back into spec form; dtypes come from the table.
vis_spec flatten(const resolved_tree& tree, const table& tab);

// Vega-Lite flavored chart document; deterministic byte output for equal
// specs. from_vegalite inverts it for prediction files.
nlohmann::json to_vegalite(const vis_spec& spec);
std::string to_vegalite_text(const vis_spec& spec);
vis_spec from_vegalite(const nlohmann::json& doc, const std::string& table_ref = "");

// Tree (de)serialization; round-trips bit-exactly through dump().
nlohmann::json tree_to_json(const vis_tree& tree);
vis_tree tree_from_json(const nlohmann::json& doc);

nlohmann::json spec_to_json(const vis_spec& spec);
vis_spec spec_from_json(const nlohmann::json& doc);

}  // namespace ambivis
