#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambivis/llm.hpp"
#include "ambivis/rules.hpp"
#include "ambivis/table.hpp"
#include "ambivis/vis.hpp"

namespace ambivis {

// One disambiguation step: 1 data selection, 2 chart type, 3 channel
// mapping, 4 data transformation, 5 visualization synthesis. actions is a
// JSON array; steps 2..4 carry the previous step's actions plus their own
// (cumulative), step 5 holds the canonical spec set.
struct step_answer {
    int index = 0;
    nlohmann::json actions = nlohmann::json::array();
    std::string prose;
};

struct reasoning_path {
    std::vector<step_answer> steps;
};

// Deterministic structured content from the tree and its resolved set; prose
// comes from templates, or from the client when one is supplied (falling
// back to templates on any malformed reply).
reasoning_path derive_gold_path(const vis_tree& tree,
                                const std::vector<resolved_tree>& resolved,
                                const table& tab,
                                const design_rules& rules = default_rules(),
                                llm_client* llm = nullptr);

// Comparison form: strings lower-cased, scalar arrays sorted, action lists
// sorted by dump and deduplicated.
nlohmann::json normalize_actions(const nlohmann::json& actions);

// Smallest step index whose structured actions differ from gold as sets
// (0 when all five match). With subset_ok, a non-empty prediction that is a
// subset of gold passes. Raises malformed_path_error unless both paths have
// five steps.
int first_error_step(const reasoning_path& pred, const reasoning_path& gold,
                     bool subset_ok = false);

// <step_k><thinking>...</thinking><answer>...</answer></step_k> blocks, one
// per step. The parser ignores text around the blocks but insists on the
// exact tags in order (tag_error); answers that fail to parse as JSON are
// kept as string atoms.
std::string render_step_tagged(const reasoning_path& path);
std::string render_step_tagged(const step_answer& step);
reasoning_path parse_step_tagged(const std::string& text);

nlohmann::json path_to_json(const reasoning_path& path);
reasoning_path path_from_json(const nlohmann::json& doc);

struct preference_input {
    std::string id;
    std::string x;  // table schema + query context
    reasoning_path gold;
};

// One training pair per first prediction error: the predicted steps before
// the error, the gold step at it (winner) and the predicted step (loser).
struct preference_pair {
    std::string id;
    int step = 0;
    std::string x;
    std::string prefix;  // predicted steps 1..k-1, step-tagged
    std::string win;
    std::string lose;
};

// Raises alignment_error unless predictions match samples 1:1. Fully correct
// predictions contribute no pair.
std::vector<preference_pair> build_preference_pairs(
    const std::vector<preference_input>& samples,
    const std::vector<reasoning_path>& predictions, bool subset_ok = false);

nlohmann::json pair_to_json(const preference_pair& p);
preference_pair pair_from_json(const nlohmann::json& doc);

}  // namespace ambivis
