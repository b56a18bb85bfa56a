#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ambivis/llm.hpp"
#include "ambivis/table.hpp"
#include "ambivis/vis.hpp"

namespace ambivis {

enum class nl_style { question, command, caption };

std::string to_string(nl_style s);
nl_style nl_style_from_string(const std::string& s);

struct exemplar {
    std::string style;
    std::string query;
};

std::vector<exemplar> load_exemplars(const std::string& path);

struct nl_config {
    int max_attempts = 3;
    int exemplar_count = 5;
    std::string prompts_dir;  // optional override for the embedded templates
    std::uint64_t rng_seed = 0;
};

// Generator output: the query plus one surface phrase per tree node, aligned
// by node index.
struct nl_result {
    std::string query;
    std::vector<std::string> references;
};

// Check outcome. l1 maps query phrases to the node index they realize, l2
// lists unmatched (hallucinated) phrases; deterministic local checks append
// their failures to l2 with a "local:" prefix. accepted means l1 covers
// every node, l2 is empty and all local checks pass.
struct verification {
    bool accepted = false;
    std::vector<std::pair<std::string, int>> l1;
    std::vector<std::string> l2;
};

struct nl_sample {
    std::string query;
    nl_style style = nl_style::command;
    std::vector<std::string> references;
    int attempts = 0;
};

std::string generator_prompt(const vis_tree& tree, const table& tab, nl_style style,
                             const std::vector<exemplar>& shots,
                             const std::string& prompts_dir = "");
std::string verifier_prompt(const vis_tree& tree, const table& tab,
                            const std::string& query,
                            const std::vector<std::string>& references,
                            const std::string& prompts_dir = "");

// One model call each. generate_query raises malformed_output_error when the
// reply does not follow the NL/Reference Tree format or the reference count
// differs from the node count.
nl_result generate_query(llm_client& llm, const vis_tree& tree, const table& tab,
                         nl_style style, const std::vector<exemplar>& shots,
                         const std::string& prompts_dir = "");
verification verify_query(llm_client& llm, const vis_tree& tree, const table& tab,
                          const std::string& query,
                          const std::vector<std::string>& references,
                          const std::string& prompts_dir = "");

// Deterministic checks only: every reference is a non-empty substring of the
// query, Ambiguous and Implicit references conceal their candidate or hidden
// values, and the query names no table column outside the tree's explicit
// ones.
std::vector<std::string> local_check_failures(const vis_tree& tree, const table& tab,
                                              const std::string& query,
                                              const std::vector<std::string>& references);

// generate + verify, retried up to cfg.max_attempts with freshly sampled
// exemplars. Raises retries_exhausted_error carrying the last failure.
nl_sample synthesize_nl(llm_client& llm, const vis_tree& tree, const table& tab,
                        nl_style style, const std::vector<exemplar>& pool,
                        const nl_config& cfg = {});

}  // namespace ambivis
