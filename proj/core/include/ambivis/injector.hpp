#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ambivis/metadata.hpp"
#include "ambivis/rules.hpp"
#include "ambivis/solver.hpp"
#include "ambivis/table.hpp"
#include "ambivis/vis.hpp"

namespace ambivis {

// One concrete tree rewrite. `applied` is false when the op found no
// eligible site and left the tree untouched.
struct injection_op {
    std::string name;
    std::string category;  // DS / CT / CE / DT
    std::string description;
    bool applied = false;
};

struct injection_config {
    int target_level = 0;  // 0 accepts any level inside [min_level, max_level]
    int min_level = 2;
    int max_level = 5;
    std::set<std::string> categories = {"CE", "CT", "DS", "DT"};
    std::uint64_t rng_seed = 0;
    int max_attempts = 64;
    bool decorate = true;  // hide extra explicit nodes once the level is hit
    solve_limits limits;
};

struct injection_result {
    vis_tree tree;
    int level = 1;  // solver model count of `tree`
    std::vector<injection_op> ops;
    std::vector<std::string> pattern;
};

// Widens one explicit column reference that participates in an alias pair
// into an Ambiguous select over the column and its partners; the channel is
// released for the solver to re-derive. The pair's shared alias becomes the
// surface-phrase hint.
injection_op inject_ambiguous(vis_tree& tree, const table& tab,
                              const ambiguity_metadata& meta, std::mt19937_64& rng);

// Either hides an explicit node while keeping its value (same model count,
// harder to phrase) or adds an empty Implicit requirement the solver must
// fill: a color encoding, a size encoding on scatter, a widened bin unit or
// aggregate, or a fresh aggregate on the measure channel.
injection_op add_implicit(vis_tree& tree, const table& tab, const design_rules& rules,
                          std::mt19937_64& rng);

// Trades the explicit mark for an explicit analytic task compatible with it
// plus an empty Implicit mark, so the chart type becomes a solver choice.
// Raises no_mark_error when the tree has no mark node.
injection_op relax_explicit(vis_tree& tree, const design_rules& rules,
                            std::mt19937_64& rng);

// Randomized search for a rewrite sequence whose solver model count lands on
// target_level exactly (or anywhere inside the level bounds when
// target_level is 0). Each attempt shuffles the candidate rewrites, applies
// them one at a time, re-solves, and rolls back overshoots; if the budget
// runs out and the candidate set is small, it sweeps every op subset
// exhaustively. Raises invalid_seed_error unless the seed is all-explicit
// with exactly one model, config_error for bad bounds or categories, and
// target_unreachable_error -- carrying the maximum achievable level -- when
// no combination reaches the goal.
injection_result inject_to_level(const vis_tree& seed, const table& tab,
                                 const ambiguity_metadata& meta,
                                 const injection_config& cfg,
                                 const design_rules& rules = default_rules());

}  // namespace ambivis
