#include "ambivis/injector.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <numeric>

#include "ambivis/error.hpp"

namespace ambivis {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Deterministic across standard libraries, unlike std::shuffle.
template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

const action_node* find_task(const vis_tree& tree) {
    for (const auto& n : tree.nodes)
        if (n.op == op_kind::task) return &n;
    return nullptr;
}

int find_index(const vis_tree& tree, op_kind op) {
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
        if (tree.nodes[i].op == op) return static_cast<int>(i);
    return -1;
}

// Chart types the mark node can still take, narrowed by the task if the mark
// itself is open.
std::vector<std::string> mark_candidates(const vis_tree& tree, const design_rules& rules) {
    const action_node* mark = tree.find_mark();
    if (mark && !mark->params.empty()) return mark->params;
    const action_node* task = find_task(tree);
    if (task && !task->params.empty()) {
        std::set<std::string> allowed;
        for (const auto& t : task->params) {
            auto charts = rules.charts_for_task(t);
            allowed.insert(charts.begin(), charts.end());
        }
        std::vector<std::string> out;
        for (const auto& m : chart_types)
            if (allowed.count(m)) out.push_back(m);
        return out;
    }
    return chart_types;
}

bool has_channel_map(const vis_tree& tree, channel ch) {
    for (const auto& n : tree.nodes)
        if (n.op == op_kind::channel_map && n.chan && *n.chan == ch) return true;
    return false;
}

bool has_transform(const vis_tree& tree, op_kind op, channel ch) {
    for (const auto& n : tree.nodes)
        if (n.op == op && n.chan && *n.chan == ch) return true;
    return false;
}

// Index where a channel map on `ch` belongs: after mark/task and any channel
// map on an earlier channel.
std::size_t cm_insert_index(const vis_tree& tree, channel ch) {
    std::size_t at = 0;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        if (n.op == op_kind::mark || n.op == op_kind::task ||
            (n.op == op_kind::channel_map && n.chan &&
             static_cast<int>(*n.chan) < static_cast<int>(ch)))
            at = i + 1;
    }
    return at;
}

// Transforms go after encodings and bins, before sorts and filters.
std::size_t transform_insert_index(const vis_tree& tree) {
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        if (n.op == op_kind::sort || n.op == op_kind::value_filter) return i;
    }
    return tree.nodes.size();
}

injection_op noop(const std::string& name, const std::string& why) {
    return {name, "", why, false};
}

// ---- concrete rewrites, shared by the public ops and the level search ----

bool apply_ambiguous_at(vis_tree& tree, const ambiguity_metadata& meta,
                        const std::string& col, injection_op& op) {
    for (auto& n : tree.nodes) {
        bool site = n.tag == ambiguity_tag::explicit_ && n.params.size() == 1 &&
                    (n.op == op_kind::channel_map || n.op == op_kind::column_select) &&
                    lower(n.params[0]) == lower(col);
        if (!site) continue;
        auto partners = meta.partners_of(n.params[0]);
        if (partners.empty()) return false;
        auto pairs = meta.pairs_for(n.params[0]);
        std::string original = n.params[0];
        for (const auto& p : partners) {
            bool dup = std::any_of(n.params.begin(), n.params.end(), [&](const auto& q) {
                return lower(q) == lower(p);
            });
            if (!dup) n.params.push_back(p);
        }
        n.op = op_kind::column_select;
        n.chan.reset();
        n.tag = ambiguity_tag::ambiguous;
        n.category = "DS";
        n.nl_hint = pairs.empty() ? "" : pairs.front().shared_alias;
        op = {"inject_ambiguous", "DS",
              "column " + original + " now reads as any of {" + join(n.params, ", ") + "}",
              true};
        return true;
    }
    return false;
}

bool apply_relax_with(vis_tree& tree, const design_rules& rules, const std::string& task,
                      injection_op& op) {
    int mi = find_index(tree, op_kind::mark);
    if (mi < 0) throw no_mark_error("tree has no mark to relax");
    if (find_task(tree)) return false;
    action_node& mark = tree.nodes[mi];
    if (mark.tag != ambiguity_tag::explicit_ || mark.params.size() != 1) return false;
    if (!rules.tasks_for_chart(mark.params[0]).count(task)) return false;
    std::string original = mark.params[0];
    mark.tag = ambiguity_tag::implicit;
    mark.params.clear();
    mark.category = "CT";
    action_node task_node;
    task_node.tag = ambiguity_tag::explicit_;
    task_node.op = op_kind::task;
    task_node.params = {task};
    task_node.category = "CT";
    tree.nodes.insert(tree.nodes.begin() + mi + 1, task_node);
    op = {"relax_explicit", "CT",
          "mark " + original + " replaced by task " + task + " with an open chart type",
          true};
    return true;
}

bool color_insert_possible(const vis_tree& tree, const table& tab,
                           const design_rules& rules) {
    if (has_channel_map(tree, channel::color)) return false;
    auto marks = mark_candidates(tree, rules);
    if (marks.empty()) return false;
    for (const auto& m : marks) {
        if (!rules.channel_allowed(m, channel::color)) return false;
        bool any = std::any_of(tab.columns.begin(), tab.columns.end(), [&](const column& c) {
            return rules.dtype_allowed(m, channel::color, c.type);
        });
        if (!any) return false;
    }
    return true;
}

bool size_insert_possible(const vis_tree& tree, const table& tab,
                          const design_rules& rules) {
    if (has_channel_map(tree, channel::size)) return false;
    auto marks = mark_candidates(tree, rules);
    if (marks.size() != 1 || marks[0] != "scatter") return false;
    return std::any_of(tab.columns.begin(), tab.columns.end(), [&](const column& c) {
        return rules.dtype_allowed("scatter", channel::size, c.type);
    });
}

bool apply_insert_cm(vis_tree& tree, const table& tab, const design_rules& rules,
                     channel ch, injection_op& op) {
    bool ok = ch == channel::color ? color_insert_possible(tree, tab, rules)
                                   : size_insert_possible(tree, tab, rules);
    if (!ok) return false;
    action_node n;
    n.tag = ambiguity_tag::implicit;
    n.op = op_kind::channel_map;
    n.chan = ch;
    n.category = "CE";
    tree.nodes.insert(tree.nodes.begin() + cm_insert_index(tree, ch), n);
    op = {"add_implicit", "CE", "unstated " + to_string(ch) + " encoding left to the solver",
          true};
    return true;
}

bool apply_widen(vis_tree& tree, op_kind kind, const std::string& key, injection_op& op) {
    for (auto& n : tree.nodes) {
        if (n.op != kind || n.tag != ambiguity_tag::explicit_) continue;
        std::string here = kind == op_kind::bin ? (n.column ? lower(*n.column) : "")
                                                : (n.chan ? to_string(*n.chan) : "");
        if (here != lower(key)) continue;
        n.tag = ambiguity_tag::implicit;
        n.params.clear();
        n.category = "DT";
        op = {"add_implicit", "DT",
              "unstated " + to_string(kind) + " on " + key + " left to the solver", true};
        return true;
    }
    return false;
}

bool agg_insert_site(const vis_tree& tree, const table& tab, const design_rules& rules,
                     channel& out) {
    auto marks = mark_candidates(tree, rules);
    if (marks.size() != 1) return false;
    auto it = rules.measure_channel.find(marks[0]);
    if (it == rules.measure_channel.end()) return false;
    channel ch = it->second;
    if (has_transform(tree, op_kind::aggregate, ch)) return false;
    for (const auto& n : tree.nodes) {
        if (n.op != op_kind::channel_map || !n.chan || *n.chan != ch) continue;
        if (n.tag != ambiguity_tag::explicit_ || n.params.size() != 1) return false;
        if (tab.column_at(n.params[0]).type != data_type::quantitative) return false;
        out = ch;
        return true;
    }
    return false;
}

bool apply_insert_agg(vis_tree& tree, const table& tab, const design_rules& rules,
                      injection_op& op) {
    channel ch;
    if (!agg_insert_site(tree, tab, rules, ch)) return false;
    action_node n;
    n.tag = ambiguity_tag::implicit;
    n.op = op_kind::aggregate;
    n.chan = ch;
    n.category = "DT";
    tree.nodes.insert(tree.nodes.begin() + transform_insert_index(tree), n);
    op = {"add_implicit", "DT",
          "unstated aggregate on " + to_string(ch) + " left to the solver", true};
    return true;
}

bool demotable(const action_node& n) {
    if (n.tag != ambiguity_tag::explicit_) return false;
    switch (n.op) {
        case op_kind::channel_map:
        case op_kind::column_select:
        case op_kind::value_filter:
        case op_kind::bin:
        case op_kind::aggregate:
        case op_kind::sort: return true;
        default: return false;
    }
}

// Keeps the node's value but hides it from the surface form; domains are
// untouched, so the model count provably stays put.
injection_op demote(action_node& n) {
    n.tag = ambiguity_tag::implicit;
    n.category = category_of(n.op);
    return {"add_implicit", n.category, "hid the " + to_string(n.op) + " wording", true};
}

// A level-search candidate identified by a stable key, relocated in the
// current tree on every application.
struct candidate {
    std::string category;
    std::function<bool(vis_tree&, injection_op&)> apply;
};

std::vector<candidate> level_candidates(const vis_tree& seed, const table& tab,
                                        const ambiguity_metadata& meta,
                                        const design_rules& rules,
                                        const std::set<std::string>& categories) {
    std::vector<candidate> out;
    auto want = [&](const std::string& c) { return categories.count(c) > 0; };

    if (want("DS")) {
        std::set<std::string> seen;
        for (const auto& n : seed.nodes) {
            bool site = n.tag == ambiguity_tag::explicit_ && n.params.size() == 1 &&
                        (n.op == op_kind::channel_map || n.op == op_kind::column_select);
            if (!site || meta.partners_of(n.params[0]).empty()) continue;
            if (!seen.insert(lower(n.params[0])).second) continue;
            std::string col = n.params[0];
            out.push_back({"DS", [&meta, col](vis_tree& t, injection_op& op) {
                               return apply_ambiguous_at(t, meta, col, op);
                           }});
        }
    }
    if (want("CT")) {
        const action_node* mark = seed.find_mark();
        if (mark && mark->tag == ambiguity_tag::explicit_ && mark->params.size() == 1 &&
            !find_task(seed)) {
            for (const auto& t : rules.tasks_for_chart(mark->params[0]))
                out.push_back({"CT", [&rules, t](vis_tree& tr, injection_op& op) {
                                   return apply_relax_with(tr, rules, t, op);
                               }});
        }
    }
    if (want("CE")) {
        out.push_back({"CE", [&tab, &rules](vis_tree& t, injection_op& op) {
                           return apply_insert_cm(t, tab, rules, channel::color, op);
                       }});
        out.push_back({"CE", [&tab, &rules](vis_tree& t, injection_op& op) {
                           return apply_insert_cm(t, tab, rules, channel::size, op);
                       }});
    }
    if (want("DT")) {
        for (const auto& n : seed.nodes) {
            if (n.tag != ambiguity_tag::explicit_) continue;
            if (n.op == op_kind::bin && n.column) {
                std::string col = *n.column;
                out.push_back({"DT", [col](vis_tree& t, injection_op& op) {
                                   return apply_widen(t, op_kind::bin, col, op);
                               }});
            }
            if ((n.op == op_kind::aggregate || n.op == op_kind::sort) && n.chan) {
                op_kind kind = n.op;
                std::string ch = to_string(*n.chan);
                out.push_back({"DT", [kind, ch](vis_tree& t, injection_op& op) {
                                   return apply_widen(t, kind, ch, op);
                               }});
            }
        }
        out.push_back({"DT", [&tab, &rules](vis_tree& t, injection_op& op) {
                           return apply_insert_agg(t, tab, rules, op);
                       }});
    }
    return out;
}

}  // namespace

injection_op inject_ambiguous(vis_tree& tree, const table& tab,
                              const ambiguity_metadata& meta, std::mt19937_64& rng) {
    (void)tab;
    std::vector<std::string> sites;
    std::set<std::string> seen;
    for (const auto& n : tree.nodes) {
        bool site = n.tag == ambiguity_tag::explicit_ && n.params.size() == 1 &&
                    (n.op == op_kind::channel_map || n.op == op_kind::column_select);
        if (!site || meta.partners_of(n.params[0]).empty()) continue;
        if (seen.insert(lower(n.params[0])).second) sites.push_back(n.params[0]);
    }
    if (sites.empty())
        return noop("inject_ambiguous", "no explicit column participates in an alias pair");
    injection_op op;
    apply_ambiguous_at(tree, meta, sites[rng() % sites.size()], op);
    return op;
}

injection_op add_implicit(vis_tree& tree, const table& tab, const design_rules& rules,
                          std::mt19937_64& rng) {
    struct option {
        std::function<bool(vis_tree&, injection_op&)> apply;
    };
    std::vector<option> options;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        if (!demotable(tree.nodes[i])) continue;
        options.push_back({[i](vis_tree& t, injection_op& op) {
            op = demote(t.nodes[i]);
            return true;
        }});
    }
    if (color_insert_possible(tree, tab, rules))
        options.push_back({[&tab, &rules](vis_tree& t, injection_op& op) {
            return apply_insert_cm(t, tab, rules, channel::color, op);
        }});
    if (size_insert_possible(tree, tab, rules))
        options.push_back({[&tab, &rules](vis_tree& t, injection_op& op) {
            return apply_insert_cm(t, tab, rules, channel::size, op);
        }});
    for (const auto& n : tree.nodes) {
        if (n.tag != ambiguity_tag::explicit_) continue;
        if (n.op == op_kind::bin && n.column) {
            std::string col = *n.column;
            options.push_back({[col](vis_tree& t, injection_op& op) {
                return apply_widen(t, op_kind::bin, col, op);
            }});
        }
        if ((n.op == op_kind::aggregate || n.op == op_kind::sort) && n.chan) {
            op_kind kind = n.op;
            std::string ch = to_string(*n.chan);
            options.push_back({[kind, ch](vis_tree& t, injection_op& op) {
                return apply_widen(t, kind, ch, op);
            }});
        }
    }
    channel agg_ch;
    if (agg_insert_site(tree, tab, rules, agg_ch))
        options.push_back({[&tab, &rules](vis_tree& t, injection_op& op) {
            return apply_insert_agg(t, tab, rules, op);
        }});
    if (options.empty()) return noop("add_implicit", "no implicit rewrite available");
    injection_op op;
    options[rng() % options.size()].apply(tree, op);
    return op;
}

injection_op relax_explicit(vis_tree& tree, const design_rules& rules,
                            std::mt19937_64& rng) {
    int mi = find_index(tree, op_kind::mark);
    if (mi < 0) throw no_mark_error("tree has no mark to relax");
    if (find_task(tree)) return noop("relax_explicit", "task already fixed");
    const action_node& mark = tree.nodes[mi];
    if (mark.tag != ambiguity_tag::explicit_ || mark.params.size() != 1)
        return noop("relax_explicit", "mark is not a single explicit chart type");
    auto tasks = rules.tasks_for_chart(mark.params[0]);
    if (tasks.empty()) return noop("relax_explicit", "no task covers this chart type");
    std::vector<std::string> pool(tasks.begin(), tasks.end());
    injection_op op;
    apply_relax_with(tree, rules, pool[rng() % pool.size()], op);
    return op;
}

injection_result inject_to_level(const vis_tree& seed, const table& tab,
                                 const ambiguity_metadata& meta,
                                 const injection_config& cfg, const design_rules& rules) {
    if (cfg.min_level < 1 || cfg.max_level < cfg.min_level)
        throw config_error("injection level bounds are inverted or below 1");
    if (cfg.target_level != 0 &&
        (cfg.target_level < cfg.min_level || cfg.target_level > cfg.max_level))
        throw config_error("target level outside the level bounds");
    if (cfg.categories.empty()) throw config_error("no ambiguity categories enabled");
    for (const auto& c : cfg.categories)
        if (c != "CE" && c != "CT" && c != "DS" && c != "DT")
            throw config_error("unknown ambiguity category: " + c);
    if (cfg.max_attempts < 1) throw config_error("attempt budget must be positive");

    if (!seed.all_explicit())
        throw invalid_seed_error("seed tree must be fully explicit");
    if (resolve(seed, tab, rules, cfg.limits).size() != 1)
        throw invalid_seed_error("seed tree must have exactly one model");

    auto candidates = level_candidates(seed, tab, meta, rules, cfg.categories);
    std::mt19937_64 rng(cfg.rng_seed);
    auto on_target = [&](int k) {
        return cfg.target_level ? k == cfg.target_level
                                : k >= cfg.min_level && k <= cfg.max_level;
    };
    auto overshoots = [&](int k) {
        return cfg.target_level ? k > cfg.target_level : k > cfg.max_level;
    };
    int aim = cfg.target_level ? cfg.target_level : cfg.min_level;
    int best = 1;  // highest level any verified rewrite state reached
    auto track = [&](int k) { best = std::max(best, k); };

    auto finish = [&](vis_tree&& tree, int k, std::vector<injection_op>&& done) {
        if (cfg.decorate) {
            std::vector<std::size_t> idx(tree.nodes.size());
            std::iota(idx.begin(), idx.end(), 0);
            shuffle_vec(idx, rng);
            for (std::size_t i : idx) {
                action_node& n = tree.nodes[i];
                if (!demotable(n) || !cfg.categories.count(category_of(n.op)))
                    continue;
                if (rng() % 3 != 0) continue;
                done.push_back(demote(n));
            }
        }
        injection_result res;
        res.tree = std::move(tree);
        res.level = k;
        res.ops = std::move(done);
        res.pattern = res.tree.ambiguity_pattern();
        return res;
    };

    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        vis_tree tree = seed;
        std::vector<injection_op> done;
        auto order = candidates;
        shuffle_vec(order, rng);
        for (const auto& cand : order) {
            vis_tree snapshot = tree;
            injection_op op;
            if (!cand.apply(tree, op)) {
                tree = snapshot;
                continue;
            }
            int k = static_cast<int>(resolve(tree, tab, rules, cfg.limits).size());
            track(k);
            if (overshoots(k)) {
                tree = snapshot;
                continue;
            }
            done.push_back(op);
            if (on_target(k)) return finish(std::move(tree), k, std::move(done));
        }
    }

    // The greedy loop never passes through an overshoot state, so a target
    // reachable only via a non-monotone op combination can slip by; with few
    // candidates an exhaustive subset sweep both rescues those targets and
    // establishes the true maximum achievable level for the error report.
    if (candidates.size() <= 12) {
        std::size_t n = candidates.size();
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
            vis_tree tree = seed;
            std::vector<injection_op> done;
            bool applied = true;
            for (std::size_t i = 0; i < n && applied; ++i) {
                if (!(mask >> i & 1)) continue;
                injection_op op;
                applied = candidates[i].apply(tree, op);
                if (applied) done.push_back(op);
            }
            if (!applied) continue;  // infeasible combo; its sub-subsets get their own mask
            int k = static_cast<int>(resolve(tree, tab, rules, cfg.limits).size());
            track(k);
            if (on_target(k)) return finish(std::move(tree), k, std::move(done));
        }
    }
    throw target_unreachable_error(
        "no rewrite combination reached level " + std::to_string(aim) +
            "; maximum achievable level is " + std::to_string(best),
        best);
}

}  // namespace ambivis
