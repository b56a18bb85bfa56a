#include "ambivis/solver.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ambivis/error.hpp"

namespace ambivis {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string atom(std::string s) {
    s = lower(std::move(s));
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) s.insert(s.begin(), 'v');
    return s;
}

bool is_known_chart(const std::string& m) {
    return std::find(chart_types.begin(), chart_types.end(), m) != chart_types.end();
}

// Flattened, never-throwing view of one assignment used by the checker.
struct assignment_view {
    std::string mark;
    std::optional<std::string> task;
    std::map<channel, encoding> encodings;
    std::vector<std::pair<channel, std::string>> sorts;
    std::vector<filter_predicate> filters;
    std::vector<std::string> structural;
};

bool discrete(const encoding& e) {
    return e.dtype == data_type::categorical || e.bin_unit.has_value();
}

std::vector<std::string> check_view(const assignment_view& v, const design_rules& rules) {
    std::vector<std::string> out = v.structural;
    if (!is_known_chart(v.mark)) out.push_back(violation::unknown_mark);

    if (v.encodings.empty()) {
        out.push_back(violation::no_encodings);
    } else {
        for (const auto& [ch, enc] : v.encodings) {
            if (!rules.dtype_allowed(v.mark, ch, enc.dtype))
                out.push_back(violation::channel_incompat);
            if (enc.dtype == data_type::temporal && !enc.bin_unit)
                out.push_back(violation::temporal_unbinned);
            if (enc.bin_unit) {
                if (std::find(rules.bin_units.begin(), rules.bin_units.end(),
                              *enc.bin_unit) == rules.bin_units.end())
                    out.push_back(violation::unknown_bin_unit);
                if (enc.dtype != data_type::temporal)
                    out.push_back(violation::bin_incompat);
            }
            if (enc.aggregate) {
                const std::string& fn = *enc.aggregate;
                bool known = std::find(rules.aggregates.begin(), rules.aggregates.end(),
                                       fn) != rules.aggregates.end();
                if (!known || (fn != "count" && enc.dtype != data_type::quantitative))
                    out.push_back(violation::aggregate_incompat);
            }
        }
        auto req = rules.required_channels.find(v.mark);
        if (req != rules.required_channels.end()) {
            for (channel rc : req->second)
                if (!v.encodings.count(rc)) out.push_back(violation::missing_channel);
        }
        // A quantitative measure over purely discrete keys needs an
        // aggregate, otherwise the grouped values are undefined.
        auto measure = rules.measure_channel.find(v.mark);
        if (measure != rules.measure_channel.end()) {
            auto me = v.encodings.find(measure->second);
            if (me != v.encodings.end() && me->second.dtype == data_type::quantitative &&
                !me->second.aggregate) {
                auto keys = rules.key_channels.find(v.mark);
                bool all_keys_discrete = keys != rules.key_channels.end();
                if (all_keys_discrete) {
                    for (channel kc : keys->second) {
                        auto ke = v.encodings.find(kc);
                        if (ke == v.encodings.end() || !discrete(ke->second)) {
                            all_keys_discrete = false;
                            break;
                        }
                    }
                }
                if (all_keys_discrete) out.push_back(violation::missing_aggregate);
            }
        }
    }
    for (const auto& [ch, dir] : v.sorts) {
        if (std::find(sort_directions.begin(), sort_directions.end(), dir) ==
            sort_directions.end())
            out.push_back(violation::unknown_sort);
    }
    if (v.task) {
        auto charts = rules.charts_for_task(*v.task);
        if (!charts.count(v.mark)) out.push_back(violation::task_mismatch);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

assignment_view build_view(const constraint_program& p, const model_assignment& a) {
    assignment_view v;
    v.filters = p.filters;
    // Pending selects resolved after channel maps so conflicts blame the
    // select, not the declared map.
    std::map<int, std::pair<std::string, std::string>> selects;  // id -> (field, channel)
    for (std::size_t i = 0; i < p.slots.size(); ++i) {
        const slot& s = p.slots[i];
        int pick = i < a.size() ? a[i] : -1;
        if (pick < 0) continue;
        const std::string& value = s.domain[static_cast<std::size_t>(pick)];
        switch (s.role) {
            case slot_role::mark_type: v.mark = value; break;
            case slot_role::task_value: v.task = value; break;
            case slot_role::enc_field: {
                encoding e;
                e.column = value;
                e.dtype = p.tab->column_at(value).type;
                if (!v.encodings.emplace(*s.chan, e).second)
                    v.structural.push_back(violation::field_conflict);
                break;
            }
            case slot_role::sel_field: selects[s.select_id].first = value; break;
            case slot_role::sel_channel: selects[s.select_id].second = value; break;
            default: break;
        }
    }
    for (const auto& [id, fc] : selects) {
        if (fc.first.empty() || fc.second.empty()) {
            v.structural.push_back(violation::orphan_transform);
            continue;
        }
        encoding e;
        e.column = fc.first;
        e.dtype = p.tab->column_at(fc.first).type;
        if (!v.encodings.emplace(channel_from_string(fc.second), e).second)
            v.structural.push_back(violation::field_conflict);
    }
    for (std::size_t i = 0; i < p.slots.size(); ++i) {
        const slot& s = p.slots[i];
        int pick = i < a.size() ? a[i] : -1;
        if (pick < 0) continue;
        const std::string& value = s.domain[static_cast<std::size_t>(pick)];
        switch (s.role) {
            case slot_role::bin_unit: {
                bool bound = false;
                for (auto& [ch, enc] : v.encodings) {
                    if (lower(enc.column) == lower(*s.column)) {
                        enc.bin_unit = value;
                        bound = true;
                    }
                }
                if (!bound) v.structural.push_back(violation::orphan_transform);
                break;
            }
            case slot_role::agg_fn: {
                auto it = v.encodings.find(*s.chan);
                if (it == v.encodings.end())
                    v.structural.push_back(violation::orphan_transform);
                else
                    it->second.aggregate = value;
                break;
            }
            case slot_role::sort_dir: {
                if (!v.encodings.count(*s.chan))
                    v.structural.push_back(violation::orphan_transform);
                else
                    v.sorts.emplace_back(*s.chan, value);
                break;
            }
            default: break;
        }
    }
    return v;
}

// Columns usable on `ch` under at least one mark candidate.
std::vector<std::string> legal_columns(const table& tab, const design_rules& rules,
                                       const std::vector<std::string>& marks, channel ch) {
    std::vector<std::string> out;
    for (const auto& col : tab.columns) {
        bool ok = std::any_of(marks.begin(), marks.end(), [&](const std::string& m) {
            return rules.dtype_allowed(m, ch, col.type);
        });
        if (ok) out.push_back(col.name);
    }
    return out;
}

std::vector<std::string> legal_channels(const table& tab, const design_rules& rules,
                                        const std::vector<std::string>& marks,
                                        const std::vector<std::string>& fields) {
    std::vector<std::string> out;
    for (channel ch : all_channels) {
        bool ok = false;
        for (const auto& f : fields) {
            data_type t = tab.column_at(f).type;
            for (const auto& m : marks) {
                if (rules.dtype_allowed(m, ch, t)) {
                    ok = true;
                    break;
                }
            }
            if (ok) break;
        }
        if (ok) out.push_back(to_string(ch));
    }
    return out;
}

}  // namespace

constraint_program compile(const vis_tree& tree, const table& tab, const design_rules& rules) {
    constraint_program p;
    p.table_ref = tree.table_ref.empty() ? tab.name : tree.table_ref;
    p.tab = &tab;
    p.rules = &rules;
    p.entities.push_back({"root", "none", "root"});

    auto canon_column = [&](const std::string& c) {
        return tab.columns[tab.column_index(c)].name;  // unknown_column_error on miss
    };
    auto node_domain = [&](const action_node& n, std::vector<std::string> full) {
        if (n.params.empty()) return full;
        if (n.tag == ambiguity_tag::explicit_ && n.params.size() != 1)
            throw parse_error("explicit node must carry exactly one param");
        return n.params;
    };

    const action_node* mark_node = nullptr;
    const action_node* task_node = nullptr;
    std::map<channel, const action_node*> cm_nodes;
    std::vector<const action_node*> select_nodes, bin_nodes, agg_nodes, sort_nodes;
    for (const auto& n : tree.nodes) {
        switch (n.op) {
            case op_kind::mark:
                if (mark_node) throw parse_error("tree has more than one mark node");
                mark_node = &n;
                break;
            case op_kind::task:
                if (task_node) throw parse_error("tree has more than one task node");
                task_node = &n;
                break;
            case op_kind::channel_map: {
                if (!n.chan) throw parse_error("channel map lacks a channel");
                if (!cm_nodes.emplace(*n.chan, &n).second)
                    throw parse_error("two channel maps on channel " + to_string(*n.chan));
                break;
            }
            case op_kind::column_select: select_nodes.push_back(&n); break;
            case op_kind::bin: bin_nodes.push_back(&n); break;
            case op_kind::aggregate: agg_nodes.push_back(&n); break;
            case op_kind::sort: sort_nodes.push_back(&n); break;
            case op_kind::value_filter: {
                if (!n.pred) throw parse_error("filter node lacks a predicate");
                filter_predicate f = *n.pred;
                f.column = canon_column(f.column);
                p.filters.push_back(f);
                break;
            }
        }
    }
    if (!mark_node) throw missing_mark_error("tree has no mark node");

    // Mark domain, narrowed by the task's chart set when a task is present.
    std::vector<std::string> mark_domain = node_domain(*mark_node, chart_types);
    std::vector<std::string> task_domain;
    if (task_node) {
        task_domain = node_domain(*task_node, analytic_tasks);
        std::set<std::string> allowed;
        for (const auto& t : task_domain) {
            auto charts = rules.charts_for_task(t);
            allowed.insert(charts.begin(), charts.end());
        }
        if (mark_node->params.empty()) {
            std::vector<std::string> narrowed;
            for (const auto& m : mark_domain)
                if (allowed.count(m)) narrowed.push_back(m);
            mark_domain = narrowed;
        }
    }

    p.entities.push_back({"mark", "root", "mark_0"});
    p.slots.push_back({slot_role::mark_type, "mark_0", "(mark, type)", std::nullopt,
                       std::nullopt, -1, mark_domain, 1});
    if (task_node) {
        p.entities.push_back({"task", "root", "task_0"});
        p.slots.push_back({slot_role::task_value, "task_0", "(task, value)", std::nullopt,
                           std::nullopt, -1, task_domain, 1});
    }

    for (channel ch : all_channels) {
        auto it = cm_nodes.find(ch);
        if (it == cm_nodes.end()) continue;
        const action_node& n = *it->second;
        std::vector<std::string> domain =
            node_domain(n, legal_columns(tab, rules, mark_domain, ch));
        for (auto& c : domain) c = canon_column(c);
        std::string id = "enc_" + to_string(ch);
        p.entities.push_back({"encoding", "mark_0", id});
        p.slots.push_back({slot_role::enc_field, id, "(encoding, field)", ch, std::nullopt,
                           -1, domain, 1});
    }

    int sel_id = 0;
    for (const action_node* n : select_nodes) {
        std::vector<std::string> fields;
        if (n->params.empty()) {
            for (const auto& c : tab.columns) fields.push_back(c.name);
        } else {
            for (const auto& c : n->params) fields.push_back(canon_column(c));
        }
        std::string id = "sel_" + std::to_string(sel_id);
        p.entities.push_back({"select", "mark_0", id});
        p.slots.push_back({slot_role::sel_field, id, "(select, field)", std::nullopt,
                           std::nullopt, sel_id, fields, 1});
        p.slots.push_back({slot_role::sel_channel, id, "(select, channel)", std::nullopt,
                           std::nullopt, sel_id,
                           legal_channels(tab, rules, mark_domain, fields), 1});
        ++sel_id;
    }

    std::set<std::string> seen_bins;
    for (const action_node* n : bin_nodes) {
        if (!n->column) throw parse_error("bin node lacks a column");
        std::string col = canon_column(*n->column);
        if (!seen_bins.insert(lower(col)).second)
            throw parse_error("two bin nodes on column " + col);
        std::string id = "bin_" + atom(col);
        p.entities.push_back({"transform", "root", id});
        p.slots.push_back({slot_role::bin_unit, id, "(bin, unit)", std::nullopt, col, -1,
                           node_domain(*n, rules.bin_units), 1});
    }
    std::set<channel> seen_aggs;
    for (const action_node* n : agg_nodes) {
        if (!n->chan) throw parse_error("aggregate node lacks a channel");
        if (!seen_aggs.insert(*n->chan).second)
            throw parse_error("two aggregate nodes on channel " + to_string(*n->chan));
        std::string id = "agg_" + to_string(*n->chan);
        p.entities.push_back({"transform", "root", id});
        p.slots.push_back({slot_role::agg_fn, id, "(aggregate, fn)", *n->chan, std::nullopt,
                           -1, node_domain(*n, rules.aggregates), 1});
    }
    std::set<channel> seen_sorts;
    for (const action_node* n : sort_nodes) {
        if (!n->chan) throw parse_error("sort node lacks a channel");
        if (!seen_sorts.insert(*n->chan).second)
            throw parse_error("two sort nodes on channel " + to_string(*n->chan));
        std::string id = "sort_" + to_string(*n->chan);
        p.entities.push_back({"transform", "root", id});
        p.slots.push_back({slot_role::sort_dir, id, "(sort, direction)", *n->chan,
                           std::nullopt, -1, node_domain(*n, sort_directions), 1});
    }
    for (std::size_t i = 0; i < p.filters.size(); ++i)
        p.entities.push_back({"filter", "root", "filter_" + std::to_string(i)});
    return p;
}

std::vector<std::string> check_hard_constraints(const constraint_program& program,
                                                const model_assignment& assignment) {
    return check_view(build_view(program, assignment), *program.rules);
}

std::vector<std::string> spec_violations(const vis_spec& spec, const table& tab,
                                         const design_rules& rules) {
    assignment_view v;
    v.mark = lower(spec.mark);
    v.task = spec.task;
    for (const auto& [ch, enc] : spec.encodings) {
        encoding e = enc;
        e.dtype = tab.column_at(e.column).type;
        v.encodings[ch] = e;
    }
    if (spec.sort) {
        if (!v.encodings.count(spec.sort->first))
            v.structural.push_back(violation::orphan_transform);
        else
            v.sorts.push_back(*spec.sort);
    }
    v.filters = spec.filters;
    for (const auto& f : v.filters) tab.column_index(f.column);  // existence check
    return check_view(v, rules);
}

std::vector<model_assignment> enumerate_models(const constraint_program& program,
                                               const solve_limits& limits) {
    std::vector<model_assignment> models;
    const auto& slots = program.slots;
    model_assignment current(slots.size(), -1);

    // Channels already carrying a field under the partial assignment.
    auto occupied = [&](std::size_t depth) {
        std::set<channel> used;
        for (std::size_t i = 0; i < depth; ++i) {
            if (current[i] < 0) continue;
            if (slots[i].role == slot_role::enc_field) used.insert(*slots[i].chan);
            if (slots[i].role == slot_role::sel_channel)
                used.insert(channel_from_string(slots[i].domain[current[i]]));
        }
        return used;
    };

    std::function<void(std::size_t)> recurse = [&](std::size_t depth) {
        if (models.size() >= limits.max_models)
            throw error("model budget exceeded while enumerating");
        if (depth == slots.size()) {
            if (check_hard_constraints(program, current).empty()) models.push_back(current);
            return;
        }
        const slot& s = slots[depth];
        std::string mark;
        if (!slots.empty() && slots[0].role == slot_role::mark_type && current[0] >= 0)
            mark = slots[0].domain[current[0]];

        for (std::size_t v = 0; v < s.domain.size(); ++v) {
            const std::string& value = s.domain[v];
            // Sound prunes only: every pruned branch fails the final check
            // for the same named violation.
            if (s.role == slot_role::enc_field && !mark.empty()) {
                if (!program.rules->dtype_allowed(mark, *s.chan,
                                                  program.tab->column_at(value).type))
                    continue;
            }
            if (s.role == slot_role::sel_channel && !mark.empty()) {
                channel ch = channel_from_string(value);
                int fi = static_cast<int>(depth) - 1;
                if (fi >= 0 && slots[fi].role == slot_role::sel_field &&
                    slots[fi].select_id == s.select_id && current[fi] >= 0) {
                    data_type t =
                        program.tab->column_at(slots[fi].domain[current[fi]]).type;
                    if (!program.rules->dtype_allowed(mark, ch, t)) continue;
                }
                if (occupied(depth).count(ch)) continue;
            }
            current[depth] = static_cast<int>(v);
            recurse(depth + 1);
        }
        if (s.min_card == 0) {
            current[depth] = -1;
            recurse(depth + 1);
        }
        current[depth] = -1;
    };
    recurse(0);
    return models;
}

resolved_tree reify(const constraint_program& program, const model_assignment& assignment) {
    resolved_tree rt;
    rt.table_ref = program.table_ref;
    auto value_of = [&](std::size_t i) { return program.slots[i].domain[assignment[i]]; };

    std::map<channel, std::string> fields;
    std::optional<std::string> mark, task;
    for (std::size_t i = 0; i < program.slots.size(); ++i) {
        if (assignment[i] < 0) continue;
        const slot& s = program.slots[i];
        if (s.role == slot_role::mark_type) mark = value_of(i);
        if (s.role == slot_role::task_value) task = value_of(i);
        if (s.role == slot_role::enc_field) fields[*s.chan] = value_of(i);
        if (s.role == slot_role::sel_field) {
            // Find the paired channel slot.
            for (std::size_t j = 0; j < program.slots.size(); ++j) {
                if (program.slots[j].role == slot_role::sel_channel &&
                    program.slots[j].select_id == s.select_id && assignment[j] >= 0) {
                    fields.emplace(channel_from_string(value_of(j)), value_of(i));
                    break;
                }
            }
        }
    }
    if (!mark) throw missing_mark_error("assignment fixes no mark");

    action_node mn;
    mn.op = op_kind::mark;
    mn.params = {*mark};
    rt.nodes.push_back(mn);
    if (task) {
        action_node tn;
        tn.op = op_kind::task;
        tn.params = {*task};
        rt.nodes.push_back(tn);
    }
    for (channel ch : all_channels) {
        auto it = fields.find(ch);
        if (it == fields.end()) continue;
        action_node cm;
        cm.op = op_kind::channel_map;
        cm.chan = ch;
        cm.params = {it->second};
        rt.nodes.push_back(cm);
    }
    for (std::size_t i = 0; i < program.slots.size(); ++i) {
        if (assignment[i] < 0) continue;
        const slot& s = program.slots[i];
        if (s.role == slot_role::bin_unit) {
            action_node n;
            n.op = op_kind::bin;
            n.column = s.column;
            n.params = {value_of(i)};
            rt.nodes.push_back(n);
        }
    }
    for (std::size_t i = 0; i < program.slots.size(); ++i) {
        if (assignment[i] < 0) continue;
        const slot& s = program.slots[i];
        if (s.role == slot_role::agg_fn) {
            action_node n;
            n.op = op_kind::aggregate;
            n.chan = s.chan;
            n.params = {value_of(i)};
            rt.nodes.push_back(n);
        }
    }
    for (std::size_t i = 0; i < program.slots.size(); ++i) {
        if (assignment[i] < 0) continue;
        const slot& s = program.slots[i];
        if (s.role == slot_role::sort_dir) {
            action_node n;
            n.op = op_kind::sort;
            n.chan = s.chan;
            n.params = {value_of(i)};
            rt.nodes.push_back(n);
        }
    }
    for (const auto& f : program.filters) {
        action_node n;
        n.op = op_kind::value_filter;
        n.pred = f;
        rt.nodes.push_back(n);
    }
    return rt;
}

std::vector<resolved_tree> resolve(const vis_tree& tree, const table& tab,
                                   const design_rules& rules, const solve_limits& limits) {
    constraint_program p = compile(tree, tab, rules);
    std::vector<resolved_tree> out;
    std::set<std::string> seen;
    for (const auto& a : enumerate_models(p, limits)) {
        resolved_tree rt = reify(p, a);
        std::string key = canonicalize(flatten(rt, tab), rules).key();
        if (seen.insert(key).second) out.push_back(std::move(rt));
    }
    return out;
}

std::string dump_asp(const constraint_program& program) {
    std::ostringstream out;
    out << "% program over table " << atom(program.table_ref) << "\n";
    for (const auto& e : program.entities)
        out << "entity(" << e.kind << ", " << (e.parent == "none" ? "none" : atom(e.parent))
            << ", " << atom(e.id) << ").\n";
    for (const auto& s : program.slots) {
        if (s.domain.size() == 1 && s.min_card == 1) {
            out << "attribute(" << s.attr << ", " << atom(s.entity) << ", "
                << atom(s.domain[0]) << ").\n";
            continue;
        }
        out << "domain(" << s.attr << ", (";
        for (std::size_t i = 0; i < s.domain.size(); ++i)
            out << (i ? "; " : "") << atom(s.domain[i]);
        out << ")).\n";
        out << s.min_card << " { ";
        for (std::size_t i = 0; i < s.domain.size(); ++i) {
            if (i) out << "; ";
            out << "attribute(" << s.attr << ", " << atom(s.entity) << ", "
                << atom(s.domain[i]) << ")";
        }
        out << " } 1.\n";
    }
    for (std::size_t i = 0; i < program.filters.size(); ++i) {
        const auto& f = program.filters[i];
        out << "attribute((filter, predicate), filter_" << i << ", \"" << atom(f.column)
            << " " << f.op << " (";
        for (std::size_t j = 0; j < f.values.size(); ++j)
            out << (j ? "; " : "") << f.values[j];
        out << ")\").\n";
    }
    out << "violation(no_encodings) :- entity(mark, _, M), not entity(encoding, M, _).\n"
        << "violation(missing_channel) :- required(Mark, C), attribute((mark, type), _, "
           "Mark), not attribute((encoding, field), enc(C), _).\n"
        << "violation(channel_incompat) :- attribute((encoding, field), E, F), "
           "not compatible(mark_of(E), channel_of(E), dtype(F)).\n"
        << "violation(field_conflict) :- attribute((encoding, field), E, F1), "
           "attribute((encoding, field), E, F2), F1 < F2.\n"
        << "violation(temporal_unbinned) :- attribute((encoding, field), E, F), "
           "dtype(F) = temporal, not attribute((bin, unit), bin_of(F), _).\n"
        << "violation(missing_aggregate) :- measure(Mark, C), quantitative(C), "
           "discrete_keys(Mark), not attribute((aggregate, fn), agg(C), _).\n"
        << "violation(task_mismatch) :- attribute((task, value), _, T), "
           "attribute((mark, type), _, M), not task_chart(T, M).\n";
    return out.str();
}

}  // namespace ambivis
