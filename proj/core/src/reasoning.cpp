#include "ambivis/reasoning.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "ambivis/error.hpp"
#include "ambivis/solver.hpp"

namespace ambivis {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string spaced(const std::string& column) {
    std::string out;
    for (char c : column) out += (c == '_' || c == '-') ? ' ' : static_cast<char>(std::tolower(c));
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// "bar" -> "a bar chart"; joined as "x, y or z".
std::string list_phrase(const std::vector<std::string>& items, const std::string& prefix,
                        const std::string& suffix) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += i + 1 == items.size() ? " or " : ", ";
        out += prefix + items[i] + suffix;
    }
    return out;
}

std::string filter_phrase(const filter_predicate& f) {
    std::string values = list_phrase(f.values, "", "");
    std::string rel = "matches";
    if (f.op == "in" || f.op == "eq") rel = "is";
    if (f.op == "gt") rel = "is above";
    if (f.op == "ge") rel = "is at least";
    if (f.op == "lt") rel = "is below";
    if (f.op == "le") rel = "is at most";
    return spaced(f.column) + " " + rel + " " + values;
}

std::vector<std::string> realized_columns(const std::vector<vis_spec>& specs, channel ch) {
    std::vector<std::string> out;
    for (const auto& s : specs) {
        auto it = s.encodings.find(ch);
        if (it == s.encodings.end()) continue;
        if (std::find(out.begin(), out.end(), it->second.column) == out.end())
            out.push_back(it->second.column);
    }
    return out;
}

json norm_value(const json& v) {
    if (v.is_string()) return lower(v.get<std::string>());
    if (v.is_object()) {
        json out = json::object();
        for (auto it = v.begin(); it != v.end(); ++it) out[it.key()] = norm_value(it.value());
        return out;
    }
    if (v.is_array()) {
        std::vector<json> items;
        for (const auto& e : v) items.push_back(norm_value(e));
        std::sort(items.begin(), items.end(),
                  [](const json& a, const json& b) { return a.dump() < b.dump(); });
        items.erase(std::unique(items.begin(), items.end()), items.end());
        return json(items);
    }
    return v;
}

// Optional prose polish; any malformed reply falls back to the templates.
void polish_prose(llm_client& llm, reasoning_path& path) {
    json steps = json::array();
    for (const auto& s : path.steps) steps.push_back({{"prose", s.prose}, {"actions", s.actions}});
    std::string prompt =
        "Rewrite each reasoning step below as one fluent sentence that keeps every "
        "named option. Reply as JSON: {\"steps\": [\"...\", \"...\", \"...\", \"...\", "
        "\"...\"]}\n\n" +
        steps.dump(2);
    std::string reply;
    try {
        reply = llm.chat({{"user", prompt}});
    } catch (const error&) {
        return;
    }
    json doc = json::parse(reply, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("steps")) return;
    const json& texts = doc["steps"];
    if (!texts.is_array() || texts.size() != path.steps.size()) return;
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        if (!texts[i].is_string() || texts[i].get<std::string>().empty()) return;
    }
    for (std::size_t i = 0; i < path.steps.size(); ++i)
        path.steps[i].prose = texts[i].get<std::string>();
}

}  // namespace

reasoning_path derive_gold_path(const vis_tree& tree,
                                const std::vector<resolved_tree>& resolved,
                                const table& tab, const design_rules& rules,
                                llm_client* llm) {
    std::vector<vis_spec> specs;
    for (const auto& rt : resolved) specs.push_back(flatten(rt, tab));

    reasoning_path path;
    path.steps.resize(5);
    for (int i = 0; i < 5; ++i) path.steps[i].index = i + 1;

    // Step 1: columns (grouped by source node, alternatives together) and
    // filter predicates.
    json s1 = json::array();
    std::vector<std::string> column_phrases, filter_phrases;
    for (const auto& n : tree.nodes) {
        if (n.op == op_kind::channel_map || n.op == op_kind::column_select) {
            std::vector<std::string> cols = n.params;
            if (cols.empty() && n.chan) cols = realized_columns(specs, *n.chan);
            if (cols.empty()) continue;
            s1.push_back({{"kind", "column"}, {"columns", cols}});
            std::vector<std::string> names;
            for (const auto& c : cols) names.push_back(spaced(c));
            column_phrases.push_back(cols.size() == 1
                                         ? "the " + names[0] + " column"
                                         : "a column that could be " +
                                               list_phrase(names, "", ""));
        }
        if (n.op == op_kind::value_filter && n.pred) {
            s1.push_back({{"kind", "filter"},
                          {"column", n.pred->column},
                          {"op", n.pred->op},
                          {"values", n.pred->values}});
            filter_phrases.push_back("keep rows where " + filter_phrase(*n.pred));
        }
    }
    path.steps[0].actions = s1;
    {
        std::string prose = "Pick the data first: " + list_phrase(column_phrases, "", "");
        for (const auto& f : filter_phrases) prose += "; " + f;
        path.steps[0].prose = prose + ".";
    }

    // Step 2: the stated task, if any, and every chart type the solver kept.
    json s2 = s1;
    std::string task;
    for (const auto& n : tree.nodes)
        if (n.op == op_kind::task && !n.params.empty()) task = n.params[0];
    if (!task.empty()) s2.push_back({{"kind", "task"}, {"task", task}});
    std::vector<std::string> charts;
    for (const auto& m : chart_types)
        for (const auto& s : specs)
            if (s.mark == m && std::find(charts.begin(), charts.end(), m) == charts.end())
                charts.push_back(m);
    s2.push_back({{"kind", "chart"}, {"charts", charts}});
    path.steps[1].actions = s2;
    {
        std::string chart_list = list_phrase(charts, "a ", " chart");
        std::string prose =
            task.empty() ? "As for the chart type, " + chart_list +
                               (charts.size() == 1 ? " fits the request."
                                                   : " would each fit the request.")
                         : "The request reads as a " + task + " question, so " + chart_list +
                               (charts.size() == 1 ? " fits." : " would each fit.");
        path.steps[1].prose = prose;
    }

    // Step 3: channel bindings realized across the resolved set.
    json s3 = s2;
    std::vector<std::string> mapping_phrases;
    for (channel ch : all_channels) {
        auto cols = realized_columns(specs, ch);
        if (cols.empty()) continue;
        s3.push_back({{"kind", "mapping"}, {"channel", to_string(ch)}, {"columns", cols}});
        std::vector<std::string> names;
        for (const auto& c : cols) names.push_back(spaced(c));
        mapping_phrases.push_back(to_string(ch) + " carries " + list_phrase(names, "", ""));
    }
    path.steps[2].actions = s3;
    path.steps[2].prose = "Bind the channels: " + list_phrase(mapping_phrases, "", "") + ".";

    // Step 4: transforms realized across the resolved set.
    json s4 = s3;
    std::vector<std::string> transform_phrases;
    std::vector<std::string> bin_cols;
    for (const auto& s : specs)
        for (const auto& [ch, enc] : s.encodings)
            if (enc.bin_unit &&
                std::find(bin_cols.begin(), bin_cols.end(), enc.column) == bin_cols.end())
                bin_cols.push_back(enc.column);
    for (const auto& col : bin_cols) {
        std::vector<std::string> units;
        for (const auto& s : specs)
            for (const auto& [ch, enc] : s.encodings)
                if (enc.column == col && enc.bin_unit &&
                    std::find(units.begin(), units.end(), *enc.bin_unit) == units.end())
                    units.push_back(*enc.bin_unit);
        s4.push_back({{"kind", "bin"}, {"column", col}, {"units", units}});
        transform_phrases.push_back("group " + spaced(col) + " by " +
                                    list_phrase(units, "", ""));
    }
    for (channel ch : all_channels) {
        std::vector<std::string> fns;
        for (const auto& s : specs) {
            auto it = s.encodings.find(ch);
            if (it == s.encodings.end() || !it->second.aggregate) continue;
            if (std::find(fns.begin(), fns.end(), *it->second.aggregate) == fns.end())
                fns.push_back(*it->second.aggregate);
        }
        if (fns.empty()) continue;
        s4.push_back({{"kind", "aggregate"}, {"channel", to_string(ch)}, {"fns", fns}});
        transform_phrases.push_back("combine " + to_string(ch) + " with " +
                                    list_phrase(fns, "", ""));
    }
    for (channel ch : all_channels) {
        std::vector<std::string> dirs;
        for (const auto& s : specs)
            if (s.sort && s.sort->first == ch &&
                std::find(dirs.begin(), dirs.end(), s.sort->second) == dirs.end())
                dirs.push_back(s.sort->second);
        if (dirs.empty()) continue;
        s4.push_back({{"kind", "sort"}, {"channel", to_string(ch)}, {"directions", dirs}});
        transform_phrases.push_back("order " + to_string(ch) + " " +
                                    list_phrase(dirs, "", ""));
    }
    path.steps[3].actions = s4;
    path.steps[3].prose = transform_phrases.empty()
                              ? "No further shaping of the data is needed."
                              : "Shape the data: " +
                                    list_phrase(transform_phrases, "", "") + ".";

    // Step 5: the canonical spec set.
    std::vector<canonical_spec> canon;
    for (const auto& s : specs) canon.push_back(canonicalize(s, rules));
    std::sort(canon.begin(), canon.end());
    json s5 = json::array();
    for (const auto& c : canon) s5.push_back(c.normalized);
    path.steps[4].actions = s5;
    path.steps[4].prose =
        "Every reading that survives the chart rules is kept: " +
        std::to_string(canon.size()) +
        (canon.size() == 1 ? " valid chart results." : " valid charts result.");

    if (llm) polish_prose(*llm, path);
    return path;
}

nlohmann::json normalize_actions(const nlohmann::json& actions) {
    return norm_value(actions);
}

int first_error_step(const reasoning_path& pred, const reasoning_path& gold,
                     bool subset_ok) {
    if (pred.steps.size() != 5 || gold.steps.size() != 5)
        throw malformed_path_error("reasoning paths need exactly five steps");
    for (int k = 0; k < 5; ++k) {
        json p = normalize_actions(pred.steps[k].actions);
        json g = normalize_actions(gold.steps[k].actions);
        if (p == g) continue;
        if (subset_ok && p.is_array() && g.is_array() && !p.empty()) {
            bool inside = std::all_of(p.begin(), p.end(), [&](const json& e) {
                return std::find(g.begin(), g.end(), e) != g.end();
            });
            if (inside) continue;
        }
        return k + 1;
    }
    return 0;
}

std::string render_step_tagged(const step_answer& step) {
    std::string n = std::to_string(step.index);
    return "<step_" + n + "><thinking>" + step.prose + "</thinking><answer>" +
           step.actions.dump() + "</answer></step_" + n + ">";
}

std::string render_step_tagged(const reasoning_path& path) {
    std::string out;
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        if (i) out += "\n";
        out += render_step_tagged(path.steps[i]);
    }
    return out;
}

reasoning_path parse_step_tagged(const std::string& text) {
    reasoning_path path;
    std::size_t cursor = 0;
    for (int k = 1; k <= 5; ++k) {
        std::string n = std::to_string(k);
        std::string open = "<step_" + n + ">", close = "</step_" + n + ">";
        auto spos = text.find(open, cursor);
        if (spos == std::string::npos) throw tag_error("missing " + open);
        auto send = text.find(close, spos);
        if (send == std::string::npos) throw tag_error("missing " + close);
        std::string body = text.substr(spos + open.size(), send - spos - open.size());

        auto topen = body.find("<thinking>");
        auto tclose = body.find("</thinking>");
        auto aopen = body.find("<answer>");
        auto aclose = body.find("</answer>");
        if (topen == std::string::npos || tclose == std::string::npos ||
            aopen == std::string::npos || aclose == std::string::npos ||
            tclose < topen || aopen < tclose || aclose < aopen)
            throw tag_error("malformed thinking/answer tags inside step_" + n);

        step_answer step;
        step.index = k;
        step.prose = trim(body.substr(topen + 10, tclose - topen - 10));
        std::string answer = trim(body.substr(aopen + 8, aclose - aopen - 8));
        json parsed = json::parse(answer, nullptr, false);
        step.actions = parsed.is_discarded() ? json(answer) : parsed;
        path.steps.push_back(std::move(step));
        cursor = send + close.size();
    }
    return path;
}

nlohmann::json path_to_json(const reasoning_path& path) {
    json steps = json::array();
    for (const auto& s : path.steps)
        steps.push_back({{"index", s.index}, {"actions", s.actions}, {"prose", s.prose}});
    return json{{"steps", steps}};
}

reasoning_path path_from_json(const nlohmann::json& doc) {
    reasoning_path path;
    for (const auto& s : doc.value("steps", json::array())) {
        step_answer step;
        step.index = s.value("index", 0);
        step.actions = s.value("actions", json::array());
        step.prose = s.value("prose", "");
        path.steps.push_back(std::move(step));
    }
    return path;
}

std::vector<preference_pair> build_preference_pairs(
    const std::vector<preference_input>& samples,
    const std::vector<reasoning_path>& predictions, bool subset_ok) {
    if (samples.size() != predictions.size())
        throw alignment_error("predictions do not align 1:1 with samples");
    std::vector<preference_pair> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        int k = first_error_step(predictions[i], samples[i].gold, subset_ok);
        if (k == 0) continue;
        preference_pair p;
        p.id = samples[i].id;
        p.step = k;
        p.x = samples[i].x;
        for (int j = 0; j + 1 < k; ++j) {
            if (j) p.prefix += "\n";
            p.prefix += render_step_tagged(predictions[i].steps[j]);
        }
        p.win = render_step_tagged(samples[i].gold.steps[k - 1]);
        p.lose = render_step_tagged(predictions[i].steps[k - 1]);
        out.push_back(std::move(p));
    }
    return out;
}

nlohmann::json pair_to_json(const preference_pair& p) {
    return json{{"id", p.id},     {"step", p.step}, {"x", p.x},
                {"prefix", p.prefix}, {"win", p.win},   {"lose", p.lose}};
}

preference_pair pair_from_json(const nlohmann::json& doc) {
    preference_pair p;
    p.id = doc.value("id", "");
    p.step = doc.value("step", 0);
    p.x = doc.value("x", "");
    p.prefix = doc.value("prefix", "");
    p.win = doc.value("win", "");
    p.lose = doc.value("lose", "");
    return p;
}

}  // namespace ambivis
