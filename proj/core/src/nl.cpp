#include "ambivis/nl.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ambivis/error.hpp"
#include "ambivis/rules.hpp"

namespace ambivis {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> word_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char raw : text) {
        auto c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Contiguous token-sequence containment; underscores and case differences
// wash out, so "World_Gross" matches "world gross" but not plain "gross".
bool mentions(const std::string& text, const std::string& phrase) {
    auto hay = word_tokens(text);
    auto needle = word_tokens(phrase);
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i)
        if (std::equal(needle.begin(), needle.end(), hay.begin() + i)) return true;
    return false;
}

bool contains_ci(const std::string& hay, const std::string& needle) {
    return !needle.empty() && lower(hay).find(lower(needle)) != std::string::npos;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string schema_line(const table& tab) {
    std::string out;
    for (std::size_t i = 0; i < tab.columns.size(); ++i) {
        if (i) out += ", ";
        out += tab.columns[i].name + " (" + to_string(tab.columns[i].type) + ")";
    }
    return out;
}

constexpr const char* generator_template = R"(You write one natural-language chart request for a visualization action tree.
Explicit actions are named outright. Ambiguous actions list candidate
readings: refer to them with wording that fits every candidate without naming
any. Implicit actions are required but unsaid: their wording must not reveal
the hidden value.

Data Schema: {{schema}}
Table: {{table}}
NL Style: {{style}}

Style examples:
{{exemplars}}

Action tree:
```json
{{tree}}
```

Write exactly one {{style}} sentence that realizes every node, then repeat
the node list adding an "nl_reference" field holding the exact phrase of your
sentence that realizes each node.

Reply exactly as:
NL: <sentence>
Reference Tree: <json array of nodes with nl_reference>
)";

constexpr const char* verifier_template = R"(You check a chart request against its visualization action tree.

Data Schema: {{schema}}
Query: {{query}}

Action tree:
```json
{{tree}}
```

Claimed references:
```json
{{references}}
```

Step 1: map each phrase of the query to the index of the node it realizes;
every node index must be covered.
Step 2: list every query phrase that matches no node at all.

Reply as JSON: {"l1": [[phrase, node_index], ...], "l2": [phrase, ...]}
)";

std::string load_template(const std::string& prompts_dir, const std::string& file,
                          const char* fallback) {
    if (!prompts_dir.empty()) {
        std::ifstream in(prompts_dir + "/" + file);
        if (in) {
            std::ostringstream buf;
            buf << in.rdbuf();
            return buf.str();
        }
    }
    return fallback;
}

std::vector<exemplar> sample_shots(const std::vector<exemplar>& pool, nl_style style,
                                   int count, std::mt19937_64& rng) {
    std::vector<exemplar> filtered;
    for (const auto& e : pool)
        if (lower(e.style) == to_string(style)) filtered.push_back(e);
    if (static_cast<int>(filtered.size()) <= count) return filtered;
    for (int i = 0; i < count; ++i) {
        std::size_t j = i + rng() % (filtered.size() - i);
        std::swap(filtered[i], filtered[j]);
    }
    filtered.resize(count);
    return filtered;
}

// Values a node keeps out of the surface form: retained params for Implicit
// nodes, the full legal domain when the params are empty, the filter column
// for hidden filters. An empty Implicit mark hides nothing; the chart type
// is wholly the solver's.
std::vector<std::string> hidden_forms(const action_node& n, const table& tab) {
    if (n.tag != ambiguity_tag::implicit) return {};
    auto domain_or = [&](const std::vector<std::string>& full) {
        return n.params.empty() ? full : n.params;
    };
    switch (n.op) {
        case op_kind::column_select:
        case op_kind::channel_map: {
            if (!n.params.empty()) return n.params;
            std::vector<std::string> all;
            for (const auto& c : tab.columns) all.push_back(c.name);
            return all;
        }
        case op_kind::value_filter:
            return n.pred ? std::vector<std::string>{n.pred->column}
                          : std::vector<std::string>{};
        case op_kind::bin: return domain_or(default_rules().bin_units);
        case op_kind::aggregate: return domain_or(default_rules().aggregates);
        case op_kind::sort: return domain_or(sort_directions);
        case op_kind::mark: return n.params;
        case op_kind::task: return n.params;
    }
    return {};
}

}  // namespace

std::string to_string(nl_style s) {
    switch (s) {
        case nl_style::question: return "question";
        case nl_style::command: return "command";
        case nl_style::caption: return "caption";
    }
    return "command";
}

nl_style nl_style_from_string(const std::string& s) {
    std::string v = lower(s);
    if (v == "question") return nl_style::question;
    if (v == "command") return nl_style::command;
    if (v == "caption") return nl_style::caption;
    throw parse_error("unknown NL style: " + s);
}

std::vector<exemplar> load_exemplars(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open exemplar file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw parse_error(std::string("bad exemplar file: ") + e.what());
    }
    std::vector<exemplar> out;
    for (const auto& e : doc) {
        exemplar ex{e.value("style", ""), e.value("query", "")};
        if (ex.style.empty() || ex.query.empty())
            throw parse_error("exemplar entries need style and query");
        out.push_back(std::move(ex));
    }
    return out;
}

std::string generator_prompt(const vis_tree& tree, const table& tab, nl_style style,
                             const std::vector<exemplar>& shots,
                             const std::string& prompts_dir) {
    std::string shot_lines;
    for (const auto& s : shots) shot_lines += "- " + s.query + "\n";
    if (shot_lines.empty()) shot_lines = "(none)\n";
    std::string text = load_template(prompts_dir, "generator.txt", generator_template);
    text = replace_all(text, "{{schema}}", schema_line(tab));
    text = replace_all(text, "{{table}}", tab.name);
    text = replace_all(text, "{{style}}", to_string(style));
    text = replace_all(text, "{{exemplars}}", shot_lines);
    text = replace_all(text, "{{tree}}", tree_to_json(tree).dump(2));
    return text;
}

std::string verifier_prompt(const vis_tree& tree, const table& tab,
                            const std::string& query,
                            const std::vector<std::string>& references,
                            const std::string& prompts_dir) {
    json refs = json::array();
    json tree_json = tree_to_json(tree);
    for (std::size_t i = 0; i < references.size(); ++i) {
        json node = i < tree_json["nodes"].size() ? tree_json["nodes"][i] : json::object();
        node["nl_reference"] = references[i];
        refs.push_back(node);
    }
    std::string text = load_template(prompts_dir, "verifier.txt", verifier_template);
    text = replace_all(text, "{{schema}}", schema_line(tab));
    text = replace_all(text, "{{query}}", query);
    text = replace_all(text, "{{tree}}", tree_json.dump(2));
    text = replace_all(text, "{{references}}", refs.dump(2));
    return text;
}

nl_result generate_query(llm_client& llm, const vis_tree& tree, const table& tab,
                         nl_style style, const std::vector<exemplar>& shots,
                         const std::string& prompts_dir) {
    std::string reply =
        llm.chat({{"user", generator_prompt(tree, tab, style, shots, prompts_dir)}});
    auto nl_pos = reply.find("NL:");
    auto tree_pos = reply.find("Reference Tree:");
    if (nl_pos == std::string::npos || tree_pos == std::string::npos || tree_pos < nl_pos)
        throw malformed_output_error("generator reply lacks NL/Reference Tree sections");
    auto line_end = reply.find('\n', nl_pos);
    std::size_t query_end =
        std::min(line_end == std::string::npos ? reply.size() : line_end, tree_pos);
    std::string query = reply.substr(nl_pos + 3, query_end - nl_pos - 3);
    while (!query.empty() && (query.front() == ' ')) query.erase(query.begin());
    while (!query.empty() && (query.back() == ' ' || query.back() == '\r'))
        query.pop_back();
    if (query.empty()) throw malformed_output_error("generator produced an empty query");

    json refs = json::parse(reply.substr(tree_pos + 15), nullptr, false);
    if (refs.is_discarded() || !refs.is_array())
        throw malformed_output_error("generator reference tree is not a JSON array");
    if (refs.size() != tree.nodes.size())
        throw malformed_output_error("generator reference count differs from node count");
    nl_result out;
    out.query = query;
    for (const auto& r : refs) {
        if (!r.is_object() || !r.contains("nl_reference"))
            throw malformed_output_error("reference node lacks nl_reference");
        out.references.push_back(r["nl_reference"].get<std::string>());
    }
    return out;
}

std::vector<std::string> local_check_failures(const vis_tree& tree, const table& tab,
                                              const std::string& query,
                                              const std::vector<std::string>& references) {
    std::vector<std::string> fails;
    if (references.size() != tree.nodes.size()) {
        fails.push_back("local: reference count differs from node count");
        return fails;
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const action_node& n = tree.nodes[i];
        const std::string& ref = references[i];
        if (ref.empty()) {
            fails.push_back("local: node " + std::to_string(i) + " has no reference");
            continue;
        }
        if (!contains_ci(query, ref))
            fails.push_back("local: reference \"" + ref + "\" is not part of the query");
        if (n.tag == ambiguity_tag::ambiguous) {
            for (const auto& alt : n.params)
                if (mentions(ref, alt))
                    fails.push_back("local: node " + std::to_string(i) +
                                    " names candidate " + alt);
        }
        for (const auto& hidden : hidden_forms(n, tab))
            if (mentions(ref, hidden))
                fails.push_back("local: node " + std::to_string(i) +
                                " reveals hidden value " + hidden);
    }

    // Columns the query may name: those carried by explicit selects, channel
    // maps and filters.
    std::set<std::string> allowed;
    for (const auto& n : tree.nodes) {
        if (n.tag != ambiguity_tag::explicit_) continue;
        if (n.op == op_kind::channel_map || n.op == op_kind::column_select)
            for (const auto& c : n.params) allowed.insert(lower(c));
        if (n.op == op_kind::value_filter && n.pred) allowed.insert(lower(n.pred->column));
    }
    for (const auto& c : tab.columns)
        if (mentions(query, c.name) && !allowed.count(lower(c.name)))
            fails.push_back("local: query names column " + c.name + " outside the tree");
    return fails;
}

verification verify_query(llm_client& llm, const vis_tree& tree, const table& tab,
                          const std::string& query,
                          const std::vector<std::string>& references,
                          const std::string& prompts_dir) {
    std::string reply =
        llm.chat({{"user", verifier_prompt(tree, tab, query, references, prompts_dir)}});
    json doc = json::parse(reply, nullptr, false);
    if (doc.is_discarded()) {
        auto open = reply.find('{');
        auto close = reply.rfind('}');
        if (open != std::string::npos && close != std::string::npos && close > open)
            doc = json::parse(reply.substr(open, close - open + 1), nullptr, false);
    }
    if (doc.is_discarded() || !doc.is_object())
        throw malformed_output_error("verifier reply is not a JSON object");

    verification v;
    for (const auto& entry : doc.value("l1", json::array())) {
        if (!entry.is_array() || entry.size() != 2) continue;
        v.l1.emplace_back(entry[0].get<std::string>(), entry[1].get<int>());
    }
    for (const auto& phrase : doc.value("l2", json::array()))
        v.l2.push_back(phrase.is_string() ? phrase.get<std::string>() : phrase.dump());

    for (auto& f : local_check_failures(tree, tab, query, references))
        v.l2.push_back(std::move(f));

    std::set<int> covered;
    for (const auto& [phrase, idx] : v.l1) covered.insert(idx);
    bool full = true;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
        if (!covered.count(static_cast<int>(i))) full = false;
    v.accepted = full && v.l2.empty();
    return v;
}

nl_sample synthesize_nl(llm_client& llm, const vis_tree& tree, const table& tab,
                        nl_style style, const std::vector<exemplar>& pool,
                        const nl_config& cfg) {
    std::mt19937_64 rng(cfg.rng_seed);
    std::string last_failure = "no attempt ran";
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        auto shots = sample_shots(pool, style, cfg.exemplar_count, rng);
        nl_result gen;
        try {
            gen = generate_query(llm, tree, tab, style, shots, cfg.prompts_dir);
        } catch (const malformed_output_error& e) {
            last_failure = e.what();
            continue;
        }
        verification v;
        try {
            v = verify_query(llm, tree, tab, gen.query, gen.references, cfg.prompts_dir);
        } catch (const malformed_output_error& e) {
            last_failure = e.what();
            continue;
        }
        if (v.accepted) {
            nl_sample out;
            out.query = gen.query;
            out.style = style;
            out.references = gen.references;
            out.attempts = attempt;
            return out;
        }
        if (!v.l2.empty()) {
            last_failure = v.l2.front();
        } else {
            last_failure = "verifier left nodes uncovered";
        }
    }
    throw retries_exhausted_error("query synthesis failed after " +
                                      std::to_string(cfg.max_attempts) + " attempts",
                                  last_failure);
}

}  // namespace ambivis
