#include "ambivis/vis.hpp"

#include <algorithm>
#include <cctype>

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

// Numeric literals are normalized through a double so "2000", "2000.0" and a
// JSON number 2000 all compare equal in canonical form.
std::string normalize_value(const std::string& v) {
    if (parse_number(v)) return json(std::stod(v)).dump();
    return v;
}

json value_to_vl(const std::string& v) {
    if (parse_number(v)) return json(std::stod(v));
    return json(v);
}

std::string vl_to_value(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

const char* op_json_key(op_kind k) {
    switch (k) {
        case op_kind::column_select: return "Select";
        case op_kind::value_filter: return "Filter";
        case op_kind::task: return "Task";
        case op_kind::mark: return "Mark";
        case op_kind::channel_map: return "Encoding";
        case op_kind::aggregate: return "Aggregate";
        case op_kind::bin: return "Bin";
        case op_kind::sort: return "Sort";
    }
    return "Mark";
}

std::vector<std::string> string_list(const json& v, const char* what) {
    std::vector<std::string> out;
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
        return out;
    }
    if (!v.is_array()) throw parse_error(std::string("expected string or array for ") + what);
    for (const auto& e : v) {
        if (!e.is_string()) throw parse_error(std::string("expected strings in ") + what);
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

std::string to_string(ambiguity_tag t) {
    switch (t) {
        case ambiguity_tag::explicit_: return "explicit";
        case ambiguity_tag::ambiguous: return "ambiguous";
        case ambiguity_tag::implicit: return "implicit";
    }
    return "explicit";
}

ambiguity_tag ambiguity_tag_from_string(const std::string& s) {
    if (s == "explicit") return ambiguity_tag::explicit_;
    if (s == "ambiguous") return ambiguity_tag::ambiguous;
    if (s == "implicit") return ambiguity_tag::implicit;
    throw parse_error("unknown ambiguity type: " + s);
}

std::string to_string(op_kind k) {
    switch (k) {
        case op_kind::column_select: return "column_select";
        case op_kind::value_filter: return "value_filter";
        case op_kind::task: return "task";
        case op_kind::mark: return "mark";
        case op_kind::channel_map: return "channel_map";
        case op_kind::aggregate: return "aggregate";
        case op_kind::bin: return "bin";
        case op_kind::sort: return "sort";
    }
    return "mark";
}

op_kind op_kind_from_string(const std::string& s) {
    if (s == "column_select") return op_kind::column_select;
    if (s == "value_filter") return op_kind::value_filter;
    if (s == "task") return op_kind::task;
    if (s == "mark") return op_kind::mark;
    if (s == "channel_map") return op_kind::channel_map;
    if (s == "aggregate") return op_kind::aggregate;
    if (s == "bin") return op_kind::bin;
    if (s == "sort") return op_kind::sort;
    throw unknown_operation_error("unknown operation: " + s);
}

std::string category_of(op_kind k) {
    switch (k) {
        case op_kind::column_select:
        case op_kind::value_filter: return "DS";
        case op_kind::task:
        case op_kind::mark: return "CT";
        case op_kind::channel_map: return "CE";
        case op_kind::aggregate:
        case op_kind::bin:
        case op_kind::sort: return "DT";
    }
    return "DS";
}

const action_node* vis_tree::find_mark() const {
    for (const auto& n : nodes)
        if (n.op == op_kind::mark) return &n;
    return nullptr;
}

bool vis_tree::all_explicit() const {
    return std::all_of(nodes.begin(), nodes.end(), [](const action_node& n) {
        return n.tag == ambiguity_tag::explicit_;
    });
}

std::vector<std::string> vis_tree::ambiguity_pattern() const {
    std::set<std::string> cats;
    for (const auto& n : nodes) {
        if (!n.category.empty())
            cats.insert(n.category);
        else if (n.tag != ambiguity_tag::explicit_)
            cats.insert(category_of(n.op));
    }
    return {cats.begin(), cats.end()};
}

canonical_spec canonicalize(const vis_spec& spec, const design_rules& rules) {
    json norm;
    std::string mark = lower(spec.mark);
    norm["mark"] = mark;

    std::map<channel, encoding> encs = spec.encodings;
    // Defaults made explicit: a temporal positional encoding gets the default
    // bin unit, a quantitative measure against discrete keys the default
    // aggregate.
    for (auto& [ch, enc] : encs) {
        bool positional = ch == channel::x || ch == channel::y;
        if (positional && enc.dtype == data_type::temporal && !enc.bin_unit)
            enc.bin_unit = rules.default_bin_unit;
    }
    auto measure_it = rules.measure_channel.find(mark);
    if (measure_it != rules.measure_channel.end()) {
        auto enc_it = encs.find(measure_it->second);
        if (enc_it != encs.end() && enc_it->second.dtype == data_type::quantitative &&
            !enc_it->second.aggregate) {
            auto keys_it = rules.key_channels.find(mark);
            bool keys_discrete = keys_it != rules.key_channels.end();
            if (keys_it != rules.key_channels.end()) {
                for (channel kc : keys_it->second) {
                    auto kenc = encs.find(kc);
                    if (kenc == encs.end()) continue;
                    if (kenc->second.dtype != data_type::categorical &&
                        !kenc->second.bin_unit) {
                        keys_discrete = false;
                        break;
                    }
                }
            }
            if (keys_discrete) enc_it->second.aggregate = rules.default_aggregate;
        }
    }

    json enc_obj = json::object();
    for (const auto& [ch, enc] : encs) {
        json e;
        e["field"] = lower(enc.column);
        if (enc.bin_unit) e["bin"] = *enc.bin_unit;
        if (enc.aggregate) e["aggregate"] = *enc.aggregate;
        enc_obj[to_string(ch)] = e;
    }
    norm["encodings"] = enc_obj;

    std::vector<json> filters;
    for (const auto& f : spec.filters) {
        json jf;
        jf["column"] = lower(f.column);
        jf["op"] = f.op;
        std::vector<std::string> values;
        for (const auto& v : f.values) values.push_back(normalize_value(v));
        if (f.op == "in") std::sort(values.begin(), values.end());
        jf["values"] = values;
        filters.push_back(jf);
    }
    std::sort(filters.begin(), filters.end(),
              [](const json& a, const json& b) { return a.dump() < b.dump(); });
    norm["filters"] = filters;

    if (spec.sort) {
        norm["sort"] = {{"channel", to_string(spec.sort->first)},
                        {"direction", spec.sort->second}};
    }

    canonical_spec out;
    out.normalized = norm;
    out.key_ = norm.dump();
    return out;
}

vis_tree build_seed_tree(const vis_spec& spec, const table& tab, const design_rules& rules) {
    // Re-derive dtypes from the table so callers may leave them unset.
    vis_spec checked = spec;
    checked.table_ref = tab.name;
    for (auto& [ch, enc] : checked.encodings) {
        enc.dtype = tab.column_at(enc.column).type;
        enc.column = tab.columns[tab.column_index(enc.column)].name;
    }
    for (auto& f : checked.filters) f.column = tab.columns[tab.column_index(f.column)].name;

    auto violations = spec_violations(checked, tab, rules);
    if (!violations.empty()) {
        std::string msg = "spec violates chart grammar:";
        for (const auto& v : violations) msg += " " + v;
        throw incompatible_spec_error(msg, violations);
    }

    vis_tree tree;
    tree.table_ref = tab.name;
    action_node mark;
    mark.op = op_kind::mark;
    mark.params = {checked.mark};
    tree.nodes.push_back(mark);
    if (checked.task) {
        action_node task;
        task.op = op_kind::task;
        task.params = {*checked.task};
        tree.nodes.push_back(task);
    }
    for (channel ch : all_channels) {
        auto it = checked.encodings.find(ch);
        if (it == checked.encodings.end()) continue;
        action_node cm;
        cm.op = op_kind::channel_map;
        cm.chan = ch;
        cm.params = {it->second.column};
        tree.nodes.push_back(cm);
    }
    for (channel ch : all_channels) {
        auto it = checked.encodings.find(ch);
        if (it == checked.encodings.end() || !it->second.bin_unit) continue;
        action_node bin;
        bin.op = op_kind::bin;
        bin.column = it->second.column;
        bin.params = {*it->second.bin_unit};
        tree.nodes.push_back(bin);
    }
    for (channel ch : all_channels) {
        auto it = checked.encodings.find(ch);
        if (it == checked.encodings.end() || !it->second.aggregate) continue;
        action_node agg;
        agg.op = op_kind::aggregate;
        agg.chan = ch;
        agg.params = {*it->second.aggregate};
        tree.nodes.push_back(agg);
    }
    if (checked.sort) {
        action_node sort;
        sort.op = op_kind::sort;
        sort.chan = checked.sort->first;
        sort.params = {checked.sort->second};
        tree.nodes.push_back(sort);
    }
    for (const auto& f : checked.filters) {
        action_node filt;
        filt.op = op_kind::value_filter;
        filt.pred = f;
        tree.nodes.push_back(filt);
    }
    return tree;
}

vis_spec flatten(const resolved_tree& tree, const table& tab) {
    vis_spec spec;
    spec.table_ref = tree.table_ref.empty() ? tab.name : tree.table_ref;
    const action_node* mark = tree.find_mark();
    if (!mark || mark->params.size() != 1)
        throw missing_mark_error("resolved tree lacks a concrete mark node");
    spec.mark = mark->params[0];
    for (const auto& n : tree.nodes) {
        switch (n.op) {
            case op_kind::mark: break;
            case op_kind::task:
                if (n.params.size() == 1) spec.task = n.params[0];
                break;
            case op_kind::channel_map: {
                if (!n.chan || n.params.size() != 1)
                    throw incompatible_spec_error("channel map not fully resolved");
                encoding enc;
                enc.column = n.params[0];
                enc.dtype = tab.column_at(enc.column).type;
                spec.encodings[*n.chan] = enc;
                break;
            }
            case op_kind::column_select:
                throw incompatible_spec_error(
                    "resolved tree still holds an unbound column select");
            default: break;
        }
    }
    for (const auto& n : tree.nodes) {
        switch (n.op) {
            case op_kind::bin: {
                if (!n.column || n.params.size() != 1)
                    throw incompatible_spec_error("bin node not fully resolved");
                bool bound = false;
                for (auto& [ch, enc] : spec.encodings) {
                    if (lower(enc.column) == lower(*n.column)) {
                        enc.bin_unit = n.params[0];
                        bound = true;
                    }
                }
                if (!bound)
                    throw incompatible_spec_error("bin targets a column not on any channel",
                                                  {"orphan_transform"});
                break;
            }
            case op_kind::aggregate: {
                if (!n.chan || n.params.size() != 1)
                    throw incompatible_spec_error("aggregate node not fully resolved");
                auto it = spec.encodings.find(*n.chan);
                if (it == spec.encodings.end())
                    throw incompatible_spec_error("aggregate targets an empty channel",
                                                  {"orphan_transform"});
                it->second.aggregate = n.params[0];
                break;
            }
            case op_kind::sort: {
                if (!n.chan || n.params.size() != 1)
                    throw incompatible_spec_error("sort node not fully resolved");
                if (spec.encodings.find(*n.chan) == spec.encodings.end())
                    throw incompatible_spec_error("sort targets an empty channel",
                                                  {"orphan_transform"});
                spec.sort = std::make_pair(*n.chan, n.params[0]);
                break;
            }
            case op_kind::value_filter: {
                if (!n.pred) throw incompatible_spec_error("filter node lacks a predicate");
                spec.filters.push_back(*n.pred);
                break;
            }
            default: break;
        }
    }
    return spec;
}

nlohmann::json to_vegalite(const vis_spec& spec) {
    static const std::map<std::string, std::string> vl_marks = {
        {"bar", "bar"},     {"line", "line"},    {"pie", "arc"},
        {"scatter", "point"}, {"heatmap", "rect"}, {"boxplot", "boxplot"}};
    static const std::map<data_type, std::string> vl_types = {
        {data_type::categorical, "nominal"},
        {data_type::quantitative, "quantitative"},
        {data_type::temporal, "temporal"}};

    json doc;
    doc["$schema"] = "https://vega.github.io/schema/vega-lite/v5.json";
    doc["data"] = {{"name", spec.table_ref}};
    auto mk = vl_marks.find(lower(spec.mark));
    if (mk == vl_marks.end()) throw incompatible_spec_error("unknown mark: " + spec.mark);
    doc["mark"] = mk->second;

    json enc = json::object();
    for (const auto& [ch, e] : spec.encodings) {
        json je;
        je["field"] = e.column;
        je["type"] = vl_types.at(e.dtype);
        if (e.bin_unit) je["timeUnit"] = *e.bin_unit;
        if (e.aggregate) je["aggregate"] = *e.aggregate;
        if (spec.sort && spec.sort->first == ch) je["sort"] = spec.sort->second;
        enc[to_string(ch)] = je;
    }
    if (!enc.empty()) doc["encoding"] = enc;

    if (!spec.filters.empty()) {
        json transforms = json::array();
        for (const auto& f : spec.filters) {
            json pred;
            pred["field"] = f.column;
            if (f.op == "in") {
                json vals = json::array();
                for (const auto& v : f.values) vals.push_back(value_to_vl(v));
                pred["oneOf"] = vals;
            } else if (!f.values.empty()) {
                static const std::map<std::string, std::string> ops = {
                    {"gt", "gt"}, {"ge", "gte"}, {"lt", "lt"}, {"le", "lte"}, {"eq", "equal"}};
                auto it = ops.find(f.op);
                if (it == ops.end())
                    throw incompatible_spec_error("unknown filter op: " + f.op);
                pred[it->second] = value_to_vl(f.values[0]);
            }
            transforms.push_back({{"filter", pred}});
        }
        doc["transform"] = transforms;
    }
    return doc;
}

std::string to_vegalite_text(const vis_spec& spec) { return to_vegalite(spec).dump(2); }

vis_spec from_vegalite(const nlohmann::json& doc, const std::string& table_ref) {
    static const std::map<std::string, std::string> marks = {
        {"bar", "bar"},   {"line", "line"},      {"arc", "pie"},
        {"point", "scatter"}, {"circle", "scatter"}, {"rect", "heatmap"},
        {"boxplot", "boxplot"}};
    static const std::map<std::string, data_type> types = {
        {"nominal", data_type::categorical},
        {"ordinal", data_type::categorical},
        {"quantitative", data_type::quantitative},
        {"temporal", data_type::temporal}};

    vis_spec spec;
    spec.table_ref = table_ref;
    if (spec.table_ref.empty() && doc.contains("data") && doc["data"].contains("name"))
        spec.table_ref = doc["data"]["name"].get<std::string>();

    if (!doc.contains("mark")) throw parse_error("chart document lacks a mark");
    std::string m = doc["mark"].is_object() ? doc["mark"].value("type", "")
                                            : doc["mark"].get<std::string>();
    auto mk = marks.find(m);
    if (mk == marks.end()) throw parse_error("unknown chart mark: " + m);
    spec.mark = mk->second;

    if (doc.contains("encoding")) {
        for (const auto& [key, je] : doc["encoding"].items()) {
            channel ch = channel_from_string(key);
            encoding e;
            e.column = je.value("field", "");
            auto ty = types.find(je.value("type", "nominal"));
            e.dtype = ty == types.end() ? data_type::categorical : ty->second;
            if (je.contains("timeUnit")) e.bin_unit = je["timeUnit"].get<std::string>();
            if (je.contains("aggregate")) e.aggregate = je["aggregate"].get<std::string>();
            if (je.contains("sort") && je["sort"].is_string())
                spec.sort = std::make_pair(ch, je["sort"].get<std::string>());
            spec.encodings[ch] = e;
        }
    }

    if (doc.contains("transform")) {
        for (const auto& tr : doc["transform"]) {
            if (!tr.contains("filter") || !tr["filter"].is_object()) continue;
            const auto& pred = tr["filter"];
            filter_predicate f;
            f.column = pred.value("field", "");
            if (pred.contains("oneOf")) {
                f.op = "in";
                for (const auto& v : pred["oneOf"]) f.values.push_back(vl_to_value(v));
            } else {
                static const std::vector<std::pair<std::string, std::string>> ops = {
                    {"gt", "gt"}, {"gte", "ge"}, {"lt", "lt"}, {"lte", "le"}, {"equal", "eq"}};
                for (const auto& [vl_op, op] : ops) {
                    if (pred.contains(vl_op)) {
                        f.op = op;
                        f.values.push_back(vl_to_value(pred[vl_op]));
                        break;
                    }
                }
                if (f.op.empty()) continue;
            }
            spec.filters.push_back(f);
        }
    }
    return spec;
}

nlohmann::json tree_to_json(const vis_tree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
        json jn;
        switch (n.op) {
            case op_kind::column_select:
            case op_kind::task:
            case op_kind::mark:
                jn[op_json_key(n.op)] = n.params;
                break;
            case op_kind::value_filter: {
                json f;
                f["column"] = n.pred ? n.pred->column : "";
                f["op"] = n.pred ? n.pred->op : "";
                f["values"] = n.pred ? n.pred->values : std::vector<std::string>{};
                jn["Filter"] = f;
                break;
            }
            case op_kind::channel_map:
                jn["Encoding"] = {{"channel", n.chan ? to_string(*n.chan) : ""},
                                  {"field", n.params}};
                break;
            case op_kind::aggregate:
                jn["Aggregate"] = {{"channel", n.chan ? to_string(*n.chan) : ""},
                                   {"fn", n.params}};
                break;
            case op_kind::bin:
                jn["Bin"] = {{"column", n.column ? *n.column : ""}, {"unit", n.params}};
                break;
            case op_kind::sort:
                jn["Sort"] = {{"channel", n.chan ? to_string(*n.chan) : ""},
                              {"direction", n.params}};
                break;
        }
        jn["ambiguity_type"] = to_string(n.tag);
        if (!n.category.empty()) jn["category"] = n.category;
        if (!n.nl_hint.empty()) jn["nl_hint"] = n.nl_hint;
        nodes.push_back(jn);
    }
    return json{{"table", tree.table_ref}, {"nodes", nodes}};
}

vis_tree tree_from_json(const nlohmann::json& doc) {
    vis_tree tree;
    tree.table_ref = doc.value("table", "");
    if (!doc.contains("nodes") || !doc["nodes"].is_array())
        throw parse_error("tree document lacks a nodes array");
    for (const auto& jn : doc["nodes"]) {
        action_node n;
        if (jn.contains("Select")) {
            n.op = op_kind::column_select;
            n.params = string_list(jn["Select"], "Select");
        } else if (jn.contains("Filter")) {
            n.op = op_kind::value_filter;
            const auto& f = jn["Filter"];
            filter_predicate p;
            p.column = f.value("column", "");
            p.op = f.value("op", "in");
            p.values = string_list(f.value("values", json::array()), "Filter.values");
            n.pred = p;
        } else if (jn.contains("Task")) {
            n.op = op_kind::task;
            n.params = string_list(jn["Task"], "Task");
        } else if (jn.contains("Mark")) {
            n.op = op_kind::mark;
            n.params = string_list(jn["Mark"], "Mark");
        } else if (jn.contains("Encoding")) {
            n.op = op_kind::channel_map;
            n.chan = channel_from_string(jn["Encoding"].value("channel", ""));
            n.params = string_list(jn["Encoding"].value("field", json::array()), "field");
        } else if (jn.contains("Aggregate")) {
            n.op = op_kind::aggregate;
            n.chan = channel_from_string(jn["Aggregate"].value("channel", ""));
            n.params = string_list(jn["Aggregate"].value("fn", json::array()), "fn");
        } else if (jn.contains("Bin")) {
            n.op = op_kind::bin;
            n.column = jn["Bin"].value("column", "");
            n.params = string_list(jn["Bin"].value("unit", json::array()), "unit");
        } else if (jn.contains("Sort")) {
            n.op = op_kind::sort;
            n.chan = channel_from_string(jn["Sort"].value("channel", ""));
            n.params = string_list(jn["Sort"].value("direction", json::array()), "direction");
        } else {
            throw unknown_operation_error("node has no recognized operation key: " + jn.dump());
        }
        n.tag = ambiguity_tag_from_string(jn.value("ambiguity_type", "explicit"));
        n.category = jn.value("category", "");
        n.nl_hint = jn.value("nl_hint", "");
        tree.nodes.push_back(n);
    }
    return tree;
}

nlohmann::json spec_to_json(const vis_spec& spec) {
    json doc;
    doc["table"] = spec.table_ref;
    doc["mark"] = spec.mark;
    json enc = json::object();
    for (const auto& [ch, e] : spec.encodings) {
        json je;
        je["field"] = e.column;
        if (e.bin_unit) je["bin"] = *e.bin_unit;
        if (e.aggregate) je["aggregate"] = *e.aggregate;
        enc[to_string(ch)] = je;
    }
    doc["encoding"] = enc;
    json filters = json::array();
    for (const auto& f : spec.filters)
        filters.push_back({{"column", f.column}, {"op", f.op}, {"values", f.values}});
    doc["filters"] = filters;
    if (spec.sort)
        doc["sort"] = {{"channel", to_string(spec.sort->first)},
                       {"direction", spec.sort->second}};
    if (spec.task) doc["task"] = *spec.task;
    return doc;
}

vis_spec spec_from_json(const nlohmann::json& doc) {
    vis_spec spec;
    spec.table_ref = doc.value("table", "");
    spec.mark = doc.value("mark", "");
    if (doc.contains("encoding")) {
        for (const auto& [key, je] : doc["encoding"].items()) {
            encoding e;
            e.column = je.value("field", "");
            if (je.contains("bin")) e.bin_unit = je["bin"].get<std::string>();
            if (je.contains("aggregate")) e.aggregate = je["aggregate"].get<std::string>();
            spec.encodings[channel_from_string(key)] = e;
        }
    }
    if (doc.contains("filters")) {
        for (const auto& jf : doc["filters"]) {
            filter_predicate f;
            f.column = jf.value("column", "");
            f.op = jf.value("op", "in");
            f.values = string_list(jf.value("values", json::array()), "filter values");
            spec.filters.push_back(f);
        }
    }
    if (doc.contains("sort"))
        spec.sort = std::make_pair(channel_from_string(doc["sort"].value("channel", "")),
                                   doc["sort"].value("direction", "ascending"));
    if (doc.contains("task")) spec.task = doc["task"].get<std::string>();
    return spec;
}

}  // namespace ambivis
