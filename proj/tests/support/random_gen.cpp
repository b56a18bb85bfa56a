#include "random_gen.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "oracle.hpp"

#include "ambivis/rules.hpp"

namespace testgen {
namespace {

using namespace ambivis;

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

template <typename T>
const T& choose(std::mt19937_64& rng, const std::vector<T>& v) {
    return v[pick(rng, v.size())];
}

const std::vector<std::string>& cat_words() {
    static const std::vector<std::string> w = {"alpha", "beta",  "gamma", "delta",
                                               "omega", "sigma", "kappa", "zeta"};
    return w;
}

column make_column(const std::string& name, data_type t, std::size_t rows,
                   std::mt19937_64& rng, std::vector<std::vector<std::string>>& cells) {
    column c;
    c.name = name;
    c.type = t;
    std::vector<std::string> col_cells;
    for (std::size_t r = 0; r < rows; ++r) {
        switch (t) {
            case data_type::categorical:
                col_cells.push_back(choose(rng, cat_words()));
                break;
            case data_type::quantitative:
                col_cells.push_back(std::to_string(static_cast<int>(rng() % 900) + 10) +
                                    "." + std::to_string(rng() % 10));
                break;
            case data_type::temporal: {
                int year = 2015 + static_cast<int>(rng() % 8);
                int month = 1 + static_cast<int>(rng() % 12);
                int day = 1 + static_cast<int>(rng() % 28);
                char buf[16];
                std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
                col_cells.push_back(buf);
                break;
            }
        }
    }
    if (t == data_type::categorical) {
        for (const auto& v : col_cells)
            if (std::find(c.distinct_values.begin(), c.distinct_values.end(), v) ==
                c.distinct_values.end())
                c.distinct_values.push_back(v);
    }
    cells.push_back(std::move(col_cells));
    return c;
}

table assemble(const std::string& name, const std::vector<data_type>& kinds,
               std::mt19937_64& rng) {
    table t;
    t.name = name;
    std::size_t rows = 4 + pick(rng, 5);
    std::vector<std::vector<std::string>> cells;
    const char* prefix[] = {"cat", "qty", "when"};
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        std::string cname = std::string(prefix[static_cast<int>(kinds[i])]) + "_" +
                            std::string(1, static_cast<char>('a' + i));
        t.columns.push_back(make_column(cname, kinds[i], rows, rng, cells));
    }
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<std::string> row;
        for (std::size_t cidx = 0; cidx < cells.size(); ++cidx) row.push_back(cells[cidx][r]);
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::vector<std::string> columns_of(const table& tab, data_type t) {
    std::vector<std::string> out;
    for (const auto& c : tab.columns)
        if (c.type == t) out.push_back(c.name);
    return out;
}

std::vector<std::string> subset(std::mt19937_64& rng, std::vector<std::string> pool,
                                std::size_t count) {
    for (std::size_t i = 0; i + 1 < pool.size(); ++i)
        std::swap(pool[i], pool[i + pick(rng, pool.size() - i)]);
    pool.resize(std::min(count, pool.size()));
    return pool;
}

action_node tagged(action_node n, std::mt19937_64& rng,
                   const std::vector<std::string>& full_domain) {
    switch (pick(rng, 3)) {
        case 0:
            n.tag = ambiguity_tag::explicit_;
            n.params = subset(rng, full_domain, 1);
            break;
        case 1:
            n.tag = ambiguity_tag::ambiguous;
            n.params = subset(rng, full_domain, 2 + pick(rng, 2));
            break;
        default:
            n.tag = ambiguity_tag::implicit;
            n.params = pick(rng, 2) ? std::vector<std::string>{}
                                    : subset(rng, full_domain, 2);
            break;
    }
    return n;
}

}  // namespace

table random_table(std::mt19937_64& rng) {
    std::vector<data_type> kinds = {data_type::categorical, data_type::quantitative};
    std::size_t extra = 1 + pick(rng, 4);
    for (std::size_t i = 0; i < extra; ++i) {
        switch (pick(rng, 3)) {
            case 0: kinds.push_back(data_type::categorical); break;
            case 1: kinds.push_back(data_type::quantitative); break;
            default: kinds.push_back(data_type::temporal); break;
        }
    }
    return assemble("rnd", kinds, rng);
}

table rich_table(std::mt19937_64& rng) {
    std::vector<data_type> kinds = {
        data_type::categorical,  data_type::categorical,  data_type::categorical,
        data_type::quantitative, data_type::quantitative, data_type::quantitative,
        data_type::temporal};
    return assemble("rich", kinds, rng);
}

vis_tree random_tree(const table& tab, std::mt19937_64& rng, std::uint64_t max_product) {
    std::vector<std::string> all_cols;
    for (const auto& c : tab.columns) all_cols.push_back(c.name);

    for (int round = 0; round < 64; ++round) {
        vis_tree tree;
        tree.table_ref = tab.name;

        action_node mark;
        mark.op = op_kind::mark;
        tree.nodes.push_back(tagged(mark, rng, chart_types));

        if (pick(rng, 2)) {
            action_node task;
            task.op = op_kind::task;
            tree.nodes.push_back(tagged(task, rng, analytic_tasks));
        }

        std::vector<channel> open = {channel::x, channel::y, channel::color,
                                     channel::size, channel::theta};
        std::size_t n_cm = 1 + pick(rng, 3);
        std::vector<channel> used;
        for (std::size_t i = 0; i < n_cm; ++i) {
            channel ch = open[i == 0 ? pick(rng, 2) : pick(rng, open.size())];
            if (std::find(used.begin(), used.end(), ch) != used.end()) continue;
            used.push_back(ch);
            action_node cm;
            cm.op = op_kind::channel_map;
            cm.chan = ch;
            tree.nodes.push_back(tagged(cm, rng, all_cols));
        }

        if (pick(rng, 3) == 0) {
            action_node sel;
            sel.op = op_kind::column_select;
            sel = tagged(sel, rng, all_cols);
            if (sel.tag == ambiguity_tag::explicit_) sel.tag = ambiguity_tag::ambiguous;
            tree.nodes.push_back(sel);
        }

        if (pick(rng, 2)) {
            action_node bin;
            bin.op = op_kind::bin;
            bin.column = choose(rng, all_cols);
            tree.nodes.push_back(tagged(bin, rng, default_rules().bin_units));
        }
        if (pick(rng, 2)) {
            action_node agg;
            agg.op = op_kind::aggregate;
            agg.chan = used[pick(rng, used.size())];
            tree.nodes.push_back(tagged(agg, rng, default_rules().aggregates));
        }
        if (pick(rng, 3) == 0) {
            action_node sort;
            sort.op = op_kind::sort;
            sort.chan = used[pick(rng, used.size())];
            tree.nodes.push_back(tagged(sort, rng, sort_directions));
        }
        if (pick(rng, 3) == 0) {
            const column& c = tab.columns[pick(rng, tab.columns.size())];
            filter_predicate f;
            f.column = c.name;
            f.op = "in";
            if (c.distinct_values.empty())
                f.values = {tab.rows[pick(rng, tab.rows.size())][tab.column_index(c.name)]};
            else
                f.values = {c.distinct_values[pick(rng, c.distinct_values.size())]};
            action_node filt;
            filt.op = op_kind::value_filter;
            filt.tag = pick(rng, 2) ? ambiguity_tag::explicit_ : ambiguity_tag::implicit;
            filt.pred = f;
            tree.nodes.push_back(filt);
        }

        if (oracle::cross_product_size(tree, tab, default_rules(), max_product + 1) <=
            max_product)
            return tree;
    }
    // Fall back to the smallest possible shape: explicit mark + one map.
    vis_tree tree;
    tree.table_ref = tab.name;
    action_node mark;
    mark.op = op_kind::mark;
    mark.tag = ambiguity_tag::explicit_;
    mark.params = {chart_types[pick(rng, chart_types.size())]};
    tree.nodes.push_back(mark);
    action_node cm;
    cm.op = op_kind::channel_map;
    cm.chan = channel::x;
    cm.tag = ambiguity_tag::explicit_;
    cm.params = {all_cols[pick(rng, all_cols.size())]};
    tree.nodes.push_back(cm);
    return tree;
}

vis_spec random_valid_seed_spec(const table& tab, std::mt19937_64& rng) {
    auto cats = columns_of(tab, data_type::categorical);
    auto qtys = columns_of(tab, data_type::quantitative);
    auto times = columns_of(tab, data_type::temporal);
    const auto& aggs = default_rules().aggregates;

    vis_spec spec;
    spec.table_ref = tab.name;
    std::vector<std::string> marks = {"bar", "line", "pie", "scatter", "heatmap", "boxplot"};
    spec.mark = choose(rng, marks);

    auto enc = [&](const std::string& col) {
        encoding e;
        e.column = col;
        e.dtype = tab.column_at(col).type;
        return e;
    };

    if (spec.mark == "bar" || spec.mark == "line") {
        bool temporal_x = !times.empty() && pick(rng, 2);
        encoding x = enc(temporal_x ? choose(rng, times) : choose(rng, cats));
        if (temporal_x) x.bin_unit = choose(rng, default_rules().bin_units);
        encoding y = enc(choose(rng, qtys));
        y.aggregate = choose(rng, aggs);
        spec.encodings[channel::x] = x;
        spec.encodings[channel::y] = y;
        if (cats.size() > 1 && pick(rng, 2)) {
            std::string c = choose(rng, cats);
            if (c != x.column) spec.encodings[channel::color] = enc(c);
        }
    } else if (spec.mark == "pie") {
        encoding theta = enc(choose(rng, qtys));
        theta.aggregate = choose(rng, aggs);
        spec.encodings[channel::theta] = theta;
        spec.encodings[channel::color] = enc(choose(rng, cats));
    } else if (spec.mark == "scatter") {
        std::string x = qtys[0], y = qtys[1 % qtys.size()];
        if (qtys.size() > 1 && pick(rng, 2)) std::swap(x, y);
        spec.encodings[channel::x] = enc(x);
        spec.encodings[channel::y] = enc(y);
        if (!cats.empty() && pick(rng, 2))
            spec.encodings[channel::color] = enc(choose(rng, cats));
    } else if (spec.mark == "heatmap") {
        std::string x = cats[0], y = cats[1 % cats.size()];
        encoding color = enc(choose(rng, qtys));
        color.aggregate = choose(rng, aggs);
        spec.encodings[channel::x] = enc(x);
        spec.encodings[channel::y] = enc(y);
        spec.encodings[channel::color] = color;
    } else {  // boxplot
        spec.encodings[channel::x] = enc(choose(rng, cats));
        spec.encodings[channel::y] = enc(choose(rng, qtys));
    }

    if (pick(rng, 3) == 0) {
        for (const auto& c : tab.columns) {
            if (c.type != data_type::categorical || c.distinct_values.empty()) continue;
            bool used = false;
            for (const auto& [ch, e] : spec.encodings) used = used || e.column == c.name;
            if (used) continue;
            filter_predicate f;
            f.column = c.name;
            f.op = "in";
            f.values = {c.distinct_values[pick(rng, c.distinct_values.size())]};
            spec.filters.push_back(f);
            break;
        }
    }
    if (pick(rng, 3) == 0 && spec.encodings.count(channel::y))
        spec.sort = std::make_pair(channel::y, choose(rng, sort_directions));
    return spec;
}

}  // namespace testgen
