#include "ambivis/rules.hpp"

#include "ambivis/error.hpp"

namespace ambivis {

std::string to_string(channel c) {
    switch (c) {
        case channel::x: return "x";
        case channel::y: return "y";
        case channel::color: return "color";
        case channel::size: return "size";
        case channel::theta: return "theta";
    }
    return "x";
}

channel channel_from_string(const std::string& s) {
    if (s == "x") return channel::x;
    if (s == "y") return channel::y;
    if (s == "color") return channel::color;
    if (s == "size") return channel::size;
    if (s == "theta") return channel::theta;
    throw unknown_operation_error("unknown channel: " + s);
}

bool design_rules::channel_allowed(const std::string& chart, channel c) const {
    auto it = channel_compat.find(chart);
    if (it == channel_compat.end()) return false;
    auto jt = it->second.find(c);
    return jt != it->second.end() && !jt->second.empty();
}

bool design_rules::dtype_allowed(const std::string& chart, channel c, data_type t) const {
    auto it = channel_compat.find(chart);
    if (it == channel_compat.end()) return false;
    auto jt = it->second.find(c);
    return jt != it->second.end() && jt->second.count(t) > 0;
}

std::set<std::string> design_rules::charts_for_task(const std::string& task) const {
    auto it = task_charts.find(task);
    return it == task_charts.end() ? std::set<std::string>{} : it->second;
}

std::set<std::string> design_rules::tasks_for_chart(const std::string& chart) const {
    std::set<std::string> out;
    for (const auto& [task, charts] : task_charts)
        if (charts.count(chart)) out.insert(task);
    return out;
}

const design_rules& default_rules() {
    static const design_rules rules = [] {
        design_rules r;
        const std::set<data_type> c = {data_type::categorical};
        const std::set<data_type> q = {data_type::quantitative};
        const std::set<data_type> cq = {data_type::categorical, data_type::quantitative};
        const std::set<data_type> cqt = {data_type::categorical, data_type::quantitative,
                                         data_type::temporal};
        r.channel_compat["bar"] = {{channel::x, cqt}, {channel::y, q}, {channel::color, c}};
        r.channel_compat["line"] = {{channel::x, cqt}, {channel::y, q}, {channel::color, c}};
        r.channel_compat["pie"] = {{channel::color, c}, {channel::theta, q}};
        r.channel_compat["scatter"] = {{channel::x, q},
                                       {channel::y, q},
                                       {channel::color, c},
                                       {channel::size, q}};
        r.channel_compat["heatmap"] = {{channel::x, cqt}, {channel::y, cq}, {channel::color, q}};
        r.channel_compat["boxplot"] = {{channel::x, c}, {channel::y, q}, {channel::color, c}};

        r.task_charts["trend"] = {"bar", "line"};
        r.task_charts["distribution"] = {"bar", "line", "pie", "boxplot"};
        r.task_charts["correlation"] = {"scatter", "heatmap"};

        r.required_channels["bar"] = {channel::x, channel::y};
        r.required_channels["line"] = {channel::x, channel::y};
        r.required_channels["pie"] = {channel::theta, channel::color};
        r.required_channels["scatter"] = {channel::x, channel::y};
        r.required_channels["heatmap"] = {channel::x, channel::y, channel::color};
        r.required_channels["boxplot"] = {channel::y};

        r.key_channels["bar"] = {channel::x};
        r.key_channels["line"] = {channel::x};
        r.key_channels["pie"] = {channel::color};
        r.key_channels["heatmap"] = {channel::x, channel::y};
        r.key_channels["scatter"] = {};
        r.key_channels["boxplot"] = {};

        r.measure_channel["bar"] = channel::y;
        r.measure_channel["line"] = channel::y;
        r.measure_channel["pie"] = channel::theta;
        r.measure_channel["heatmap"] = channel::color;
        return r;
    }();
    return rules;
}

}  // namespace ambivis
