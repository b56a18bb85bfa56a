#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ambivis/table.hpp"

namespace ambivis {

enum class channel { x, y, color, size, theta };

constexpr channel all_channels[] = {channel::x, channel::y, channel::color,
                                    channel::size, channel::theta};

std::string to_string(channel c);
channel channel_from_string(const std::string& s);

inline const std::vector<std::string> chart_types = {"bar",     "line",    "pie",
                                                     "scatter", "heatmap", "boxplot"};
inline const std::vector<std::string> analytic_tasks = {"trend", "distribution",
                                                        "correlation"};
inline const std::vector<std::string> aggregate_fns = {"mean", "sum", "count", "min", "max"};
inline const std::vector<std::string> sort_directions = {"ascending", "descending"};

// Channel/dtype compatibility and task->chart legality for the six chart
// types. Required channels, key/measure roles and the default aggregate are
// reconstructed rules: they are the minimal completion that makes every
// compatible chart renderable, and they are deliberately kept in one place so
// they can be audited or swapped.
struct design_rules {
    // chart -> channel -> admissible column types; a missing channel entry
    // means the channel does not exist for that chart.
    std::map<std::string, std::map<channel, std::set<data_type>>> channel_compat;
    std::map<std::string, std::set<std::string>> task_charts;   // task -> charts
    std::map<std::string, std::set<channel>> required_channels; // chart -> channels
    // Channels whose values index the chart (groups) and the channel holding
    // the plotted measure; empty measure means the mark aggregates itself or
    // plots raw points.
    std::map<std::string, std::set<channel>> key_channels;
    std::map<std::string, channel> measure_channel;
    std::vector<std::string> bin_units = {"year", "month"};
    std::vector<std::string> aggregates = aggregate_fns;
    std::string default_aggregate = "mean";
    std::string default_bin_unit = "year";

    bool channel_allowed(const std::string& chart, channel c) const;
    bool dtype_allowed(const std::string& chart, channel c, data_type t) const;
    std::set<std::string> charts_for_task(const std::string& task) const;
    std::set<std::string> tasks_for_chart(const std::string& chart) const;
};

const design_rules& default_rules();

}  // namespace ambivis
