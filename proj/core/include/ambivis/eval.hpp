#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambivis/reasoning.hpp"
#include "ambivis/rules.hpp"
#include "ambivis/vis.hpp"

namespace ambivis {

struct benchmark_sample {
    std::string id;
    std::string table_ref;
    std::string query;
    std::string style;
    vis_tree tree;
    std::vector<nlohmann::json> gold_specs;  // canonical normal forms
    int level = 0;                           // |gold_specs|
    std::vector<std::string> pattern;        // ambiguity categories, sorted
    reasoning_path reasoning;
};

nlohmann::json sample_to_json(const benchmark_sample& s);
benchmark_sample sample_from_json(const nlohmann::json& doc);

// JSON-lines, one sample per line; write->read->write is byte-identical.
std::vector<benchmark_sample> load_benchmark(const std::string& path);
void save_benchmark(const std::string& path, const std::vector<benchmark_sample>& bench);

// Predictions file: JSON-lines {"id": ..., "charts": [vega-lite documents]}.
std::map<std::string, std::vector<vis_spec>> load_predictions(const std::string& path);

// Rank i is true iff the prediction's canonical form is in gold and no
// earlier rank already claimed that gold entry (each credited once).
std::vector<bool> match_specs(const std::vector<vis_spec>& pred,
                              const std::vector<nlohmann::json>& gold,
                              const design_rules& rules = default_rules());

struct metric_triple {
    double p = 0.0;
    double r = 0.0;
    double f1 = 0.0;
};

// P = matches-in-top-K / min(K, |pred|) (0 for an empty list; denominator K
// under strict_k), R = matches-in-top-K / gold_size, F1 their harmonic mean.
// K outside {1,3,5} raises invalid_k_error unless allow_any_k.
metric_triple precision_recall_f1_at_k(const std::vector<bool>& flags,
                                       std::size_t gold_size, int k,
                                       bool strict_k = false, bool allow_any_k = false);

struct eval_options {
    std::vector<int> ks = {1, 3, 5};
    bool strict_k = false;
    bool allow_any_k = false;
};

struct metric_row {
    int matched = 0;
    double p = 0.0;
    double r = 0.0;
    double f1 = 0.0;
};

struct sample_result {
    std::string id;
    bool missing = false;  // no prediction supplied; scored as zeros
    std::map<int, metric_row> at;
};

struct metric_aggregate {
    std::size_t count = 0;
    std::map<int, metric_triple> at;  // arithmetic means over samples
};

struct eval_report {
    std::vector<int> ks;
    std::vector<sample_result> samples;
    metric_aggregate overall;
    std::map<int, metric_aggregate> by_level;
    std::map<std::string, metric_aggregate> by_chart;  // once per distinct gold mark
    std::map<std::string, metric_aggregate> by_style;
    std::vector<std::string> missing_ids;
};

eval_report evaluate_dataset(const std::map<std::string, std::vector<vis_spec>>& preds,
                             const std::vector<benchmark_sample>& bench,
                             const eval_options& opts = {},
                             const design_rules& rules = default_rules());

nlohmann::json report_to_json(const eval_report& report);
std::string report_to_text(const eval_report& report);

struct stats_report {
    std::size_t samples = 0;
    std::map<int, std::size_t> by_level;
    std::map<std::string, std::size_t> by_chart;
    std::map<std::string, std::size_t> by_style;
    std::map<std::string, std::size_t> by_pattern;  // "+"-joined categories
    std::size_t word_min = 0;
    double word_avg = 0.0;
    std::size_t word_max = 0;
};

stats_report dataset_stats(const std::vector<benchmark_sample>& bench);
nlohmann::json stats_to_json(const stats_report& stats);
std::string stats_to_text(const stats_report& stats);

struct dataset_splits {
    std::vector<benchmark_sample> train;
    std::vector<benchmark_sample> dev;
    std::vector<benchmark_sample> test;
};

// Deterministic shuffle, floor allocation for train and dev, remainder to
// test. Raises bad_ratios_error when the ratios are negative or do not sum
// to 1.
dataset_splits split_dataset(const std::vector<benchmark_sample>& bench, double train,
                             double dev, double test, std::uint64_t rng_seed);

// External split file {"train": [ids], "dev": [ids], "test": [ids]} for
// reproducing published splits exactly; unknown or duplicated ids raise
// parse_error, unmentioned samples are left out.
dataset_splits split_by_manifest(const std::vector<benchmark_sample>& bench,
                                 const std::string& manifest_path);

}  // namespace ambivis
