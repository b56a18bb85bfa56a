#include <benchmark/benchmark.h>

#include <vector>

#include "ambivis/eval.hpp"
#include "ambivis/vis.hpp"

namespace {

ambivis::vis_spec spec_for(int i, const char* mark) {
    using namespace ambivis;
    vis_spec s;
    s.table_ref = "t";
    s.mark = mark;
    s.encodings[channel::x] = encoding{"cat_" + std::to_string(i % 3),
                                       data_type::categorical, {}, {}};
    s.encodings[channel::y] = encoding{"qty_" + std::to_string(i % 4),
                                       data_type::quantitative, {}, "mean"};
    return s;
}

void bm_match_specs(benchmark::State& state) {
    std::vector<nlohmann::json> gold;
    for (int i = 0; i < 5; ++i)
        gold.push_back(ambivis::canonicalize(spec_for(i, "bar")).normalized);
    std::vector<ambivis::vis_spec> pred;
    for (int i = 0; i < 5; ++i) pred.push_back(spec_for(i, i % 2 ? "bar" : "line"));
    for (auto _ : state) {
        auto flags = ambivis::match_specs(pred, gold);
        benchmark::DoNotOptimize(flags);
    }
}
BENCHMARK(bm_match_specs);

void bm_metrics_at_k(benchmark::State& state) {
    std::vector<bool> flags = {true, false, true, false, true};
    for (auto _ : state) {
        for (int k : {1, 3, 5}) {
            auto m = ambivis::precision_recall_f1_at_k(flags, 4, k);
            benchmark::DoNotOptimize(m);
        }
    }
}
BENCHMARK(bm_metrics_at_k);

}  // namespace
