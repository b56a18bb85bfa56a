#include <benchmark/benchmark.h>

#include "ambivis/table.hpp"
#include "ambivis/vis.hpp"

namespace {

ambivis::vis_spec sample_spec() {
    using namespace ambivis;
    vis_spec s;
    s.table_ref = "movies";
    s.mark = "bar";
    s.encodings[channel::x] = encoding{"Date", data_type::temporal, "year", {}};
    s.encodings[channel::y] = encoding{"World_Gross", data_type::quantitative, {}, "mean"};
    s.encodings[channel::color] = encoding{"Genre", data_type::categorical, {}, {}};
    s.filters.push_back({"Genre", "in", {"Drama", "Action", "Comedy"}});
    s.sort = {ambivis::channel::y, "descending"};
    return s;
}

void bm_canonicalize(benchmark::State& state) {
    ambivis::vis_spec s = sample_spec();
    for (auto _ : state) {
        auto c = ambivis::canonicalize(s);
        benchmark::DoNotOptimize(c);
    }
}
BENCHMARK(bm_canonicalize);

void bm_to_vegalite(benchmark::State& state) {
    ambivis::vis_spec s = sample_spec();
    for (auto _ : state) {
        auto doc = ambivis::to_vegalite(s);
        benchmark::DoNotOptimize(doc);
    }
}
BENCHMARK(bm_to_vegalite);

void bm_spec_json_round_trip(benchmark::State& state) {
    ambivis::vis_spec s = sample_spec();
    for (auto _ : state) {
        auto back = ambivis::spec_from_json(ambivis::spec_to_json(s));
        benchmark::DoNotOptimize(back);
    }
}
BENCHMARK(bm_spec_json_round_trip);

}  // namespace
