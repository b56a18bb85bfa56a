#include <benchmark/benchmark.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "ambivis/solver.hpp"
#include "ambivis/table.hpp"
#include "ambivis/vis.hpp"

namespace {

ambivis::table movies() {
    return ambivis::load_table(std::string(AMBIVIS_SOURCE_DIR) + "/assets/tables/movies.csv");
}

ambivis::vis_tree golden_tree() {
    std::ifstream in(std::string(AMBIVIS_SOURCE_DIR) + "/assets/examples/ambiguous_tree.json");
    nlohmann::json doc;
    in >> doc;
    return ambivis::tree_from_json(doc);
}

void bm_resolve_golden(benchmark::State& state) {
    ambivis::table tab = movies();
    ambivis::vis_tree tree = golden_tree();
    for (auto _ : state) {
        auto trees = ambivis::resolve(tree, tab);
        benchmark::DoNotOptimize(trees);
    }
}
BENCHMARK(bm_resolve_golden);

void bm_compile_golden(benchmark::State& state) {
    ambivis::table tab = movies();
    ambivis::vis_tree tree = golden_tree();
    for (auto _ : state) {
        auto program = ambivis::compile(tree, tab);
        benchmark::DoNotOptimize(program);
    }
}
BENCHMARK(bm_compile_golden);

// Widest tree the assets support: implicit mark and a free select give the
// enumerator a few hundred raw assignments.
void bm_resolve_wide(benchmark::State& state) {
    ambivis::table tab = movies();
    ambivis::vis_tree tree;
    tree.table_ref = "movies";
    ambivis::action_node mark;
    mark.op = ambivis::op_kind::mark;
    mark.tag = ambivis::ambiguity_tag::implicit;
    tree.nodes.push_back(mark);
    ambivis::action_node sel;
    sel.op = ambivis::op_kind::column_select;
    sel.tag = ambivis::ambiguity_tag::implicit;
    tree.nodes.push_back(sel);
    for (auto _ : state) {
        auto trees = ambivis::resolve(tree, tab);
        benchmark::DoNotOptimize(trees);
    }
}
BENCHMARK(bm_resolve_wide);

}  // namespace

BENCHMARK_MAIN();
