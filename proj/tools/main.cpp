// ambivis command line tool: synthesize benchmarks, resolve ambiguous trees,
// score predictions, print dataset statistics, and build preference pairs.
//
// Exit codes: 0 success, 1 configuration problem, 2 bad input data.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambivis/error.hpp"
#include "ambivis/eval.hpp"
#include "ambivis/pipeline.hpp"
#include "ambivis/reasoning.hpp"
#include "ambivis/solver.hpp"
#include "ambivis/table.hpp"
#include "ambivis/vis.hpp"

namespace {

using nlohmann::json;

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_data = 2;

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ambivis::parse_error("cannot open " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ambivis::parse_error("invalid JSON in " + path);
    return doc;
}

std::string schema_and_query(const ambivis::table& tab, const std::string& query) {
    std::ostringstream out;
    out << "Table " << tab.name << ": ";
    for (std::size_t i = 0; i < tab.columns.size(); ++i) {
        if (i) out << ", ";
        out << tab.columns[i].name << " (" << ambivis::to_string(tab.columns[i].type)
            << ")";
    }
    out << "\nQuery: " << query;
    return out.str();
}

int cmd_synthesize(const std::string& config_path,
                   const std::vector<std::string>& overrides) {
    ambivis::pipeline_config cfg;
    if (!config_path.empty()) cfg = ambivis::load_config(config_path);
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ambivis::config_error("--set expects key=value, got: " + kv);
        ambivis::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    ambivis::synthesis_outcome out = ambivis::run_synthesis(cfg);
    ambivis::write_synthesis_outputs(cfg, out);
    std::size_t ok = 0;
    for (const auto& e : out.manifest) {
        if (e.outcome == "ok") {
            ++ok;
        } else {
            std::cerr << "seed " << e.seed_id << ": " << e.outcome;
            if (!e.detail.empty()) std::cerr << " (" << e.detail << ")";
            std::cerr << "\n";
        }
    }
    std::cout << ok << "/" << out.manifest.size() << " seeds ok; wrote "
              << cfg.output_dir << "/benchmark.jsonl and " << cfg.output_dir
              << "/manifest.json\n";
    return exit_ok;
}

int cmd_solve(const std::string& tree_path, const std::string& tables_dir,
              const std::string& table_override, bool compact) {
    ambivis::vis_tree tree = ambivis::tree_from_json(read_json_file(tree_path));
    std::string ref = table_override.empty() ? tree.table_ref : table_override;
    if (ref.empty())
        throw ambivis::parse_error("tree has no table reference; pass --table");
    ambivis::table tab = ambivis::load_table_by_ref(tables_dir, ref);
    auto resolved = ambivis::resolve(tree, tab);
    json docs = json::array();
    for (const auto& rt : resolved)
        docs.push_back(ambivis::to_vegalite(ambivis::flatten(rt, tab)));
    std::cout << (compact ? docs.dump() : docs.dump(2)) << "\n";
    std::cerr << resolved.size() << " visualization(s)\n";
    return exit_ok;
}

int cmd_evaluate(const std::string& bench_path, const std::string& preds_path,
                 const std::vector<int>& ks, bool strict_k,
                 const std::string& json_out, const std::string& text_out) {
    auto bench = ambivis::load_benchmark(bench_path);
    auto preds = ambivis::load_predictions(preds_path);
    ambivis::eval_options opts;
    if (!ks.empty()) {
        opts.ks = ks;
        for (int k : ks)
            if (k != 1 && k != 3 && k != 5) opts.allow_any_k = true;
    }
    opts.strict_k = strict_k;
    ambivis::eval_report report = ambivis::evaluate_dataset(preds, bench, opts);
    for (const auto& id : report.missing_ids)
        std::cerr << "warning: no prediction for " << id << " (scored as zeros)\n";
    std::string text = ambivis::report_to_text(report);
    if (!text_out.empty()) {
        std::ofstream out(text_out, std::ios::binary);
        if (!out) throw ambivis::error("cannot write " + text_out);
        out << text;
    }
    if (!json_out.empty()) {
        std::ofstream out(json_out, std::ios::binary);
        if (!out) throw ambivis::error("cannot write " + json_out);
        out << ambivis::report_to_json(report).dump(2) << "\n";
    }
    std::cout << text;
    return exit_ok;
}

int cmd_stats(const std::string& bench_path, const std::string& json_out) {
    auto bench = ambivis::load_benchmark(bench_path);
    ambivis::stats_report stats = ambivis::dataset_stats(bench);
    if (!json_out.empty()) {
        std::ofstream out(json_out, std::ios::binary);
        if (!out) throw ambivis::error("cannot write " + json_out);
        out << ambivis::stats_to_json(stats).dump(2) << "\n";
    }
    std::cout << ambivis::stats_to_text(stats);
    return exit_ok;
}

int cmd_prefpairs(const std::string& bench_path, const std::string& outputs_path,
                  const std::string& tables_dir, const std::string& pairs_out,
                  std::string errors_out, bool subset_ok) {
    auto bench = ambivis::load_benchmark(bench_path);

    std::ifstream in(outputs_path);
    if (!in) throw ambivis::parse_error("cannot open " + outputs_path);
    std::map<std::string, std::string> outputs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("id") ||
            !doc.contains("output"))
            throw ambivis::parse_error("model output line needs {\"id\", \"output\"}",
                                       lineno);
        outputs[doc["id"].get<std::string>()] = doc["output"].get<std::string>();
    }

    json errors = json::array();
    std::set<std::string> bench_ids;
    std::map<std::string, ambivis::table> tables;
    std::vector<ambivis::preference_input> inputs;
    std::vector<ambivis::reasoning_path> predictions;
    for (const auto& s : bench) {
        bench_ids.insert(s.id);
        auto it = outputs.find(s.id);
        if (it == outputs.end()) {
            errors.push_back({{"id", s.id}, {"error", "missing-output"}});
            continue;
        }
        ambivis::reasoning_path pred;
        try {
            pred = ambivis::parse_step_tagged(it->second);
        } catch (const ambivis::tag_error& e) {
            errors.push_back({{"id", s.id}, {"error", "tag-error"}, {"detail", e.what()}});
            continue;
        }
        auto tab = tables.find(s.table_ref);
        if (tab == tables.end())
            tab = tables.emplace(s.table_ref,
                                 ambivis::load_table_by_ref(tables_dir, s.table_ref))
                      .first;
        ambivis::preference_input pi;
        pi.id = s.id;
        pi.x = schema_and_query(tab->second, s.query);
        pi.gold = s.reasoning;
        inputs.push_back(std::move(pi));
        predictions.push_back(std::move(pred));
    }
    for (const auto& [id, _] : outputs)
        if (!bench_ids.count(id)) errors.push_back({{"id", id}, {"error", "unknown-id"}});

    auto pairs = ambivis::build_preference_pairs(inputs, predictions, subset_ok);

    std::ofstream out(pairs_out, std::ios::binary);
    if (!out) throw ambivis::error("cannot write " + pairs_out);
    for (const auto& p : pairs) out << ambivis::pair_to_json(p).dump() << "\n";

    if (errors_out.empty()) {
        auto dot = pairs_out.rfind('.');
        errors_out = (dot == std::string::npos ? pairs_out : pairs_out.substr(0, dot)) +
                     ".errors.jsonl";
    }
    std::ofstream err(errors_out, std::ios::binary);
    if (!err) throw ambivis::error("cannot write " + errors_out);
    for (const auto& e : errors) err << e.dump() << "\n";

    std::cout << pairs.size() << " pair(s) -> " << pairs_out << "; " << errors.size()
              << " problem row(s) -> " << errors_out << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ambiguity-aware NL2VIS benchmark synthesizer and evaluator"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto* synth = app.add_subcommand("synthesize",
                                     "run the seed -> benchmark synthesis pipeline");
    synth->add_option("--config,-c", config_path, "pipeline config file (.json or .toml)");
    synth->add_option("--set", overrides, "override a config key, e.g. --set workers=8");

    std::string tree_path, tables_dir = "assets/tables", table_override;
    bool compact = false;
    auto* solve = app.add_subcommand("solve",
                                     "resolve an ambiguous tree into chart documents");
    solve->add_option("tree", tree_path, "tree JSON file")->required();
    solve->add_option("--tables-dir", tables_dir, "directory holding data tables");
    solve->add_option("--table", table_override, "table reference overriding the tree's");
    solve->add_flag("--compact", compact, "print a single-line JSON array");

    std::string bench_path, preds_path, json_out, text_out;
    std::vector<int> ks;
    bool strict_k = false;
    auto* eval = app.add_subcommand("evaluate",
                                    "score predictions against a benchmark file");
    eval->add_option("--benchmark,-b", bench_path, "benchmark JSONL")->required();
    eval->add_option("--predictions,-p", preds_path, "predictions JSONL")->required();
    eval->add_option("--k", ks, "cutoffs to report (default 1 3 5)");
    eval->add_flag("--strict-k", strict_k, "divide precision by K even for short lists");
    eval->add_option("--out", json_out, "also write the report as JSON here");
    eval->add_option("--text-out", text_out, "also write the text report here");

    std::string stats_bench, stats_out;
    auto* stats = app.add_subcommand("stats", "summarize a benchmark file");
    stats->add_option("--benchmark,-b", stats_bench, "benchmark JSONL")->required();
    stats->add_option("--out", stats_out, "also write the stats as JSON here");

    std::string pp_bench, pp_outputs, pp_tables = "assets/tables",
                          pp_out = "pairs.jsonl", pp_errors;
    bool pp_subset = false;
    auto* pp = app.add_subcommand(
        "prefpairs", "build step-wise preference pairs from model outputs");
    pp->add_option("--benchmark,-b", pp_bench, "benchmark JSONL")->required();
    pp->add_option("--outputs,-o", pp_outputs, "model outputs JSONL with id + output")
        ->required();
    pp->add_option("--tables-dir", pp_tables, "directory holding data tables");
    pp->add_option("--out", pp_out, "preference pairs JSONL to write");
    pp->add_option("--errors", pp_errors, "problem rows JSONL (default <out>.errors.jsonl)");
    pp->add_flag("--subset-ok", pp_subset,
                 "treat a nonempty subset of the gold action set as correct");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (synth->parsed()) return cmd_synthesize(config_path, overrides);
        if (solve->parsed()) return cmd_solve(tree_path, tables_dir, table_override, compact);
        if (eval->parsed())
            return cmd_evaluate(bench_path, preds_path, ks, strict_k, json_out, text_out);
        if (stats->parsed()) return cmd_stats(stats_bench, stats_out);
        if (pp->parsed())
            return cmd_prefpairs(pp_bench, pp_outputs, pp_tables, pp_out, pp_errors,
                                 pp_subset);
    } catch (const ambivis::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    }
    return exit_config;
}
