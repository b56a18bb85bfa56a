#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambivis/eval.hpp"
#include "ambivis/injector.hpp"
#include "ambivis/llm.hpp"
#include "ambivis/nl.hpp"
#include "ambivis/table.hpp"

namespace ambivis {

struct pipeline_config {
    std::string seeds_file;
    std::string tables_dir = "assets/tables";
    std::string alias_kb_file;
    std::string exemplars_file;
    std::string prompts_dir;
    std::string output_dir = "out";

    std::string backend = "null";  // http | null | replay | record
    std::string record_inner = "http";  // backend wrapped by record
    std::string replay_file;            // replay source / record sink
    llm_options llm;
    bool refine_with_llm = false;

    injection_config injection;
    nl_config nl;

    double w_question = 1.0;
    double w_command = 1.0;
    double w_caption = 1.0;

    std::uint64_t rng_seed = 0;
    int workers = 4;
};

pipeline_config config_from_json(const nlohmann::json& doc);

// JSON or a TOML subset ([section] headers, key = value lines, strings,
// numbers, booleans), chosen by file extension.
pipeline_config load_config(const std::string& path);

// Dotted keys as accepted by --set, e.g. "llm.model" or
// "injection.target_level"; unknown keys and unparseable values raise
// config_error.
void apply_override(pipeline_config& cfg, const std::string& key,
                    const std::string& value);

// Path existence, weight positivity, backend name checks; raises
// config_error.
void validate_config(const pipeline_config& cfg);

std::shared_ptr<llm_client> make_backend(const pipeline_config& cfg);

// One seeds.jsonl line: a chart spec plus synthesis knobs.
struct seed_record {
    std::string id;
    std::string table;  // file name under tables_dir, or a bare table ref
    nlohmann::json spec;
    int target_level = 0;  // 0 falls back to the run-wide injection target
    std::string style;     // empty picks by the configured style weights
};

std::vector<seed_record> load_seeds(const std::string& path);

struct manifest_entry {
    std::string seed_id;
    std::string outcome;  // ok | retries-exhausted | target-unreachable | error
    std::string detail;
    int level = 0;
};

struct synthesis_outcome {
    std::vector<benchmark_sample> samples;   // seed order
    std::vector<manifest_entry> manifest;    // every seed exactly once, seed order
};

// Full synthesize run: per-seed build -> inject -> resolve -> NL -> reasoning,
// processed by a bounded worker pool with per-seed rng streams; one seed's
// failure is recorded in the manifest and does not stop the run.
synthesis_outcome run_synthesis(const pipeline_config& cfg);

// benchmark.jsonl and manifest.json under cfg.output_dir.
void write_synthesis_outputs(const pipeline_config& cfg, const synthesis_outcome& out);

nlohmann::json manifest_to_json(const synthesis_outcome& out);

// Resolves a benchmark table_ref to a file under tables_dir (exact name,
// then .csv/.jsonl/.ndjson) and loads it.
table load_table_by_ref(const std::string& tables_dir, const std::string& ref);

}  // namespace ambivis
