#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ambivis/pipeline.hpp"
#include "support/paths.hpp"

using namespace ambivis;
using nlohmann::json;

namespace {

// Self-contained config pointing at the bundled assets and a scratch output.
pipeline_config demo_config(const testpaths::scratch_dir& dir) {
    pipeline_config cfg = load_config(testpaths::asset("configs/demo.json"));
    cfg.seeds_file = testpaths::asset("seeds/demo_seeds.jsonl");
    cfg.tables_dir = testpaths::asset("tables");
    cfg.alias_kb_file = testpaths::asset("alias_kb.json");
    cfg.exemplars_file = testpaths::asset("exemplars.json");
    cfg.output_dir = dir.file("out");
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("json and toml configs describe the same run") {
    pipeline_config a = load_config(testpaths::asset("configs/demo.json"));
    pipeline_config b = load_config(testpaths::asset("configs/demo.toml"));
    CHECK(a.seeds_file == b.seeds_file);
    CHECK(a.backend == b.backend);
    CHECK(a.rng_seed == b.rng_seed);
    CHECK(a.workers == b.workers);
    CHECK(a.injection.min_level == b.injection.min_level);
    CHECK(a.injection.max_level == b.injection.max_level);
    CHECK(a.injection.categories == b.injection.categories);
    CHECK(a.nl.max_attempts == b.nl.max_attempts);
    CHECK(a.w_caption == b.w_caption);
}

TEST_CASE("config parsing rejects unknown keys and bad files") {
    CHECK_THROWS_AS(config_from_json(json{{"seedz", "x"}}), config_error);
    CHECK_THROWS_AS(config_from_json(json{{"llm", {{"modle", "m"}}}}), config_error);
    CHECK_THROWS_AS(config_from_json(json::array()), config_error);

    testpaths::scratch_dir dir("cfg");
    write_file(dir.file("c.yaml"), "a: 1\n");
    CHECK_THROWS_AS(load_config(dir.file("c.yaml")), config_error);
    CHECK_THROWS_AS(load_config(dir.file("missing.json")), config_error);
    write_file(dir.file("broken.json"), "{nope");
    CHECK_THROWS_AS(load_config(dir.file("broken.json")), config_error);
}

TEST_CASE("overrides reach every dotted namespace") {
    pipeline_config cfg;
    apply_override(cfg, "seeds", "s.jsonl");
    apply_override(cfg, "backend", "replay");
    apply_override(cfg, "replay_file", "fix.jsonl");
    apply_override(cfg, "rng_seed", "99");
    apply_override(cfg, "workers", "2");
    apply_override(cfg, "llm.model", "m1");
    apply_override(cfg, "llm.temperature", "0.25");
    apply_override(cfg, "llm.max_retries", "7");
    apply_override(cfg, "injection.target_level", "4");
    apply_override(cfg, "injection.categories", "DS,CT");
    apply_override(cfg, "injection.decorate", "false");
    apply_override(cfg, "nl.max_attempts", "9");
    apply_override(cfg, "styles.question", "0.5");

    CHECK(cfg.seeds_file == "s.jsonl");
    CHECK(cfg.backend == "replay");
    CHECK(cfg.replay_file == "fix.jsonl");
    CHECK(cfg.rng_seed == 99);
    CHECK(cfg.workers == 2);
    CHECK(cfg.llm.model == "m1");
    CHECK(cfg.llm.temperature == doctest::Approx(0.25));
    CHECK(cfg.llm.max_retries == 7);
    CHECK(cfg.injection.target_level == 4);
    CHECK(cfg.injection.categories == std::set<std::string>{"CT", "DS"});
    CHECK_FALSE(cfg.injection.decorate);
    CHECK(cfg.nl.max_attempts == 9);
    CHECK(cfg.w_question == doctest::Approx(0.5));

    CHECK_THROWS_AS(apply_override(cfg, "no_such_key", "1"), config_error);
    CHECK_THROWS_AS(apply_override(cfg, "workers", "many"), config_error);
    CHECK_THROWS_AS(apply_override(cfg, "llm.temperature", "warm"), config_error);
}

TEST_CASE("validate_config checks paths, backends and weights") {
    testpaths::scratch_dir dir("val");
    pipeline_config cfg = demo_config(dir);
    CHECK_NOTHROW(validate_config(cfg));

    pipeline_config bad = cfg;
    bad.seeds_file = dir.file("nowhere.jsonl");
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.backend = "telepathy";
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.backend = "replay";  // replay demands a fixture
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.w_question = bad.w_command = bad.w_caption = 0.0;
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.w_command = -1.0;
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.workers = 0;
    CHECK_THROWS_AS(validate_config(bad), config_error);

    bad = cfg;
    bad.injection.categories = {"DS", "??"};
    CHECK_THROWS_AS(validate_config(bad), config_error);
}

TEST_CASE("make_backend builds the configured client") {
    testpaths::scratch_dir dir("mk");
    pipeline_config cfg = demo_config(dir);
    CHECK(make_backend(cfg)->name() == "null");

    cfg.backend = "record";
    cfg.record_inner = "null";
    cfg.replay_file = dir.file("rec.jsonl");
    CHECK(make_backend(cfg)->name() == "record(null)");

    cfg.backend = "http";
    CHECK(make_backend(cfg)->name() == "http");
}

TEST_CASE("seed records parse with defaults and reject duplicates") {
    testpaths::scratch_dir dir("seeds");
    write_file(dir.file("s.jsonl"),
               R"({"table": "movies", "spec": {"mark": "bar"}})"
               "\n\n"
               R"({"id": "named", "table": "movies", "spec": {"mark": "line"}, "target_level": 3, "style": "caption"})"
               "\n");
    auto seeds = load_seeds(dir.file("s.jsonl"));
    REQUIRE(seeds.size() == 2);
    CHECK(seeds[0].id == "seed_1");
    CHECK(seeds[0].target_level == 0);
    CHECK(seeds[0].style.empty());
    CHECK(seeds[1].id == "named");
    CHECK(seeds[1].target_level == 3);
    CHECK(seeds[1].style == "caption");

    write_file(dir.file("dup.jsonl"),
               R"({"id": "x", "table": "t", "spec": {}})"
               "\n"
               R"({"id": "x", "table": "t", "spec": {}})"
               "\n");
    CHECK_THROWS_AS(load_seeds(dir.file("dup.jsonl")), parse_error);

    write_file(dir.file("nospec.jsonl"), R"({"table": "t"})"
                                         "\n");
    CHECK_THROWS_AS(load_seeds(dir.file("nospec.jsonl")), parse_error);

    write_file(dir.file("garbled.jsonl"), "not json\n");
    try {
        load_seeds(dir.file("garbled.jsonl"));
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.line == 1);
    }
}

TEST_CASE("table refs resolve through extension candidates") {
    table t1 = load_table_by_ref(testpaths::asset("tables"), "movies");
    CHECK(t1.name == "movies");
    table t2 = load_table_by_ref(testpaths::asset("tables"), "movies.csv");
    CHECK(t2.name == "movies");
    CHECK_THROWS_AS(load_table_by_ref(testpaths::asset("tables"), "nope"), parse_error);
}

TEST_CASE("run_synthesis produces a sample and manifest row per seed") {
    testpaths::scratch_dir dir("run");
    pipeline_config cfg = demo_config(dir);
    synthesis_outcome out = run_synthesis(cfg);

    auto seeds = load_seeds(cfg.seeds_file);
    CHECK(out.manifest.size() == seeds.size());
    CHECK(out.samples.size() == seeds.size());  // the demo seeds all succeed
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        CHECK(out.manifest[i].seed_id == seeds[i].id);
        CHECK(out.manifest[i].outcome == "ok");
        CHECK(out.manifest[i].level >= cfg.injection.min_level);
        CHECK(out.manifest[i].level <= cfg.injection.max_level);
    }
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const benchmark_sample& s = out.samples[i];
        CHECK(s.id == seeds[i].id);
        CHECK_FALSE(s.query.empty());
        CHECK(s.level == static_cast<int>(s.gold_specs.size()));
        CHECK(s.reasoning.steps.size() == 5);
        if (seeds[i].target_level > 0) CHECK(s.level == seeds[i].target_level);
        if (!seeds[i].style.empty()) CHECK(s.style == seeds[i].style);
    }

    write_synthesis_outputs(cfg, out);
    CHECK(load_benchmark(cfg.output_dir + "/benchmark.jsonl").size() == out.samples.size());
    json manifest = json::parse(slurp(cfg.output_dir + "/manifest.json"));
    CHECK(manifest["total"] == seeds.size());
    CHECK(manifest["ok"] == out.samples.size());
}

TEST_CASE("worker count does not change the output") {
    testpaths::scratch_dir dir("det");
    pipeline_config cfg = demo_config(dir);

    pipeline_config serial = cfg;
    serial.workers = 1;
    serial.output_dir = dir.file("serial");
    pipeline_config parallel = cfg;
    parallel.workers = 8;
    parallel.output_dir = dir.file("parallel");

    write_synthesis_outputs(serial, run_synthesis(serial));
    write_synthesis_outputs(parallel, run_synthesis(parallel));

    CHECK(slurp(dir.file("serial") + "/benchmark.jsonl") ==
          slurp(dir.file("parallel") + "/benchmark.jsonl"));
    CHECK(slurp(dir.file("serial") + "/manifest.json") ==
          slurp(dir.file("parallel") + "/manifest.json"));
}

TEST_CASE("one broken seed does not sink the run") {
    testpaths::scratch_dir dir("iso");
    pipeline_config cfg = demo_config(dir);
    write_file(dir.file("seeds.jsonl"),
               R"({"id": "good", "table": "movies", "spec": {"table": "movies", "mark": "bar", "encoding": {"x": {"field": "Genre"}, "y": {"field": "World_Gross", "aggregate": "mean"}}}})"
               "\n"
               R"({"id": "lost", "table": "atlantis", "spec": {"table": "atlantis", "mark": "bar", "encoding": {}}})"
               "\n"
               R"({"id": "stuck", "table": "movies", "target_level": 5, "spec": {"table": "movies", "mark": "bar", "encoding": {"x": {"field": "Genre"}, "y": {"field": "World_Gross", "aggregate": "mean"}}}})"
               "\n");
    cfg.seeds_file = dir.file("seeds.jsonl");
    cfg.injection.categories = {"DS"};
    cfg.injection.target_level = 2;

    synthesis_outcome out = run_synthesis(cfg);
    REQUIRE(out.manifest.size() == 3);
    CHECK(out.manifest[0].outcome == "ok");
    CHECK(out.manifest[1].outcome == "error");
    CHECK_FALSE(out.manifest[1].detail.empty());
    CHECK(out.manifest[2].outcome == "target-unreachable");
    CHECK(out.manifest[2].level == 2);  // best achievable with DS alone
    CHECK(out.samples.size() == 1);
    CHECK(out.samples[0].id == "good");

    json manifest = manifest_to_json(out);
    CHECK(manifest["total"] == 3);
    CHECK(manifest["ok"] == 1);
    CHECK(manifest["seeds"][2]["outcome"] == "target-unreachable");
}

TEST_CASE("fixed seed styles override the weighted pick") {
    testpaths::scratch_dir dir("style");
    pipeline_config cfg = demo_config(dir);
    write_file(
        dir.file("seeds.jsonl"),
        R"({"id": "cap", "table": "movies", "style": "caption", "spec": {"table": "movies", "mark": "bar", "encoding": {"x": {"field": "Genre"}, "y": {"field": "World_Gross", "aggregate": "mean"}}}})"
        "\n");
    cfg.seeds_file = dir.file("seeds.jsonl");
    cfg.w_caption = 0.0;  // weights say never caption; the seed insists
    synthesis_outcome out = run_synthesis(cfg);
    REQUIRE(out.samples.size() == 1);
    CHECK(out.samples[0].style == "caption");
}
