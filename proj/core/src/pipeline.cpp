#include "ambivis/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "ambivis/error.hpp"
#include "ambivis/metadata.hpp"
#include "ambivis/reasoning.hpp"
#include "ambivis/solver.hpp"

namespace fs = std::filesystem;

namespace ambivis {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("bad integer for " + key + ": " + v);
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        std::uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("bad unsigned integer for " + key + ": " + v);
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("bad number for " + key + ": " + v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    std::string s = lower(v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw config_error("bad boolean for " + key + ": " + v);
}

std::set<std::string> to_categories(const std::string& v) {
    std::set<std::string> out;
    std::istringstream in(v);
    std::string part;
    while (std::getline(in, part, ',')) {
        part = trim(part);
        if (!part.empty()) out.insert(part);
    }
    return out;
}

void expect_keys(const json& doc, const std::set<std::string>& known,
                 const std::string& where) {
    if (!doc.is_object())
        throw config_error("config section " + (where.empty() ? "(top level)" : where) +
                           " must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (!known.count(it.key()))
            throw config_error("unknown config key " +
                               (where.empty() ? it.key() : where + "." + it.key()));
}

// Minimal TOML reader: [section] headers, key = value with quoted strings,
// numbers and booleans; # starts a comment outside quotes.
std::vector<std::pair<std::string, std::string>> parse_toml_pairs(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped;
        bool quoted = false;
        for (char c : line) {
            if (c == '"') quoted = !quoted;
            if (c == '#' && !quoted) break;
            stripped += c;
        }
        stripped = trim(stripped);
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw config_error("bad section header at line " + std::to_string(lineno));
            section = trim(stripped.substr(1, stripped.size() - 2));
            continue;
        }
        auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw config_error("expected key = value at line " + std::to_string(lineno));
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw config_error("empty key at line " + std::to_string(lineno));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        out.emplace_back(section.empty() ? key : section + "." + key, value);
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct seed_outcome {
    std::optional<benchmark_sample> sample;
    manifest_entry entry;
};

}  // namespace

pipeline_config config_from_json(const json& doc) {
    pipeline_config cfg;
    expect_keys(doc,
                {"seeds", "tables_dir", "alias_kb", "exemplars", "prompts_dir",
                 "output_dir", "backend", "record_inner", "replay_file",
                 "refine_with_llm", "llm", "injection", "nl", "styles", "rng_seed",
                 "workers"},
                "");
    cfg.seeds_file = doc.value("seeds", cfg.seeds_file);
    cfg.tables_dir = doc.value("tables_dir", cfg.tables_dir);
    cfg.alias_kb_file = doc.value("alias_kb", cfg.alias_kb_file);
    cfg.exemplars_file = doc.value("exemplars", cfg.exemplars_file);
    cfg.prompts_dir = doc.value("prompts_dir", cfg.prompts_dir);
    cfg.output_dir = doc.value("output_dir", cfg.output_dir);
    cfg.backend = doc.value("backend", cfg.backend);
    cfg.record_inner = doc.value("record_inner", cfg.record_inner);
    cfg.replay_file = doc.value("replay_file", cfg.replay_file);
    cfg.refine_with_llm = doc.value("refine_with_llm", cfg.refine_with_llm);
    cfg.rng_seed = doc.value("rng_seed", cfg.rng_seed);
    cfg.workers = doc.value("workers", cfg.workers);
    if (doc.contains("llm")) {
        const json& l = doc["llm"];
        expect_keys(l,
                    {"base_url", "model", "api_key_env", "temperature", "timeout_ms",
                     "max_retries", "retry_backoff_ms", "max_concurrency"},
                    "llm");
        cfg.llm.base_url = l.value("base_url", cfg.llm.base_url);
        cfg.llm.model = l.value("model", cfg.llm.model);
        cfg.llm.api_key_env = l.value("api_key_env", cfg.llm.api_key_env);
        cfg.llm.temperature = l.value("temperature", cfg.llm.temperature);
        cfg.llm.timeout_ms = l.value("timeout_ms", cfg.llm.timeout_ms);
        cfg.llm.max_retries = l.value("max_retries", cfg.llm.max_retries);
        cfg.llm.retry_backoff_ms = l.value("retry_backoff_ms", cfg.llm.retry_backoff_ms);
        cfg.llm.max_concurrency = l.value("max_concurrency", cfg.llm.max_concurrency);
    }
    if (doc.contains("injection")) {
        const json& i = doc["injection"];
        expect_keys(i,
                    {"target_level", "min_level", "max_level", "categories", "rng_seed",
                     "max_attempts", "decorate", "max_models"},
                    "injection");
        cfg.injection.target_level = i.value("target_level", cfg.injection.target_level);
        cfg.injection.min_level = i.value("min_level", cfg.injection.min_level);
        cfg.injection.max_level = i.value("max_level", cfg.injection.max_level);
        if (i.contains("categories")) {
            cfg.injection.categories.clear();
            for (const auto& c : i["categories"])
                cfg.injection.categories.insert(c.get<std::string>());
        }
        cfg.injection.rng_seed = i.value("rng_seed", cfg.injection.rng_seed);
        cfg.injection.max_attempts = i.value("max_attempts", cfg.injection.max_attempts);
        cfg.injection.decorate = i.value("decorate", cfg.injection.decorate);
        cfg.injection.limits.max_models =
            i.value("max_models", cfg.injection.limits.max_models);
    }
    if (doc.contains("nl")) {
        const json& n = doc["nl"];
        expect_keys(n, {"max_attempts", "exemplar_count"}, "nl");
        cfg.nl.max_attempts = n.value("max_attempts", cfg.nl.max_attempts);
        cfg.nl.exemplar_count = n.value("exemplar_count", cfg.nl.exemplar_count);
    }
    if (doc.contains("styles")) {
        const json& s = doc["styles"];
        expect_keys(s, {"question", "command", "caption"}, "styles");
        cfg.w_question = s.value("question", cfg.w_question);
        cfg.w_command = s.value("command", cfg.w_command);
        cfg.w_caption = s.value("caption", cfg.w_caption);
    }
    return cfg;
}

pipeline_config load_config(const std::string& path) {
    std::string text = read_text_file(path);
    std::string ext = lower(fs::path(path).extension().string());
    if (ext == ".json") {
        json doc = json::parse(text, nullptr, false);
        if (doc.is_discarded() || !doc.is_object())
            throw config_error("config file is not a JSON object: " + path);
        return config_from_json(doc);
    }
    if (ext == ".toml") {
        pipeline_config cfg;
        for (const auto& [key, value] : parse_toml_pairs(text))
            apply_override(cfg, key, value);
        return cfg;
    }
    throw config_error("config file must end in .json or .toml: " + path);
}

void apply_override(pipeline_config& cfg, const std::string& key,
                    const std::string& value) {
    if (key == "seeds") cfg.seeds_file = value;
    else if (key == "tables_dir") cfg.tables_dir = value;
    else if (key == "alias_kb") cfg.alias_kb_file = value;
    else if (key == "exemplars") cfg.exemplars_file = value;
    else if (key == "prompts_dir") cfg.prompts_dir = value;
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "backend") cfg.backend = value;
    else if (key == "record_inner") cfg.record_inner = value;
    else if (key == "replay_file") cfg.replay_file = value;
    else if (key == "refine_with_llm") cfg.refine_with_llm = to_bool(key, value);
    else if (key == "rng_seed") cfg.rng_seed = to_u64(key, value);
    else if (key == "workers") cfg.workers = to_int(key, value);
    else if (key == "llm.base_url") cfg.llm.base_url = value;
    else if (key == "llm.model") cfg.llm.model = value;
    else if (key == "llm.api_key_env") cfg.llm.api_key_env = value;
    else if (key == "llm.temperature") cfg.llm.temperature = to_double(key, value);
    else if (key == "llm.timeout_ms") cfg.llm.timeout_ms = to_int(key, value);
    else if (key == "llm.max_retries") cfg.llm.max_retries = to_int(key, value);
    else if (key == "llm.retry_backoff_ms") cfg.llm.retry_backoff_ms = to_int(key, value);
    else if (key == "llm.max_concurrency") cfg.llm.max_concurrency = to_int(key, value);
    else if (key == "injection.target_level")
        cfg.injection.target_level = to_int(key, value);
    else if (key == "injection.min_level") cfg.injection.min_level = to_int(key, value);
    else if (key == "injection.max_level") cfg.injection.max_level = to_int(key, value);
    else if (key == "injection.categories") cfg.injection.categories = to_categories(value);
    else if (key == "injection.rng_seed") cfg.injection.rng_seed = to_u64(key, value);
    else if (key == "injection.max_attempts")
        cfg.injection.max_attempts = to_int(key, value);
    else if (key == "injection.decorate") cfg.injection.decorate = to_bool(key, value);
    else if (key == "injection.max_models")
        cfg.injection.limits.max_models = to_u64(key, value);
    else if (key == "nl.max_attempts") cfg.nl.max_attempts = to_int(key, value);
    else if (key == "nl.exemplar_count") cfg.nl.exemplar_count = to_int(key, value);
    else if (key == "styles.question") cfg.w_question = to_double(key, value);
    else if (key == "styles.command") cfg.w_command = to_double(key, value);
    else if (key == "styles.caption") cfg.w_caption = to_double(key, value);
    else throw config_error("unknown config key: " + key);
}

void validate_config(const pipeline_config& cfg) {
    if (cfg.seeds_file.empty()) throw config_error("seeds file not set");
    if (!fs::exists(cfg.seeds_file))
        throw config_error("seeds file does not exist: " + cfg.seeds_file);
    if (!fs::is_directory(cfg.tables_dir))
        throw config_error("tables_dir is not a directory: " + cfg.tables_dir);
    for (const auto& [label, path] :
         std::initializer_list<std::pair<const char*, const std::string&>>{
             {"alias_kb", cfg.alias_kb_file},
             {"exemplars", cfg.exemplars_file},
             {"prompts_dir", cfg.prompts_dir}}) {
        if (!path.empty() && !fs::exists(path))
            throw config_error(std::string(label) + " path does not exist: " + path);
    }
    if (cfg.backend != "http" && cfg.backend != "null" && cfg.backend != "replay" &&
        cfg.backend != "record")
        throw config_error("unknown backend: " + cfg.backend);
    if (cfg.backend == "replay" && !fs::exists(cfg.replay_file))
        throw config_error("replay file does not exist: " + cfg.replay_file);
    if (cfg.backend == "record" && cfg.replay_file.empty())
        throw config_error("record backend needs replay_file as its sink");
    if (cfg.backend == "record" && cfg.record_inner != "http" && cfg.record_inner != "null")
        throw config_error("record_inner must be http or null");
    if (cfg.w_question < 0 || cfg.w_command < 0 || cfg.w_caption < 0 ||
        cfg.w_question + cfg.w_command + cfg.w_caption <= 0)
        throw config_error("style weights must be nonnegative with a positive sum");
    if (cfg.workers < 1) throw config_error("workers must be at least 1");
    if (cfg.injection.categories.empty())
        throw config_error("no ambiguity categories enabled");
    for (const auto& c : cfg.injection.categories)
        if (c != "CE" && c != "CT" && c != "DS" && c != "DT")
            throw config_error("unknown ambiguity category: " + c);
    if (cfg.injection.min_level < 1 || cfg.injection.max_level < cfg.injection.min_level)
        throw config_error("injection level bounds are inverted or below 1");
}

std::shared_ptr<llm_client> make_backend(const pipeline_config& cfg) {
    if (cfg.backend == "null") return std::make_shared<null_llm_client>();
    if (cfg.backend == "http") return std::make_shared<http_llm_client>(cfg.llm);
    if (cfg.backend == "replay")
        return std::make_shared<replay_llm_client>(cfg.replay_file);
    if (cfg.backend == "record") {
        std::shared_ptr<llm_client> inner;
        if (cfg.record_inner == "null")
            inner = std::make_shared<null_llm_client>();
        else
            inner = std::make_shared<http_llm_client>(cfg.llm);
        return std::make_shared<recording_llm_client>(inner, cfg.replay_file);
    }
    throw config_error("unknown backend: " + cfg.backend);
}

std::vector<seed_record> load_seeds(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open seeds file: " + path);
    std::vector<seed_record> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object())
            throw parse_error("seed line is not a JSON object", lineno);
        seed_record s;
        s.id = doc.value("id", "seed_" + std::to_string(out.size() + 1));
        s.table = doc.value("table", "");
        if (s.table.empty()) throw parse_error("seed lacks a table", lineno);
        if (!doc.contains("spec")) throw parse_error("seed lacks a spec", lineno);
        s.spec = doc["spec"];
        s.target_level = doc.value("target_level", 0);
        s.style = doc.value("style", "");
        if (!ids.insert(s.id).second)
            throw parse_error("duplicate seed id " + s.id, lineno);
        out.push_back(std::move(s));
    }
    return out;
}

table load_table_by_ref(const std::string& tables_dir, const std::string& ref) {
    for (const std::string& candidate :
         {ref, ref + ".csv", ref + ".jsonl", ref + ".ndjson"}) {
        fs::path p = fs::path(tables_dir) / candidate;
        if (fs::exists(p) && fs::is_regular_file(p)) return load_table(p.string());
    }
    throw parse_error("no table file for " + ref + " under " + tables_dir);
}

synthesis_outcome run_synthesis(const pipeline_config& cfg) {
    validate_config(cfg);
    auto seeds = load_seeds(cfg.seeds_file);
    alias_kb kb;
    if (!cfg.alias_kb_file.empty()) kb = alias_kb::load(cfg.alias_kb_file);
    std::vector<exemplar> pool;
    if (!cfg.exemplars_file.empty()) pool = load_exemplars(cfg.exemplars_file);
    auto llm = make_backend(cfg);
    const design_rules& rules = default_rules();

    // Tables and metadata are prepared serially so model calls happen in a
    // fixed order regardless of the worker count.
    std::map<std::string, table> tables;
    std::map<std::string, ambiguity_metadata> metas;
    std::map<std::string, std::string> table_errors;
    for (const auto& s : seeds) {
        if (tables.count(s.table) || table_errors.count(s.table)) continue;
        try {
            table t = load_table_by_ref(cfg.tables_dir, s.table);
            metas.emplace(s.table,
                          build_metadata(t, kb, cfg.refine_with_llm ? llm.get() : nullptr));
            tables.emplace(s.table, std::move(t));
        } catch (const std::exception& e) {
            table_errors.emplace(s.table, e.what());
        }
    }

    auto seed_rng = [&](std::size_t i) {
        return cfg.rng_seed ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(i) + 1));
    };

    auto process = [&](std::size_t i) -> seed_outcome {
        const seed_record& sr = seeds[i];
        seed_outcome out;
        out.entry.seed_id = sr.id;
        try {
            auto te = table_errors.find(sr.table);
            if (te != table_errors.end()) throw error(te->second);
            const table& tab = tables.at(sr.table);
            const ambiguity_metadata& meta = metas.at(sr.table);

            vis_tree seed_tree = build_seed_tree(spec_from_json(sr.spec), tab, rules);
            injection_config icfg = cfg.injection;
            icfg.rng_seed = seed_rng(i);
            if (sr.target_level > 0) icfg.target_level = sr.target_level;
            injection_result inj = inject_to_level(seed_tree, tab, meta, icfg, rules);
            auto resolved = resolve(inj.tree, tab, rules, icfg.limits);

            nl_style style;
            if (!sr.style.empty()) {
                style = nl_style_from_string(sr.style);
            } else {
                std::mt19937_64 srng(seed_rng(i) ^ 0x5f3759dfull);
                double total = cfg.w_question + cfg.w_command + cfg.w_caption;
                double x = (srng() >> 11) * 0x1.0p-53 * total;
                style = x < cfg.w_question                  ? nl_style::question
                        : x < cfg.w_question + cfg.w_command ? nl_style::command
                                                             : nl_style::caption;
            }
            nl_config ncfg = cfg.nl;
            ncfg.prompts_dir = cfg.prompts_dir;
            ncfg.rng_seed = seed_rng(i) ^ 0xa5a5ull;
            nl_sample nls = synthesize_nl(*llm, inj.tree, tab, style, pool, ncfg);

            reasoning_path path = derive_gold_path(inj.tree, resolved, tab, rules,
                                                   llm.get());

            benchmark_sample sample;
            sample.id = sr.id;
            sample.table_ref = tab.name;
            sample.query = nls.query;
            sample.style = to_string(style);
            sample.tree = inj.tree;
            std::vector<canonical_spec> canon;
            for (const auto& rt : resolved) canon.push_back(canonicalize(flatten(rt, tab), rules));
            std::sort(canon.begin(), canon.end());
            for (const auto& c : canon) sample.gold_specs.push_back(c.normalized);
            sample.level = static_cast<int>(sample.gold_specs.size());
            sample.pattern = inj.pattern;
            sample.reasoning = path;
            out.entry.outcome = "ok";
            out.entry.level = sample.level;
            out.sample = std::move(sample);
        } catch (const target_unreachable_error& e) {
            out.entry.outcome = "target-unreachable";
            out.entry.detail = e.what();
            out.entry.level = e.best_level;
        } catch (const retries_exhausted_error& e) {
            out.entry.outcome = "retries-exhausted";
            out.entry.detail = e.last_failure.empty()
                                   ? std::string(e.what())
                                   : std::string(e.what()) + ": " + e.last_failure;
        } catch (const std::exception& e) {
            out.entry.outcome = "error";
            out.entry.detail = e.what();
        }
        return out;
    };

    std::vector<seed_outcome> results(seeds.size());
    std::size_t nworkers = std::min<std::size_t>(
        std::max(1, cfg.workers), seeds.empty() ? 1 : seeds.size());
    if (nworkers <= 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) results[i] = process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < nworkers; ++w)
            threads.emplace_back([&] {
                while (true) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= seeds.size()) break;
                    results[i] = process(i);
                }
            });
        for (auto& t : threads) t.join();
    }

    synthesis_outcome out;
    for (auto& r : results) {
        if (r.sample) out.samples.push_back(std::move(*r.sample));
        out.manifest.push_back(std::move(r.entry));
    }
    return out;
}

json manifest_to_json(const synthesis_outcome& out) {
    json seeds = json::array();
    std::size_t ok = 0;
    for (const auto& e : out.manifest) {
        if (e.outcome == "ok") ++ok;
        seeds.push_back({{"id", e.seed_id},
                         {"outcome", e.outcome},
                         {"detail", e.detail},
                         {"level", e.level}});
    }
    return json{{"total", out.manifest.size()}, {"ok", ok}, {"seeds", seeds}};
}

void write_synthesis_outputs(const pipeline_config& cfg, const synthesis_outcome& out) {
    fs::create_directories(cfg.output_dir);
    save_benchmark((fs::path(cfg.output_dir) / "benchmark.jsonl").string(), out.samples);
    std::ofstream manifest((fs::path(cfg.output_dir) / "manifest.json").string(),
                           std::ios::binary);
    if (!manifest) throw error("cannot write manifest under " + cfg.output_dir);
    manifest << manifest_to_json(out).dump(2) << "\n";
}

}  // namespace ambivis
