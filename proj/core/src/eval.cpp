#include "ambivis/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "ambivis/error.hpp"

namespace ambivis {

namespace {

using nlohmann::json;

std::vector<std::string> string_vec(const json& arr) {
    std::vector<std::string> out;
    for (const auto& e : arr) out.push_back(e.get<std::string>());
    return out;
}

std::size_t word_count(const std::string& text) {
    std::istringstream in(text);
    std::string tok;
    std::size_t n = 0;
    while (in >> tok) ++n;
    return n;
}

std::string pattern_key(const std::vector<std::string>& pattern) {
    std::string out;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (i) out += "+";
        out += pattern[i];
    }
    return out;
}

void fold_into(metric_aggregate& agg, const sample_result& s) {
    ++agg.count;
    for (const auto& [k, row] : s.at) {
        auto& m = agg.at[k];
        m.p += row.p;
        m.r += row.r;
        m.f1 += row.f1;
    }
}

void finish(metric_aggregate& agg) {
    if (agg.count == 0) return;
    for (auto& [k, m] : agg.at) {
        m.p /= static_cast<double>(agg.count);
        m.r /= static_cast<double>(agg.count);
        m.f1 /= static_cast<double>(agg.count);
    }
}

std::string fmt(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << v;
    return out.str();
}

void text_row(std::ostringstream& out, const std::string& label,
              const metric_aggregate& agg, const std::vector<int>& ks) {
    out << std::left << std::setw(22) << label << std::right << std::setw(7) << agg.count;
    for (int k : ks) {
        auto it = agg.at.find(k);
        metric_triple m = it == agg.at.end() ? metric_triple{} : it->second;
        out << std::setw(9) << fmt(m.r) << std::setw(9) << fmt(m.p) << std::setw(9)
            << fmt(m.f1);
    }
    out << "\n";
}

}  // namespace

json sample_to_json(const benchmark_sample& s) {
    json gold = json::array();
    for (const auto& g : s.gold_specs) gold.push_back(g);
    return json{{"id", s.id},
                {"table", s.table_ref},
                {"query", s.query},
                {"style", s.style},
                {"tree", tree_to_json(s.tree)},
                {"gold_specs", gold},
                {"level", s.level},
                {"pattern", s.pattern},
                {"reasoning", path_to_json(s.reasoning)}};
}

benchmark_sample sample_from_json(const json& doc) {
    benchmark_sample s;
    s.id = doc.value("id", "");
    s.table_ref = doc.value("table", "");
    s.query = doc.value("query", "");
    s.style = doc.value("style", "");
    if (doc.contains("tree")) s.tree = tree_from_json(doc["tree"]);
    for (const auto& g : doc.value("gold_specs", json::array())) s.gold_specs.push_back(g);
    s.level = doc.value("level", 0);
    s.pattern = string_vec(doc.value("pattern", json::array()));
    if (doc.contains("reasoning")) s.reasoning = path_from_json(doc["reasoning"]);
    return s;
}

std::vector<benchmark_sample> load_benchmark(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open benchmark file: " + path);
    std::vector<benchmark_sample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object())
            throw parse_error("benchmark line is not a JSON object", lineno);
        out.push_back(sample_from_json(doc));
    }
    return out;
}

void save_benchmark(const std::string& path, const std::vector<benchmark_sample>& bench) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot write benchmark file: " + path);
    for (const auto& s : bench) out << sample_to_json(s).dump() << "\n";
}

std::map<std::string, std::vector<vis_spec>> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open predictions file: " + path);
    std::map<std::string, std::vector<vis_spec>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("id") ||
            !doc["id"].is_string())
            throw parse_error("prediction line needs an object with a string id", lineno);
        std::string id = doc["id"].get<std::string>();
        if (out.count(id)) throw parse_error("duplicate prediction id " + id, lineno);
        std::vector<vis_spec> specs;
        for (const auto& chart : doc.value("charts", json::array())) {
            try {
                specs.push_back(from_vegalite(chart));
            } catch (const error& e) {
                throw parse_error("bad chart document for id " + id + ": " + e.what(),
                                  lineno);
            }
        }
        out.emplace(std::move(id), std::move(specs));
    }
    return out;
}

std::vector<bool> match_specs(const std::vector<vis_spec>& pred,
                              const std::vector<json>& gold, const design_rules& rules) {
    std::set<std::string> open;
    for (const auto& g : gold) open.insert(g.dump());
    std::vector<bool> flags(pred.size(), false);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        std::string key;
        try {
            key = canonicalize(pred[i], rules).key();
        } catch (const error&) {
            continue;  // unscorable prediction counts as a miss
        }
        auto it = open.find(key);
        if (it == open.end()) continue;
        open.erase(it);
        flags[i] = true;
    }
    return flags;
}

metric_triple precision_recall_f1_at_k(const std::vector<bool>& flags,
                                       std::size_t gold_size, int k, bool strict_k,
                                       bool allow_any_k) {
    if (k != 1 && k != 3 && k != 5 && !allow_any_k)
        throw invalid_k_error("K must be 1, 3 or 5 unless overridden");
    if (k < 1) throw invalid_k_error("K must be positive");
    std::size_t top = std::min<std::size_t>(k, flags.size());
    int m = 0;
    for (std::size_t i = 0; i < top; ++i)
        if (flags[i]) ++m;
    metric_triple out;
    std::size_t denom = strict_k ? static_cast<std::size_t>(k) : top;
    out.p = denom == 0 ? 0.0 : static_cast<double>(m) / static_cast<double>(denom);
    out.r = gold_size == 0 ? 0.0 : static_cast<double>(m) / static_cast<double>(gold_size);
    out.f1 = out.p + out.r > 0.0 ? 2.0 * out.p * out.r / (out.p + out.r) : 0.0;
    return out;
}

eval_report evaluate_dataset(const std::map<std::string, std::vector<vis_spec>>& preds,
                             const std::vector<benchmark_sample>& bench,
                             const eval_options& opts, const design_rules& rules) {
    eval_report report;
    report.ks = opts.ks;
    for (const auto& sample : bench) {
        sample_result res;
        res.id = sample.id;
        auto it = preds.find(sample.id);
        std::vector<bool> flags;
        if (it == preds.end()) {
            res.missing = true;
            report.missing_ids.push_back(sample.id);
        } else {
            flags = match_specs(it->second, sample.gold_specs, rules);
        }
        for (int k : opts.ks) {
            metric_triple m = precision_recall_f1_at_k(flags, sample.gold_specs.size(), k,
                                                       opts.strict_k, opts.allow_any_k);
            std::size_t top = std::min<std::size_t>(k, flags.size());
            int matched = 0;
            for (std::size_t i = 0; i < top; ++i)
                if (flags[i]) ++matched;
            res.at[k] = {matched, m.p, m.r, m.f1};
        }
        fold_into(report.overall, res);
        fold_into(report.by_level[sample.level], res);
        fold_into(report.by_style[sample.style.empty() ? "(none)" : sample.style], res);
        std::set<std::string> marks;
        for (const auto& g : sample.gold_specs) marks.insert(g.value("mark", ""));
        for (const auto& m : marks)
            fold_into(report.by_chart[m.empty() ? "(none)" : m], res);
        report.samples.push_back(std::move(res));
    }
    finish(report.overall);
    for (auto& [k, agg] : report.by_level) finish(agg);
    for (auto& [c, agg] : report.by_chart) finish(agg);
    for (auto& [s, agg] : report.by_style) finish(agg);
    return report;
}

json report_to_json(const eval_report& report) {
    auto agg_json = [&](const metric_aggregate& agg) {
        json at = json::object();
        for (const auto& [k, m] : agg.at)
            at[std::to_string(k)] = {{"p", m.p}, {"r", m.r}, {"f1", m.f1}};
        return json{{"count", agg.count}, {"at", at}};
    };
    json samples = json::array();
    for (const auto& s : report.samples) {
        json at = json::object();
        for (const auto& [k, row] : s.at)
            at[std::to_string(k)] = {
                {"matched", row.matched}, {"p", row.p}, {"r", row.r}, {"f1", row.f1}};
        samples.push_back({{"id", s.id}, {"missing", s.missing}, {"at", at}});
    }
    json by_level = json::object();
    for (const auto& [k, agg] : report.by_level) by_level[std::to_string(k)] = agg_json(agg);
    json by_chart = json::object();
    for (const auto& [c, agg] : report.by_chart) by_chart[c] = agg_json(agg);
    json by_style = json::object();
    for (const auto& [s, agg] : report.by_style) by_style[s] = agg_json(agg);
    return json{{"ks", report.ks},           {"overall", agg_json(report.overall)},
                {"by_level", by_level},      {"by_chart", by_chart},
                {"by_style", by_style},      {"missing_ids", report.missing_ids},
                {"samples", samples}};
}

std::string report_to_text(const eval_report& report) {
    std::ostringstream out;
    out << std::left << std::setw(22) << "group" << std::right << std::setw(7) << "n";
    for (int k : report.ks)
        out << std::setw(9) << ("R@" + std::to_string(k)) << std::setw(9)
            << ("P@" + std::to_string(k)) << std::setw(9) << ("F1@" + std::to_string(k));
    out << "\n";
    text_row(out, "overall", report.overall, report.ks);
    for (const auto& [k, agg] : report.by_level)
        text_row(out, "level " + std::to_string(k), agg, report.ks);
    for (const auto& [c, agg] : report.by_chart) text_row(out, "chart " + c, agg, report.ks);
    for (const auto& [s, agg] : report.by_style) text_row(out, "style " + s, agg, report.ks);
    if (!report.missing_ids.empty()) {
        out << "missing predictions:";
        for (const auto& id : report.missing_ids) out << " " << id;
        out << "\n";
    }
    return out.str();
}

stats_report dataset_stats(const std::vector<benchmark_sample>& bench) {
    stats_report stats;
    stats.samples = bench.size();
    std::size_t total_words = 0;
    bool first = true;
    for (const auto& s : bench) {
        ++stats.by_level[s.level];
        ++stats.by_style[s.style.empty() ? "(none)" : s.style];
        ++stats.by_pattern[pattern_key(s.pattern)];
        std::set<std::string> marks;
        for (const auto& g : s.gold_specs) marks.insert(g.value("mark", ""));
        for (const auto& m : marks) ++stats.by_chart[m.empty() ? "(none)" : m];
        std::size_t words = word_count(s.query);
        total_words += words;
        stats.word_min = first ? words : std::min(stats.word_min, words);
        stats.word_max = first ? words : std::max(stats.word_max, words);
        first = false;
    }
    if (!bench.empty())
        stats.word_avg = static_cast<double>(total_words) / static_cast<double>(bench.size());
    return stats;
}

json stats_to_json(const stats_report& stats) {
    json by_level = json::object();
    for (const auto& [k, n] : stats.by_level) by_level[std::to_string(k)] = n;
    return json{{"samples", stats.samples},
                {"by_level", by_level},
                {"by_chart", stats.by_chart},
                {"by_style", stats.by_style},
                {"by_pattern", stats.by_pattern},
                {"words", {{"min", stats.word_min},
                           {"avg", stats.word_avg},
                           {"max", stats.word_max}}}};
}

std::string stats_to_text(const stats_report& stats) {
    std::ostringstream out;
    out << "samples: " << stats.samples << "\n";
    out << "levels:";
    for (const auto& [k, n] : stats.by_level) out << " " << k << "=" << n;
    out << "\ncharts:";
    for (const auto& [c, n] : stats.by_chart) out << " " << c << "=" << n;
    out << "\nstyles:";
    for (const auto& [s, n] : stats.by_style) out << " " << s << "=" << n;
    out << "\npatterns:";
    for (const auto& [p, n] : stats.by_pattern)
        out << " " << (p.empty() ? "(none)" : p) << "=" << n;
    out << "\nwords: min=" << stats.word_min << " avg=" << fmt(stats.word_avg)
        << " max=" << stats.word_max << "\n";
    return out.str();
}

dataset_splits split_dataset(const std::vector<benchmark_sample>& bench, double train,
                             double dev, double test, std::uint64_t rng_seed) {
    if (train < 0 || dev < 0 || test < 0 || std::abs(train + dev + test - 1.0) > 1e-9)
        throw bad_ratios_error("split ratios must be nonnegative and sum to 1");
    std::vector<std::size_t> idx(bench.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(rng_seed);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);

    auto n = bench.size();
    std::size_t n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train));
    std::size_t n_dev = static_cast<std::size_t>(std::floor(static_cast<double>(n) * dev));
    dataset_splits out;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& s = bench[idx[i]];
        if (i < n_train)
            out.train.push_back(s);
        else if (i < n_train + n_dev)
            out.dev.push_back(s);
        else
            out.test.push_back(s);
    }
    return out;
}

dataset_splits split_by_manifest(const std::vector<benchmark_sample>& bench,
                                 const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw parse_error("cannot open split manifest: " + manifest_path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw parse_error("split manifest is not a JSON object");
    std::map<std::string, const benchmark_sample*> index;
    for (const auto& s : bench) index[s.id] = &s;
    std::set<std::string> used;
    auto take = [&](const char* key, std::vector<benchmark_sample>& into) {
        for (const auto& e : doc.value(key, json::array())) {
            std::string id = e.get<std::string>();
            if (!used.insert(id).second)
                throw parse_error("split manifest lists id twice: " + id);
            auto it = index.find(id);
            if (it == index.end())
                throw parse_error("split manifest id not in benchmark: " + id);
            into.push_back(*it->second);
        }
    };
    dataset_splits out;
    take("train", out.train);
    take("dev", out.dev);
    take("test", out.test);
    return out;
}

}  // namespace ambivis
