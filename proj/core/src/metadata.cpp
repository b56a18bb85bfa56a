#include "ambivis/metadata.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "ambivis/error.hpp"
#include "ambivis/llm.hpp"

namespace ambivis {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

const std::map<std::string, std::string>& abbreviation_table() {
    static const std::map<std::string, std::string> table = {
        {"amt", "amount"},     {"avg", "average"},   {"cat", "category"},
        {"cd", "code"},        {"cnt", "count"},     {"col", "column"},
        {"ctry", "country"},   {"cty", "city"},      {"dept", "department"},
        {"desc", "description"}, {"dob", "date of birth"}, {"govt", "government"},
        {"id", "id"},          {"lang", "language"}, {"loc", "location"},
        {"max", "maximum"},    {"min", "minimum"},   {"mth", "month"},
        {"no", "number"},      {"num", "number"},    {"pct", "percent"},
        {"pop", "population"}, {"qty", "quantity"},  {"rev", "revenue"},
        {"tot", "total"},      {"yr", "year"}};
    return table;
}

std::vector<std::string> tokenize_phrase(const std::string& phrase) {
    std::vector<std::string> out;
    std::istringstream in(phrase);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace

const std::set<std::string>& default_stop_words() {
    static const std::set<std::string> words = {"a",  "an",  "the", "of", "by",  "per",
                                                "in", "on",  "for", "to", "and", "or",
                                                "at", "with"};
    return words;
}

alias_kb alias_kb::from_json(const nlohmann::json& doc) {
    alias_kb kb;
    for (const auto& [term, aliases] : doc.items()) {
        std::string key = lower(term);
        for (const auto& a : aliases) {
            std::string alias = lower(a.get<std::string>());
            auto& fwd = kb.entries[key];
            if (std::find(fwd.begin(), fwd.end(), alias) == fwd.end()) fwd.push_back(alias);
            auto& rev = kb.entries[alias];
            if (std::find(rev.begin(), rev.end(), key) == rev.end()) rev.push_back(key);
        }
    }
    return kb;
}

alias_kb alias_kb::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open alias KB: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad alias KB JSON: ") + e.what());
    }
    return from_json(doc);
}

const std::vector<std::string>& alias_kb::lookup(const std::string& term) const {
    static const std::vector<std::string> none;
    auto it = entries.find(lower(term));
    return it == entries.end() ? none : it->second;
}

std::set<std::string> alias_kb::alias_set(const std::string& phrase) const {
    std::set<std::string> out;
    std::string p = lower(phrase);
    out.insert(p);
    for (const auto& a : lookup(p)) out.insert(a);
    for (const auto& tok : tokenize_phrase(p)) {
        if (default_stop_words().count(tok)) continue;
        out.insert(tok);
        for (const auto& a : lookup(tok)) out.insert(a);
    }
    return out;
}

std::string standardize_name(const std::string& raw) {
    if (raw.empty()) throw invalid_schema_error("empty column name");
    // Split on underscores, dashes, spaces and lower/upper camel boundaries.
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            tokens.push_back(lower(cur));
            cur.clear();
        }
    };
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '_' || c == '-' || c == ' ' || c == '.') {
            flush();
            continue;
        }
        if (std::isupper(static_cast<unsigned char>(c)) && !cur.empty() &&
            (std::islower(static_cast<unsigned char>(cur.back())) ||
             std::isdigit(static_cast<unsigned char>(cur.back()))))
            flush();
        cur += c;
    }
    flush();
    if (tokens.empty()) throw invalid_schema_error("column name has no tokens: " + raw);
    std::string out;
    for (const auto& t : tokens) {
        auto it = abbreviation_table().find(t);
        if (!out.empty()) out += ' ';
        out += it == abbreviation_table().end() ? t : it->second;
    }
    return out;
}

std::map<std::string, std::string> standardize_schema(const table& tab, llm_client* llm) {
    std::map<std::string, std::string> out;
    for (const auto& c : tab.columns) out[c.name] = standardize_name(c.name);
    if (llm) {
        // Offer the rule output for refinement; keep the rules on any failure
        // to parse so the stage stays total.
        nlohmann::json req = nlohmann::json::object();
        for (const auto& [k, v] : out) req[k] = v;
        std::string prompt =
            "Standardize these column names into short readable phrases. "
            "Reply with a JSON object mapping each original name to its phrase.\n" +
            req.dump(2);
        try {
            auto reply = nlohmann::json::parse(
                llm->chat({{"system", "You normalize database schemas."},
                           {"user", prompt}}));
            for (const auto& [k, v] : reply.items())
                if (out.count(k) && v.is_string()) out[k] = lower(v.get<std::string>());
        } catch (const nlohmann::json::exception&) {
        } catch (const backend_error&) {
        }
    }
    return out;
}

std::vector<column_pair> discover_column_pairs(
    const std::map<std::string, std::string>& standardized, const alias_kb& kb) {
    std::vector<std::string> columns;
    for (const auto& [col, phrase] : standardized) columns.push_back(col);
    std::sort(columns.begin(), columns.end());

    std::vector<column_pair> out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        for (std::size_t j = i + 1; j < columns.size(); ++j) {
            const std::string& pa = standardized.at(columns[i]);
            const std::string& pb = standardized.at(columns[j]);
            auto sa = kb.alias_set(pa);
            auto sb = kb.alias_set(pb);
            std::vector<std::string> shared;
            std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                                  std::back_inserter(shared));
            if (shared.empty()) continue;
            // Prefer a token both phrases contain outright over a KB hop.
            std::string pick = shared.front();
            auto ta = tokenize_phrase(lower(pa));
            auto tb = tokenize_phrase(lower(pb));
            for (const auto& s : shared) {
                bool in_a = std::find(ta.begin(), ta.end(), s) != ta.end();
                bool in_b = std::find(tb.begin(), tb.end(), s) != tb.end();
                if (in_a && in_b) {
                    pick = s;
                    break;
                }
            }
            out.push_back({columns[i], columns[j], pick, 0.5, true});
        }
    }
    return out;
}

std::vector<column_pair> refine_pairs(const std::vector<column_pair>& pairs,
                                      const table& tab, llm_client* llm) {
    if (!llm) return pairs;  // null backend: keep everything at 0.5
    nlohmann::json req = nlohmann::json::array();
    for (const auto& p : pairs) req.push_back({{"a", p.a}, {"b", p.b}});
    std::string prompt =
        "Table '" + tab.name +
        "' has column pairs that may be confused with each other. Think step by step "
        "about whether a reader could mean either column, then reply with a JSON array "
        "of {\"a\", \"b\", \"keep\": bool, \"confidence\": 0..1}.\n" +
        req.dump(2);
    std::vector<column_pair> out = pairs;
    try {
        auto reply = nlohmann::json::parse(
            llm->chat({{"system", "You audit schema ambiguity."}, {"user", prompt}}));
        for (auto& p : out) {
            for (const auto& r : reply) {
                if (r.value("a", "") == p.a && r.value("b", "") == p.b) {
                    p.kept = r.value("keep", true);
                    p.confidence = r.value("confidence", 0.5);
                }
            }
        }
        out.erase(std::remove_if(out.begin(), out.end(),
                                 [](const column_pair& p) { return !p.kept; }),
                  out.end());
    } catch (const nlohmann::json::exception&) {
    } catch (const backend_error&) {
    }
    return out;
}

std::vector<column_pair> ambiguity_metadata::pairs_for(const std::string& column) const {
    std::vector<column_pair> out;
    std::string want = lower(column);
    for (const auto& p : pairs) {
        if (!p.kept) continue;
        if (lower(p.a) == want || lower(p.b) == want) out.push_back(p);
    }
    return out;
}

std::vector<std::string> ambiguity_metadata::partners_of(const std::string& column) const {
    std::vector<std::string> out;
    std::string want = lower(column);
    for (const auto& p : pairs) {
        if (!p.kept) continue;
        std::string other;
        if (lower(p.a) == want) other = p.b;
        else if (lower(p.b) == want) other = p.a;
        else continue;
        if (std::find(out.begin(), out.end(), other) == out.end()) out.push_back(other);
    }
    return out;
}

ambiguity_metadata build_metadata(const table& tab, const alias_kb& kb, llm_client* llm) {
    ambiguity_metadata m;
    m.table_ref = tab.name;
    m.standardized = standardize_schema(tab, llm);
    m.pairs = refine_pairs(discover_column_pairs(m.standardized, kb), tab, llm);
    return m;
}

nlohmann::json metadata_to_json(const ambiguity_metadata& m) {
    nlohmann::json doc;
    doc["table"] = m.table_ref;
    doc["standardized"] = m.standardized;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : m.pairs)
        pairs.push_back({{"a", p.a},
                         {"b", p.b},
                         {"shared_alias", p.shared_alias},
                         {"confidence", p.confidence},
                         {"kept", p.kept}});
    doc["pairs"] = pairs;
    return doc;
}

ambiguity_metadata metadata_from_json(const nlohmann::json& doc) {
    ambiguity_metadata m;
    m.table_ref = doc.value("table", "");
    if (doc.contains("standardized"))
        for (const auto& [k, v] : doc["standardized"].items())
            m.standardized[k] = v.get<std::string>();
    if (doc.contains("pairs")) {
        for (const auto& p : doc["pairs"]) {
            m.pairs.push_back({p.value("a", ""), p.value("b", ""),
                               p.value("shared_alias", ""), p.value("confidence", 0.5),
                               p.value("kept", true)});
        }
    }
    return m;
}

void validate_metadata(const ambiguity_metadata& m, const table& tab) {
    for (const auto& [col, phrase] : m.standardized) tab.column_index(col);
    for (const auto& p : m.pairs) {
        tab.column_index(p.a);
        tab.column_index(p.b);
    }
}

}  // namespace ambivis
