#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambivis/table.hpp"

namespace ambivis {

class llm_client;

// Term -> related surface forms. Entries are lower-cased and symmetrically
// closed on load: if a maps to b, b maps back to a.
struct alias_kb {
    std::map<std::string, std::vector<std::string>> entries;

    static alias_kb from_json(const nlohmann::json& doc);
    static alias_kb load(const std::string& path);

    const std::vector<std::string>& lookup(const std::string& term) const;

    // {phrase} + kb[phrase] + every non-stop-word token + kb[token].
    std::set<std::string> alias_set(const std::string& phrase) const;
};

const std::set<std::string>& default_stop_words();

struct column_pair {
    std::string a;
    std::string b;
    std::string shared_alias;
    double confidence = 0.5;
    bool kept = true;

    bool operator==(const column_pair&) const = default;
};

struct ambiguity_metadata {
    std::string table_ref;
    std::map<std::string, std::string> standardized;  // column -> readable phrase
    std::vector<column_pair> pairs;

    // Kept pairs the given column participates in.
    std::vector<column_pair> pairs_for(const std::string& column) const;
    // Union of partner columns over kept pairs, in pair order.
    std::vector<std::string> partners_of(const std::string& column) const;
};

// Turns raw column names into readable phrases: splits snake/camel case,
// lower-cases, expands common abbreviations through a fixed rule table. With
// a client, the rule output is offered to the model for refinement; the rule
// table alone is fully deterministic. Empty column names raise
// invalid_schema_error.
std::map<std::string, std::string> standardize_schema(const table& tab,
                                                      llm_client* llm = nullptr);

std::string standardize_name(const std::string& raw);

// Flags column pairs whose standardized phrases share an alias: token-level
// intersection of alias sets after stop-word removal. Symmetric by
// construction; shared_alias prefers a directly shared token over a KB hop.
std::vector<column_pair> discover_column_pairs(
    const std::map<std::string, std::string>& standardized, const alias_kb& kb);

// Chain-of-thought confirmation of flagged pairs. Without a client every
// pair is kept at confidence 0.5; with one, pairs the model rejects are
// dropped and confidences updated.
std::vector<column_pair> refine_pairs(const std::vector<column_pair>& pairs,
                                      const table& tab, llm_client* llm = nullptr);

// Full three-stage workflow: standardize, discover, refine.
ambiguity_metadata build_metadata(const table& tab, const alias_kb& kb,
                                  llm_client* llm = nullptr);

nlohmann::json metadata_to_json(const ambiguity_metadata& m);
ambiguity_metadata metadata_from_json(const nlohmann::json& doc);

// Raises unknown_column_error if any referenced column is missing from the
// table.
void validate_metadata(const ambiguity_metadata& m, const table& tab);

}  // namespace ambivis
