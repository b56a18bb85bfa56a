#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ambivis/error.hpp"

namespace ambivis {

enum class data_type { categorical, quantitative, temporal };

std::string to_string(data_type t);
data_type data_type_from_string(const std::string& s);

enum class table_format { csv, jsonl };

// Column cells are stored as strings; the empty string is the null marker.
struct column {
    std::string name;
    data_type type = data_type::categorical;
    // Distinct non-null values in first-occurrence order (materialized for
    // categorical columns, empty otherwise).
    std::vector<std::string> distinct_values;
};

struct table {
    std::string name;
    std::vector<column> columns;
    std::vector<std::vector<std::string>> rows;  // row-major, aligned with columns

    std::size_t column_index(const std::string& name) const;  // unknown_column_error
    const column& column_at(const std::string& name) const;
    bool has_column(const std::string& name) const;
};

struct type_inference_options {
    // Fraction of non-null cells that must parse for a type to win.
    double threshold = 0.95;
};

// Classifies a column's cells: temporal if >= threshold parse as ISO-8601
// dates or four-digit years, else quantitative if >= threshold parse as
// numbers, else categorical. Nulls are ignored; all-null raises.
data_type infer_column_type(const std::vector<std::string>& cells,
                            const type_inference_options& opts = {});

bool parse_iso_date(const std::string& s);
bool parse_number(const std::string& s);

// Loads a table and infers column types. CSV follows RFC 4180 (quoted fields,
// escaped quotes, embedded newlines); JSON-lines expects one flat object per
// line with identical keys.
table load_table(const std::string& path, table_format fmt);
table load_table(const std::string& path);  // by extension: .csv / .jsonl

table table_from_csv(const std::string& text, const std::string& name);
table table_from_jsonl(const std::string& text, const std::string& name);

void write_table(const table& t, const std::string& path, table_format fmt);
std::string table_to_csv(const table& t);
std::string table_to_jsonl(const table& t);

// First min(n, rows) rows, never fails on short tables.
std::vector<std::vector<std::string>> sample_rows(const table& t, std::size_t n);

}  // namespace ambivis
