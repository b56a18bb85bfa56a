#include "ambivis/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace ambivis {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool all_digits(const std::string& s, std::size_t from, std::size_t to) {
    if (to > s.size() || from >= to) return false;
    for (std::size_t i = from; i < to; ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string stem_of(const std::string& path) {
    auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

// RFC 4180 field splitter; returns records of raw fields.
std::vector<std::vector<std::string>> parse_csv_records(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) throw parse_error("stray quote inside unquoted field", line);
                quoted = true;
                any = true;
                break;
            case ',':
                fields.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r':
                break;
            case '\n':
                if (any || !field.empty() || !fields.empty()) {
                    fields.push_back(std::move(field));
                    field.clear();
                    records.push_back(std::move(fields));
                    fields.clear();
                    any = false;
                }
                ++line;
                break;
            default:
                field += c;
                any = true;
                break;
        }
    }
    if (quoted) throw parse_error("unterminated quoted field", line);
    if (any || !field.empty() || !fields.empty()) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
    }
    return records;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void finalize_types(table& t) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        std::vector<std::string> cells;
        cells.reserve(t.rows.size());
        for (const auto& row : t.rows) cells.push_back(row[c]);
        t.columns[c].type = infer_column_type(cells);
        t.columns[c].distinct_values.clear();
        if (t.columns[c].type == data_type::categorical) {
            std::unordered_set<std::string> seen;
            for (const auto& cell : cells) {
                if (cell.empty()) continue;
                if (seen.insert(cell).second) t.columns[c].distinct_values.push_back(cell);
            }
        }
    }
}

void check_headers(const std::vector<std::string>& names) {
    std::unordered_set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) throw parse_error("empty column name in header");
        if (!seen.insert(lower(n)).second)
            throw parse_error("duplicate column name: " + n);
    }
}

std::string json_scalar_to_cell(const nlohmann::ordered_json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

}  // namespace

std::string to_string(data_type t) {
    switch (t) {
        case data_type::categorical: return "categorical";
        case data_type::quantitative: return "quantitative";
        case data_type::temporal: return "temporal";
    }
    return "categorical";
}

data_type data_type_from_string(const std::string& s) {
    if (s == "categorical") return data_type::categorical;
    if (s == "quantitative") return data_type::quantitative;
    if (s == "temporal") return data_type::temporal;
    throw parse_error("unknown data type: " + s);
}

std::size_t table::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return i;
    // Case-insensitive fallback keeps external specs tolerant of casing.
    std::string want = lower(name);
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (lower(columns[i].name) == want) return i;
    throw unknown_column_error("unknown column: " + name + " in table " + this->name);
}

const column& table::column_at(const std::string& name) const {
    return columns[column_index(name)];
}

bool table::has_column(const std::string& name) const {
    std::string want = lower(name);
    return std::any_of(columns.begin(), columns.end(),
                       [&](const column& c) { return lower(c.name) == want; });
}

bool parse_iso_date(const std::string& s) {
    // Accepts YYYY, YYYY-MM, YYYY-MM-DD with an optional time suffix.
    if (all_digits(s, 0, s.size()) && s.size() == 4) {
        int year = std::stoi(s);
        return year >= 1000 && year <= 2999;
    }
    if (s.size() < 7 || !all_digits(s, 0, 4) || s[4] != '-') return false;
    if (!all_digits(s, 5, 7)) return false;
    int month = std::stoi(s.substr(5, 2));
    if (month < 1 || month > 12) return false;
    if (s.size() == 7) return true;
    if (s[7] != '-' || s.size() < 10 || !all_digits(s, 8, 10)) return false;
    int day = std::stoi(s.substr(8, 2));
    if (day < 1 || day > 31) return false;
    if (s.size() == 10) return true;
    return s[10] == 'T' || s[10] == ' ';
}

bool parse_number(const std::string& s) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
}

data_type infer_column_type(const std::vector<std::string>& cells,
                            const type_inference_options& opts) {
    std::size_t non_null = 0, dates = 0, numbers = 0;
    for (const auto& cell : cells) {
        if (cell.empty()) continue;
        ++non_null;
        if (parse_iso_date(cell)) ++dates;
        if (parse_number(cell)) ++numbers;
    }
    if (non_null == 0) throw all_null_error("column has no non-null cells");
    double n = static_cast<double>(non_null);
    if (static_cast<double>(dates) / n >= opts.threshold) return data_type::temporal;
    if (static_cast<double>(numbers) / n >= opts.threshold) return data_type::quantitative;
    return data_type::categorical;
}

table table_from_csv(const std::string& text, const std::string& name) {
    auto records = parse_csv_records(text);
    if (records.empty()) throw empty_table_error("no header row: " + name);
    table t;
    t.name = name;
    check_headers(records[0]);
    for (const auto& h : records[0]) t.columns.push_back({h, data_type::categorical, {}});
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.columns.size())
            throw parse_error("row has " + std::to_string(records[r].size()) +
                                  " fields, expected " + std::to_string(t.columns.size()),
                              r + 1);
        t.rows.push_back(records[r]);
    }
    if (t.rows.empty()) throw empty_table_error("table has no data rows: " + name);
    finalize_types(t);
    return t;
}

table table_from_jsonl(const std::string& text, const std::string& name) {
    table t;
    t.name = name;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::ordered_json obj;
        try {
            obj = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(std::string("bad JSON object: ") + e.what(), lineno);
        }
        if (!obj.is_object()) throw parse_error("expected a JSON object", lineno);
        if (t.columns.empty()) {
            std::vector<std::string> names;
            for (auto it = obj.begin(); it != obj.end(); ++it) names.push_back(it.key());
            check_headers(names);
            for (const auto& n : names) t.columns.push_back({n, data_type::categorical, {}});
        }
        std::vector<std::string> row;
        row.reserve(t.columns.size());
        for (const auto& c : t.columns) {
            auto it = obj.find(c.name);
            if (it == obj.end())
                throw parse_error("missing key '" + c.name + "'", lineno);
            row.push_back(json_scalar_to_cell(*it));
        }
        if (obj.size() != t.columns.size())
            throw parse_error("object has extra keys", lineno);
        t.rows.push_back(std::move(row));
    }
    if (t.columns.empty() || t.rows.empty())
        throw empty_table_error("table has no data rows: " + name);
    finalize_types(t);
    return t;
}

table load_table(const std::string& path, table_format fmt) {
    std::string text = read_file(path);
    return fmt == table_format::csv ? table_from_csv(text, stem_of(path))
                                    : table_from_jsonl(text, stem_of(path));
}

table load_table(const std::string& path) {
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : lower(path.substr(dot + 1));
    if (ext == "csv") return load_table(path, table_format::csv);
    if (ext == "jsonl" || ext == "ndjson") return load_table(path, table_format::jsonl);
    throw parse_error("cannot infer table format from extension: " + path);
}

std::string table_to_csv(const table& t) {
    std::string out;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (c) out += ',';
        out += csv_escape(t.columns[c].name);
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += csv_escape(row[c]);
        }
        out += '\n';
    }
    return out;
}

std::string table_to_jsonl(const table& t) {
    std::string out;
    for (const auto& row : t.rows) {
        nlohmann::ordered_json obj;
        for (std::size_t c = 0; c < t.columns.size(); ++c) obj[t.columns[c].name] = row[c];
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void write_table(const table& t, const std::string& path, table_format fmt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw parse_error("cannot open file for writing: " + path);
    out << (fmt == table_format::csv ? table_to_csv(t) : table_to_jsonl(t));
}

std::vector<std::vector<std::string>> sample_rows(const table& t, std::size_t n) {
    std::vector<std::vector<std::string>> out;
    out.reserve(std::min(n, t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size() && i < n; ++i) out.push_back(t.rows[i]);
    return out;
}

}  // namespace ambivis
