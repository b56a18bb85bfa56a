#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ambivis {

// Base class for every error raised by the library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- table store ----
struct parse_error : error {
    parse_error(const std::string& what, std::size_t line = 0)
        : error(line ? what + " (line " + std::to_string(line) + ")" : what), line(line) {}
    std::size_t line;
};
struct empty_table_error : error {
    using error::error;
};
struct all_null_error : error {
    using error::error;
};
struct unknown_column_error : error {
    using error::error;
};

// ---- vis core / solver ----
struct incompatible_spec_error : error {
    incompatible_spec_error(const std::string& what, std::vector<std::string> v = {})
        : error(what), violations(std::move(v)) {}
    std::vector<std::string> violations;
};
struct missing_mark_error : error {
    using error::error;
};
struct unknown_operation_error : error {
    using error::error;
};

// ---- metadata / NL pipeline ----
struct invalid_schema_error : error {
    using error::error;
};
struct backend_error : error {
    using error::error;
};
struct malformed_output_error : error {
    using error::error;
};
struct retries_exhausted_error : error {
    retries_exhausted_error(const std::string& what, std::string last = {})
        : error(what), last_failure(std::move(last)) {}
    std::string last_failure;
};

// ---- injector ----
struct no_mark_error : error {
    using error::error;
};
struct invalid_seed_error : error {
    using error::error;
};
struct target_unreachable_error : error {
    target_unreachable_error(const std::string& what, int best)
        : error(what), best_level(best) {}
    int best_level;
};

// ---- reasoning ----
struct tag_error : error {
    using error::error;
};
struct malformed_path_error : error {
    using error::error;
};
struct alignment_error : error {
    using error::error;
};

// ---- eval ----
struct invalid_k_error : error {
    using error::error;
};
struct bad_ratios_error : error {
    using error::error;
};

// ---- cli / config ----
struct config_error : error {
    using error::error;
};

}  // namespace ambivis
