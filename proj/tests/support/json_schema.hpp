#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

// Small draft-07-style validator covering the keywords the pinned chart
// document schema uses: $ref into #/definitions, type, const, enum,
// required, properties, additionalProperties, items, minLength, oneOf.
namespace minischema {

// Empty result means the document conforms; otherwise each entry is a
// "path: problem" line.
std::vector<std::string> validate(const nlohmann::json& doc,
                                  const nlohmann::json& schema);

}  // namespace minischema
