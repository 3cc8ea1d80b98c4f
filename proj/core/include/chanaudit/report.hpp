#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace chanaudit {

/// One table cell: empty, numeric, or text.
using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

/// Generic tabular diagnostic result. CSV output rounds doubles to six
/// decimals; JSON keeps full precision. Both are byte-deterministic for a
/// fixed table.
struct AuditReport {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::string> notes;  // rendered as trailing comment lines

    void add_row(std::vector<Cell> cells) { rows.push_back(std::move(cells)); }

    std::string to_csv() const;
    nlohmann::json to_json() const;
};

/// Fixed-point decimal rendering used in CSV output. Infinities render as
/// "inf"/"-inf" rather than being clamped.
std::string format_double(double v, int decimals = 6);

/// RFC-4180 quoting for fields containing separators or quotes.
std::string csv_escape(const std::string& field);

}  // namespace chanaudit
