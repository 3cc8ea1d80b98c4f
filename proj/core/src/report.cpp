#include "chanaudit/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace chanaudit {

std::string format_double(double v, int decimals) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace {

std::string cell_to_csv(const Cell& c) {
    if (std::holds_alternative<std::monostate>(c)) return "";
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return csv_escape(std::get<std::string>(c));
}

nlohmann::json cell_to_json(const Cell& c) {
    if (std::holds_alternative<std::monostate>(c)) return nullptr;
    if (const auto* d = std::get_if<double>(&c)) {
        if (std::isnan(*d)) return nullptr;
        if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
        return *d;
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
    return std::get<std::string>(c);
}

}  // namespace

std::string AuditReport::to_csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(columns[i]);
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << cell_to_csv(row[i]);
        }
        out << '\n';
    }
    for (const auto& note : notes) out << "# " << note << '\n';
    return out.str();
}

nlohmann::json AuditReport::to_json() const {
    nlohmann::json j;
    j["title"] = title;
    j["columns"] = columns;
    auto rows_json = nlohmann::json::array();
    for (const auto& row : rows) {
        auto obj = nlohmann::json::object();
        for (std::size_t i = 0; i < row.size() && i < columns.size(); ++i) {
            obj[columns[i]] = cell_to_json(row[i]);
        }
        rows_json.push_back(std::move(obj));
    }
    j["rows"] = std::move(rows_json);
    if (!notes.empty()) j["notes"] = notes;
    return j;
}

}  // namespace chanaudit
