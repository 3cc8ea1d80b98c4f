#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chanaudit/report.hpp"

namespace chanaudit::cli {

/// Collects output files for one subcommand run and records digests so the
/// manifest can list every artifact. File contents are written byte-for-byte
/// deterministically; the manifest itself carries no timestamps.
class OutputWriter {
public:
    explicit OutputWriter(const std::filesystem::path& dir);

    void write_text(const std::string& name, const std::string& content);
    void write_json(const std::string& name, const nlohmann::json& value);
    void write_report(const std::string& stem, const AuditReport& report);

    /// Writes manifest.json listing config, inputs, and all outputs.
    void finish(const std::string& command, const nlohmann::json& config,
                const std::vector<std::string>& input_paths);

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> outputs_;  // name, digest
};

std::string digest_bytes(const std::string& bytes);
std::string digest_file(const std::string& path);

std::vector<double> parse_double_list(const std::string& csv);
std::vector<std::int64_t> parse_int_list(const std::string& csv);

}  // namespace chanaudit::cli
