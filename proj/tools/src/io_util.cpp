#include "io_util.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "chanaudit/errors.hpp"
#include "chanaudit/rng.hpp"

namespace chanaudit::cli {

namespace fs = std::filesystem;

OutputWriter::OutputWriter(const fs::path& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory " + dir_.string());
}

void OutputWriter::write_text(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    out.close();
    outputs_.emplace_back(name, digest_bytes(content));
}

void OutputWriter::write_json(const std::string& name, const nlohmann::json& value) {
    write_text(name, value.dump(2) + "\n");
}

void OutputWriter::write_report(const std::string& stem, const AuditReport& report) {
    write_text(stem + ".csv", report.to_csv());
}

void OutputWriter::finish(const std::string& command, const nlohmann::json& config,
                          const std::vector<std::string>& input_paths) {
    nlohmann::json manifest;
    manifest["tool"] = "chanaudit";
    manifest["version"] = "0.1.0";
    manifest["command"] = command;
    manifest["config"] = config;
    manifest["config_hash"] = digest_bytes(config.dump());
    auto inputs = nlohmann::json::array();
    for (const auto& path : input_paths) {
        inputs.push_back({{"path", path}, {"digest", digest_file(path)}});
    }
    manifest["inputs"] = std::move(inputs);
    auto outputs = nlohmann::json::array();
    for (const auto& [name, digest] : outputs_) {
        outputs.push_back({{"path", name}, {"digest", digest}});
    }
    manifest["outputs"] = std::move(outputs);
    write_json("manifest.json", manifest);
}

std::string digest_bytes(const std::string& bytes) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return digest_bytes(buffer.str());
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream stream(csv);
    std::string token;
    while (std::getline(stream, token, ',')) {
        if (token.empty()) continue;
        out.push_back(std::stod(token));
    }
    if (out.empty()) throw DomainError("empty numeric list: " + csv);
    return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& csv) {
    std::vector<std::int64_t> out;
    std::stringstream stream(csv);
    std::string token;
    while (std::getline(stream, token, ',')) {
        if (token.empty()) continue;
        out.push_back(std::stoll(token));
    }
    if (out.empty()) throw DomainError("empty integer list: " + csv);
    return out;
}

}  // namespace chanaudit::cli
