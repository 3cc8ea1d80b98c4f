#include "chanaudit/record.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

namespace chanaudit {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kKnownFields[] = {
    "task_id", "root_seed", "regime", "slice", "e0", "e1", "e2",
    "k", "anchor_index", "chosen_presented_index", "chosen_original_index",
    "presented_order", "candidate_correct", "candidate_answers", "features",
};

bool is_known_field(const std::string& key) {
    return std::find(std::begin(kKnownFields), std::end(kKnownFields), key) !=
           std::end(kKnownFields);
}

int parse_bit(const json& v, const char* field) {
    if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
    if (v.is_number_integer()) {
        const std::int64_t b = v.get<std::int64_t>();
        if (b == 0 || b == 1) return static_cast<int>(b);
    }
    throw SchemaError(field, "expected a 0/1 bit");
}

int parse_index(const json& v, const char* field) {
    if (!v.is_number_integer()) throw SchemaError(field, "expected an integer");
    return v.get<int>();
}

}  // namespace

std::string_view regime_name(Regime r) {
    switch (r) {
        case Regime::Indep: return "INDEP";
        case Regime::Alt: return "ALT";
        case Regime::Ver: return "VER";
        case Regime::VerFix: return "VER_FIX";
        case Regime::JudgeK: return "JUDGE_K";
        case Regime::Stack: return "STACK";
    }
    return "INDEP";
}

std::optional<Regime> regime_from_name(std::string_view name) {
    if (name == "INDEP") return Regime::Indep;
    if (name == "ALT") return Regime::Alt;
    if (name == "VER") return Regime::Ver;
    if (name == "VER_FIX") return Regime::VerFix;
    if (name == "JUDGE_K") return Regime::JudgeK;
    if (name == "STACK") return Regime::Stack;
    return std::nullopt;
}

PairedRecord parse_record(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid JSON record: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("record line is not a JSON object");

    PairedRecord rec;

    if (!j.contains("task_id") || !j["task_id"].is_string()) {
        throw SchemaError("task_id", "required string");
    }
    rec.task_id = j["task_id"].get<std::string>();

    if (!j.contains("root_seed") || !j["root_seed"].is_number_integer()) {
        throw SchemaError("root_seed", "required integer");
    }
    rec.root_seed = j["root_seed"].get<std::int64_t>();

    if (!j.contains("regime") || !j["regime"].is_string()) {
        throw SchemaError("regime", "required string");
    }
    const auto regime = regime_from_name(j["regime"].get<std::string>());
    if (!regime) throw SchemaError("regime", "unknown regime " + j["regime"].dump());
    rec.regime = *regime;

    if (j.contains("slice") && !j["slice"].is_null()) {
        if (!j["slice"].is_string()) throw SchemaError("slice", "expected string");
        rec.slice = j["slice"].get<std::string>();
    }

    if (!j.contains("e0")) throw SchemaError("e0", "required bit");
    rec.e0 = parse_bit(j["e0"], "e0");
    if (!j.contains("e1")) throw SchemaError("e1", "required bit");
    rec.e1 = parse_bit(j["e1"], "e1");
    if (j.contains("e2") && !j["e2"].is_null()) rec.e2 = parse_bit(j["e2"], "e2");

    if (j.contains("k") && !j["k"].is_null()) {
        rec.k = parse_index(j["k"], "k");
        if (*rec.k < 1) throw SchemaError("k", "must be >= 1");
    }
    auto check_slot = [&](const char* field, std::optional<int>& out) {
        if (!j.contains(field) || j[field].is_null()) return;
        if (!rec.k) throw SchemaError(field, "requires k");
        const int idx = parse_index(j[field], field);
        if (idx < 0 || idx >= *rec.k) throw SchemaError(field, "index out of [0,k)");
        out = idx;
    };
    check_slot("anchor_index", rec.anchor_index);
    check_slot("chosen_presented_index", rec.chosen_presented_index);
    check_slot("chosen_original_index", rec.chosen_original_index);

    if (j.contains("presented_order") && !j["presented_order"].is_null()) {
        if (!rec.k) throw SchemaError("presented_order", "requires k");
        if (!j["presented_order"].is_array() ||
            j["presented_order"].size() != static_cast<std::size_t>(*rec.k)) {
            throw SchemaError("presented_order", "expected array of length k");
        }
        std::vector<int> order;
        std::vector<bool> seen(static_cast<std::size_t>(*rec.k), false);
        for (const auto& v : j["presented_order"]) {
            const int idx = parse_index(v, "presented_order");
            if (idx < 0 || idx >= *rec.k || seen[static_cast<std::size_t>(idx)]) {
                throw SchemaError("presented_order", "not a permutation of 0..k-1");
            }
            seen[static_cast<std::size_t>(idx)] = true;
            order.push_back(idx);
        }
        rec.presented_order = std::move(order);
    }

    if (rec.presented_order && rec.chosen_presented_index) {
        const int derived = (*rec.presented_order)[static_cast<std::size_t>(
            *rec.chosen_presented_index)];
        if (rec.chosen_original_index && *rec.chosen_original_index != derived) {
            throw SchemaError("chosen_original_index",
                              "inconsistent with presented_order lookup");
        }
        rec.chosen_original_index = derived;
    }

    if (j.contains("candidate_correct") && !j["candidate_correct"].is_null()) {
        if (!rec.k) throw SchemaError("candidate_correct", "requires k");
        if (!j["candidate_correct"].is_array() ||
            j["candidate_correct"].size() != static_cast<std::size_t>(*rec.k)) {
            throw SchemaError("candidate_correct", "expected array of length k");
        }
        std::vector<int> bits;
        for (const auto& v : j["candidate_correct"]) {
            bits.push_back(parse_bit(v, "candidate_correct"));
        }
        if (!rec.anchor_index) {
            throw SchemaError("anchor_index", "required when candidate_correct present");
        }
        if (bits[static_cast<std::size_t>(*rec.anchor_index)] != rec.e0) {
            throw SchemaError("candidate_correct", "anchor entry disagrees with e0");
        }
        rec.candidate_correct = std::move(bits);
    }

    if (j.contains("candidate_answers") && !j["candidate_answers"].is_null()) {
        if (!rec.k) throw SchemaError("candidate_answers", "requires k");
        if (!j["candidate_answers"].is_array() ||
            j["candidate_answers"].size() != static_cast<std::size_t>(*rec.k)) {
            throw SchemaError("candidate_answers", "expected array of length k");
        }
        std::vector<std::string> answers;
        for (const auto& v : j["candidate_answers"]) {
            if (!v.is_string()) throw SchemaError("candidate_answers", "expected strings");
            answers.push_back(v.get<std::string>());
        }
        rec.candidate_answers = std::move(answers);
    }

    if (j.contains("features") && !j["features"].is_null()) {
        if (!j["features"].is_object()) throw SchemaError("features", "expected object");
        for (const auto& [key, v] : j["features"].items()) {
            if (!v.is_number()) throw SchemaError("features", "non-numeric feature " + key);
            rec.features[key] = v.get<double>();
        }
    }

    rec.extra = json::object();
    for (const auto& [key, v] : j.items()) {
        if (!is_known_field(key)) rec.extra[key] = v;
    }
    return rec;
}

std::string serialize_record(const PairedRecord& rec) {
    ordered_json j;
    j["task_id"] = rec.task_id;
    j["root_seed"] = rec.root_seed;
    j["regime"] = std::string(regime_name(rec.regime));
    if (rec.slice) j["slice"] = *rec.slice;
    j["e0"] = rec.e0;
    j["e1"] = rec.e1;
    if (rec.e2) j["e2"] = *rec.e2;
    if (rec.k) j["k"] = *rec.k;
    if (rec.anchor_index) j["anchor_index"] = *rec.anchor_index;
    if (rec.chosen_presented_index) j["chosen_presented_index"] = *rec.chosen_presented_index;
    if (rec.chosen_original_index) j["chosen_original_index"] = *rec.chosen_original_index;
    if (rec.presented_order) j["presented_order"] = *rec.presented_order;
    if (rec.candidate_correct) j["candidate_correct"] = *rec.candidate_correct;
    if (rec.candidate_answers) j["candidate_answers"] = *rec.candidate_answers;
    if (!rec.features.empty()) j["features"] = rec.features;
    if (rec.extra.is_object()) {
        for (const auto& [key, v] : rec.extra.items()) j[key] = v;
    }
    return j.dump();
}

std::vector<PairedRecord> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<PairedRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(parse_record(line));
        } catch (const Error& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

void write_jsonl(const std::string& path, std::span<const PairedRecord> records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& rec : records) out << serialize_record(rec) << '\n';
}

nlohmann::json DatasetSummary::to_json() const {
    nlohmann::json j;
    j["count"] = count;
    auto sup = nlohmann::json::array();
    for (const auto& s : supports) {
        sup.push_back({{"root_seed", s.root_seed},
                       {"regime", s.regime},
                       {"slice", s.slice},
                       {"count", s.count}});
    }
    j["supports"] = std::move(sup);
    j["missing_slice"] = missing_slice;
    j["missing_e2"] = missing_e2;
    j["missing_judge_fields"] = missing_judge_fields;
    return j;
}

DatasetSummary validate_dataset(std::span<const PairedRecord> records) {
    DatasetSummary summary;
    summary.count = records.size();

    std::set<std::tuple<std::string, std::int64_t, Regime>> keys;
    std::map<std::tuple<std::int64_t, std::string, std::string>, std::int64_t> supports;
    for (const auto& rec : records) {
        auto key = std::make_tuple(rec.task_id, rec.root_seed, rec.regime);
        if (!keys.insert(key).second) {
            throw DuplicateError("duplicate record key (" + rec.task_id + ", " +
                                 std::to_string(rec.root_seed) + ", " +
                                 std::string(regime_name(rec.regime)) + ")");
        }
        const std::string slice =
            rec.slice ? *rec.slice : std::string(PairedRecord::kPooledOnly);
        if (!rec.slice) ++summary.missing_slice;
        if (!rec.e2) ++summary.missing_e2;
        if (!rec.candidate_correct) ++summary.missing_judge_fields;
        ++supports[{rec.root_seed, std::string(regime_name(rec.regime)), slice}];
    }
    for (const auto& [key, n] : supports) {
        summary.supports.push_back(
            {std::get<0>(key), std::get<1>(key), std::get<2>(key), n});
    }
    return summary;
}

TransitionCounts count_transitions(std::span<const PairedRecord> records,
                                   BitField from_field, BitField to_field,
                                   const RecordFilter& filter) {
    if (static_cast<int>(from_field) >= static_cast<int>(to_field)) {
        throw DomainError("from_field must strictly precede to_field");
    }
    if (from_field == BitField::E2) throw DomainError("cannot condition on e2");

    TransitionCounts counts;
    for (const auto& rec : records) {
        if (filter && !filter(rec)) continue;
        const int from = from_field == BitField::E0 ? rec.e0 : rec.e1;
        int to;
        if (to_field == BitField::E1) {
            to = rec.e1;
        } else {
            if (!rec.e2) {
                throw MissingFieldError("record " + rec.task_id + " lacks e2");
            }
            to = *rec.e2;
        }
        if (from == 0) {
            (to == 0 ? counts.n00 : counts.n01) += 1;
        } else {
            (to == 0 ? counts.n10 : counts.n11) += 1;
        }
    }
    return counts;
}

std::map<std::int64_t, std::vector<PairedRecord>> group_by_seed(
    std::span<const PairedRecord> records) {
    std::map<std::int64_t, std::vector<PairedRecord>> by_seed;
    for (const auto& rec : records) by_seed[rec.root_seed].push_back(rec);
    return by_seed;
}

}  // namespace chanaudit
