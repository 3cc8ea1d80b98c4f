#include "doctest.h"

#include "chanaudit/record.hpp"
#include "chanaudit/rng.hpp"

using namespace chanaudit;

TEST_CASE("parse_record reads the logging contract") {
    const auto rec = parse_record(
        R"({"task_id":"t1","root_seed":123,"regime":"ALT","slice":"depth_1","e0":1,"e1":0})");
    CHECK(rec.task_id == "t1");
    CHECK(rec.root_seed == 123);
    CHECK(rec.regime == Regime::Alt);
    CHECK(rec.slice == "depth_1");
    CHECK(rec.e0 == 1);
    CHECK(rec.e1 == 0);
}

TEST_CASE("parse_record derives chosen_original_index from presented_order") {
    const auto rec = parse_record(
        R"({"task_id":"t1","root_seed":1,"regime":"JUDGE_K","e0":0,"e1":1, )"
        R"("k":4,"anchor_index":0,"presented_order":[2,0,1,3],)"
        R"("chosen_presented_index":0})");
    REQUIRE(rec.chosen_original_index.has_value());
    CHECK(*rec.chosen_original_index == 2);
}

TEST_CASE("parse_record rejects invariant violations with the field name") {
    auto field_of = [](const std::string& line) {
        try {
            parse_record(line);
        } catch (const SchemaError& e) {
            return e.field;
        }
        FAIL("expected SchemaError");
        return std::string();
    };
    CHECK(field_of(R"({"task_id":"t","root_seed":1,"regime":"ALT","e0":2,"e1":0})") ==
          "e0");
    CHECK(field_of(R"({"task_id":"t","root_seed":1,"regime":"ALT","e0":0})") == "e1");
    CHECK(field_of(
              R"({"task_id":"t","root_seed":1,"regime":"JUDGE_K","e0":0,"e1":0,)"
              R"("k":3,"presented_order":[0,1,1],"anchor_index":0})") ==
          "presented_order");
    // candidate_correct[anchor] must agree with e0.
    CHECK(field_of(
              R"({"task_id":"t","root_seed":1,"regime":"JUDGE_K","e0":0,"e1":0,)"
              R"("k":2,"anchor_index":0,"candidate_correct":[1,0]})") ==
          "candidate_correct");
    CHECK(field_of(
              R"({"task_id":"t","root_seed":1,"regime":"JUDGE_K","e0":0,"e1":0,)"
              R"("k":2,"anchor_index":5})") == "anchor_index");
    CHECK_THROWS_AS(parse_record("not json"), ParseError);
    CHECK_THROWS_AS(
        parse_record(R"({"task_id":"t","root_seed":1,"regime":"WAT","e0":0,"e1":0})"),
        SchemaError);
}

TEST_CASE("serialize/parse round-trips including unknown fields") {
    SplitRng rng(7);
    for (int i = 0; i < 200; ++i) {
        PairedRecord rec;
        rec.task_id = "task_" + std::to_string(i);
        rec.root_seed = rng.next_int(0, 5);
        rec.regime = rng.bernoulli(0.5) ? Regime::JudgeK : Regime::Stack;
        if (rng.bernoulli(0.8)) rec.slice = "depth_" + std::to_string(rng.next_int(1, 5));
        rec.e0 = rng.bernoulli(0.6) ? 1 : 0;
        rec.e1 = rng.bernoulli(0.6) ? 1 : 0;
        if (rec.regime == Regime::Stack) rec.e2 = rng.bernoulli(0.5) ? 1 : 0;
        if (rec.regime == Regime::JudgeK) {
            const int k = static_cast<int>(rng.next_int(2, 4));
            rec.k = k;
            rec.anchor_index = 0;
            std::vector<int> cands;
            for (int c = 0; c < k; ++c) cands.push_back(rng.bernoulli(0.5) ? 1 : 0);
            cands[0] = rec.e0;
            rec.candidate_correct = cands;
            std::vector<int> order(static_cast<std::size_t>(k));
            for (int s = 0; s < k; ++s) order[static_cast<std::size_t>(s)] = s;
            rng.shuffle(order);
            rec.presented_order = order;
            rec.chosen_presented_index = static_cast<int>(
                rng.next_below(static_cast<std::uint64_t>(k)));
            rec.chosen_original_index =
                order[static_cast<std::size_t>(*rec.chosen_presented_index)];
        }
        rec.features["chars"] = static_cast<double>(rng.next_int(10, 500));
        rec.extra = nlohmann::json{{"opaque", "blob"}, {"run", 3}};

        const std::string line = serialize_record(rec);
        const PairedRecord back = parse_record(line);
        CHECK(serialize_record(back) == line);
        CHECK(back.extra["opaque"] == "blob");
    }
}

TEST_CASE("validate_dataset reports supports and rejects duplicates") {
    std::vector<PairedRecord> records;
    for (int slice = 0; slice < 6; ++slice) {
        for (int i = 0; i < 100; ++i) {
            PairedRecord rec;
            rec.task_id = "s" + std::to_string(slice) + "_" + std::to_string(i);
            rec.root_seed = 123;
            rec.regime = Regime::Alt;
            rec.slice = slice == 5 ? "2x2" : "depth_" + std::to_string(slice + 1);
            rec.e0 = i % 2;
            rec.e1 = i % 3 == 0;
            records.push_back(rec);
        }
    }
    const DatasetSummary summary = validate_dataset(records);
    CHECK(summary.count == 600);
    CHECK(summary.supports.size() == 6);
    for (const auto& sup : summary.supports) CHECK(sup.count == 100);
    CHECK(summary.missing_slice == 0);

    SUBCASE("empty dataset is fine") {
        CHECK(validate_dataset({}).count == 0);
    }
    SUBCASE("duplicate keys fail") {
        records.push_back(records.front());
        CHECK_THROWS_AS(validate_dataset(records), DuplicateError);
    }
    SUBCASE("missing slice is counted") {
        records.front().slice.reset();
        const auto s = validate_dataset(records);
        CHECK(s.missing_slice == 1);
    }
}

namespace {

PairedRecord pair_record(int e0, int e1, int idx) {
    PairedRecord rec;
    rec.task_id = "p" + std::to_string(idx);
    rec.root_seed = 1;
    rec.regime = Regime::Alt;
    rec.e0 = e0;
    rec.e1 = e1;
    return rec;
}

}  // namespace

TEST_CASE("count_transitions forms the paired counts") {
    std::vector<PairedRecord> records = {pair_record(0, 0, 0), pair_record(0, 1, 1),
                                         pair_record(1, 0, 2), pair_record(1, 1, 3)};
    const auto counts = count_transitions(records, BitField::E0, BitField::E1);
    CHECK(counts.n00 == 1);
    CHECK(counts.n01 == 1);
    CHECK(counts.n10 == 1);
    CHECK(counts.n11 == 1);
    CHECK(counts.total() == 4);

    SUBCASE("degenerate all-(1,1)") {
        std::vector<PairedRecord> same;
        for (int i = 0; i < 50; ++i) same.push_back(pair_record(1, 1, i));
        const auto c = count_transitions(same, BitField::E0, BitField::E1);
        CHECK(c.n11 == 50);
        CHECK(c.n00 + c.n01 + c.n10 == 0);
    }
    SUBCASE("field order is enforced") {
        CHECK_THROWS_AS(count_transitions(records, BitField::E1, BitField::E1),
                        DomainError);
    }
    SUBCASE("missing e2 raises MissingFieldError") {
        CHECK_THROWS_AS(count_transitions(records, BitField::E0, BitField::E2),
                        MissingFieldError);
    }
}

TEST_CASE("count_transitions totals match every filter") {
    SplitRng rng(11);
    std::vector<PairedRecord> records;
    for (int i = 0; i < 300; ++i) {
        auto rec = pair_record(rng.bernoulli(0.5), rng.bernoulli(0.5), i);
        rec.e2 = rng.bernoulli(0.5) ? 1 : 0;
        rec.slice = "s" + std::to_string(i % 3);
        records.push_back(rec);
    }
    for (int target = 0; target < 3; ++target) {
        const std::string label = "s" + std::to_string(target);
        std::size_t expected = 0;
        for (const auto& rec : records) expected += rec.slice == label ? 1 : 0;
        const auto counts =
            count_transitions(records, BitField::E0, BitField::E1,
                              [&](const PairedRecord& r) { return r.slice == label; });
        CHECK(static_cast<std::size_t>(counts.total()) == expected);
    }
}

TEST_CASE("stack counting is determined record by record") {
    // Each record's (e0, e2) cell depends only on its own bits: counting the
    // direct transition equals tallying per-record cells by hand.
    SplitRng rng(23);
    std::vector<PairedRecord> records;
    std::int64_t manual[2][2] = {{0, 0}, {0, 0}};
    for (int i = 0; i < 500; ++i) {
        auto rec = pair_record(rng.bernoulli(0.7), rng.bernoulli(0.5), i);
        rec.e2 = rng.bernoulli(0.4) ? 1 : 0;
        ++manual[rec.e0][*rec.e2];
        records.push_back(rec);
    }
    const auto counts = count_transitions(records, BitField::E0, BitField::E2);
    CHECK(counts.n00 == manual[0][0]);
    CHECK(counts.n01 == manual[0][1]);
    CHECK(counts.n10 == manual[1][0]);
    CHECK(counts.n11 == manual[1][1]);
}
