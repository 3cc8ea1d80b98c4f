#include "chanaudit/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "chanaudit/errors.hpp"
#include "chanaudit/rng.hpp"
#include "chanaudit/selection.hpp"

namespace chanaudit {

namespace {

// Stream tags keep the per-item random streams for different draws disjoint.
constexpr std::uint64_t kTagArith = 0x617269ull;
constexpr std::uint64_t kTagLinear = 0x6c696eull;
constexpr std::uint64_t kTagBaseline = 0x653000ull;
constexpr std::uint64_t kTagStep1 = 0x653100ull;
constexpr std::uint64_t kTagStep2 = 0x653200ull;
constexpr std::uint64_t kTagCands = 0x63616eull;
constexpr std::uint64_t kTagJudge = 0x6a7564ull;

SplitRng item_rng(std::int64_t sim_seed, const Task& task, std::uint64_t tag) {
    // The record id carries family and depth, so items that share a numeric
    // task_id across slices still get disjoint streams.
    return SplitRng::keyed(KeyHash()
                               .add(sim_seed)
                               .add(task.root_seed)
                               .add(std::string_view(task.record_id()))
                               .add(tag));
}

std::string pad4(std::int64_t id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld", static_cast<long long>(id));
    return buf;
}

constexpr std::int64_t kOperandLo = -20;
constexpr std::int64_t kOperandHi = 20;
constexpr std::int64_t kMagnitudeCap = 1000000000;  // |num|, den of any node value

struct ExprNode {
    Rational value;
    std::string text;
};

bool too_big(const Rational& r) {
    return std::abs(r.num()) > kMagnitudeCap || r.den() > kMagnitudeCap;
}

ExprNode leaf(SplitRng& rng) {
    const std::int64_t v = rng.next_int(kOperandLo, kOperandHi);
    ExprNode node;
    node.value = Rational(v);
    node.text = v < 0 ? "(" + std::to_string(v) + ")" : std::to_string(v);
    return node;
}

/// Builds a subtree with exactly `ops` binary operations. Division by a
/// zero-valued subtree or an oversized intermediate resamples the operator
/// and right operand from the same stream, keeping generation deterministic.
ExprNode build_expr(int ops, SplitRng& rng) {
    if (ops == 0) return leaf(rng);
    const int left_ops = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(ops)));
    const int right_ops = ops - 1 - left_ops;
    const ExprNode left = build_expr(left_ops, rng);

    for (int attempt = 0; attempt < 64; ++attempt) {
        const int op = static_cast<int>(rng.next_below(4));
        const ExprNode right = build_expr(right_ops, rng);
        if (op == 3 && right.value.is_zero()) continue;
        try {
            Rational value;
            const char* sym = "+";
            switch (op) {
                case 0: value = left.value + right.value; sym = "+"; break;
                case 1: value = left.value - right.value; sym = "-"; break;
                case 2: value = left.value * right.value; sym = "*"; break;
                default: value = left.value / right.value; sym = "/"; break;
            }
            if (too_big(value)) continue;
            ExprNode node;
            node.value = value;
            node.text = "(" + left.text + " " + sym + " " + right.text + ")";
            return node;
        } catch (const DomainError&) {
            continue;  // overflow; resample
        }
    }
    // Addition is always safe at these magnitudes.
    const ExprNode right = build_expr(right_ops, rng);
    ExprNode node;
    node.value = left.value + right.value;
    node.text = "(" + left.text + " + " + right.text + ")";
    return node;
}

Task make_arith(int depth, std::int64_t root_seed, std::int64_t task_id) {
    SplitRng rng = SplitRng::keyed(
        KeyHash().add(kTagArith).add(root_seed).add(task_id).add(std::int64_t{depth}));
    Task task;
    task.family = TaskFamily::ArithDepth;
    task.depth = depth;
    task.root_seed = root_seed;
    task.task_id = task_id;
    const ExprNode expr = build_expr(depth, rng);
    task.statement = "Evaluate " + expr.text + ".";
    task.truth = CanonicalAnswer::from_scalar(expr.value);
    return task;
}

Task make_linear(std::int64_t root_seed, std::int64_t task_id) {
    SplitRng rng =
        SplitRng::keyed(KeyHash().add(kTagLinear).add(root_seed).add(task_id));
    Task task;
    task.family = TaskFamily::Linear2x2;
    task.depth = 0;
    task.root_seed = root_seed;
    task.task_id = task_id;
    while (true) {
        const std::int64_t a = rng.next_int(-10, 10);
        const std::int64_t b = rng.next_int(-10, 10);
        const std::int64_t c = rng.next_int(-10, 10);
        const std::int64_t d = rng.next_int(-10, 10);
        const std::int64_t det = a * d - b * c;
        if (det == 0) continue;
        const std::int64_t e = rng.next_int(-20, 20);
        const std::int64_t f = rng.next_int(-20, 20);
        const Rational x(e * d - b * f, det);
        const Rational y(a * f - e * c, det);
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "Solve for (x, y): %lldx + %lldy = %lld and %lldx + %lldy = %lld.",
                      static_cast<long long>(a), static_cast<long long>(b),
                      static_cast<long long>(e), static_cast<long long>(c),
                      static_cast<long long>(d), static_cast<long long>(f));
        task.statement = buf;
        task.truth = CanonicalAnswer::from_pair(x, y);
        return task;
    }
}

/// Runs fn(i) for i in [0, n), optionally across threads. Output must be
/// index-addressed by the caller so worker count cannot change results.
template <typename Fn>
void parallel_for(std::size_t n, int n_workers, const Fn& fn) {
    if (n_workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(n_workers), n);
    std::vector<std::thread> threads;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            const std::size_t lo = n * w / workers;
            const std::size_t hi = n * (w + 1) / workers;
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

int draw_step(int prev, const Rates& rates, SplitRng& rng) {
    if (prev == 0) return rng.bernoulli(rates.c) ? 1 : 0;
    return rng.bernoulli(rates.gamma) ? 0 : 1;
}

PairedRecord base_record(const Task& task) {
    PairedRecord rec;
    rec.task_id = task.record_id();
    rec.root_seed = task.root_seed;
    rec.slice = task.slice();
    rec.features["chars"] = static_cast<double>(task.statement.size());
    return rec;
}

}  // namespace

std::string Task::slice() const {
    if (family == TaskFamily::Linear2x2) return "2x2";
    return "depth_" + std::to_string(depth);
}

std::string Task::record_id() const {
    if (family == TaskFamily::Linear2x2) return "2x2_" + pad4(task_id);
    return "d" + std::to_string(depth) + "_" + pad4(task_id);
}

Task generate_task(TaskFamily family, int depth, std::int64_t root_seed,
                   std::int64_t task_id) {
    if (family == TaskFamily::ArithDepth) {
        if (depth < 1 || depth > 5) throw DomainError("arithmetic depth must be 1..5");
        return make_arith(depth, root_seed, task_id);
    }
    return make_linear(root_seed, task_id);
}

std::vector<Task> standard_suite(std::int64_t root_seed, int n_per_slice) {
    std::vector<Task> tasks;
    tasks.reserve(static_cast<std::size_t>(n_per_slice) * 6);
    for (int depth = 1; depth <= 5; ++depth) {
        for (int i = 0; i < n_per_slice; ++i) {
            tasks.push_back(generate_task(TaskFamily::ArithDepth, depth, root_seed, i));
        }
    }
    for (int i = 0; i < n_per_slice; ++i) {
        tasks.push_back(generate_task(TaskFamily::Linear2x2, 0, root_seed, i));
    }
    return tasks;
}

nlohmann::json task_to_json(const Task& task) {
    nlohmann::ordered_json j;
    j["family"] = task.family == TaskFamily::ArithDepth ? "arith" : "2x2";
    if (task.family == TaskFamily::ArithDepth) j["depth"] = task.depth;
    j["root_seed"] = task.root_seed;
    j["task_id"] = task.task_id;
    j["slice"] = task.slice();
    j["statement"] = task.statement;
    j["truth"] = task.truth.to_string();
    return j;
}

void write_tasks_jsonl(const std::string& path, std::span<const Task> tasks) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& task : tasks) out << task_to_json(task).dump() << '\n';
}

const Rates& StepProfile::rates_for(const std::string& slice) const {
    const auto it = by_slice.find(slice);
    if (it != by_slice.end()) return it->second;
    if (fallback) return *fallback;
    throw MissingSliceError("step profile has no rates for slice " + slice);
}

double BaselineAccuracy::for_slice(const std::string& slice) const {
    const auto it = by_slice.find(slice);
    if (it != by_slice.end()) return it->second;
    if (fallback) return *fallback;
    throw MissingSliceError("baseline accuracy has no value for slice " + slice);
}

std::vector<PairedRecord> simulate_protocol(std::span<const Task> tasks,
                                            const BaselineAccuracy& baseline,
                                            const StepProfile& step,
                                            std::int64_t sim_seed, int n_workers) {
    std::vector<PairedRecord> records(tasks.size());
    parallel_for(tasks.size(), n_workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        const std::string slice = task.slice();
        PairedRecord rec = base_record(task);
        rec.regime = Regime::Alt;
        SplitRng rng0 = item_rng(sim_seed, task.root_seed, task.task_id, kTagBaseline);
        rec.e0 = rng0.bernoulli(baseline.for_slice(slice)) ? 1 : 0;
        SplitRng rng1 = item_rng(sim_seed, task.root_seed, task.task_id, kTagStep1);
        rec.e1 = draw_step(rec.e0, step.rates_for(slice), rng1);
        records[i] = std::move(rec);
    });
    return records;
}

std::vector<PairedRecord> simulate_stack(std::span<const Task> tasks,
                                         const BaselineAccuracy& baseline,
                                         const StepProfile& step1,
                                         const StepProfile& step2,
                                         std::int64_t sim_seed, int n_workers) {
    std::vector<PairedRecord> records(tasks.size());
    parallel_for(tasks.size(), n_workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        const std::string slice = task.slice();
        PairedRecord rec = base_record(task);
        rec.regime = Regime::Stack;
        SplitRng rng0 = item_rng(sim_seed, task.root_seed, task.task_id, kTagBaseline);
        rec.e0 = rng0.bernoulli(baseline.for_slice(slice)) ? 1 : 0;
        SplitRng rng1 = item_rng(sim_seed, task.root_seed, task.task_id, kTagStep1);
        rec.e1 = draw_step(rec.e0, step1.rates_for(slice), rng1);
        Rates rates2 = step2.rates_for(slice);
        if (step2.history == HistoryRule::AnchorHaunted && rec.e0 == 1) {
            rates2.c = std::max(0.0, rates2.c - step2.anchor_shift);
            rates2.gamma = std::min(1.0, rates2.gamma + step2.anchor_shift);
        }
        SplitRng rng2 = item_rng(sim_seed, task.root_seed, task.task_id, kTagStep2);
        rec.e2 = draw_step(rec.e1, rates2, rng2);
        records[i] = std::move(rec);
    });
    return records;
}

namespace {

/// Synthetic wrong answer: the truth offset by a small integer, so distinct
/// wrong candidates sometimes collide (exercising every diversity stratum).
std::string wrong_answer(const CanonicalAnswer& truth, std::int64_t offset) {
    CanonicalAnswer wrong = truth;
    switch (truth.kind) {
        case AnswerKind::Integer:
        case AnswerKind::Rational:
            wrong = CanonicalAnswer::from_scalar(truth.scalar + Rational(offset));
            break;
        case AnswerKind::Tuple2:
            wrong = CanonicalAnswer::from_pair(truth.scalar + Rational(offset),
                                               truth.second);
            break;
        case AnswerKind::Verdict:
            wrong = CanonicalAnswer::from_verdict(1 - truth.verdict);
            break;
    }
    return wrong.to_string();
}

}  // namespace

std::vector<PairedRecord> simulate_judgek(std::span<const Task> tasks,
                                          double per_candidate_acc, int k,
                                          const JudgeSpec& judge, std::int64_t sim_seed,
                                          std::optional<std::int64_t> posshuffle_seed,
                                          int n_workers) {
    if (k < 1) throw DomainError("judge-K requires k >= 1");
    std::vector<PairedRecord> records(tasks.size());
    parallel_for(tasks.size(), n_workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        PairedRecord rec = base_record(task);
        rec.regime = Regime::JudgeK;
        rec.k = k;
        rec.anchor_index = 0;

        SplitRng rng_c = item_rng(sim_seed, task.root_seed, task.task_id, kTagCands);
        std::vector<int> correct(static_cast<std::size_t>(k));
        std::vector<std::string> answers(static_cast<std::size_t>(k));
        for (int cand = 0; cand < k; ++cand) {
            correct[static_cast<std::size_t>(cand)] =
                rng_c.bernoulli(per_candidate_acc) ? 1 : 0;
            answers[static_cast<std::size_t>(cand)] =
                correct[static_cast<std::size_t>(cand)]
                    ? task.truth.to_string()
                    : wrong_answer(task.truth,
                                   1 + static_cast<std::int64_t>(rng_c.next_below(2)));
        }
        rec.e0 = correct[0];

        std::vector<int> perm(static_cast<std::size_t>(k));
        if (posshuffle_seed) {
            perm = posshuffle_permutation(*posshuffle_seed, rec.task_id, k);
        } else {
            for (int s = 0; s < k; ++s) perm[static_cast<std::size_t>(s)] = s;
        }

        SplitRng rng_j = item_rng(sim_seed, task.root_seed, task.task_id, kTagJudge);
        auto oracle_slot = [&]() {
            for (int slot = 0; slot < k; ++slot) {
                if (correct[static_cast<std::size_t>(perm[static_cast<std::size_t>(slot)])]) {
                    return slot;
                }
            }
            return 0;
        };
        int chosen_slot = 0;
        switch (judge.kind) {
            case JudgeKind::Slot0:
                chosen_slot = 0;
                break;
            case JudgeKind::AnchorSticky: {
                if (rec.e0 == 1 && rng_j.bernoulli(judge.param)) {
                    const auto it = std::find(perm.begin(), perm.end(), 0);
                    chosen_slot = static_cast<int>(it - perm.begin());
                } else {
                    chosen_slot = static_cast<int>(rng_j.next_below(
                        static_cast<std::uint64_t>(k)));
                }
                break;
            }
            case JudgeKind::OracleJudge:
                chosen_slot = oracle_slot();
                break;
            case JudgeKind::NoisyOracle:
                chosen_slot = rng_j.bernoulli(judge.param)
                                  ? static_cast<int>(rng_j.next_below(
                                        static_cast<std::uint64_t>(k)))
                                  : oracle_slot();
                break;
        }

        rec.presented_order = perm;
        rec.chosen_presented_index = chosen_slot;
        rec.chosen_original_index = perm[static_cast<std::size_t>(chosen_slot)];
        rec.e1 = correct[static_cast<std::size_t>(*rec.chosen_original_index)];
        rec.candidate_correct = std::move(correct);
        rec.candidate_answers = std::move(answers);
        records[i] = std::move(rec);
    });
    return records;
}

}  // namespace chanaudit
