#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chanaudit/answer.hpp"
#include "chanaudit/record.hpp"

namespace chanaudit {

enum class TaskFamily { ArithDepth, Linear2x2 };

/// One synthetic task. Regeneration from (family, depth, root_seed, task_id)
/// is bit-identical; truths are exact rationals.
struct Task {
    TaskFamily family = TaskFamily::ArithDepth;
    int depth = 1;  // ArithDepth only, 1..5
    std::int64_t root_seed = 0;
    std::int64_t task_id = 0;
    std::string statement;
    CanonicalAnswer truth;

    std::string slice() const;      // "depth_3" / "2x2"
    std::string record_id() const;  // "d3_0017" / "2x2_0017"
};

/// Deterministic task generation. Arithmetic tasks contain exactly `depth`
/// composed operations over operands in [-20, 20]; division subtrees are
/// resampled until nonzero. Linear2x2 systems are nonsingular with integer
/// or reduced-rational solutions. Throws DomainError on invalid depth.
Task generate_task(TaskFamily family, int depth, std::int64_t root_seed,
                   std::int64_t task_id);

/// The standard layout: n tasks per depth bin 1..5 plus n 2x2 tasks.
std::vector<Task> standard_suite(std::int64_t root_seed, int n_per_slice);

nlohmann::json task_to_json(const Task& task);
void write_tasks_jsonl(const std::string& path, std::span<const Task> tasks);

/// Ground-truth channel rates for one step.
struct Rates {
    double c = 0.0;
    double gamma = 0.0;
};

/// How a second step may depend on history beyond e1. AnchorHaunted shifts
/// the step-2 rates by anchor_shift on items with e0 = 1 (corruption up,
/// correction down), planting a Markov violation of that magnitude.
enum class HistoryRule { Markov, AnchorHaunted };

struct StepProfile {
    std::map<std::string, Rates> by_slice;
    std::optional<Rates> fallback;
    HistoryRule history = HistoryRule::Markov;
    double anchor_shift = 0.0;

    const Rates& rates_for(const std::string& slice) const;

    static StepProfile constant(Rates rates) {
        StepProfile profile;
        profile.fallback = rates;
        return profile;
    }
};

struct BaselineAccuracy {
    std::map<std::string, double> by_slice;
    std::optional<double> fallback;

    double for_slice(const std::string& slice) const;

    static BaselineAccuracy constant(double p0) {
        BaselineAccuracy acc;
        acc.fallback = p0;
        return acc;
    }
};

/// Draws paired outcomes with the planted channel: e0 ~ Bernoulli(p0(slice)),
/// e1 | e0 from (c(slice), gamma(slice)). Per-item randomness is keyed by
/// (sim_seed, root_seed, task_id, stream tag), so results do not depend on
/// n_workers or execution order.
std::vector<PairedRecord> simulate_protocol(std::span<const Task> tasks,
                                            const BaselineAccuracy& baseline,
                                            const StepProfile& step,
                                            std::int64_t sim_seed, int n_workers = 1);

/// Two-step stack producing (e0, e1, e2). A Markov step2 draws e2 from e1
/// alone; AnchorHaunted adds the planted e0 dependence.
std::vector<PairedRecord> simulate_stack(std::span<const Task> tasks,
                                         const BaselineAccuracy& baseline,
                                         const StepProfile& step1,
                                         const StepProfile& step2,
                                         std::int64_t sim_seed, int n_workers = 1);

enum class JudgeKind {
    Slot0,        // always selects presented slot 0
    AnchorSticky, // keeps a correct anchor with probability theta, else uniform
    OracleJudge,  // selects a correct candidate whenever one exists
    NoisyOracle,  // oracle with probability 1-eps, uniform otherwise
};

struct JudgeSpec {
    JudgeKind kind = JudgeKind::Slot0;
    double param = 0.0;  // theta for AnchorSticky, eps for NoisyOracle

    static JudgeSpec slot0() { return {JudgeKind::Slot0, 0.0}; }
    static JudgeSpec anchor_sticky(double theta) { return {JudgeKind::AnchorSticky, theta}; }
    static JudgeSpec oracle() { return {JudgeKind::OracleJudge, 0.0}; }
    static JudgeSpec noisy_oracle(double eps) { return {JudgeKind::NoisyOracle, eps}; }
};

/// Judge-K simulation: candidate_correct drawn i.i.d. per candidate, the
/// anchor is original index 0, and the judge acts on the presented order
/// (identity, or the posshuffle permutation when posshuffle_seed is given).
std::vector<PairedRecord> simulate_judgek(std::span<const Task> tasks,
                                          double per_candidate_acc, int k,
                                          const JudgeSpec& judge,
                                          std::int64_t sim_seed,
                                          std::optional<std::int64_t> posshuffle_seed = {},
                                          int n_workers = 1);

}  // namespace chanaudit
