#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "navvox/explore.hpp"
#include "navvox/rl.hpp"
#include "navvox/synth.hpp"
#include "navvox/validate.hpp"

namespace navvox {

/// One named contender. RL entries carry the policy they roll out.
struct BenchStrategy {
    std::string name;
    Strategy kind = Strategy::Random;
    const QNetwork* policy = nullptr;
};

struct BenchConfig {
    std::vector<BenchStrategy> strategies;
    std::vector<double> budget_pcts{25.0, 50.0, 75.0, 100.0};
    std::vector<std::uint64_t> seeds;
    double coverage_target = 0.85;
    WorldSpec fixture;  // the seed field is replaced per run
    double epsilon = 0.5;
    std::size_t tau = 3;
    double rl_epsilon = 0.05;
    std::size_t heuristic_horizon = 30;
    std::size_t step_cap_factor = 20;  // samples-to-coverage runs stop at this multiple of |V_r|
    bool timings = true;               // false writes 0 for recon_ms / validate_ms

    void validate() const;
};

/// Per-run metrics; percentages are in [0, 100].
struct Metrics {
    double detection_rate = 0.0;            // exhaustive-run clusters touched by a reported cluster
    double detection_rate_injected = 0.0;   // same, against the injected ground-truth clusters
    double coverage = 0.0;
    double samples_pct = 0.0;
    std::optional<std::size_t> samples_to_target;
    double false_positive_rate = 0.0;
    double recon_ms = 0.0;
    double validate_ms = 0.0;
};

struct BenchRow {
    std::string strategy;
    std::uint64_t seed = 0;
    double budget_pct = 0.0;
    Metrics metrics;
    std::string error;  // non-empty when the run failed

    bool ok() const { return error.empty(); }
};

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

/// Linear-interpolated quartiles. Infinite values sort last. Empty input gives NaN.
Quartiles quartiles(std::vector<double> values);

struct BenchSummary {
    std::string strategy;
    double budget_pct = 0.0;
    std::size_t runs = 0;
    std::size_t failures = 0;
    Quartiles detection_rate;
    Quartiles coverage;
    Quartiles samples_to_target;  // +inf for runs that never reached the target
    Quartiles false_positive_rate;
};

/// Median importance coverage against samples expressed as % of |V_r|.
struct CoverageCurve {
    std::string strategy;
    std::vector<double> samples_pct;
    std::vector<double> median_coverage;
};

struct BenchResult {
    std::vector<BenchRow> rows;  // strategy-major, then seed, then budget, in config order
    std::vector<BenchSummary> summaries;
    std::vector<CoverageCurve> curves;
    double coverage_target = 0.85;
};

/// Runs every strategy on every seed's fixture at every budget. Work is spread
/// over (strategy, seed) pairs; a failing pair is recorded and the batch goes on.
BenchResult run_benchmark(const BenchConfig& cfg);

/// Median samples-to-target per strategy over the successful runs (+inf when
/// the median run never got there).
std::optional<double> median_samples_to_target(const BenchResult& result, const std::string& strategy);

void write_bench_csv(std::ostream& out, const BenchResult& result);
void write_bench_table(std::ostream& out, const BenchResult& result);
nlohmann::json bench_plot_json(const BenchResult& result);

/// Trains one policy across fixtures built from `specs`.
TrainResult train_on_fixtures(const std::vector<WorldSpec>& specs, const TrainConfig& cfg, std::uint64_t seed,
                              const RewardParams& reward = {},
                              const std::function<void(const TrainLogRow&)>& on_episode = {});

/// Exploration environment over a fixture's reachable set with the standard importance scaling.
ExploreEnv make_env(const Fixture& fx, const RewardParams& reward = {});

}  // namespace navvox
