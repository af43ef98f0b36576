#include "navvox/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <omp.h>

#include "navvox/pipeline.hpp"

namespace navvox {

using json = nlohmann::json;

void BenchConfig::validate() const {
    if (seeds.empty()) throw Error("benchmark needs at least one seed");
    if (strategies.empty()) throw Error("benchmark needs at least one strategy");
    if (!(coverage_target > 0.0 && coverage_target <= 1.0)) throw Error("coverage target must be in (0, 1]");
    if (budget_pcts.empty()) throw Error("benchmark needs at least one budget");
    for (double b : budget_pcts)
        if (!(b > 0.0 && b <= 100.0)) throw Error("budget percentages must be in (0, 100]");
    if (!(epsilon >= 0.0)) throw Error("epsilon must be >= 0");
    if (tau < 1) throw Error("tau must be >= 1");
    if (step_cap_factor < 1) throw Error("step cap factor must be >= 1");
    std::set<std::string> names;
    for (const auto& s : strategies) {
        if (!names.insert(s.name).second) throw Error("duplicate strategy name '" + s.name + "'");
        if (s.kind == Strategy::RL && !s.policy) throw Error("strategy '" + s.name + "' needs a policy");
    }
}

Quartiles quartiles(std::vector<double> v) {
    if (v.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        return {nan, nan, nan};
    }
    std::sort(v.begin(), v.end());
    auto at = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        if (frac == 0.0 || v[lo] == v[hi]) return v[lo];
        if (std::isinf(v[hi])) return v[hi];
        return v[lo] + frac * (v[hi] - v[lo]);
    };
    return {at(0.25), at(0.5), at(0.75)};
}

ExploreEnv make_env(const Fixture& fx, const RewardParams& reward) {
    auto field = compute_importance(fx.recon.graph, fx.world.markers).restricted(fx.recon.reach.mask);
    return ExploreEnv(fx.recon.graph, std::move(field), fx.recon.reach.seed, reward, importance_scale(fx.world.markers));
}

TrainResult train_on_fixtures(const std::vector<WorldSpec>& specs, const TrainConfig& cfg, std::uint64_t seed,
                              const RewardParams& reward, const std::function<void(const TrainLogRow&)>& on_episode) {
    if (specs.empty()) throw Error("training needs at least one fixture");
    std::vector<Fixture> fixtures;
    fixtures.reserve(specs.size());
    for (const auto& s : specs) fixtures.push_back(build_fixture(s));
    std::vector<ExploreEnv> envs;
    envs.reserve(fixtures.size());
    for (const auto& fx : fixtures) envs.push_back(make_env(fx, reward));
    std::vector<ExploreEnv*> ptrs;
    for (auto& e : envs) ptrs.push_back(&e);
    return train(ptrs, cfg, seed, on_episode);
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Everything shared by the runs on one seed.
struct SeedContext {
    std::uint64_t seed = 0;
    Fixture fx;
    ImportanceField field;
    double scale = 1.0;
    double recon_ms = 0.0;
    std::vector<std::vector<std::uint32_t>> exhaustive_clusters;  // node ids
    std::vector<std::vector<std::uint32_t>> injected_regions;     // node ids
    std::set<std::uint32_t> ground_truth;
    std::string error;
};

ValidationInputs inputs_for(const SeedContext& ctx, const NavMesh& mesh, const QNetwork* policy) {
    ValidationInputs in;
    in.graph = &ctx.fx.recon.graph;
    in.reach = &ctx.fx.recon.reach;
    in.mesh = &mesh;
    in.nav = NavQueryConfig::defaults(ctx.fx.world.spec.resolution, ctx.fx.world.spec.agent.step_height);
    in.field = &ctx.field;
    in.importance_scale = ctx.scale;
    in.policy = policy;
    return in;
}

std::vector<std::vector<std::uint32_t>> cluster_nodes(const DefectReport& rep) {
    std::vector<std::vector<std::uint32_t>> out;
    for (const auto& c : rep.clusters) {
        std::vector<std::uint32_t> nodes;
        for (auto m : c.members) nodes.push_back(rep.filtered[m].node);
        out.push_back(std::move(nodes));
    }
    return out;
}

void prepare(SeedContext& ctx, const BenchConfig& cfg) {
    WorldSpec spec = cfg.fixture;
    spec.seed = ctx.seed;
    ctx.fx = build_fixture(spec);
    const auto t0 = std::chrono::steady_clock::now();
    const auto recon = reconstruct(ctx.fx.world.hf, ctx.fx.world.meshes, ctx.fx.world.region, ctx.fx.world.seed,
                                   reconstruct_options(ctx.fx.world.spec));
    ctx.recon_ms = cfg.timings ? ms_since(t0) : 0.0;
    if (recon.reach.members != ctx.fx.recon.reach.members) throw Error("reconstruction is not deterministic");
    ctx.field = compute_importance(ctx.fx.recon.graph, ctx.fx.world.markers);
    ctx.scale = importance_scale(ctx.fx.world.markers);
    ctx.ground_truth.insert(ctx.fx.injection.ground_truth.begin(), ctx.fx.injection.ground_truth.end());

    ValidationConfig vc;
    vc.epsilon = cfg.epsilon;
    vc.tau = cfg.tau;
    vc.strategy = Strategy::BFS;
    const auto in = inputs_for(ctx, ctx.fx.injection.mesh, nullptr);
    const auto rep = run_validation(in, vc);
    ctx.exhaustive_clusters = cluster_nodes(rep);

    // Injected regions: ground-truth voxels grouped at the neighbour radius,
    // kept when large enough and not entirely inside the tolerance band.
    std::vector<Inconsistency> truth;
    for (const auto& r : rep.raw)
        if (ctx.ground_truth.count(r.node)) truth.push_back(r);
    for (const auto& c : cluster_defects(truth, 1, ctx.fx.recon.graph.radius())) {
        bool beyond = false;
        std::vector<std::uint32_t> nodes;
        for (auto m : c.members) {
            beyond = beyond || truth[m].boundary_distance > cfg.epsilon;
            nodes.push_back(truth[m].node);
        }
        if (c.size() >= cfg.tau && beyond) ctx.injected_regions.push_back(std::move(nodes));
    }
}

double touched_pct(const std::vector<std::vector<std::uint32_t>>& targets, const std::set<std::uint32_t>& flagged) {
    if (targets.empty()) return 100.0;
    std::size_t hit = 0;
    for (const auto& t : targets)
        hit += std::any_of(t.begin(), t.end(), [&](std::uint32_t n) { return flagged.count(n) > 0; });
    return 100.0 * static_cast<double>(hit) / static_cast<double>(targets.size());
}

struct PairOutput {
    std::vector<BenchRow> rows;
    std::vector<double> curve;  // coverage at each curve grid point
};

constexpr int kCurvePoints = 201;  // 0..200 % of |V_r| in 1 % steps

PairOutput run_pair(const SeedContext& ctx, const BenchStrategy& strat, const BenchConfig& cfg) {
    PairOutput out;
    const auto& fx = ctx.fx;
    const std::size_t reach = fx.recon.reach.size();

    // Samples-to-target and the coverage curve come from one long episode.
    ExploreEnv env(fx.recon.graph, ctx.field.restricted(fx.recon.reach.mask), fx.recon.reach.seed, {}, ctx.scale);
    StrategyOptions so;
    so.budget = cfg.step_cap_factor * reach;
    so.seed = ctx.seed;
    so.policy = strat.policy;
    so.rl_epsilon = cfg.rl_epsilon;
    so.heuristic_horizon = cfg.heuristic_horizon;
    so.stop_when_all_visited = true;
    const auto traj = run_strategy(env, strat.kind, so);
    const auto to_target = samples_to_coverage(traj, cfg.coverage_target);
    out.curve.resize(kCurvePoints);
    for (int k = 0; k < kCurvePoints; ++k) {
        const auto n = static_cast<std::size_t>(std::ceil(k / 100.0 * static_cast<double>(reach)));
        out.curve[static_cast<std::size_t>(k)] =
            traj.coverage.empty() ? 0.0 : traj.coverage[std::min(std::max<std::size_t>(n, 1), traj.coverage.size()) - 1];
    }

    for (double pct : cfg.budget_pcts) {
        BenchRow row;
        row.strategy = strat.name;
        row.seed = ctx.seed;
        row.budget_pct = pct;
        try {
            ValidationConfig vc;
            vc.epsilon = cfg.epsilon;
            vc.tau = cfg.tau;
            vc.strategy = strat.kind;
            vc.budget = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(reach) - 1e-9)));
            vc.seed = ctx.seed;
            vc.rl_epsilon = cfg.rl_epsilon;
            vc.heuristic_horizon = cfg.heuristic_horizon;
            const auto t0 = std::chrono::steady_clock::now();
            const auto rep = run_validation(inputs_for(ctx, fx.injection.mesh, strat.policy), vc);
            row.metrics.validate_ms = cfg.timings ? ms_since(t0) : 0.0;
            row.metrics.recon_ms = ctx.recon_ms;

            std::set<std::uint32_t> flagged;
            for (const auto& c : rep.clusters)
                for (auto m : c.members) flagged.insert(rep.filtered[m].node);
            row.metrics.detection_rate = touched_pct(ctx.exhaustive_clusters, flagged);
            row.metrics.detection_rate_injected = touched_pct(ctx.injected_regions, flagged);
            row.metrics.coverage = 100.0 * rep.metrics.coverage;
            row.metrics.samples_pct = std::min(100.0, 100.0 * static_cast<double>(rep.metrics.samples) / static_cast<double>(reach));
            row.metrics.samples_to_target = to_target;
            std::size_t outside = 0;
            for (const auto& d : rep.filtered) outside += ctx.ground_truth.count(d.node) == 0;
            row.metrics.false_positive_rate =
                rep.filtered.empty() ? 0.0 : 100.0 * static_cast<double>(outside) / static_cast<double>(rep.filtered.size());
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

std::string fmt(double v, int precision = 3) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return "inf";
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

}  // namespace

BenchResult run_benchmark(const BenchConfig& cfg) {
    cfg.validate();
    const std::size_t ns = cfg.seeds.size(), nk = cfg.strategies.size();

    std::vector<SeedContext> seeds(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        seeds[i].seed = cfg.seeds[i];
        try {
            prepare(seeds[i], cfg);
        } catch (const std::exception& e) {
            seeds[i].error = e.what();
        }
    }

    std::vector<PairOutput> pairs(ns * nk);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(ns * nk); ++p) {
        const auto k = static_cast<std::size_t>(p) / ns, i = static_cast<std::size_t>(p) % ns;
        auto& out = pairs[static_cast<std::size_t>(p)];
        std::string err = seeds[i].error;
        if (err.empty()) {
            try {
                out = run_pair(seeds[i], cfg.strategies[k], cfg);
            } catch (const std::exception& e) {
                err = e.what();
            }
        }
        if (!err.empty()) {
            out.rows.clear();
            out.curve.clear();
            for (double pct : cfg.budget_pcts) {
                BenchRow row;
                row.strategy = cfg.strategies[k].name;
                row.seed = seeds[i].seed;
                row.budget_pct = pct;
                row.error = err;
                out.rows.push_back(std::move(row));
            }
        }
    }

    BenchResult res;
    res.coverage_target = cfg.coverage_target;
    for (std::size_t k = 0; k < nk; ++k) {
        CoverageCurve curve;
        curve.strategy = cfg.strategies[k].name;
        std::vector<std::vector<double>> at(kCurvePoints);
        for (std::size_t i = 0; i < ns; ++i) {
            const auto& out = pairs[k * ns + i];
            res.rows.insert(res.rows.end(), out.rows.begin(), out.rows.end());
            for (std::size_t g = 0; g < out.curve.size(); ++g) at[g].push_back(out.curve[g]);
        }
        for (int g = 0; g < kCurvePoints; ++g) {
            curve.samples_pct.push_back(g);
            curve.median_coverage.push_back(quartiles(at[static_cast<std::size_t>(g)]).median);
        }
        res.curves.push_back(std::move(curve));

        for (double pct : cfg.budget_pcts) {
            BenchSummary s;
            s.strategy = cfg.strategies[k].name;
            s.budget_pct = pct;
            std::vector<double> det, cov, stt, fp;
            for (const auto& r : res.rows) {
                if (r.strategy != s.strategy || r.budget_pct != pct) continue;
                ++s.runs;
                if (!r.ok()) {
                    ++s.failures;
                    continue;
                }
                det.push_back(r.metrics.detection_rate);
                cov.push_back(r.metrics.coverage);
                stt.push_back(r.metrics.samples_to_target ? static_cast<double>(*r.metrics.samples_to_target)
                                                          : std::numeric_limits<double>::infinity());
                fp.push_back(r.metrics.false_positive_rate);
            }
            s.detection_rate = quartiles(det);
            s.coverage = quartiles(cov);
            s.samples_to_target = quartiles(stt);
            s.false_positive_rate = quartiles(fp);
            res.summaries.push_back(s);
        }
    }
    return res;
}

std::optional<double> median_samples_to_target(const BenchResult& result, const std::string& strategy) {
    for (const auto& s : result.summaries)
        if (s.strategy == strategy && s.runs > s.failures) return s.samples_to_target.median;
    return std::nullopt;
}

void write_bench_csv(std::ostream& out, const BenchResult& result) {
    out << "strategy,seed,budget_pct,detection_rate,coverage,samples_to_85,false_positive_rate,recon_ms,validate_ms\n";
    for (const auto& r : result.rows) {
        out << r.strategy << ',' << r.seed << ',' << fmt(r.budget_pct, 1) << ',';
        if (!r.ok()) {
            out << ",,,,,\n";
            continue;
        }
        const auto& m = r.metrics;
        out << fmt(m.detection_rate) << ',' << fmt(m.coverage) << ','
            << (m.samples_to_target ? std::to_string(*m.samples_to_target) : std::string("NA")) << ','
            << fmt(m.false_positive_rate) << ',' << fmt(m.recon_ms) << ',' << fmt(m.validate_ms) << '\n';
    }
}

void write_bench_table(std::ostream& out, const BenchResult& result) {
    out << std::left << std::setw(18) << "strategy" << std::right << std::setw(8) << "budget" << std::setw(22)
        << "detection % [IQR]" << std::setw(22) << "coverage % [IQR]" << std::setw(26) << "samples to target [IQR]"
        << std::setw(10) << "FP %" << std::setw(8) << "fail" << '\n';
    auto iqr = [](const Quartiles& q, int p) { return fmt(q.median, p) + " [" + fmt(q.q1, p) + "-" + fmt(q.q3, p) + "]"; };
    for (const auto& s : result.summaries) {
        out << std::left << std::setw(18) << s.strategy << std::right << std::setw(7) << fmt(s.budget_pct, 0) << '%'
            << std::setw(22) << iqr(s.detection_rate, 1) << std::setw(22) << iqr(s.coverage, 1) << std::setw(26)
            << iqr(s.samples_to_target, 0) << std::setw(10) << fmt(s.false_positive_rate.median, 1) << std::setw(8)
            << s.failures << '\n';
    }
    for (const auto& r : result.rows)
        if (!r.ok()) out << "run failed: " << r.strategy << " seed " << r.seed << " budget " << r.budget_pct << "%: " << r.error << '\n';
}

json bench_plot_json(const BenchResult& result) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json j;
    j["schema"] = "navvox-bench-plot/1";
    j["coverage_target"] = result.coverage_target;
    j["curves"] = json::array();
    for (const auto& c : result.curves) {
        json ys = json::array();
        for (double v : c.median_coverage) ys.push_back(num(v));
        j["curves"].push_back({{"strategy", c.strategy}, {"samples_pct", c.samples_pct}, {"median_coverage", ys}});
    }
    j["summary"] = json::array();
    for (const auto& s : result.summaries) {
        auto q = [&](const Quartiles& x) { return json{{"q1", num(x.q1)}, {"median", num(x.median)}, {"q3", num(x.q3)}}; };
        j["summary"].push_back({{"strategy", s.strategy},
                                {"budget_pct", s.budget_pct},
                                {"runs", s.runs},
                                {"failures", s.failures},
                                {"detection_rate", q(s.detection_rate)},
                                {"coverage", q(s.coverage)},
                                {"samples_to_target", q(s.samples_to_target)},
                                {"false_positive_rate", q(s.false_positive_rate)}});
    }
    return j;
}

}  // namespace navvox
