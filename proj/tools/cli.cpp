#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "navvox/bench.hpp"
#include "navvox/pipeline.hpp"

namespace navvox {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kDefaultTrainSeed = 7;
constexpr std::uint64_t kTrainFixtureSeedBase = 1000;

// Bad flag combinations found after CLI11 has parsed; reported like parse errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::uint64_t seed = 1;
    std::string config;
    std::string out;
    CLI::Option* seed_opt = nullptr;
    json config_contents;

    bool seed_given() const { return seed_opt->count() > 0; }
};

struct SceneArgs {
    std::string world;
    std::string heightfield;
    std::vector<std::string> meshes;
    std::vector<double> seed_pos, region_min, region_max;
    double resolution = kUnset;
    double max_slope_deg = kUnset;
    double step_height = kUnset;
    double agent_radius = kUnset;
    double agent_height = kUnset;
    std::string navmesh;
    std::string markers;
    std::vector<std::string> weights;
};

struct Scene {
    HeightField hf;
    std::vector<CollisionMesh> meshes;
    Region region;
    Vec3 seed;
    ReconstructOptions opts;
    std::string navmesh;  // empty when unknown
    std::string markers;
};

void add_scene_options(CLI::App* sub, SceneArgs& a, bool navigation) {
    sub->add_option("--world", a.world, "Fixture directory written by `navvox gen` (reads world.json)");
    sub->add_option("--heightfield", a.heightfield, "Terrain heightfield (NAVVOX-HF v1)");
    sub->add_option("--mesh", a.meshes, "Collision mesh (OBJ); repeatable");
    sub->add_option("--seed-pos", a.seed_pos, "Seed position x y z")->expected(3);
    sub->add_option("--region-min", a.region_min, "Region corner x y z (default: heightfield bounds)")->expected(3);
    sub->add_option("--region-max", a.region_max, "Region corner x y z (default: heightfield bounds)")->expected(3);
    sub->add_option("--resolution", a.resolution, "Voxel size in metres (default 0.5)");
    sub->add_option("--max-slope", a.max_slope_deg, "Agent max slope in degrees (default 45)");
    sub->add_option("--step-height", a.step_height, "Agent step height in metres (default 0.4)");
    sub->add_option("--agent-radius", a.agent_radius, "Agent radius in metres (default 0.5)");
    sub->add_option("--agent-height", a.agent_height, "Agent height in metres (default 2.0)");
    if (navigation) {
        sub->add_option("--navmesh", a.navmesh, "Navmesh to validate (NAVVOX-NM v1)");
        sub->add_option("--markers", a.markers, "Gameplay markers (JSON array)");
        sub->add_option("--weight", a.weights, "Importance weight override kind=value; repeatable");
    }
}

json read_json_file(const fs::path& p, const std::string& what) {
    std::ifstream in(p);
    if (!in) throw Error("cannot open " + what + " '" + p.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(what + " '" + p.string() + "' is not valid JSON: " + e.what());
    }
}

Vec3 vec3(const std::vector<double>& v) { return {v.at(0), v.at(1), v.at(2)}; }
Vec3 vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

Scene load_scene(const SceneArgs& a) {
    Scene sc;
    if (!a.world.empty()) {
        const fs::path dir(a.world);
        const json w = read_json_file(dir / "world.json", "world file");
        try {
            if (w.at("format") != "navvox-world/1") throw Error("unsupported world format");
            const WorldSpec spec = parse_world_spec(w.at("spec"));
            sc.opts = reconstruct_options(spec);
            const json& files = w.at("files");
            sc.hf = load_heightfield(dir / files.at("heightfield").get<std::string>());
            for (const auto& m : files.at("meshes")) sc.meshes.push_back(load_mesh(dir / m.get<std::string>()));
            sc.seed = vec3(w.at("seed"));
            sc.region = Region::from_corners(vec3(w.at("region").at("min")), vec3(w.at("region").at("max")));
            sc.navmesh = (dir / files.at("navmesh").get<std::string>()).string();
            sc.markers = (dir / files.at("markers").get<std::string>()).string();
        } catch (const json::exception& e) {
            throw Error("world file '" + (dir / "world.json").string() + "': " + e.what());
        }
    } else {
        if (a.heightfield.empty()) throw UsageError("pass --world or --heightfield");
        if (a.seed_pos.empty()) throw UsageError("--seed-pos is required without --world");
        sc.hf = load_heightfield(a.heightfield);
        sc.seed = vec3(a.seed_pos);
    }
    if (!a.heightfield.empty() && !a.world.empty()) sc.hf = load_heightfield(a.heightfield);
    if (!a.meshes.empty()) {
        sc.meshes.clear();
        for (const auto& m : a.meshes) sc.meshes.push_back(load_mesh(m));
    }
    if (!a.seed_pos.empty()) sc.seed = vec3(a.seed_pos);
    if (!std::isnan(a.resolution)) sc.opts.resolution = a.resolution;
    if (!std::isnan(a.max_slope_deg)) sc.opts.agent.max_slope = a.max_slope_deg * std::numbers::pi / 180.0;
    if (!std::isnan(a.step_height)) sc.opts.agent.step_height = a.step_height;
    if (!std::isnan(a.agent_radius)) sc.opts.agent.radius = a.agent_radius;
    if (!std::isnan(a.agent_height)) sc.opts.agent.height = a.agent_height;
    if (a.world.empty() || !a.region_min.empty() || !a.region_max.empty()) {
        double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
        for (int j = 0; j < sc.hf.depth; ++j)
            for (int i = 0; i < sc.hf.width; ++i) {
                zmin = std::min(zmin, sc.hf.at(i, j));
                zmax = std::max(zmax, sc.hf.at(i, j));
            }
        const double top = zmax + sc.opts.agent.height + 2.0 * sc.opts.resolution + 2.0;
        const Vec3 lo = a.region_min.empty() ? Vec3{sc.hf.origin.x, sc.hf.origin.y, zmin - 1.0} : vec3(a.region_min);
        const Vec3 hi = a.region_max.empty() ? Vec3{sc.hf.max_x(), sc.hf.max_y(), top} : vec3(a.region_max);
        sc.region = Region::from_corners(lo, hi);
    }
    if (!a.navmesh.empty()) sc.navmesh = a.navmesh;
    if (!a.markers.empty()) sc.markers = a.markers;
    return sc;
}

Reconstruction reconstruct_scene(const Scene& sc, bool serial = false) {
    ReconstructOptions o = sc.opts;
    o.serial = serial;
    return reconstruct(sc.hf, sc.meshes, sc.region, sc.seed, o);
}

std::vector<GameplayMarker> scene_markers(const Scene& sc, const std::vector<std::string>& weights) {
    KindWeights w;
    for (const auto& s : weights) w.set_override(s);
    if (sc.markers.empty()) return {};
    return load_markers(sc.markers, w);
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << text;
}

// Puts config-file values into options the command line left unset.
void apply_config(CLI::App& app, CLI::App* sub, Globals& g) {
    if (g.config.empty()) return;
    g.config_contents = read_json_file(g.config, "config file");
    if (!g.config_contents.is_object()) throw UsageError("config file must hold a JSON object");
    auto apply = [](CLI::App* target, const std::string& key, const json& value) {
        CLI::Option* opt = target->get_option_no_throw("--" + key);
        if (!opt) throw UsageError("config key '" + key + "' is not an option of `" + target->get_name() + "`");
        if (opt->count() > 0) return;  // the command line wins
        auto as_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_array()) {
            for (const auto& v : value) opt->add_result(as_text(v));
        } else {
            opt->add_result(as_text(value));
        }
        opt->run_callback();
    };
    for (const auto& [key, value] : g.config_contents.items()) {
        if (key == "config") throw UsageError("config file cannot name another config file");
        CLI::App* section = nullptr;
        for (auto* s : app.get_subcommands({})) {
            if (s->get_name() == key) section = s;
        }
        if (section) {
            if (!value.is_object()) throw UsageError("config section '" + key + "' must be an object");
            if (section != sub) continue;  // settings for other subcommands
            for (const auto& [k, v] : value.items()) apply(sub, k, v);
        } else {
            apply(&app, key, value);
        }
    }
}

json option_values(const CLI::App* app) {
    json j = json::object();
    for (const auto* opt : app->get_options()) {
        if (opt->get_name() == "--help" || opt->count() == 0) continue;
        const auto& r = opt->results();
        std::string name = opt->get_name();
        while (!name.empty() && name.front() == '-') name.erase(name.begin());
        j[name] = r.size() == 1 ? json(r.front()) : json(r);
    }
    return j;
}

json config_echo(const CLI::App& app, const CLI::App* sub, const Globals& g) {
    json j{{"command", sub->get_name()},
            {"seed", g.seed},
            {"options", option_values(sub)},
            {"globals", option_values(&app)}};
    j["config_file"] = g.config.empty() ? json(nullptr) : json(g.config);
    j["config"] = g.config.empty() ? json(nullptr) : g.config_contents;
    return j;
}

// ---- gen ------------------------------------------------------------------

struct GenArgs {
    std::string spec;
};

int run_gen(const GenArgs& a, const Globals& g, std::ostream& out) {
    if (a.spec.empty()) throw UsageError("gen needs --spec");
    if (g.out.empty()) throw UsageError("gen needs --out <dir>");
    WorldSpec spec = load_world_spec(a.spec);
    if (g.seed_given()) spec.seed = g.seed;
    const Fixture fx = build_fixture(spec);
    write_fixture(fx, g.out);
    out << json{{"out", g.out},
                {"walkable", fx.recon.graph.size()},
                {"reachable", fx.recon.reach.size()},
                {"ground_truth", fx.injection.ground_truth.size()},
                {"navmesh_polygons", fx.injection.mesh.polygon_count()}}
               .dump()
        << '\n';
    return kExitOk;
}

// ---- voxelize -------------------------------------------------------------

struct VoxelizeArgs {
    SceneArgs scene;
    std::string dump_voxels;
    std::string emit_navmesh;
    bool serial = false;
};

int run_voxelize(const VoxelizeArgs& a, const Globals& g, const json& echo, std::ostream& out) {
    const Scene sc = load_scene(a.scene);
    const auto r = reconstruct_scene(sc, a.serial);
    if (!a.dump_voxels.empty()) dump_voxels(a.dump_voxels, r.graph, &r.reach);
    if (!a.emit_navmesh.empty()) save_navmesh(emit_reference_navmesh(r.graph), a.emit_navmesh);
    const auto& sv = r.graph.voxel(r.reach.seed);
    const auto& f = r.graph.frame();
    json j{{"schema", "navvox-voxelize/1"},
           {"config", echo},
           {"frame", {{"origin", {f.origin.x, f.origin.y, f.origin.z}}, {"resolution", f.resolution}}},
           {"agent",
            {{"max_slope_deg", sc.opts.agent.max_slope * 180.0 / std::numbers::pi},
             {"step_height", sc.opts.agent.step_height},
             {"radius", sc.opts.agent.radius},
             {"height", sc.opts.agent.height}}},
           {"walkable_voxels", r.graph.size()},
           {"edges", r.graph.edge_count()},
           {"reachable_voxels", r.reach.size()},
           {"seed_voxel", {sv.index.x, sv.index.y, sv.index.z}}};
    if (g.out.empty()) {
        out << j.dump(2) << '\n';
    } else {
        write_text(g.out, j.dump(2) + "\n");
        out << "walkable " << r.graph.size() << ", reachable " << r.reach.size() << " -> " << g.out << '\n';
    }
    return kExitOk;
}

// ---- validate -------------------------------------------------------------

struct ValidateArgs {
    SceneArgs scene;
    std::string strategy = "bfs";
    std::size_t budget = 0;
    std::size_t episodes = 1;
    std::string policy;
    double epsilon = kUnset;
    std::size_t tau = 3;
    double rl_epsilon = 0.05;
    std::size_t horizon = 30;
    bool no_island_sweep = false;
    std::string trajectory;
    std::string dump_voxels;
};

int run_validate(const ValidateArgs& a, const Globals& g, const json& echo, std::ostream& out) {
    const Scene sc = load_scene(a.scene);
    if (sc.navmesh.empty()) throw UsageError("validate needs --navmesh (or --world)");
    ValidationConfig cfg;
    cfg.strategy = parse_strategy(a.strategy);
    cfg.budget = a.budget;
    cfg.episodes = a.episodes;
    cfg.epsilon = std::isnan(a.epsilon) ? sc.opts.resolution : a.epsilon;
    cfg.tau = a.tau;
    cfg.seed = g.seed;
    cfg.rl_epsilon = a.rl_epsilon;
    cfg.heuristic_horizon = a.horizon;
    cfg.island_sweep = !a.no_island_sweep;
    cfg.validate();
    if (cfg.strategy == Strategy::RL && a.policy.empty()) throw UsageError("--strategy rl needs --policy");

    const auto mesh = load_navmesh(sc.navmesh);
    const auto markers = scene_markers(sc, a.scene.weights);
    std::optional<QNetwork> policy;
    if (!a.policy.empty()) policy = load_policy(a.policy);
    const auto recon = reconstruct_scene(sc);
    if (!a.dump_voxels.empty()) dump_voxels(a.dump_voxels, recon.graph, &recon.reach);

    const auto field = compute_importance(recon.graph, markers);
    ValidationInputs in;
    in.graph = &recon.graph;
    in.reach = &recon.reach;
    in.mesh = &mesh;
    in.nav = NavQueryConfig::defaults(sc.opts.resolution, sc.opts.agent.step_height);
    in.field = &field;
    in.importance_scale = importance_scale(markers);
    in.policy = policy ? &*policy : nullptr;
    const auto rep = run_validation(in, cfg);

    if (!a.trajectory.empty()) {
        std::ostringstream t;
        for (const auto& tr : rep.trajectories) write_trajectory_jsonl(t, recon.graph, tr);
        write_text(a.trajectory, t.str());
    }
    const std::string text = report_json(rep, in, cfg, echo).dump(2) + "\n";
    if (g.out.empty()) {
        out << text;
    } else {
        write_text(g.out, text);
        out << rep.clusters.size() << " defect cluster(s), " << rep.filtered.size() << " filtered of " << rep.raw.size()
            << " raw inconsistencies, " << rep.metrics.samples << " samples -> " << g.out << '\n';
    }
    return rep.clusters.empty() ? kExitOk : kExitDefects;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::vector<std::string> worlds;
    std::vector<std::string> specs;
    std::size_t fixtures = 4;
    TrainConfig cfg;
    std::string log;
    std::vector<std::string> weights;
};

void add_train_options(CLI::App* sub, TrainConfig& c, const std::string& prefix) {
    sub->add_option("--" + prefix + "episodes", c.episodes, "Training episodes")->capture_default_str();
    sub->add_option("--" + prefix + "steps", c.steps_per_episode, "Steps per episode")->capture_default_str();
    sub->add_option("--" + prefix + "lr", c.lr, "Learning rate")->capture_default_str();
    sub->add_option("--" + prefix + "momentum", c.momentum, "SGD momentum")->capture_default_str();
    sub->add_option("--" + prefix + "gamma", c.gamma, "Discount factor")->capture_default_str();
    sub->add_option("--" + prefix + "batch", c.batch_size, "Minibatch size")->capture_default_str();
    sub->add_option("--" + prefix + "buffer", c.buffer_capacity, "Replay capacity")->capture_default_str();
    sub->add_option("--" + prefix + "sync", c.target_sync_interval, "Target network sync interval (steps)")
        ->capture_default_str();
}

int run_train(const TrainArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    const std::uint64_t seed = g.seed_given() ? g.seed : kDefaultTrainSeed;
    const fs::path policy_path = g.out.empty() ? fs::path("policy.json") : fs::path(g.out);
    auto progress = [&](const TrainLogRow& r) {
        if ((r.episode + 1) % 10 == 0 || r.episode == 0)
            err << "episode " << r.episode + 1 << ": reward " << r.total_reward << ", coverage " << r.coverage
                << ", mean |td| " << r.mean_td_error << '\n';
    };
    TrainResult res;
    if (!a.worlds.empty()) {
        if (!a.specs.empty()) throw UsageError("use either --world or --spec for training, not both");
        std::vector<Reconstruction> recons;
        std::vector<std::vector<GameplayMarker>> markers;
        recons.reserve(a.worlds.size());
        markers.reserve(a.worlds.size());
        std::vector<ExploreEnv> envs;
        envs.reserve(a.worlds.size());
        for (const auto& w : a.worlds) {
            SceneArgs sa;
            sa.world = w;
            const Scene sc = load_scene(sa);
            recons.push_back(reconstruct_scene(sc));
            markers.push_back(scene_markers(sc, a.weights));
            const auto& r = recons.back();
            envs.emplace_back(r.graph, compute_importance(r.graph, markers.back()).restricted(r.reach.mask), r.reach.seed,
                              RewardParams{}, importance_scale(markers.back()));
        }
        std::vector<ExploreEnv*> ptrs;
        for (auto& e : envs) ptrs.push_back(&e);
        res = train(ptrs, a.cfg, seed, progress);
    } else {
        std::vector<WorldSpec> specs;
        for (const auto& s : a.specs) specs.push_back(load_world_spec(s));
        if (specs.empty())
            for (std::size_t k = 0; k < a.fixtures; ++k) specs.push_back(clustered_world_spec(kTrainFixtureSeedBase + k));
        res = train_on_fixtures(specs, a.cfg, seed, {}, progress);
    }
    save_policy(res.net, policy_path);
    if (!a.log.empty()) {
        std::ostringstream csv;
        write_train_log_csv(csv, res.log);
        write_text(a.log, csv.str());
    }
    out << "trained " << res.log.size() << " episodes (" << res.steps << " steps) -> " << policy_path.string() << '\n';
    return kExitOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
    std::string spec;
    std::size_t seeds = 20;
    std::vector<double> budgets{25.0, 50.0, 75.0, 100.0};
    std::vector<std::string> strategies{"random", "bfs", "dfs", "heuristic", "rl-prio", "rl-uniform"};
    std::string policy;
    std::string policy_uniform;
    TrainConfig train;
    std::size_t train_fixtures = 4;
    std::uint64_t train_seed = kDefaultTrainSeed;
    double coverage_target = 0.85;
    double epsilon = kUnset;
    std::size_t tau = 3;
    bool no_timings = false;
};

int run_bench(const BenchArgs& a, const Globals& g, const json& echo, std::ostream& out, std::ostream& err) {
    BenchConfig cfg;
    cfg.fixture = a.spec.empty() ? bench_world_spec(0) : load_world_spec(a.spec);
    const std::uint64_t first = g.seed_given() ? g.seed : 1;
    for (std::size_t k = 0; k < a.seeds; ++k) cfg.seeds.push_back(first + k);
    cfg.budget_pcts = a.budgets;
    cfg.coverage_target = a.coverage_target;
    cfg.epsilon = std::isnan(a.epsilon) ? cfg.fixture.resolution : a.epsilon;
    cfg.tau = a.tau;
    cfg.timings = !a.no_timings;
    const fs::path dir = g.out.empty() ? fs::path("bench_out") : fs::path(g.out);

    std::vector<WorldSpec> training;
    for (std::size_t k = 0; k < a.train_fixtures; ++k) {
        WorldSpec s = cfg.fixture;
        s.seed = kTrainFixtureSeedBase + k;
        training.push_back(s);
    }
    std::optional<QNetwork> prio, uniform;
    auto obtain = [&](std::optional<QNetwork>& slot, const std::string& path, bool prioritized) -> const QNetwork* {
        if (slot) return &*slot;
        if (!path.empty()) {
            slot = load_policy(path);
        } else {
            TrainConfig tc = a.train;
            if (!prioritized) {
                tc.alpha = 0.0;
                tc.beta_start = tc.beta_end = 1.0;
            }
            err << "training " << (prioritized ? "prioritized" : "uniform") << " policy (" << tc.episodes << " x "
                << tc.steps_per_episode << ")\n";
            slot = train_on_fixtures(training, tc, a.train_seed).net;
            save_policy(*slot, dir / (prioritized ? "policy_prio.json" : "policy_uniform.json"));
        }
        return &*slot;
    };
    for (const auto& name : a.strategies) {
        BenchStrategy s;
        s.name = name;
        if (name == "rl-prio") {
            s.kind = Strategy::RL;
            s.policy = obtain(prio, a.policy, true);
        } else if (name == "rl-uniform") {
            s.kind = Strategy::RL;
            s.policy = obtain(uniform, a.policy_uniform, false);
        } else if (name == "rl") {
            throw UsageError("name RL contenders rl-prio or rl-uniform");
        } else {
            s.kind = parse_strategy(name);
        }
        cfg.strategies.push_back(s);
    }
    const auto res = run_benchmark(cfg);

    std::ostringstream csv, table;
    write_bench_csv(csv, res);
    write_bench_table(table, res);
    json plot = bench_plot_json(res);
    plot["config"] = echo;
    write_text(dir / "bench.csv", csv.str());
    write_text(dir / "bench_table.txt", table.str());
    write_text(dir / "bench_plot.json", plot.dump(2) + "\n");
    out << table.str();
    return kExitOk;
}

json diagnostic(const std::string& kind, const std::exception& e) {
    json j{{"error", {{"kind", kind}, {"message", e.what()}}}};
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) j["error"]["line"] = pe->line();
    return j;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Voxel-based navmesh validation", "navvox"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    g.seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--config", g.config, "JSON config: top-level keys set global options, a section per subcommand sets its options");
    app.add_option("--out", g.out, "Output path (file or directory, per subcommand)");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic fixture from a world spec");
    gen_cmd->add_option("--spec", gen.spec, "World spec JSON");

    VoxelizeArgs vox;
    auto* vox_cmd = app.add_subcommand("voxelize", "Reconstruct walkable space and report its size");
    add_scene_options(vox_cmd, vox.scene, false);
    vox_cmd->add_option("--dump-voxels", vox.dump_voxels, "Write walkable voxels and edges as `x y z kind` lines");
    vox_cmd->add_option("--emit-navmesh", vox.emit_navmesh, "Write the navmesh emitted from the walk graph");
    vox_cmd->add_flag("--serial", vox.serial, "Use the single-threaded kernels");

    ValidateArgs val;
    auto* val_cmd = app.add_subcommand("validate", "Compare voxel reachability with a navmesh and report defects");
    add_scene_options(val_cmd, val.scene, true);
    val_cmd->add_option("--strategy", val.strategy, "random | random-teleport | bfs | dfs | heuristic | rl")->capture_default_str();
    val_cmd->add_option("--budget", val.budget, "Samples per episode; 0 = exhaustive")->capture_default_str();
    val_cmd->add_option("--episodes", val.episodes, "Exploration episodes")->capture_default_str();
    val_cmd->add_option("--policy", val.policy, "Trained policy for --strategy rl");
    val_cmd->add_option("--epsilon", val.epsilon, "Tolerance band in metres (default: the voxel size)");
    val_cmd->add_option("--tau", val.tau, "Minimum cluster size")->capture_default_str();
    val_cmd->add_option("--rl-epsilon", val.rl_epsilon, "Random-action rate during policy rollouts")->capture_default_str();
    val_cmd->add_option("--horizon", val.horizon, "Heuristic horizon in graph hops")->capture_default_str();
    val_cmd->add_flag("--no-island-sweep", val.no_island_sweep, "Skip checking walkable voxels outside the reachable set");
    val_cmd->add_option("--trajectory", val.trajectory, "Write exploration trajectories as JSON lines");
    val_cmd->add_option("--dump-voxels", val.dump_voxels, "Write walkable voxels and edges as `x y z kind` lines");

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "Train an exploration policy");
    tr_cmd->add_option("--world", tr.worlds, "Fixture directory; repeatable");
    tr_cmd->add_option("--spec", tr.specs, "World spec JSON; repeatable");
    tr_cmd->add_option("--fixtures", tr.fixtures, "Built-in clustered fixtures when no --world/--spec is given")
        ->capture_default_str();
    add_train_options(tr_cmd, tr.cfg, "");
    tr_cmd->add_option("--alpha", tr.cfg.alpha, "Replay prioritization exponent (0 = uniform)")->capture_default_str();
    tr_cmd->add_option("--log", tr.log, "Training log CSV");
    tr_cmd->add_option("--weight", tr.weights, "Importance weight override kind=value; repeatable");

    BenchArgs be;
    auto* be_cmd = app.add_subcommand("bench", "Compare exploration strategies on synthetic fixtures");
    be_cmd->add_option("--spec", be.spec, "Fixture world spec (default: built-in clustered fixture with three random defects)");
    be_cmd->add_option("--seeds", be.seeds, "Number of fixture seeds, counting up from --seed")->capture_default_str();
    be_cmd->add_option("--budgets", be.budgets, "Budgets in % of the reachable voxel count")->delimiter(',')->capture_default_str();
    be_cmd->add_option("--strategies", be.strategies, "random, random-teleport, bfs, dfs, heuristic, rl-prio, rl-uniform")
        ->delimiter(',')
        ->capture_default_str();
    be_cmd->add_option("--policy", be.policy, "Prioritized-replay policy (trained when absent)");
    be_cmd->add_option("--policy-uniform", be.policy_uniform, "Uniform-replay policy (trained when absent)");
    add_train_options(be_cmd, be.train, "train-");
    be_cmd->add_option("--train-fixtures", be.train_fixtures, "Training fixtures")->capture_default_str();
    be_cmd->add_option("--train-seed", be.train_seed, "Training seed")->capture_default_str();
    be_cmd->add_option("--coverage-target", be.coverage_target, "Importance coverage target")->capture_default_str();
    be_cmd->add_option("--epsilon", be.epsilon, "Tolerance band in metres (default: the voxel size)");
    be_cmd->add_option("--tau", be.tau, "Minimum cluster size")->capture_default_str();
    be_cmd->add_flag("--no-timings", be.no_timings, "Write 0 for timings so the CSV is reproducible");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    CLI::App* sub = app.get_subcommands().front();

    try {
        apply_config(app, sub, g);
        const json echo = config_echo(app, sub, g);
        if (sub == gen_cmd) return run_gen(gen, g, out);
        if (sub == vox_cmd) return run_voxelize(vox, g, echo, out);
        if (sub == val_cmd) return run_validate(val, g, echo, out);
        if (sub == tr_cmd) return run_train(tr, g, out, err);
        return run_bench(be, g, echo, out, err);
    } catch (const UsageError& e) {
        err << diagnostic("usage_error", e).dump() << '\n';
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        err << diagnostic("usage_error", e).dump() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        err << diagnostic("parse_error", e).dump() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << diagnostic("runtime_error", e).dump() << '\n';
        return kExitRuntime;
    }
}

}  // namespace navvox
