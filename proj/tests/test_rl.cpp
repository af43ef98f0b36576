#include <doctest.h>

#include <sstream>

#include "navvox/rl.hpp"
#include "navvox/synth.hpp"
#include "oracles.hpp"

using namespace navvox;

namespace {

StateVec random_state(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    StateVec s;
    for (auto& v : s) v = u(rng);
    return s;
}

std::vector<Transition> random_batch(std::mt19937_64& rng, std::size_t n) {
    std::vector<Transition> b(n);
    for (auto& t : b) {
        t.s = random_state(rng);
        t.s_next = random_state(rng);
        t.a = static_cast<int>(rng() % kActionCount);
        t.r = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        t.terminal = rng() % 5 == 0;
    }
    return b;
}

}  // namespace

TEST_SUITE("rl") {

TEST_CASE("forward pass equals an explicit loop") {
    std::mt19937_64 rng(1);
    const QNetwork net = QNetwork::random({9, 16, 12, 8}, rng);
    for (int k = 0; k < 20; ++k) {
        const StateVec s = random_state(rng);
        const auto q = q_forward(net, s);
        const auto expect = oracle::forward(net, s);
        for (int a = 0; a < 8; ++a) CHECK(q(a) == doctest::Approx(expect[static_cast<std::size_t>(a)]).epsilon(1e-12));
    }
    Eigen::MatrixXd batch(9, 5);
    batch.setRandom();
    const auto qb = q_forward_batch(net, batch);
    for (int c = 0; c < 5; ++c) {
        std::vector<double> col(batch.col(c).data(), batch.col(c).data() + 9);
        CHECK((qb.col(c) - q_forward(net, col)).norm() < 1e-12);
    }
    CHECK_THROWS_AS(q_forward(net, std::vector<double>(4, 0.0)), Error);
}

TEST_CASE("double-Q target uses the online argmax and the target value") {
    std::mt19937_64 rng(2);
    const QNetwork online = QNetwork::random(default_architecture(), rng);
    const QNetwork target = QNetwork::random(default_architecture(), rng);
    for (const auto& t : random_batch(rng, 30)) {
        const auto qo = oracle::forward(online, t.s_next);
        const auto qt = oracle::forward(target, t.s_next);
        const auto best = static_cast<std::size_t>(std::max_element(qo.begin(), qo.end()) - qo.begin());
        const double y = t.terminal ? t.r : t.r + 0.9 * qt[best];
        CHECK(td_target(online, target, t, 0.9) == doctest::Approx(y).epsilon(1e-12));
        const double q = oracle::forward(online, t.s)[static_cast<std::size_t>(t.a)];
        CHECK(td_error(online, target, t, 0.9) == doctest::Approx(std::abs(y - q)).epsilon(1e-12));
    }
}

TEST_CASE("loss gradient matches central differences") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const QNetwork net = QNetwork::random({9, 10, 7, 8}, rng);
        const auto batch = random_batch(rng, 6);
        std::vector<double> y(batch.size()), w(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            y[i] = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
            w[i] = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
        }
        Gradients g;
        std::vector<double> errs;
        const double loss = td_loss_gradient(net, batch, y, w, g, &errs);
        CHECK(loss == doctest::Approx(td_loss(net, batch, y, w)).epsilon(1e-12));
        for (std::size_t i = 0; i < batch.size(); ++i)
            CHECK(errs[i] == doctest::Approx(std::abs(y[i] - oracle::forward(net, batch[i].s)[static_cast<std::size_t>(batch[i].a)])));

        std::vector<double> flat;
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            for (Eigen::Index r = 0; r < g.weights[l].rows(); ++r)
                for (Eigen::Index c = 0; c < g.weights[l].cols(); ++c) flat.push_back(g.weights[l](r, c));
            for (Eigen::Index r = 0; r < g.biases[l].size(); ++r) flat.push_back(g.biases[l](r));
        }
        auto params = net.parameters();
        REQUIRE(flat.size() == params.size());
        QNetwork probe = net;
        for (std::size_t k = 0; k < params.size(); k += 3) {
            const double h = 1e-6, keep = params[k];
            params[k] = keep + h;
            probe.set_parameters(params);
            const double up = td_loss(probe, batch, y, w);
            params[k] = keep - h;
            probe.set_parameters(params);
            const double down = td_loss(probe, batch, y, w);
            params[k] = keep;
            const double fd = (up - down) / (2 * h);
            CHECK(std::abs(fd - flat[k]) <= 1e-4 * std::max(1e-3, std::abs(fd) + std::abs(flat[k])));
        }
    }
}

TEST_CASE("sgd with momentum follows the update rule") {
    QNetwork net({2, 1});
    Gradients g;
    g.weights = {Eigen::MatrixXd::Constant(1, 2, 1.0)};
    g.biases = {Eigen::VectorXd::Constant(1, 2.0)};
    Sgd opt(0.1, 0.5);
    opt.apply(net, g);
    CHECK(net.weight(0)(0, 0) == doctest::Approx(-0.1));
    opt.apply(net, g);
    // v = 0.5 * 1 + 1 = 1.5
    CHECK(net.weight(0)(0, 0) == doctest::Approx(-0.1 - 0.15));
    CHECK(net.bias(0)(0) == doctest::Approx(-0.2 - 0.3));
}

TEST_CASE("sum tree totals and lookups") {
    SumTree t(5);
    const std::vector<double> v{1.0, 0.0, 2.5, 0.5, 1.0};
    for (std::size_t i = 0; i < v.size(); ++i) t.set(i, v[i]);
    CHECK(t.total() == doctest::Approx(5.0));
    CHECK(t.find(0.5) == 0);
    CHECK(t.find(1.0) == 2);
    CHECK(t.find(3.6) == 3);
    CHECK(t.find(4.99) == 4);
    t.set(2, 0.0);
    CHECK(t.total() == doctest::Approx(2.5));
    CHECK(t.find(1.2) == 3);
}

TEST_CASE("replay buffer probabilities, eviction and importance weights") {
    ReplayBuffer buf(3, 0.5);
    std::mt19937_64 rng(5);
    CHECK_THROWS_AS(buf.sample(1, 0.4, rng), Error);
    for (int k = 0; k < 4; ++k) {
        Transition t;
        t.r = k;
        buf.add(t);
    }
    CHECK(buf.size() == 3);
    CHECK(buf.at(0).r == 3.0);  // the oldest slot was overwritten
    const std::vector<std::size_t> idx{0, 1, 2};
    const std::vector<double> td{3.0, 0.0, 1.0};
    buf.update_priorities(idx, td);
    CHECK(buf.priority(1) == doctest::Approx(1e-3));
    const double z = std::sqrt(3.001) + std::sqrt(0.001) + std::sqrt(1.001);
    CHECK(buf.probability(0) == doctest::Approx(std::sqrt(3.001) / z));
    CHECK_THROWS_AS(buf.sample(4, 0.4, rng), Error);
    for (int rep = 0; rep < 20; ++rep) {
        const auto s = buf.sample(3, 0.4, rng);
        double wmax = 0.0;
        for (std::size_t k = 0; k < s.indices.size(); ++k)
            wmax = std::max(wmax, std::pow(3.0 * buf.probability(s.indices[k]), -0.4));
        for (std::size_t k = 0; k < s.indices.size(); ++k)
            CHECK(s.weights[k] == doctest::Approx(std::pow(3.0 * buf.probability(s.indices[k]), -0.4) / wmax));
    }
}

TEST_CASE("uniform replay passes a chi-square test") {
    ReplayBuffer buf(8, 0.0);
    for (int k = 0; k < 8; ++k) buf.add(Transition{});
    std::vector<double> td{0.1, 5.0, 2.0, 0.0, 9.0, 1.0, 3.0, 0.5};
    std::vector<std::size_t> idx(8);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    buf.update_priorities(idx, td);
    std::mt19937_64 rng(7);
    std::vector<double> counts(8, 0.0);
    const std::size_t n = 40000;
    for (std::size_t k = 0; k < n / 8; ++k)
        for (auto i : buf.sample(8, 0.4, rng).indices) counts[i] += 1.0;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - n / 8.0) * (c - n / 8.0) / (n / 8.0);
    CHECK(chi2 < oracle::chi2_critical_001(7));
}

TEST_CASE("prioritized replay draws in proportion to priority") {
    ReplayBuffer buf(2, 1.0);
    buf.add(Transition{});
    buf.add(Transition{});
    const std::vector<std::size_t> idx{0, 1};
    buf.update_priorities(idx, std::vector<double>{1.0 - 1e-3, 3.0 - 1e-3});
    CHECK(buf.probability(1) == doctest::Approx(0.75));
    std::mt19937_64 rng(9);
    double ones = 0.0;
    const std::size_t n = 20000;
    for (std::size_t k = 0; k < n / 2; ++k)
        for (auto i : buf.sample(2, 0.4, rng).indices) ones += i == 1 ? 1.0 : 0.0;
    CHECK(std::abs(ones / n - 0.75) <= 0.02);
}

TEST_CASE("epsilon schedule is linear then flat") {
    TrainConfig cfg;
    cfg.episodes = 100;
    CHECK(cfg.epsilon_at(0) == doctest::Approx(1.0));
    CHECK(cfg.epsilon_at(30) == doctest::Approx(1.0 - 0.95 * 0.5));
    CHECK(cfg.epsilon_at(60) == doctest::Approx(0.05));
    CHECK(cfg.epsilon_at(99) == doctest::Approx(0.05));
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("policy file round-trips bit-exactly") {
    std::mt19937_64 rng(8);
    const QNetwork net = QNetwork::random(default_architecture(), rng);
    const std::string text = format_policy(net);
    const QNetwork back = parse_policy(text);
    CHECK(back == net);
    CHECK(format_policy(back) == text);
    CHECK_THROWS_AS(parse_policy("{\"format\": \"other\"}"), Error);
    CHECK_THROWS_AS(parse_policy("not json"), Error);
}

TEST_CASE("training is reproducible for a fixed seed") {
    WorldSpec s;
    s.extent_x = 6.0;
    s.extent_y = 6.0;
    s.markers.clusters = 1;
    s.markers.centers = {{4.5, 4.5}};
    s.markers.radius = 1.0;
    const Fixture fx = build_fixture(s);
    const auto field = compute_importance(fx.recon.graph, fx.world.markers).restricted(fx.recon.reach.mask);
    ExploreEnv env(fx.recon.graph, field, fx.recon.reach.seed, {}, importance_scale(fx.world.markers));
    std::vector<ExploreEnv*> envs{&env};
    TrainConfig cfg;
    cfg.episodes = 4;
    cfg.steps_per_episode = 60;
    cfg.batch_size = 16;
    cfg.target_sync_interval = 50;
    std::size_t callbacks = 0;
    const auto a = train(envs, cfg, 3, [&](const TrainLogRow&) { ++callbacks; });
    const auto b = train(envs, cfg, 3);
    CHECK(a.net == b.net);
    CHECK(a.log.size() == 4);
    CHECK(callbacks == 4);
    CHECK(a.steps == b.steps);
    std::ostringstream csv;
    write_train_log_csv(csv, a.log);
    CHECK(csv.str().rfind("episode,", 0) == 0);
    const auto c = train(envs, cfg, 4);
    CHECK_FALSE(c.net == a.net);
}

}  // TEST_SUITE
