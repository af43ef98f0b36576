#include "navvox/rl.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "text_io.hpp"

namespace navvox {

namespace {

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw Error("network needs at least an input and an output layer");
    for (int n : sizes) {
        if (n <= 0) throw Error("layer sizes must be positive");
    }
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& m) { return m.cwiseMax(0.0); }

}  // namespace

QNetwork::QNetwork(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    check_sizes(sizes_);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        weights_.push_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
        biases_.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
}

QNetwork QNetwork::random(std::vector<int> sizes, std::mt19937_64& rng) {
    QNetwork net(std::move(sizes));
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const double bound = std::sqrt(6.0 / net.sizes_[l]);
        std::uniform_real_distribution<double> dist(-bound, bound);
        auto& w = net.weights_[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
        }
    }
    return net;
}

std::size_t QNetwork::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layer_count(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    return n;
}

std::vector<double> QNetwork::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (std::size_t l = 0; l < layer_count(); ++l) {
        const auto& w = weights_[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
        }
        for (Eigen::Index r = 0; r < biases_[l].size(); ++r) out.push_back(biases_[l](r));
    }
    return out;
}

void QNetwork::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw Error("parameter count does not match the architecture");
    std::size_t k = 0;
    for (std::size_t l = 0; l < layer_count(); ++l) {
        auto& w = weights_[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
        }
        for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l](r) = flat[k++];
    }
}

bool QNetwork::operator==(const QNetwork& o) const { return sizes_ == o.sizes_ && parameters() == o.parameters(); }

Eigen::MatrixXd q_forward_batch(const QNetwork& net, const Eigen::MatrixXd& states) {
    if (net.layer_count() == 0) throw Error("network has no layers");
    if (states.rows() != net.input_dim()) {
        throw Error("state dimension " + std::to_string(states.rows()) + " does not match network input " +
                    std::to_string(net.input_dim()));
    }
    Eigen::MatrixXd h = states;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Eigen::MatrixXd z = net.weight(l) * h;
        z.colwise() += net.bias(l);
        h = l + 1 < net.layer_count() ? relu(z) : z;
    }
    return h;
}

Eigen::VectorXd q_forward(const QNetwork& net, std::span<const double> s) {
    const Eigen::Map<const Eigen::VectorXd> x(s.data(), static_cast<Eigen::Index>(s.size()));
    return q_forward_batch(net, x);
}

namespace {

int argmax(const Eigen::Ref<const Eigen::VectorXd>& q) {
    int best = 0;
    for (int a = 1; a < q.size(); ++a) {
        if (q(a) > q(best)) best = a;
    }
    return best;
}

Eigen::MatrixXd stack_states(std::span<const Transition> batch, bool next) {
    Eigen::MatrixXd m(kStateDim, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& s = next ? batch[i].s_next : batch[i].s;
        for (int k = 0; k < kStateDim; ++k) m(k, static_cast<Eigen::Index>(i)) = s[static_cast<std::size_t>(k)];
    }
    return m;
}

}  // namespace

int greedy_action(const QNetwork& net, const StateVec& s) { return argmax(q_forward(net, s)); }

double td_target(const QNetwork& online, const QNetwork& target, const Transition& t, double gamma) {
    if (t.terminal) return t.r;
    const int a_star = argmax(q_forward(online, t.s_next));
    return t.r + gamma * q_forward(target, t.s_next)(a_star);
}

double td_error(const QNetwork& online, const QNetwork& target, const Transition& t, double gamma) {
    return std::abs(td_target(online, target, t, gamma) - q_forward(online, t.s)(t.a));
}

namespace {

void check_batch(std::span<const Transition> batch, std::span<const double> targets, std::span<const double> weights) {
    if (batch.empty()) throw Error("empty training batch");
    if (targets.size() != batch.size() || weights.size() != batch.size()) throw Error("batch, target and weight sizes differ");
}

}  // namespace

double td_loss(const QNetwork& net, std::span<const Transition> batch, std::span<const double> targets,
               std::span<const double> weights) {
    check_batch(batch, targets, weights);
    const Eigen::MatrixXd q = q_forward_batch(net, stack_states(batch, false));
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double d = q(batch[i].a, static_cast<Eigen::Index>(i)) - targets[i];
        loss += weights[i] * 0.5 * d * d;
    }
    return loss / static_cast<double>(batch.size());
}

double td_loss_gradient(const QNetwork& net, std::span<const Transition> batch, std::span<const double> targets,
                        std::span<const double> weights, Gradients& grad, std::vector<double>* abs_errors) {
    check_batch(batch, targets, weights);
    const auto L = net.layer_count();
    const auto B = static_cast<Eigen::Index>(batch.size());

    // Forward pass keeping every layer's activations.
    std::vector<Eigen::MatrixXd> act{stack_states(batch, false)};
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd z = net.weight(l) * act.back();
        z.colwise() += net.bias(l);
        act.push_back(l + 1 < L ? relu(z) : z);
    }
    const Eigen::MatrixXd& q = act.back();

    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), B);
    double loss = 0.0;
    if (abs_errors) abs_errors->assign(batch.size(), 0.0);
    for (Eigen::Index i = 0; i < B; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (batch[k].a < 0 || batch[k].a >= q.rows()) throw Error("transition action out of range");
        const double d = q(batch[k].a, i) - targets[k];
        loss += weights[k] * 0.5 * d * d;
        delta(batch[k].a, i) = weights[k] * d / static_cast<double>(B);
        if (abs_errors) (*abs_errors)[k] = std::abs(d);
    }

    grad.weights.resize(L);
    grad.biases.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        grad.weights[l] = delta * act[l].transpose();
        grad.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (net.weight(l).transpose() * delta).cwiseProduct((act[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss / static_cast<double>(B);
}

void Sgd::apply(QNetwork& net, const Gradients& grad) {
    const auto L = net.layer_count();
    if (grad.weights.size() != L || grad.biases.size() != L) throw Error("gradient shape does not match the network");
    if (momentum_ == 0.0) {
        for (std::size_t l = 0; l < L; ++l) {
            net.weight(l) -= lr_ * grad.weights[l];
            net.bias(l) -= lr_ * grad.biases[l];
        }
        return;
    }
    if (velocity_.weights.size() != L) {
        velocity_.weights.clear();
        velocity_.biases.clear();
        for (std::size_t l = 0; l < L; ++l) {
            velocity_.weights.push_back(Eigen::MatrixXd::Zero(grad.weights[l].rows(), grad.weights[l].cols()));
            velocity_.biases.push_back(Eigen::VectorXd::Zero(grad.biases[l].size()));
        }
    }
    for (std::size_t l = 0; l < L; ++l) {
        velocity_.weights[l] = momentum_ * velocity_.weights[l] - lr_ * grad.weights[l];
        velocity_.biases[l] = momentum_ * velocity_.biases[l] - lr_ * grad.biases[l];
        net.weight(l) += velocity_.weights[l];
        net.bias(l) += velocity_.biases[l];
    }
}

SumTree::SumTree(std::size_t capacity) : base_(1), used_(capacity) {
    if (capacity == 0) throw Error("sum tree capacity must be positive");
    while (base_ < capacity) base_ <<= 1;
    nodes_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
    if (leaf >= used_) throw Error("sum tree leaf out of range");
    std::size_t i = base_ + leaf;
    nodes_[i] = value;
    // Recompute parents from children rather than adding deltas, so rounding
    // does not accumulate over millions of updates.
    for (i >>= 1; i >= 1; i >>= 1) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

std::size_t SumTree::find(double u) const {
    std::size_t i = 1;
    while (i < base_) {
        const double left = nodes_[2 * i];
        if (u < left || nodes_[2 * i + 1] <= 0.0) {
            i = 2 * i;
        } else {
            u -= left;
            i = 2 * i + 1;
        }
    }
    // Guard against landing on an empty leaf through rounding at the right edge.
    std::size_t leaf = i - base_;
    while (leaf > 0 && nodes_[base_ + leaf] <= 0.0) --leaf;
    return leaf;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, double alpha, double priority_floor)
    : items_(capacity), priorities_(capacity, 0.0), tree_(capacity), alpha_(alpha), floor_(priority_floor) {
    if (!(alpha >= 0.0)) throw Error("alpha must be >= 0");
    if (!(priority_floor > 0.0)) throw Error("priority floor must be positive");
}

void ReplayBuffer::add(const Transition& t) {
    items_[next_] = t;
    set_priority(next_, max_priority_);
    next_ = (next_ + 1) % items_.size();
    size_ = std::min(size_ + 1, items_.size());
}

void ReplayBuffer::set_priority(std::size_t i, double p) {
    if (!(p > 0.0) || !std::isfinite(p)) throw Error("replay priority must be positive and finite");
    priorities_[i] = p;
    max_priority_ = std::max(max_priority_, p);
    tree_.set(i, std::pow(p, alpha_));
}

double ReplayBuffer::probability(std::size_t i) const { return tree_.get(i) / tree_.total(); }

void ReplayBuffer::update_priorities(std::span<const std::size_t> indices, std::span<const double> abs_td) {
    if (indices.size() != abs_td.size()) throw Error("priority update size mismatch");
    for (std::size_t k = 0; k < indices.size(); ++k) set_priority(indices[k], std::abs(abs_td[k]) + floor_);
}

ReplayBuffer::Sample ReplayBuffer::sample(std::size_t n, double beta, std::mt19937_64& rng) const {
    if (size_ < n || n == 0) {
        throw Error("replay buffer holds " + std::to_string(size_) + " transitions, cannot sample " + std::to_string(n));
    }
    Sample out;
    std::uniform_real_distribution<double> u(0.0, tree_.total());
    double max_w = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = tree_.find(u(rng));
        const double w = std::pow(static_cast<double>(size_) * probability(i), -beta);
        out.indices.push_back(i);
        out.weights.push_back(w);
        max_w = std::max(max_w, w);
    }
    for (auto& w : out.weights) w /= max_w;
    return out;
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("gamma must lie in [0, 1]");
    if (!(lr > 0.0)) throw Error("learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must lie in [0, 1)");
    if (buffer_capacity == 0 || batch_size == 0 || target_sync_interval == 0) {
        throw Error("buffer capacity, batch size and target sync interval must be positive");
    }
    if (batch_size > buffer_capacity) throw Error("batch size exceeds buffer capacity");
    if (!(alpha >= 0.0) || !(beta_start >= 0.0) || !(beta_end >= 0.0)) throw Error("alpha and beta must be >= 0");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
        throw Error("epsilon must lie in [0, 1]");
    }
    if (!(epsilon_decay_fraction > 0.0)) throw Error("epsilon decay fraction must be positive");
    check_sizes(architecture);
    if (architecture.front() != kStateDim || architecture.back() != kActionCount) {
        throw Error("network must map " + std::to_string(kStateDim) + " features to " + std::to_string(kActionCount) + " actions");
    }
}

double TrainConfig::epsilon_at(std::size_t episode) const {
    const double span = epsilon_decay_fraction * static_cast<double>(episodes);
    const double t = span > 0.0 ? std::min(static_cast<double>(episode) / span, 1.0) : 1.0;
    return epsilon_start + (epsilon_end - epsilon_start) * t;
}

TrainResult train(std::span<ExploreEnv* const> envs, const TrainConfig& cfg, std::uint64_t seed,
                  const std::function<void(const TrainLogRow&)>& on_episode) {
    cfg.validate();
    if (envs.empty()) throw Error("training needs at least one environment");
    auto rng = episode_rng(seed, ~std::uint64_t{0});
    TrainResult result;
    result.net = QNetwork::random(cfg.architecture, rng);
    QNetwork target = result.net;
    QNetwork& online = result.net;
    Sgd opt(cfg.lr, cfg.momentum);
    ReplayBuffer buffer(cfg.buffer_capacity, cfg.alpha, cfg.priority_floor);
    Gradients grad;
    std::vector<Transition> batch(cfg.batch_size);
    std::vector<double> targets(cfg.batch_size);
    std::vector<double> abs_errors;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, kActionCount - 1);
    const double total_steps = static_cast<double>(std::max<std::size_t>(cfg.episodes * cfg.steps_per_episode, 1));

    std::size_t global = 0;
    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
        ExploreEnv& env = *envs[ep % envs.size()];
        env.reset();
        const double eps = cfg.epsilon_at(ep);
        TrainLogRow row;
        row.episode = ep;
        double td_sum = 0.0;
        std::size_t td_n = 0;
        StateVec s = env.state();
        for (std::size_t t = 0; t < cfg.steps_per_episode; ++t) {
            const int a = coin(rng) < eps ? pick(rng) : greedy_action(online, s);
            const auto step_result = env.step(a);
            const StateVec s_next = env.state();
            const bool terminal = env.done();
            buffer.add({s, a, step_result.reward, s_next, terminal});
            row.total_reward += step_result.reward;
            ++global;

            if (buffer.size() >= cfg.batch_size) {
                const double beta = cfg.beta_start + (cfg.beta_end - cfg.beta_start) * (static_cast<double>(global) / total_steps);
                const auto sample = buffer.sample(cfg.batch_size, beta, rng);
                for (std::size_t k = 0; k < cfg.batch_size; ++k) batch[k] = buffer.at(sample.indices[k]);

                const Eigen::MatrixXd next = stack_states(batch, true);
                const Eigen::MatrixXd q_online_next = q_forward_batch(online, next);
                const Eigen::MatrixXd q_target_next = q_forward_batch(target, next);
                for (std::size_t k = 0; k < cfg.batch_size; ++k) {
                    const auto col = static_cast<Eigen::Index>(k);
                    targets[k] = batch[k].terminal
                                     ? batch[k].r
                                     : batch[k].r + cfg.gamma * q_target_next(argmax(q_online_next.col(col)), col);
                }
                td_loss_gradient(online, batch, targets, sample.weights, grad, &abs_errors);
                const double mean_abs_q = q_online_next.cwiseAbs().mean();
                if (!(mean_abs_q <= 1e6)) {
                    throw Error("training diverged at episode " + std::to_string(ep) + ": mean |Q| = " + std::to_string(mean_abs_q));
                }
                opt.apply(online, grad);
                buffer.update_priorities(sample.indices, abs_errors);
                for (double e : abs_errors) td_sum += e;
                td_n += abs_errors.size();
            }
            if (global % cfg.target_sync_interval == 0) target = online;
            s = s_next;
            if (terminal) break;
        }
        row.coverage = env.coverage();
        row.mean_td_error = td_n ? td_sum / static_cast<double>(td_n) : 0.0;
        result.log.push_back(row);
        if (on_episode) on_episode(row);
    }
    result.steps = global;
    return result;
}

void write_train_log_csv(std::ostream& out, std::span<const TrainLogRow> log) {
    out << "episode,total_reward,coverage,mean_td_error\n";
    std::string line;
    for (const auto& r : log) {
        line = std::to_string(r.episode);
        for (double v : {r.total_reward, r.coverage, r.mean_td_error}) {
            line += ',';
            detail::append_double(line, v);
        }
        out << line << '\n';
    }
}

std::string format_policy(const QNetwork& net) {
    nlohmann::json j;
    j["format"] = "NAVVOX-POLICY v1";
    j["architecture"] = net.sizes();
    j["hidden_activation"] = "relu";
    j["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        std::vector<double> w;
        const auto& m = net.weight(l);
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) w.push_back(m(r, c));
        }
        std::vector<double> b(net.bias(l).data(), net.bias(l).data() + net.bias(l).size());
        j["layers"].push_back({{"weights", w}, {"bias", b}});
    }
    return j.dump() + "\n";
}

QNetwork parse_policy(const std::string& text, const std::string& source) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format").get<std::string>() != "NAVVOX-POLICY v1") {
            throw Error("unsupported policy version '" + j.at("format").get<std::string>() + "'");
        }
        if (j.contains("hidden_activation") && j.at("hidden_activation") != "relu") throw Error("unsupported activation");
        QNetwork net(j.at("architecture").get<std::vector<int>>());
        const auto& layers = j.at("layers");
        if (layers.size() != net.layer_count()) throw Error("layer count does not match the architecture");
        std::vector<double> flat;
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            const auto w = layers[l].at("weights").get<std::vector<double>>();
            const auto b = layers[l].at("bias").get<std::vector<double>>();
            if (w.size() != static_cast<std::size_t>(net.weight(l).size()) || b.size() != static_cast<std::size_t>(net.bias(l).size())) {
                throw Error("layer " + std::to_string(l) + " has the wrong number of parameters");
            }
            flat.insert(flat.end(), w.begin(), w.end());
            flat.insert(flat.end(), b.begin(), b.end());
        }
        for (double v : flat) {
            if (!std::isfinite(v)) throw Error("non-finite policy parameter");
        }
        net.set_parameters(flat);
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw Error(source + ": malformed policy: " + e.what());
    } catch (const Error& e) {
        throw Error(source + ": " + e.what());
    }
}

void save_policy(const QNetwork& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write policy '" + path.string() + "'");
    out << format_policy(net);
}

QNetwork load_policy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open policy '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_policy(ss.str(), path.string());
}

}  // namespace navvox
