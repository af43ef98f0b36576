#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "navvox/explore.hpp"

namespace navvox {

/// Fully connected Q approximator: ReLU hidden layers, linear output layer.
/// Layer l maps sizes[l] inputs to sizes[l + 1] outputs; weight(l) is
/// sizes[l + 1] x sizes[l].
class QNetwork {
public:
    QNetwork() = default;
    /// All parameters zero.
    explicit QNetwork(std::vector<int> sizes);
    /// He-uniform weights, zero biases.
    static QNetwork random(std::vector<int> sizes, std::mt19937_64& rng);

    const std::vector<int>& sizes() const { return sizes_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    std::size_t layer_count() const { return weights_.size(); }

    Eigen::MatrixXd& weight(std::size_t l) { return weights_[l]; }
    const Eigen::MatrixXd& weight(std::size_t l) const { return weights_[l]; }
    Eigen::VectorXd& bias(std::size_t l) { return biases_[l]; }
    const Eigen::VectorXd& bias(std::size_t l) const { return biases_[l]; }

    std::size_t parameter_count() const;
    /// Flattened parameters: per layer, row-major weights then bias.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);

    bool operator==(const QNetwork& o) const;

private:
    std::vector<int> sizes_;
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
};

inline std::vector<int> default_architecture() { return {kStateDim, 64, 64, kActionCount}; }

/// Action values for one state. Throws navvox::Error on dimension mismatch.
Eigen::VectorXd q_forward(const QNetwork& net, std::span<const double> s);
/// Action values for a batch of states stored as columns.
Eigen::MatrixXd q_forward_batch(const QNetwork& net, const Eigen::MatrixXd& states);
/// Argmax of the action values, lowest id on ties.
int greedy_action(const QNetwork& net, const StateVec& s);

struct Transition {
    StateVec s{};
    int a = 0;
    double r = 0.0;
    StateVec s_next{};
    bool terminal = false;
};

/// Double-Q target: the online net picks a* in s_next, the target net scores it.
double td_target(const QNetwork& online, const QNetwork& target, const Transition& t, double gamma);
/// |td_target - Q_online(s, a)|.
double td_error(const QNetwork& online, const QNetwork& target, const Transition& t, double gamma);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

/// Batch loss (1/B) sum_i w_i * 0.5 * (Q(s_i, a_i) - y_i)^2 with the targets y held fixed.
double td_loss(const QNetwork& net, std::span<const Transition> batch, std::span<const double> targets,
               std::span<const double> weights);

/// Same loss plus its gradient with respect to every parameter of `net`.
/// `abs_errors`, when given, receives |y_i - Q(s_i, a_i)| per item.
double td_loss_gradient(const QNetwork& net, std::span<const Transition> batch, std::span<const double> targets,
                        std::span<const double> weights, Gradients& grad, std::vector<double>* abs_errors = nullptr);

/// Stochastic gradient descent with optional classical momentum.
class Sgd {
public:
    Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
    void apply(QNetwork& net, const Gradients& grad);

private:
    double lr_;
    double momentum_;
    Gradients velocity_;
};

/// Binary sum tree over a power-of-two number of leaves.
class SumTree {
public:
    explicit SumTree(std::size_t capacity);
    void set(std::size_t leaf, double value);
    double get(std::size_t leaf) const { return nodes_[base_ + leaf]; }
    double total() const { return nodes_[1]; }
    /// Leaf whose cumulative interval contains u, for u in [0, total()).
    std::size_t find(double u) const;

private:
    std::size_t base_;
    std::size_t used_;
    std::vector<double> nodes_;
};

/// FIFO replay memory with proportional prioritization P(i) = p_i^a / sum_j p_j^a.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, double alpha, double priority_floor = 1e-3);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return items_.size(); }
    double alpha() const { return alpha_; }

    /// Stores t at the current maximum priority, evicting the oldest item when full.
    void add(const Transition& t);
    const Transition& at(std::size_t i) const { return items_[i]; }
    double priority(std::size_t i) const { return priorities_[i]; }
    double probability(std::size_t i) const;
    void set_priority(std::size_t i, double p);
    /// p_i = |delta_i| + floor.
    void update_priorities(std::span<const std::size_t> indices, std::span<const double> abs_td);

    struct Sample {
        std::vector<std::size_t> indices;
        std::vector<double> weights;  // (N P(i))^-beta divided by the batch maximum
    };
    /// n independent draws with probability P(i). Throws navvox::Error when fewer than n items are stored.
    Sample sample(std::size_t n, double beta, std::mt19937_64& rng) const;

private:
    std::vector<Transition> items_;
    std::vector<double> priorities_;
    SumTree tree_;
    double alpha_;
    double floor_;
    double max_priority_ = 1.0;
    std::size_t next_ = 0;
    std::size_t size_ = 0;
};

struct TrainConfig {
    double gamma = 0.99;
    double lr = 1e-4;
    double momentum = 0.0;
    std::size_t buffer_capacity = 30000;
    std::size_t episodes = 200;
    std::size_t steps_per_episode = 500;
    std::size_t batch_size = 64;
    std::size_t target_sync_interval = 1000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_decay_fraction = 0.6;  // of the episodes
    double alpha = 0.6;
    double beta_start = 0.4;
    double beta_end = 1.0;
    double priority_floor = 1e-3;
    std::vector<int> architecture = default_architecture();

    void validate() const;
    double epsilon_at(std::size_t episode) const;
};

struct TrainLogRow {
    std::size_t episode = 0;
    double total_reward = 0.0;
    double coverage = 0.0;
    double mean_td_error = 0.0;
};

struct TrainResult {
    QNetwork net;
    std::vector<TrainLogRow> log;
    std::size_t steps = 0;
};

/// Double DQN with prioritized replay. Episodes cycle through `envs`. Throws
/// navvox::Error if the mean |Q| of a training batch exceeds 1e6.
TrainResult train(std::span<ExploreEnv* const> envs, const TrainConfig& cfg, std::uint64_t seed,
                  const std::function<void(const TrainLogRow&)>& on_episode = {});

void write_train_log_csv(std::ostream& out, std::span<const TrainLogRow> log);

std::string format_policy(const QNetwork& net);
QNetwork parse_policy(const std::string& text, const std::string& source = "<policy>");
void save_policy(const QNetwork& net, const std::filesystem::path& path);
QNetwork load_policy(const std::filesystem::path& path);

}  // namespace navvox
