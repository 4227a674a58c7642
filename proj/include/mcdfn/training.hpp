#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mcdfn/data.hpp"
#include "mcdfn/network.hpp"

namespace mcdfn {

struct Loss {
    double value = 0.0;
    Tensor grad;
};

/// Mean squared error over every element, with its gradient w.r.t. `pred`.
Loss mse_loss(const Tensor& pred, const Tensor& target);

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Epochs without a validation improvement before stopping.
    std::size_t patience = 100;
    std::uint64_t seed = 42;

    void validate() const;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t t = 0;

    static AdamState like(const std::vector<const Tensor*>& params);
};

/// One Adam update in place. Throws a numeric error on a non-finite gradient
/// before touching any parameter.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    bool early_stopped = false;
    double wall_ms = 0.0;

    /// epoch,train_loss,val_loss
    std::string loss_csv() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on MSE. Windows are reshuffled every epoch from a stream
/// derived from cfg.seed; the weights of the best validation epoch are
/// restored before returning.
TrainReport fit(Network& net, const WindowSet& train, const WindowSet& val, const TrainConfig& cfg,
                const EpochCallback& on_epoch = {});

/// Builds `name` (a benchmark model or ablation identifier) from the "init"
/// child stream of cfg.seed, then fits it.
Network build_and_fit(const std::string& name, const WindowSet& train, const WindowSet& val, const TrainConfig& cfg,
                      TrainReport* report = nullptr, const EpochCallback& on_epoch = {});

/// Standardized-scale MSE of inference-mode predictions.
double evaluate_mse(const Network& net, const WindowSet& windows);

/// One tunable hyperparameter over a finite grid. Categorical choices carry
/// labels and are stored by position.
struct HyperParam {
    std::string name;
    std::vector<double> values;
    std::vector<std::string> labels;
};

using HyperConfig = std::map<std::string, double>;

struct SearchSpace {
    std::vector<HyperParam> params;

    std::size_t size() const;
    /// Configuration at a mixed-radix grid index.
    HyperConfig at(std::size_t index) const;
    std::string describe(const HyperConfig& config) const;
};

/// Per-model grids: recurrent units 32..512 step 32, dropout 0..0.5 step 0.1,
/// filters 32..512 step 32, and the activation choice for the FCN.
SearchSpace default_search_space(const std::string& model);
/// Network layout for a model family at the given configuration.
NetworkSpec spec_from_config(const std::string& model, const HyperConfig& config);

struct HyperbandOptions {
    std::size_t max_epochs = 10;
    std::size_t eta = 3;
    std::size_t iterations = 5;
    std::uint64_t seed = 42;
};

struct BracketRound {
    std::size_t configs = 0;
    std::size_t epochs = 0;
};

/// Successive-halving rounds of every bracket, highest s first.
std::vector<std::vector<BracketRound>> hyperband_schedule(std::size_t max_epochs, std::size_t eta);

struct TrialRecord {
    std::size_t trial = 0;
    std::size_t iteration = 0;
    std::size_t bracket = 0;
    std::size_t round = 0;
    std::size_t config_id = 0;
    HyperConfig config;
    std::size_t epochs = 0;
    double val_mse = 0.0;
};

struct TuneResult {
    HyperConfig best;
    std::size_t best_config_id = 0;
    double best_val_mse = 0.0;
    std::vector<TrialRecord> trials;

    std::string ledger_csv(const SearchSpace& space) const;
};

/// Returns the validation MSE of a configuration trained for `epochs`.
using TrialObjective = std::function<double(const HyperConfig&, std::size_t epochs, std::uint64_t seed)>;

TuneResult hyperband(const SearchSpace& space, const TrialObjective& objective, const HyperbandOptions& options = {});

/// Hyperband over a model family: each trial builds the network from the
/// configuration, trains it for the round's epochs and reports its best
/// validation MSE.
TuneResult hyperband_tune(const std::string& model, const WindowSet& train, const WindowSet& val,
                          const TrainConfig& base, const HyperbandOptions& options = {},
                          const SearchSpace* space = nullptr);

}  // namespace mcdfn
