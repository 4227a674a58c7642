#include "mcdfn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "mcdfn/errors.hpp"
#include "mcdfn/io.hpp"

namespace mcdfn {

namespace {

std::string shape_text(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

void check_windows(const Network& net, const WindowSet& w, const char* what) {
    if (w.size() == 0) fail(ErrorKind::kData, std::string(what) + " set has no windows");
    const Shape& in = net.spec().input;
    if (w.inputs.rank() != 3 || w.inputs.dim(1) != in[0] || w.inputs.dim(2) != in[1]) {
        fail(ErrorKind::kDimension, std::string(what) + " inputs " + shape_text(w.inputs.shape()) +
                                        " do not match network input " + shape_text(in));
    }
    if (w.targets.rank() != 3 || w.targets.dim(1) != net.spec().horizon || w.targets.dim(2) != 1) {
        fail(ErrorKind::kDimension, std::string(what) + " targets " + shape_text(w.targets.shape()) +
                                        " do not match horizon " + std::to_string(net.spec().horizon));
    }
}

void gather(const Tensor& src, const std::vector<std::size_t>& order, std::size_t begin, std::size_t count,
            Tensor& dst) {
    const std::size_t stride = src.size() / src.dim(0);
    Shape shape = src.shape();
    shape[0] = count;
    if (dst.shape() != shape) dst = Tensor(shape);
    for (std::size_t i = 0; i < count; ++i) {
        std::memcpy(dst.data() + i * stride, src.data() + order[begin + i] * stride, stride * sizeof(double));
    }
}

std::vector<Tensor> snapshot(const Network& net) {
    std::vector<Tensor> out;
    for (const Tensor* p : net.parameters()) out.push_back(*p);
    return out;
}

void restore(Network& net, const std::vector<Tensor>& saved) {
    const auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = saved[i];
}

}  // namespace

Loss mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        fail(ErrorKind::kDimension,
             "loss shapes differ: " + shape_text(pred.shape()) + " vs " + shape_text(target.shape()));
    }
    Loss out;
    out.grad = Tensor(pred.shape());
    const double n = static_cast<double>(pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sum += d * d;
        out.grad[i] = 2.0 * d / n;
    }
    out.value = sum / n;
    return out;
}

void TrainConfig::validate() const {
    if (batch_size < 1) fail(ErrorKind::kConfig, "batch size must be at least 1");
    if (epochs < 1) fail(ErrorKind::kConfig, "epochs must be at least 1");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        fail(ErrorKind::kConfig, "Adam betas must lie in (0, 1)");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail(ErrorKind::kConfig, "invalid learning rate");
    if (!(epsilon > 0.0)) fail(ErrorKind::kConfig, "Adam epsilon must be positive");
}

AdamState AdamState::like(const std::vector<const Tensor*>& params) {
    AdamState s;
    for (const Tensor* p : params) {
        s.m.emplace_back(p->shape());
        s.v.emplace_back(p->shape());
    }
    return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        fail(ErrorKind::kDimension, "optimizer state does not match the parameter list");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i]->shape() || state.m[i].shape() != params[i]->shape()) {
            fail(ErrorKind::kDimension, "gradient " + std::to_string(i) + " has shape " +
                                            shape_text(grads[i].shape()) + ", parameter has " +
                                            shape_text(params[i]->shape()));
        }
        if (!grads[i].all_finite()) fail(ErrorKind::kNumeric, "non-finite gradient in parameter " + std::to_string(i));
    }
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* theta = params[i]->data();
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        const double* g = grads[i].data();
        const std::size_t n = params[i]->size();
        for (std::size_t k = 0; k < n; ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            theta[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

std::string TrainReport::loss_csv() const {
    CsvTable csv({"epoch", "train_loss", "val_loss"});
    for (const auto& r : history) {
        csv.add_row({std::to_string(r.epoch), format_double(r.train_loss), format_double(r.val_loss)});
    }
    return csv.str();
}

double evaluate_mse(const Network& net, const WindowSet& windows) {
    check_windows(net, windows, "evaluation");
    const Tensor pred = net.predict_batch(windows.inputs);
    return mse_loss(pred, windows.targets).value;
}

TrainReport fit(Network& net, const WindowSet& train, const WindowSet& val, const TrainConfig& cfg,
                const EpochCallback& on_epoch) {
    cfg.validate();
    check_windows(net, train, "training");
    check_windows(net, val, "validation");
    const auto start = std::chrono::steady_clock::now();

    const RandomSource root(cfg.seed);
    RandomSource shuffle_rng = root.child("fit/shuffle");
    RandomSource dropout_rng = root.child("fit/dropout");
    const std::vector<Tensor*> params = net.parameters();
    AdamState adam = AdamState::like(std::as_const(net).parameters());

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Tensor xb, yb;
    TrainReport report;
    std::vector<Tensor> best;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t b = 0, batch_index = 0; b < order.size(); b += cfg.batch_size, ++batch_index) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - b);
            gather(train.inputs, order, b, count, xb);
            gather(train.targets, order, b, count, yb);
            std::unique_ptr<NetworkCache> cache;
            const Tensor pred = net.forward(xb, ForwardMode{true, &dropout_rng}, cache);
            const Loss loss = mse_loss(pred, yb);
            if (!std::isfinite(loss.value)) {
                fail(ErrorKind::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                              std::to_string(batch_index));
            }
            std::vector<Tensor> grads = net.zero_gradients();
            net.backward(loss.grad, *cache, grads);
            try {
                adam_step(params, grads, adam, cfg);
            } catch (const Error& e) {
                fail(ErrorKind::kNumeric, std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                              ", batch " + std::to_string(batch_index));
            }
            loss_sum += loss.value * static_cast<double>(count);
        }
        EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), evaluate_mse(net, val)};
        if (!std::isfinite(rec.val_loss)) {
            fail(ErrorKind::kNumeric, "non-finite validation loss at epoch " + std::to_string(epoch));
        }
        report.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (best.empty() || rec.val_loss < report.best_val_loss) {
            report.best_val_loss = rec.val_loss;
            report.best_epoch = epoch;
            best = snapshot(net);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            report.early_stopped = true;
            break;
        }
    }
    restore(net, best);
    report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return report;
}

Network build_and_fit(const std::string& name, const WindowSet& train, const WindowSet& val, const TrainConfig& cfg,
                      TrainReport* report, const EpochCallback& on_epoch) {
    Network net = build(name, RandomSource(cfg.seed).child("init"));
    TrainReport r = fit(net, train, val, cfg, on_epoch);
    if (report) *report = std::move(r);
    return net;
}

std::size_t SearchSpace::size() const {
    std::size_t n = 1;
    for (const auto& p : params) n *= p.values.size();
    return params.empty() ? 0 : n;
}

HyperConfig SearchSpace::at(std::size_t index) const {
    HyperConfig c;
    for (const auto& p : params) {
        c[p.name] = p.values[index % p.values.size()];
        index /= p.values.size();
    }
    return c;
}

std::string SearchSpace::describe(const HyperConfig& config) const {
    std::string out;
    for (const auto& p : params) {
        const auto it = config.find(p.name);
        if (it == config.end()) continue;
        if (!out.empty()) out += ' ';
        out += p.name + "=";
        if (!p.labels.empty()) {
            const auto pos = static_cast<std::size_t>(it->second);
            out += pos < p.labels.size() ? p.labels[pos] : format_double(it->second);
        } else {
            out += format_double(it->second);
        }
    }
    return out;
}

namespace {

HyperParam grid(std::string name, double lo, double hi, double step) {
    HyperParam p{std::move(name), {}, {}};
    const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
    for (std::size_t i = 0; i <= n; ++i) p.values.push_back(std::round((lo + step * i) * 1e9) / 1e9);
    return p;
}

HyperParam units(std::string name) { return grid(std::move(name), 32, 512, 32); }
HyperParam dropout(std::string name) { return grid(std::move(name), 0.0, 0.5, 0.1); }

std::size_t whole(const HyperConfig& c, const std::string& key) {
    const auto it = c.find(key);
    if (it == c.end()) fail(ErrorKind::kConfig, "configuration lacks '" + key + "'");
    if (!(it->second >= 1.0)) fail(ErrorKind::kConfig, "'" + key + "' must be at least 1");
    return static_cast<std::size_t>(std::llround(it->second));
}

double real(const HyperConfig& c, const std::string& key) {
    const auto it = c.find(key);
    if (it == c.end()) fail(ErrorKind::kConfig, "configuration lacks '" + key + "'");
    return it->second;
}

}  // namespace

SearchSpace default_search_space(const std::string& model) {
    const std::string name = canonical_model_name(model);
    SearchSpace s;
    if (name == "MCDFN") {
        s.params = {units("filters"), grid("kernel", 1, 3, 1), units("units")};
    } else if (name == "CNN") {
        s.params = {units("filters"), grid("kernel", 1, 3, 1), units("dense_units")};
    } else if (name == "FCN") {
        s.params = {units("dense_units"), {"activation", {0, 1}, {"relu", "tanh"}}, dropout("dropout")};
    } else if (name == "StackedLSTM") {
        s.params = {units("units"), units("units_2"), dropout("dropout")};
    } else if (name == "VanillaLSTM") {
        s.params = {units("units")};
    } else if (name == "BiLSTM" || name == "RNN" || name == "GRU") {
        s.params = {units("units"), dropout("dropout")};
    } else {
        fail(ErrorKind::kConfig, "no search space for '" + name + "'");
    }
    return s;
}

NetworkSpec spec_from_config(const std::string& model, const HyperConfig& c) {
    const std::string name = canonical_model_name(model);
    if (name == "MCDFN") {
        McdfnOptions o;
        o.conv_filters = whole(c, "filters");
        o.conv_kernel = whole(c, "kernel");
        o.bigru_units = o.lstm_units_1 = o.lstm_units_2 = whole(c, "units");
        return mcdfn_spec(o);
    }
    ModelOptions o = default_options(name);
    if (name == "CNN") {
        o.filters = whole(c, "filters");
        o.kernel = whole(c, "kernel");
        o.dense_units = whole(c, "dense_units");
    } else if (name == "FCN") {
        o.dense_units = whole(c, "dense_units");
        o.activation = real(c, "activation") != 0.0 ? Activation::kTanh : Activation::kRelu;
        o.dropout = real(c, "dropout");
    } else if (name == "StackedLSTM") {
        o.units = whole(c, "units");
        o.units_2 = whole(c, "units_2");
        o.dropout = real(c, "dropout");
    } else if (name == "VanillaLSTM") {
        o.units = whole(c, "units");
    } else {
        o.units = whole(c, "units");
        o.dropout = real(c, "dropout");
    }
    return model_spec(name, o);
}

std::vector<std::vector<BracketRound>> hyperband_schedule(std::size_t max_epochs, std::size_t eta) {
    if (max_epochs < 1 || eta < 2) fail(ErrorKind::kConfig, "Hyperband needs max_epochs >= 1 and eta >= 2");
    std::size_t s_max = 0;
    for (std::size_t p = eta; p <= max_epochs; p *= eta) ++s_max;
    std::vector<std::vector<BracketRound>> out;
    const double e = static_cast<double>(eta);
    for (std::size_t s = s_max + 1; s-- > 0;) {
        const double n = std::ceil(static_cast<double>(s_max + 1) / static_cast<double>(s + 1) * std::pow(e, s) - 1e-9);
        const double r = static_cast<double>(max_epochs) * std::pow(e, -static_cast<double>(s));
        std::vector<BracketRound> rounds;
        for (std::size_t i = 0; i <= s; ++i) {
            const auto ni = static_cast<std::size_t>(std::floor(n * std::pow(e, -static_cast<double>(i)) + 1e-9));
            const auto ri = static_cast<std::size_t>(std::llround(r * std::pow(e, static_cast<double>(i))));
            rounds.push_back({std::max<std::size_t>(ni, 1), std::clamp<std::size_t>(ri, 1, max_epochs)});
        }
        out.push_back(std::move(rounds));
    }
    return out;
}

std::string TuneResult::ledger_csv(const SearchSpace& space) const {
    CsvTable csv({"trial", "iteration", "bracket", "round", "config_id", "config", "epochs", "val_mse"});
    for (const auto& t : trials) {
        csv.add_row({std::to_string(t.trial), std::to_string(t.iteration), std::to_string(t.bracket),
                     std::to_string(t.round), std::to_string(t.config_id), space.describe(t.config),
                     std::to_string(t.epochs), format_double(t.val_mse)});
    }
    return csv.str();
}

TuneResult hyperband(const SearchSpace& space, const TrialObjective& objective, const HyperbandOptions& options) {
    const std::size_t total = space.size();
    if (total == 0) fail(ErrorKind::kConfig, "empty search space");
    for (const auto& p : space.params) {
        if (p.values.empty()) fail(ErrorKind::kConfig, "hyperparameter '" + p.name + "' has no values");
    }
    TuneResult result;
    const RandomSource root(options.seed);
    auto record = [&](std::size_t it, std::size_t br, std::size_t rd, std::size_t id, std::size_t epochs) {
        TrialRecord t{result.trials.size(), it, br, rd, id, space.at(id), epochs, 0.0};
        const std::uint64_t trial_seed = derive_seed(options.seed, "trial/" + std::to_string(t.trial));
        t.val_mse = objective(t.config, epochs, trial_seed);
        if (result.trials.empty() || t.val_mse < result.best_val_mse) {
            result.best_val_mse = t.val_mse;
            result.best = t.config;
            result.best_config_id = id;
        }
        result.trials.push_back(t);
        return t.val_mse;
    };
    if (total == 1) {
        record(0, 0, 0, 0, options.max_epochs);
        return result;
    }

    const auto schedule = hyperband_schedule(options.max_epochs, options.eta);
    for (std::size_t it = 0; it < options.iterations; ++it) {
        for (std::size_t b = 0; b < schedule.size(); ++b) {
            const auto& rounds = schedule[b];
            const std::size_t s = rounds.size() - 1;
            RandomSource rng = root.child("iteration/" + std::to_string(it) + "/bracket/" + std::to_string(s));
            std::vector<std::size_t> alive;
            std::set<std::size_t> seen;
            const std::size_t want = std::min(rounds.front().configs, total);
            while (alive.size() < want) {
                const auto id = static_cast<std::size_t>(rng.below(total));
                if (seen.insert(id).second) alive.push_back(id);
            }
            for (std::size_t r = 0; r < rounds.size() && !alive.empty(); ++r) {
                std::vector<std::pair<double, std::size_t>> scored;
                for (std::size_t id : alive) scored.emplace_back(record(it, s, r, id, rounds[r].epochs), id);
                if (r + 1 == rounds.size()) break;
                std::stable_sort(scored.begin(), scored.end(),
                                 [](const auto& a, const auto& b) { return a.first < b.first; });
                const std::size_t keep = std::max<std::size_t>(1, alive.size() / options.eta);
                alive.clear();
                for (std::size_t k = 0; k < keep && k < scored.size(); ++k) alive.push_back(scored[k].second);
            }
        }
    }
    return result;
}

TuneResult hyperband_tune(const std::string& model, const WindowSet& train, const WindowSet& val,
                          const TrainConfig& base, const HyperbandOptions& options, const SearchSpace* space) {
    const SearchSpace grid_space = space ? *space : default_search_space(model);
    const auto objective = [&](const HyperConfig& config, std::size_t epochs, std::uint64_t seed) {
        Network net(spec_from_config(model, config));
        net.init(RandomSource(seed));
        TrainConfig cfg = base;
        cfg.epochs = epochs;
        cfg.seed = seed;
        return fit(net, train, val, cfg).best_val_loss;
    };
    return hyperband(grid_space, objective, options);
}

}  // namespace mcdfn
