#pragma once

#include "gmlp/common.hpp"
#include "gmlp/model.hpp"
#include "gmlp/propagation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

namespace gmlp {

enum class OptimizerKind { Sgd, Adam };

inline const char* to_string(OptimizerKind k) {
    return k == OptimizerKind::Sgd ? "sgd" : "adam";
}

inline std::optional<OptimizerKind> optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    return std::nullopt;
}

struct TrainConfig {
    Index epochs = 200;
    Index batch_size = 64;
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    Index patience = 50;
    std::uint64_t seed = 1;
    Index eval_every = 1;
};

inline void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw InputError("train config: epochs must be >= 1");
    if (cfg.batch_size < 1) throw InputError("train config: batch_size must be >= 1");
    if (cfg.patience < 1) throw InputError("train config: patience must be >= 1");
    if (cfg.eval_every < 1) throw InputError("train config: eval_every must be >= 1");
    if (!std::isfinite(cfg.learning_rate) || cfg.learning_rate < 0.0)
        throw InputError("train config: learning_rate must be finite and >= 0");
    if (!std::isfinite(cfg.weight_decay) || cfg.weight_decay < 0.0)
        throw InputError("train config: weight_decay must be finite and >= 0");
    if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) ||
        !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0) || !(cfg.adam_eps > 0.0))
        throw InputError("train config: adam parameters out of range");
}

/// Node masks for the transductive protocol. A node may belong to at most
/// one of the three sets.
struct Splits {
    std::vector<std::uint8_t> train;
    std::vector<std::uint8_t> val;
    std::vector<std::uint8_t> test;
};

inline std::vector<Index> mask_indices(const std::vector<std::uint8_t>& mask) {
    std::vector<Index> ids;
    for (std::size_t v = 0; v < mask.size(); ++v)
        if (mask[v]) ids.push_back(static_cast<Index>(v));
    return ids;
}

/// SGD or bias-corrected Adam over every parameter tensor, with L2 weight
/// decay folded into the gradient. Tensor order is the ModelParams visit
/// order, so state stays aligned across steps.
template <typename Scalar>
class Optimizer {
public:
    Optimizer(const TrainConfig& cfg, const ModelParams<Scalar>& params)
        : cfg_(cfg), m_(zero_like(params)), v_(zero_like(params)) {}

    void step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads) {
        ++t_;
        auto theta = collect(params);
        auto g = collect_const(grads);
        auto m = collect(m_);
        auto v = collect(v_);
        if (theta.size() != g.size()) throw ContractError("optimizer: shape mismatch");

        const Scalar lr = static_cast<Scalar>(cfg_.learning_rate);
        const Scalar wd = static_cast<Scalar>(cfg_.weight_decay);
        if (cfg_.optimizer == OptimizerKind::Sgd) {
            for (std::size_t i = 0; i < theta.size(); ++i) {
                auto grad = (g[i] + wd * theta[i]).eval();
                theta[i] -= lr * grad;
            }
            return;
        }
        const Scalar b1 = static_cast<Scalar>(cfg_.adam_beta1);
        const Scalar b2 = static_cast<Scalar>(cfg_.adam_beta2);
        const Scalar eps = static_cast<Scalar>(cfg_.adam_eps);
        const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
        const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            auto grad = (g[i] + wd * theta[i]).eval();
            m[i] = b1 * m[i] + (Scalar(1) - b1) * grad;
            v[i] = b2 * v[i] + (Scalar(1) - b2) * grad.square();
            theta[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
    }

    Index steps_taken() const { return t_; }

private:
    using Flat = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
    using ConstFlat = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;

    static std::vector<Flat> collect(ModelParams<Scalar>& p) {
        std::vector<Flat> flats;
        p.for_each_tensor([&flats](auto& t) { flats.emplace_back(t.data(), t.size()); });
        return flats;
    }

    static std::vector<ConstFlat> collect_const(const ModelParams<Scalar>& p) {
        std::vector<ConstFlat> flats;
        p.for_each_tensor([&flats](const auto& t) { flats.emplace_back(t.data(), t.size()); });
        return flats;
    }

    TrainConfig cfg_;
    Index t_ = 0;
    ModelParams<Scalar> m_;
    ModelParams<Scalar> v_;
};

struct EpochRecord {
    Index epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double alpha = 1.0;
    double wall_ms = 0.0;
};

template <typename Scalar>
struct TrainHistory {
    std::vector<EpochRecord> epochs;
    Index best_epoch = -1;
    double best_val_accuracy = 0.0;
    ModelParams<Scalar> best_params;
};

template <typename Scalar>
struct TrainResult {
    ModelParams<Scalar> params;
    TrainHistory<Scalar> history;
};

namespace detail {

template <typename Scalar>
double accuracy_on(const ModelParams<Scalar>& params, const VariantConfig& vcfg,
                   const MessageSet<Scalar>& sub, const std::vector<int>& sub_labels) {
    const std::vector<int> preds = predict(params, vcfg, sub);
    Index correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == sub_labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

inline std::vector<int> gather_labels(const std::vector<int>& labels,
                                      const std::vector<Index>& ids) {
    std::vector<int> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        out[i] = labels[static_cast<std::size_t>(ids[i])];
    return out;
}

}  // namespace detail

/// Fraction of masked nodes whose predicted class matches the label.
template <typename Scalar>
double evaluate(const ModelParams<Scalar>& params, const VariantConfig& vcfg,
                const MessageSet<Scalar>& ms, const std::vector<int>& labels,
                const std::vector<std::uint8_t>& mask) {
    if (mask.size() != static_cast<std::size_t>(ms.num_nodes()))
        throw InputError("evaluate: mask length does not match message set");
    const std::vector<Index> ids = mask_indices(mask);
    if (ids.empty()) throw InputError("evaluate: mask selects no nodes");
    return detail::accuracy_on(params, vcfg, ms.gather(ids), detail::gather_labels(labels, ids));
}

/// Mini-batch training with the scheduled dual-branch loss, validation-based
/// early stopping, and best-checkpoint restore. Batches are re-sorted
/// ascending after shuffling so summation order (and thus the loss) does not
/// depend on the shuffle permutation. Shuffling and dropout consume separate
/// RNG streams.
template <typename Scalar>
TrainResult<Scalar> train(const TrainConfig& cfg, const VariantConfig& vcfg,
                          const MessageSet<Scalar>& ms, const std::vector<int>& labels,
                          const Splits& splits) {
    validate(cfg);
    const Index n = ms.num_nodes();
    if (labels.size() != static_cast<std::size_t>(n))
        throw InputError("train: labels length does not match message set");
    if (splits.train.size() != static_cast<std::size_t>(n) ||
        splits.val.size() != static_cast<std::size_t>(n))
        throw InputError("train: split masks do not match message set");

    std::vector<Index> train_ids = mask_indices(splits.train);
    const std::vector<Index> val_ids = mask_indices(splits.val);
    if (train_ids.empty()) throw InputError("train: train split is empty");
    if (val_ids.empty()) throw InputError("train: val split is empty");

    int num_classes = 0;
    for (Index v : train_ids) num_classes = std::max(num_classes, labels[static_cast<std::size_t>(v)] + 1);
    for (Index v : val_ids) num_classes = std::max(num_classes, labels[static_cast<std::size_t>(v)] + 1);
    for (int y : labels) num_classes = std::max(num_classes, y + 1);

    Rng rng(cfg.seed);  // init + dropout
    Rng shuffle_rng(splitmix64(cfg.seed ^ 0x9e3779b97f4a7c15ull));
    ModelParams<Scalar> params = init_params<Scalar>(vcfg, ms.dim(), num_classes, rng);
    Optimizer<Scalar> opt(cfg, params);

    const MessageSet<Scalar> ms_val = ms.gather(val_ids);
    const std::vector<int> labels_val = detail::gather_labels(labels, val_ids);

    TrainResult<Scalar> result;
    auto& hist = result.history;
    hist.best_val_accuracy = -1.0;
    double last_val = 0.0;

    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(train_ids);

        double loss_sum = 0.0;
        Index seen = 0;
        for (std::size_t start = 0; start < train_ids.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(train_ids.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Index> batch(train_ids.begin() + static_cast<std::ptrdiff_t>(start),
                                     train_ids.begin() + static_cast<std::ptrdiff_t>(stop));
            std::sort(batch.begin(), batch.end());

            const MessageSet<Scalar> sub = ms.gather(batch);
            const std::vector<int> sub_labels = detail::gather_labels(labels, batch);
            const std::vector<std::uint8_t> sub_mask(batch.size(), 1);

            ForwardTrace<Scalar> trace = forward(params, vcfg, sub, /*train_mode=*/true, rng);
            const LossResult<Scalar> lr = loss(trace, vcfg, sub_labels, sub_mask, epoch, cfg.epochs);
            if (!std::isfinite(static_cast<double>(lr.total)))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
            const ModelParams<Scalar> grads =
                backward(params, vcfg, sub, sub_labels, sub_mask, epoch, cfg.epochs, trace);
            opt.step(params, grads);

            loss_sum += static_cast<double>(lr.total) * static_cast<double>(batch.size());
            seen += static_cast<Index>(batch.size());
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.alpha = loss_schedule_alpha(epoch, cfg.epochs);

        const bool do_eval = ((epoch + 1) % cfg.eval_every == 0) || epoch + 1 == cfg.epochs;
        if (do_eval) {
            last_val = detail::accuracy_on(params, vcfg, ms_val, labels_val);
            if (last_val > hist.best_val_accuracy) {
                hist.best_val_accuracy = last_val;
                hist.best_epoch = epoch;
                hist.best_params = params;
            }
        }
        rec.val_accuracy = last_val;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        hist.epochs.push_back(rec);

        if (do_eval && epoch - hist.best_epoch >= cfg.patience) break;
    }

    result.params = hist.best_epoch >= 0 ? hist.best_params : params;
    return result;
}

struct TrialStats {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> accuracies;
};

/// Repeated train/evaluate runs with seeds derived from the base seed;
/// reports mean and population standard deviation of test accuracy.
template <typename Scalar>
TrialStats run_trials(const TrainConfig& cfg, const VariantConfig& vcfg,
                      const MessageSet<Scalar>& ms, const std::vector<int>& labels,
                      const Splits& splits, Index n_trials) {
    if (n_trials < 1) throw InputError("run_trials: n_trials must be >= 1");
    if (splits.test.size() != static_cast<std::size_t>(ms.num_nodes()))
        throw InputError("run_trials: test mask does not match message set");

    TrialStats stats;
    for (Index i = 0; i < n_trials; ++i) {
        TrainConfig trial_cfg = cfg;
        trial_cfg.seed = splitmix64(cfg.seed + static_cast<std::uint64_t>(i));
        const TrainResult<Scalar> res = train(trial_cfg, vcfg, ms, labels, splits);
        stats.accuracies.push_back(evaluate(res.params, vcfg, ms, labels, splits.test));
    }
    for (double a : stats.accuracies) stats.mean += a;
    stats.mean /= static_cast<double>(stats.accuracies.size());
    double var = 0.0;
    for (double a : stats.accuracies) var += (a - stats.mean) * (a - stats.mean);
    stats.stddev = std::sqrt(var / static_cast<double>(stats.accuracies.size()));
    return stats;
}

}  // namespace gmlp
