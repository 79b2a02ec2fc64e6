#pragma once

#include "gmlp/common.hpp"
#include "gmlp/message_agg.hpp"
#include "gmlp/propagation.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gmlp {

enum class Variant { GU, GMU, Full };
enum class ReferenceSource { LastHidden, Logits };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::GU: return "gu";
        case Variant::GMU: return "gmu";
        case Variant::Full: return "full";
    }
    return "?";
}

inline std::optional<Variant> variant_from_string(const std::string& s) {
    if (s == "gu") return Variant::GU;
    if (s == "gmu") return Variant::GMU;
    if (s == "full") return Variant::Full;
    return std::nullopt;
}

struct VariantConfig {
    Variant variant = Variant::Full;
    OperatorKind graph_agg = OperatorKind::AugNormAdj;
    double restart_alpha = 0.15;                          // ppr only
    MessageAggKind message_agg = MessageAggKind::Concat;  // GMU only
    Index num_steps = 2;                                  // T
    std::vector<Index> hidden_widths = {64};
    double dropout = 0.5;
    ReferenceSource reference_source = ReferenceSource::LastHidden;
};

// Deterministic RNG shared by init, dropout and batch shuffling. Draws are
// derived from the raw mt19937_64 stream so sequences do not depend on the
// standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t next_u64() { return gen_(); }

    // Fisher-Yates; index draws use rejection-free modulo (bias immaterial here).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[static_cast<std::size_t>(gen_() % i)]);
    }

private:
    std::mt19937_64 gen_;
};

template <typename Scalar>
struct MlpLayer {
    Matrix<Scalar> weight;  // out x in
    Vector<Scalar> bias;    // out
};

template <typename Scalar>
struct AttentionParams {
    Matrix<Scalar> w1;  // h_att x d
    Matrix<Scalar> w2;  // h_att x h_ref
    Vector<Scalar> q;   // h_att
};

/// All trainable tensors. Also serves as the gradient container, since
/// gradients share the exact shape.
template <typename Scalar>
struct ModelParams {
    std::vector<MlpLayer<Scalar>> na_mlp;
    std::vector<MlpLayer<Scalar>> sga_mlp;  // dual-branch only
    AttentionParams<Scalar> attention;      // dual-branch only
    Vector<Scalar> gating_s;                // gating aggregator only

    Index parameter_count() const {
        Index n = 0;
        for_each_tensor([&n](const auto& t) { n += t.size(); });
        return n;
    }

    // Visits every tensor in declaration order; checkpoints and the
    // optimizer state rely on this order being stable.
    template <typename F>
    void for_each_tensor(F&& f) {
        for (auto& l : na_mlp) { f(l.weight); f(l.bias); }
        for (auto& l : sga_mlp) { f(l.weight); f(l.bias); }
        f(attention.w1);
        f(attention.w2);
        f(attention.q);
        f(gating_s);
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        for (const auto& l : na_mlp) { f(l.weight); f(l.bias); }
        for (const auto& l : sga_mlp) { f(l.weight); f(l.bias); }
        f(attention.w1);
        f(attention.w2);
        f(attention.q);
        f(gating_s);
    }
};

template <typename Scalar>
ModelParams<Scalar> zero_like(const ModelParams<Scalar>& p) {
    ModelParams<Scalar> z = p;
    z.for_each_tensor([](auto& t) { t.setZero(); });
    return z;
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> glorot_uniform(Index rows, Index cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix<Scalar> m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<Scalar>(rng.uniform(-limit, limit));
    return m;
}

template <typename Scalar>
std::vector<MlpLayer<Scalar>> make_mlp(const std::vector<Index>& widths, Rng& rng) {
    std::vector<MlpLayer<Scalar>> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        MlpLayer<Scalar> l;
        l.weight = glorot_uniform<Scalar>(widths[i + 1], widths[i], rng);
        l.bias = Vector<Scalar>::Zero(widths[i + 1]);
        layers.push_back(std::move(l));
    }
    return layers;
}

}  // namespace detail

/// Input width of the classifier for a given variant/aggregator.
inline Index na_input_width(const VariantConfig& cfg, Index feature_dim) {
    const Index stack = (cfg.num_steps + 1) * feature_dim;
    switch (cfg.variant) {
        case Variant::GU: return feature_dim;
        case Variant::Full: return stack;  // dual branch concatenates
        case Variant::GMU:
            return cfg.message_agg == MessageAggKind::Concat ? stack : feature_dim;
    }
    return feature_dim;
}

/// Fresh parameters for a variant. Weight matrices are Glorot-uniform and
/// biases zero. The attention probe q and the gating vector s start at zero,
/// so the first adaptive forward equals mean pooling while W1/W2 keep the
/// score surface non-degenerate once q moves.
template <typename Scalar>
ModelParams<Scalar> init_params(const VariantConfig& cfg, Index feature_dim, Index num_classes,
                                Rng& rng) {
    if (cfg.variant == Variant::GMU && cfg.message_agg == MessageAggKind::Attention)
        throw ConfigError("gmu cannot use the attention aggregator (no reference vector)");
    if (cfg.variant == Variant::Full && cfg.reference_source == ReferenceSource::LastHidden &&
        cfg.hidden_widths.empty())
        throw ConfigError("reference_source=last_hidden requires at least one hidden layer");

    ModelParams<Scalar> p;
    std::vector<Index> na_widths;
    na_widths.push_back(na_input_width(cfg, feature_dim));
    na_widths.insert(na_widths.end(), cfg.hidden_widths.begin(), cfg.hidden_widths.end());
    na_widths.push_back(num_classes);
    p.na_mlp = detail::make_mlp<Scalar>(na_widths, rng);

    p.attention.w1.resize(0, 0);
    p.attention.w2.resize(0, 0);
    p.attention.q.resize(0);
    p.gating_s.resize(0);

    if (cfg.variant == Variant::Full) {
        std::vector<Index> sga_widths;
        sga_widths.push_back(feature_dim);
        sga_widths.insert(sga_widths.end(), cfg.hidden_widths.begin(), cfg.hidden_widths.end());
        sga_widths.push_back(num_classes);
        p.sga_mlp = detail::make_mlp<Scalar>(sga_widths, rng);

        const Index h_ref = cfg.reference_source == ReferenceSource::LastHidden
                                ? cfg.hidden_widths.back()
                                : num_classes;
        // The scorer only has to rank T+1 step messages, so its width is
        // capped independently of the classifier stack.
        const Index h_att =
            std::min<Index>(cfg.hidden_widths.empty() ? num_classes : cfg.hidden_widths.back(),
                            Index{8});
        p.attention.w1 = detail::glorot_uniform<Scalar>(h_att, feature_dim, rng);
        p.attention.w2 = detail::glorot_uniform<Scalar>(h_att, h_ref, rng);
        p.attention.q = Vector<Scalar>::Zero(h_att);
    } else if (cfg.variant == Variant::GMU && cfg.message_agg == MessageAggKind::Gating) {
        p.gating_s = Vector<Scalar>::Zero(feature_dim);
    }
    return p;
}

template <typename Scalar>
struct MlpCache {
    std::vector<Matrix<Scalar>> inputs;         // input to each layer (post-dropout)
    std::vector<Matrix<Scalar>> relu_out;       // per hidden layer, pre-dropout
    std::vector<Matrix<Scalar>> dropout_scale;  // per hidden layer, 0 or 1/(1-p)
};

/// Plain MLP: affine -> ReLU -> dropout per hidden layer, final layer affine
/// only. Inverted dropout, active only in train mode.
template <typename Scalar>
Matrix<Scalar> mlp_forward(const std::vector<MlpLayer<Scalar>>& layers, const Matrix<Scalar>& input,
                           double dropout, bool train_mode, Rng& rng,
                           MlpCache<Scalar>* cache = nullptr) {
    if (layers.empty()) throw InputError("mlp_forward: no layers");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw InputError("mlp_forward: dropout must lie in [0,1)");
    if (cache) {
        cache->inputs.clear();
        cache->relu_out.clear();
        cache->dropout_scale.clear();
    }

    Matrix<Scalar> a = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.weight.cols() != a.cols())
            throw InputError("mlp_forward: layer " + std::to_string(i) + " expects width " +
                             std::to_string(l.weight.cols()) + ", got " + std::to_string(a.cols()));
        if (cache) cache->inputs.push_back(a);
        Matrix<Scalar> z = a * l.weight.transpose();
        z.rowwise() += l.bias.transpose();
        if (i + 1 == layers.size()) return z;  // logits

        Matrix<Scalar> r = z.cwiseMax(Scalar(0));
        if (cache) cache->relu_out.push_back(r);
        if (train_mode && dropout > 0.0) {
            const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - dropout));
            Matrix<Scalar> mask(r.rows(), r.cols());
            for (Index v = 0; v < r.rows(); ++v)
                for (Index j = 0; j < r.cols(); ++j)
                    mask(v, j) = rng.uniform() < dropout ? Scalar(0) : keep_scale;
            if (cache) cache->dropout_scale.push_back(mask);
            a = r.cwiseProduct(mask);
        } else {
            if (cache) cache->dropout_scale.push_back(Matrix<Scalar>());
            a = std::move(r);
        }
    }
    return a;  // unreachable
}

namespace detail {

// Reverse pass of mlp_forward. extra_last_input_grad, when given, is added
// to the gradient at the final layer's input (the branch reference taps that
// activation). d_input receives the gradient w.r.t. the MLP input.
template <typename Scalar>
void mlp_backward(const std::vector<MlpLayer<Scalar>>& layers, const MlpCache<Scalar>& cache,
                  const Matrix<Scalar>& d_logits, const Matrix<Scalar>* extra_last_input_grad,
                  std::vector<MlpLayer<Scalar>>& grads, Matrix<Scalar>* d_input = nullptr) {
    if (cache.inputs.size() != layers.size())
        throw ContractError("mlp_backward: cache does not match layer stack");
    Matrix<Scalar> delta = d_logits;
    for (std::size_t ri = layers.size(); ri-- > 0;) {
        const auto& a_in = cache.inputs[ri];
        grads[ri].weight.noalias() += delta.transpose() * a_in;
        grads[ri].bias.noalias() += delta.colwise().sum().transpose();
        if (ri == 0 && d_input == nullptr) break;
        Matrix<Scalar> da = delta * layers[ri].weight;
        if (ri == layers.size() - 1 && extra_last_input_grad) da += *extra_last_input_grad;
        if (ri == 0) {
            *d_input = std::move(da);
            break;
        }
        const std::size_t hi = ri - 1;  // hidden block feeding this layer
        if (cache.dropout_scale[hi].size() > 0) da = da.cwiseProduct(cache.dropout_scale[hi]);
        delta = da.cwiseProduct(
            (cache.relu_out[hi].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
}

inline int count_mask(const std::vector<std::uint8_t>& mask) {
    int n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
}

// Mean cross entropy over masked rows, numerically stable.
template <typename Scalar>
Scalar masked_cross_entropy(const Matrix<Scalar>& logits, const std::vector<int>& labels,
                            const std::vector<std::uint8_t>& mask) {
    const Index n = logits.rows(), c = logits.cols();
    Scalar total = Scalar(0);
    Index count = 0;
    for (Index v = 0; v < n; ++v) {
        if (!mask[static_cast<std::size_t>(v)]) continue;
        const int y = labels[static_cast<std::size_t>(v)];
        if (y < 0 || y >= c)
            throw InputError("cross_entropy: label " + std::to_string(y) + " out of range at node " +
                             std::to_string(v));
        const Scalar m = logits.row(v).maxCoeff();
        const Scalar lse = std::log((logits.row(v).array() - m).exp().sum());
        total += lse - (logits(v, y) - m);
        ++count;
    }
    if (count == 0) throw InputError("cross_entropy: mask selects no nodes");
    return total / static_cast<Scalar>(count);
}

// d(mean CE)/d(logits), scaled by `weight`; rows outside the mask stay zero.
template <typename Scalar>
Matrix<Scalar> masked_cross_entropy_grad(const Matrix<Scalar>& logits,
                                         const std::vector<int>& labels,
                                         const std::vector<std::uint8_t>& mask, Scalar weight) {
    const Index n = logits.rows();
    Matrix<Scalar> d = Matrix<Scalar>::Zero(n, logits.cols());
    const int count = count_mask(mask);
    if (count == 0) throw InputError("cross_entropy: mask selects no nodes");
    const Scalar scale = weight / static_cast<Scalar>(count);
    for (Index v = 0; v < n; ++v) {
        if (!mask[static_cast<std::size_t>(v)]) continue;
        const int y = labels[static_cast<std::size_t>(v)];
        if (y < 0 || y >= d.cols())
            throw InputError("cross_entropy: label " + std::to_string(y) + " out of range at node " +
                             std::to_string(v));
        const Scalar m = logits.row(v).maxCoeff();
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic> p = (logits.row(v).array() - m).exp();
        p /= p.sum();
        d.row(v) = p * scale;
        d(v, y) -= scale;
    }
    return d;
}

}  // namespace detail

template <typename Scalar>
struct ForwardTrace {
    Matrix<Scalar> logits_na;   // single-branch variants put their logits here
    Matrix<Scalar> logits_sga;  // dual-branch only
    Matrix<Scalar> attn;        // attention weights (dual) or raw gate values (gating)

    Matrix<Scalar> na_input;
    MlpCache<Scalar> na_cache;
    Matrix<Scalar> reference;
    AttentionCache<Scalar> att_cache;
    Matrix<Scalar> sga_input;
    MlpCache<Scalar> sga_cache;
    IndexMatrix max_argmax;
    bool train_mode = false;
};

/// Variant dispatch: GU classifies the final step, GMU classifies one
/// aggregated vector, the dual-branch model classifies both the concatenated
/// stack and the reference-guided attention combination.
template <typename Scalar>
ForwardTrace<Scalar> forward(const ModelParams<Scalar>& params, const VariantConfig& cfg,
                             const MessageSet<Scalar>& ms, bool train_mode, Rng& rng) {
    if (ms.num_steps() != cfg.num_steps)
        throw InputError("forward: message set has T=" + std::to_string(ms.num_steps()) +
                         ", config expects T=" + std::to_string(cfg.num_steps));

    ForwardTrace<Scalar> trace;
    trace.train_mode = train_mode;

    switch (cfg.variant) {
        case Variant::GU:
            trace.na_input = ms.steps.back();
            trace.logits_na =
                mlp_forward(params.na_mlp, trace.na_input, cfg.dropout, train_mode, rng, &trace.na_cache);
            return trace;

        case Variant::GMU: {
            if (cfg.message_agg == MessageAggKind::Attention)
                throw ConfigError("gmu cannot use the attention aggregator (no reference vector)");
            if (cfg.message_agg == MessageAggKind::Gating) {
                auto gat = combine_gating(ms, params.gating_s);
                trace.na_input = std::move(gat.combined);
                trace.attn = std::move(gat.weights);
            } else {
                trace.na_input = combine_nonadaptive(ms, cfg.message_agg, &trace.max_argmax);
            }
            trace.logits_na =
                mlp_forward(params.na_mlp, trace.na_input, cfg.dropout, train_mode, rng, &trace.na_cache);
            return trace;
        }

        case Variant::Full: {
            trace.na_input = combine_nonadaptive(ms, MessageAggKind::Concat);
            trace.logits_na =
                mlp_forward(params.na_mlp, trace.na_input, cfg.dropout, train_mode, rng, &trace.na_cache);
            if (cfg.reference_source == ReferenceSource::LastHidden) {
                if (params.na_mlp.size() < 2)
                    throw ConfigError("reference_source=last_hidden requires a hidden layer");
                trace.reference = trace.na_cache.inputs.back();
            } else {
                trace.reference = trace.logits_na;
            }
            auto att = combine_attention(ms, trace.reference, params.attention.w1,
                                         params.attention.w2, params.attention.q, &trace.att_cache);
            trace.attn = std::move(att.weights);
            trace.sga_input = std::move(att.combined);
            trace.logits_sga = mlp_forward(params.sga_mlp, trace.sga_input, cfg.dropout, train_mode,
                                           rng, &trace.sga_cache);
            return trace;
        }
    }
    throw ContractError("forward: unknown variant");
}

/// Loss weight schedule over the training horizon; exact at both endpoints.
inline double loss_schedule_alpha(Index epoch, Index total_epochs) {
    if (total_epochs < 1) throw InputError("loss_schedule_alpha: total_epochs must be >= 1");
    if (epoch < 0 || epoch > total_epochs)
        throw InputError("loss_schedule_alpha: epoch " + std::to_string(epoch) + " outside [0, " +
                         std::to_string(total_epochs) + "]");
    if (epoch == 0) return 1.0;
    if (epoch == total_epochs) return 0.0;
    return std::cos(std::numbers::pi * static_cast<double>(epoch) /
                    (2.0 * static_cast<double>(total_epochs)));
}

template <typename Scalar>
struct LossResult {
    Scalar total = Scalar(0);
    Scalar loss_na = Scalar(0);
    Scalar loss_sga = Scalar(0);
    double alpha = 1.0;
};

/// Scheduled combination of the two branch losses; single-branch variants
/// report their one loss with alpha = 1.
template <typename Scalar>
LossResult<Scalar> loss(const ForwardTrace<Scalar>& trace, const VariantConfig& cfg,
                        const std::vector<int>& labels, const std::vector<std::uint8_t>& mask,
                        Index epoch, Index total_epochs) {
    LossResult<Scalar> r;
    r.loss_na = detail::masked_cross_entropy(trace.logits_na, labels, mask);
    if (cfg.variant != Variant::Full) {
        r.alpha = 1.0;
        r.total = r.loss_na;
        return r;
    }
    r.alpha = loss_schedule_alpha(epoch, total_epochs);
    r.loss_sga = detail::masked_cross_entropy(trace.logits_sga, labels, mask);
    r.total = static_cast<Scalar>(r.alpha) * r.loss_na +
              static_cast<Scalar>(1.0 - r.alpha) * r.loss_sga;
    return r;
}

/// Reverse-mode gradients of the scheduled loss for every parameter tensor.
/// The attention branch backpropagates through its reference vector into the
/// other branch's MLP. Branch weights of exactly zero skip that branch, so
/// its exclusive parameters receive exact zeros.
template <typename Scalar>
ModelParams<Scalar> backward(const ModelParams<Scalar>& params, const VariantConfig& cfg,
                             const MessageSet<Scalar>& ms, const std::vector<int>& labels,
                             const std::vector<std::uint8_t>& mask, Index epoch,
                             Index total_epochs, const ForwardTrace<Scalar>& trace) {
    if (trace.na_cache.inputs.size() != params.na_mlp.size())
        throw ContractError("backward: trace does not match parameter stack");
    if (trace.logits_na.rows() != ms.num_nodes())
        throw ContractError("backward: trace does not match message set");

    ModelParams<Scalar> grads = zero_like(params);

    if (cfg.variant != Variant::Full) {
        Matrix<Scalar> dl =
            detail::masked_cross_entropy_grad(trace.logits_na, labels, mask, Scalar(1));
        if (cfg.variant == Variant::GMU && cfg.message_agg == MessageAggKind::Gating) {
            Matrix<Scalar> d_comb;
            detail::mlp_backward<Scalar>(params.na_mlp, trace.na_cache, dl, nullptr, grads.na_mlp, &d_comb);
            const auto steps = static_cast<Index>(ms.steps.size());
            for (Index t = 0; t < steps; ++t) {
                const auto& m = ms.steps[static_cast<std::size_t>(t)];
                Vector<Scalar> dw = (d_comb.array() * m.array()).rowwise().sum();
                Vector<Scalar> dg = dw.array() * trace.attn.col(t).array() *
                                    (Scalar(1) - trace.attn.col(t).array());
                grads.gating_s.noalias() += m.transpose() * dg;
            }
        } else {
            detail::mlp_backward<Scalar>(params.na_mlp, trace.na_cache, dl, nullptr, grads.na_mlp);
        }
        return grads;
    }

    const double alpha = loss_schedule_alpha(epoch, total_epochs);
    const Scalar w_na = static_cast<Scalar>(alpha);
    const Scalar w_sga = static_cast<Scalar>(1.0 - alpha);

    Matrix<Scalar> d_reference;
    if (w_sga != Scalar(0)) {
        Matrix<Scalar> dl_sga =
            detail::masked_cross_entropy_grad(trace.logits_sga, labels, mask, w_sga);
        Matrix<Scalar> d_comb;
        detail::mlp_backward<Scalar>(params.sga_mlp, trace.sga_cache, dl_sga, nullptr, grads.sga_mlp,
                             &d_comb);

        // Attention backward: combined -> weights -> softmax -> scores.
        const auto steps = static_cast<Index>(ms.steps.size());
        const Index n = ms.num_nodes();
        Matrix<Scalar> dw(n, steps);
        for (Index t = 0; t < steps; ++t)
            dw.col(t) =
                (d_comb.array() * ms.steps[static_cast<std::size_t>(t)].array()).rowwise().sum();
        Vector<Scalar> row_dot = (dw.array() * trace.attn.array()).rowwise().sum();
        Matrix<Scalar> dscore =
            trace.attn.array() * (dw.array().colwise() - row_dot.array());

        d_reference = Matrix<Scalar>::Zero(n, trace.reference.cols());
        for (Index t = 0; t < steps; ++t) {
            const auto& z = trace.att_cache.tanh_scores[static_cast<std::size_t>(t)];
            grads.attention.q.noalias() += z.transpose() * dscore.col(t);
            Matrix<Scalar> da = (dscore.col(t) * params.attention.q.transpose()).array() *
                                (Scalar(1) - z.array().square());
            grads.attention.w1.noalias() +=
                da.transpose() * ms.steps[static_cast<std::size_t>(t)];
            grads.attention.w2.noalias() += da.transpose() * trace.reference;
            d_reference.noalias() += da * params.attention.w2;
        }
    }

    Matrix<Scalar> dl_na = detail::masked_cross_entropy_grad(trace.logits_na, labels, mask, w_na);
    if (cfg.reference_source == ReferenceSource::Logits && d_reference.size() > 0)
        dl_na += d_reference;
    const Matrix<Scalar>* extra =
        (cfg.reference_source == ReferenceSource::LastHidden && d_reference.size() > 0)
            ? &d_reference
            : nullptr;
    detail::mlp_backward<Scalar>(params.na_mlp, trace.na_cache, dl_na, extra, grads.na_mlp);
    return grads;
}

/// Argmax class per node from the inference branch (the attention branch for
/// the dual model). Ties resolve to the smallest class index.
template <typename Scalar>
std::vector<int> predict(const ModelParams<Scalar>& params, const VariantConfig& cfg,
                         const MessageSet<Scalar>& ms) {
    Rng rng(0);  // eval mode draws nothing
    ForwardTrace<Scalar> trace = forward(params, cfg, ms, /*train_mode=*/false, rng);
    const Matrix<Scalar>& logits =
        cfg.variant == Variant::Full ? trace.logits_sga : trace.logits_na;
    std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
    for (Index v = 0; v < logits.rows(); ++v) {
        int best = 0;
        for (Index c = 1; c < logits.cols(); ++c)
            if (logits(v, c) > logits(v, best)) best = static_cast<int>(c);
        labels[static_cast<std::size_t>(v)] = best;
    }
    return labels;
}

}  // namespace gmlp
