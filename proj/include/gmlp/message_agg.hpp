#pragma once

#include "gmlp/common.hpp"
#include "gmlp/propagation.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace gmlp {

enum class MessageAggKind { Concat, MeanPool, MaxPool, Gating, Attention };

inline const char* to_string(MessageAggKind k) {
    switch (k) {
        case MessageAggKind::Concat: return "concat";
        case MessageAggKind::MeanPool: return "mean_pool";
        case MessageAggKind::MaxPool: return "max_pool";
        case MessageAggKind::Gating: return "gating";
        case MessageAggKind::Attention: return "attention";
    }
    return "?";
}

inline std::optional<MessageAggKind> message_agg_from_string(const std::string& s) {
    if (s == "concat") return MessageAggKind::Concat;
    if (s == "mean_pool") return MessageAggKind::MeanPool;
    if (s == "max_pool") return MessageAggKind::MaxPool;
    if (s == "gating") return MessageAggKind::Gating;
    if (s == "attention") return MessageAggKind::Attention;
    return std::nullopt;
}

using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

/// Step-wise combination without trainable weights: horizontal concatenation
/// in step order, or elementwise mean/max across steps. For max pooling the
/// optional argmax output records which step won each entry (earliest step
/// on ties).
template <typename Scalar>
Matrix<Scalar> combine_nonadaptive(const MessageSet<Scalar>& ms, MessageAggKind kind,
                                   IndexMatrix* argmax = nullptr) {
    if (ms.steps.empty()) throw InputError("combine_nonadaptive: empty message set");
    const Index n = ms.num_nodes(), d = ms.dim();
    const auto num = static_cast<Index>(ms.steps.size());

    switch (kind) {
        case MessageAggKind::Concat: {
            Matrix<Scalar> out(n, num * d);
            for (Index t = 0; t < num; ++t)
                out.block(0, t * d, n, d) = ms.steps[static_cast<std::size_t>(t)];
            return out;
        }
        case MessageAggKind::MeanPool: {
            Matrix<Scalar> out = ms.steps[0];
            for (Index t = 1; t < num; ++t) out += ms.steps[static_cast<std::size_t>(t)];
            out *= Scalar(1) / static_cast<Scalar>(num);
            return out;
        }
        case MessageAggKind::MaxPool: {
            Matrix<Scalar> out = ms.steps[0];
            if (argmax) argmax->setZero(n, d);
            for (Index t = 1; t < num; ++t) {
                const auto& m = ms.steps[static_cast<std::size_t>(t)];
                for (Index v = 0; v < n; ++v)
                    for (Index j = 0; j < d; ++j)
                        if (m(v, j) > out(v, j)) {
                            out(v, j) = m(v, j);
                            if (argmax) (*argmax)(v, j) = t;
                        }
            }
            return out;
        }
        default:
            throw ContractError("combine_nonadaptive: adaptive kind passed");
    }
}

template <typename Scalar>
struct AdaptiveCombine {
    Matrix<Scalar> combined;  // N x d
    Matrix<Scalar> weights;   // N x (T+1) retainment scores
};

/// Gating: w_{v,i} = sigmoid(s . m_v^i), c_v = sum_i w_{v,i} m_v^i. The gate
/// values are returned as-is; rows are deliberately not normalized.
template <typename Scalar>
AdaptiveCombine<Scalar> combine_gating(const MessageSet<Scalar>& ms, const Vector<Scalar>& s) {
    if (ms.steps.empty()) throw InputError("combine_gating: empty message set");
    const Index n = ms.num_nodes(), d = ms.dim();
    if (s.size() != d)
        throw InputError("combine_gating: gate vector has length " + std::to_string(s.size()) +
                         ", messages have dim " + std::to_string(d));
    const auto num = static_cast<Index>(ms.steps.size());

    AdaptiveCombine<Scalar> out;
    out.weights.resize(n, num);
    out.combined.setZero(n, d);
    for (Index t = 0; t < num; ++t) {
        const auto& m = ms.steps[static_cast<std::size_t>(t)];
        Vector<Scalar> gate = m * s;
        for (Index v = 0; v < n; ++v) out.weights(v, t) = stable_sigmoid(gate(v));
        out.combined.array() += m.array().colwise() * out.weights.col(t).array();
    }
    return out;
}

template <typename Scalar>
struct AttentionCache {
    std::vector<Matrix<Scalar>> tanh_scores;  // per step, N x h_att
};

/// Reference-guided attention over steps: score_{v,i} = q . tanh(W1 m_v^i +
/// W2 r_v), weights softmax over i (row max subtracted), c_v the weighted sum
/// of the node's messages.
template <typename Scalar>
AdaptiveCombine<Scalar> combine_attention(const MessageSet<Scalar>& ms,
                                          const Matrix<Scalar>& reference,
                                          const Matrix<Scalar>& w1, const Matrix<Scalar>& w2,
                                          const Vector<Scalar>& q,
                                          AttentionCache<Scalar>* cache = nullptr) {
    if (ms.steps.empty()) throw InputError("combine_attention: empty message set");
    const Index n = ms.num_nodes(), d = ms.dim();
    const Index h = reference.cols();
    const Index h_att = q.size();
    if (reference.rows() != n)
        throw InputError("combine_attention: reference has " + std::to_string(reference.rows()) +
                         " rows, expected " + std::to_string(n));
    if (w1.rows() != h_att || w1.cols() != d)
        throw InputError("combine_attention: W1 must be " + std::to_string(h_att) + "x" +
                         std::to_string(d));
    if (w2.rows() != h_att || w2.cols() != h)
        throw InputError("combine_attention: W2 must be " + std::to_string(h_att) + "x" +
                         std::to_string(h));
    const auto num = static_cast<Index>(ms.steps.size());

    const Matrix<Scalar> ref_proj = reference * w2.transpose();  // N x h_att
    Matrix<Scalar> scores(n, num);
    if (cache) cache->tanh_scores.resize(static_cast<std::size_t>(num));
    for (Index t = 0; t < num; ++t) {
        Matrix<Scalar> z =
            (ms.steps[static_cast<std::size_t>(t)] * w1.transpose() + ref_proj).array().tanh();
        scores.col(t) = z * q;
        if (cache) cache->tanh_scores[static_cast<std::size_t>(t)] = std::move(z);
    }
    if (!all_finite(scores)) throw NumericError("combine_attention: non-finite attention scores");

    AdaptiveCombine<Scalar> out;
    out.weights.resize(n, num);
    for (Index v = 0; v < n; ++v) {
        const Scalar m = scores.row(v).maxCoeff();
        out.weights.row(v) = (scores.row(v).array() - m).exp();
        out.weights.row(v) /= out.weights.row(v).sum();
    }
    out.combined.setZero(n, d);
    for (Index t = 0; t < num; ++t)
        out.combined.array() +=
            ms.steps[static_cast<std::size_t>(t)].array().colwise() * out.weights.col(t).array();
    return out;
}

}  // namespace gmlp
