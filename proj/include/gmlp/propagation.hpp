#pragma once

#include "gmlp/common.hpp"
#include "gmlp/csr_graph.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace gmlp {

enum class OperatorKind { AugNormAdj, RandomWalk, Ppr, Triangle };

inline const char* to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::AugNormAdj: return "aug_norm_adj";
        case OperatorKind::RandomWalk: return "random_walk";
        case OperatorKind::Ppr: return "ppr";
        case OperatorKind::Triangle: return "triangle";
    }
    return "?";
}

inline std::optional<OperatorKind> operator_kind_from_string(const std::string& s) {
    if (s == "aug_norm_adj") return OperatorKind::AugNormAdj;
    if (s == "random_walk") return OperatorKind::RandomWalk;
    if (s == "ppr") return OperatorKind::Ppr;
    if (s == "triangle") return OperatorKind::Triangle;
    return std::nullopt;
}

/// A normalized sparse operator applied once per propagation step. Owns its
/// own CSR structure: for the triangle kind it differs from the source graph
/// (self-loops dropped, zero-weight rows fall back to an identity row).
template <typename Scalar>
struct PropagationOperator {
    OperatorKind kind = OperatorKind::AugNormAdj;
    Index num_nodes = 0;
    std::vector<Index> row_offsets;
    std::vector<Index> col_indices;
    std::vector<Scalar> coeffs;  // aligned with col_indices
    Scalar restart_alpha = Scalar(0);  // ppr only

    Index nnz() const { return static_cast<Index>(col_indices.size()); }
    Index row_begin(Index v) const { return row_offsets[static_cast<std::size_t>(v)]; }
    Index row_end(Index v) const { return row_offsets[static_cast<std::size_t>(v) + 1]; }
};

template <typename Scalar>
PropagationOperator<Scalar> make_operator(const CsrGraph& g, OperatorKind kind,
                                          std::optional<double> restart_alpha = std::nullopt) {
    if (kind == OperatorKind::Ppr) {
        if (!restart_alpha)
            throw InputError("make_operator: ppr requires restart_alpha");
        if (!(*restart_alpha > 0.0 && *restart_alpha <= 1.0))
            throw InputError("make_operator: restart_alpha must lie in (0,1], got " +
                             std::to_string(*restart_alpha));
    } else if (restart_alpha) {
        throw InputError("make_operator: restart_alpha is only meaningful for ppr");
    }

    PropagationOperator<Scalar> op;
    op.kind = kind;
    op.num_nodes = g.num_nodes;

    if (kind == OperatorKind::Triangle) {
        const TriangleWeights tw = count_edge_triangles(g);
        op.row_offsets.assign(static_cast<std::size_t>(g.num_nodes) + 1, 0);
        for (Index v = 0; v < g.num_nodes; ++v) {
            const double total = tw.node_totals[static_cast<std::size_t>(v)];
            if (total == 0.0) {
                // No triangle-carrying edge: keep the node's own message.
                op.col_indices.push_back(v);
                op.coeffs.push_back(Scalar(1));
            } else {
                for (Index e = g.row_begin(v); e < g.row_end(v); ++e) {
                    const Index u = g.col_indices[static_cast<std::size_t>(e)];
                    const Index w = tw.edge_weights[static_cast<std::size_t>(e)];
                    if (u == v || w == 0) continue;
                    op.col_indices.push_back(u);
                    op.coeffs.push_back(static_cast<Scalar>(static_cast<double>(w) / total));
                }
            }
            op.row_offsets[static_cast<std::size_t>(v) + 1] = static_cast<Index>(op.col_indices.size());
        }
        return op;
    }

    if (!g.has_self_loops)
        throw ContractError(std::string("make_operator: ") + to_string(kind) +
                            " requires the self-augmented graph");
    const DegreeVector deg = augmented_degrees(g);
    op.row_offsets = g.row_offsets;
    op.col_indices = g.col_indices;
    op.coeffs.resize(g.col_indices.size());
    for (Index v = 0; v < g.num_nodes; ++v) {
        const double dv = deg.values[static_cast<std::size_t>(v)];
        for (Index e = g.row_begin(v); e < g.row_end(v); ++e) {
            const Index u = g.col_indices[static_cast<std::size_t>(e)];
            const double du = deg.values[static_cast<std::size_t>(u)];
            const double c = (kind == OperatorKind::RandomWalk) ? 1.0 / dv
                                                                : 1.0 / std::sqrt(dv * du);
            op.coeffs[static_cast<std::size_t>(e)] = static_cast<Scalar>(c);
        }
    }
    if (kind == OperatorKind::Ppr) op.restart_alpha = static_cast<Scalar>(*restart_alpha);
    return op;
}

namespace detail {

// Per-row propagation kernel shared by the single-shot and the batched
// paths. Accumulation runs in ascending neighbor order, so any split of the
// row range reproduces the unsplit result bit for bit.
template <typename Scalar>
void apply_step_rows(const PropagationOperator<Scalar>& op, const Matrix<Scalar>& m_prev,
                     const Matrix<Scalar>& m0, Index first_row, Index last_row,
                     Matrix<Scalar>& out) {
    const Index d = m_prev.cols();
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> acc(d);
    for (Index v = first_row; v < last_row; ++v) {
        acc.setZero();
        for (Index e = op.row_begin(v); e < op.row_end(v); ++e) {
            const Index u = op.col_indices[static_cast<std::size_t>(e)];
            acc += op.coeffs[static_cast<std::size_t>(e)] * m_prev.row(u);
        }
        if (op.kind == OperatorKind::Ppr)
            out.row(v) = op.restart_alpha * m0.row(v) + (Scalar(1) - op.restart_alpha) * acc;
        else
            out.row(v) = acc;
    }
}

}  // namespace detail

template <typename Scalar>
Matrix<Scalar> apply_step(const PropagationOperator<Scalar>& op, const Matrix<Scalar>& m_prev,
                          const Matrix<Scalar>& m0) {
    if (m_prev.rows() != op.num_nodes)
        throw InputError("apply_step: message matrix has " + std::to_string(m_prev.rows()) +
                         " rows, operator expects " + std::to_string(op.num_nodes));
    if (op.kind == OperatorKind::Ppr && (m0.rows() != m_prev.rows() || m0.cols() != m_prev.cols()))
        throw InputError("apply_step: m0 shape does not match m_prev");
    Matrix<Scalar> out(m_prev.rows(), m_prev.cols());
    detail::apply_step_rows(op, m_prev, m0, 0, op.num_nodes, out);
    return out;
}

/// The multi-scale message stack {m^0 .. m^T}; steps[0] is the raw feature
/// matrix and steps[t] is one operator application of steps[t-1].
template <typename Scalar>
struct MessageSet {
    std::vector<Matrix<Scalar>> steps;
    OperatorKind kind = OperatorKind::AugNormAdj;
    double restart_alpha = 0.0;

    Index num_steps() const { return static_cast<Index>(steps.size()) - 1; }
    Index num_nodes() const { return steps.empty() ? 0 : steps.front().rows(); }
    Index dim() const { return steps.empty() ? 0 : steps.front().cols(); }

    /// Row subset with the same step structure; batches of precomputed
    /// messages are independent, so a gather is all a mini-batch needs.
    MessageSet gather(const std::vector<Index>& rows) const {
        MessageSet out;
        out.kind = kind;
        out.restart_alpha = restart_alpha;
        out.steps.reserve(steps.size());
        for (const auto& m : steps) {
            Matrix<Scalar> sub(static_cast<Index>(rows.size()), m.cols());
            for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Index>(i)) = m.row(rows[i]);
            out.steps.push_back(std::move(sub));
        }
        return out;
    }
};

template <typename Scalar>
MessageSet<Scalar> propagate(const PropagationOperator<Scalar>& op, const Matrix<Scalar>& features,
                             Index num_steps) {
    if (num_steps < 0) throw InputError("propagate: step count must be >= 0");
    if (features.rows() != op.num_nodes)
        throw InputError("propagate: feature matrix has " + std::to_string(features.rows()) +
                         " rows, operator expects " + std::to_string(op.num_nodes));
    if (!all_finite(features)) throw InputError("propagate: feature matrix contains NaN/Inf");

    MessageSet<Scalar> ms;
    ms.kind = op.kind;
    ms.restart_alpha = static_cast<double>(op.restart_alpha);
    ms.steps.reserve(static_cast<std::size_t>(num_steps) + 1);
    ms.steps.push_back(features);
    for (Index t = 1; t <= num_steps; ++t)
        ms.steps.push_back(apply_step(op, ms.steps.back(), ms.steps.front()));
    if (!all_finite(ms.steps.back()))
        throw NumericError("propagate: non-finite message at step " + std::to_string(num_steps));
    return ms;
}

}  // namespace gmlp
