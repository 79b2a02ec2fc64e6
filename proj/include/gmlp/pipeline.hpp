#pragma once

#include "gmlp/common.hpp"
#include "gmlp/csr_graph.hpp"
#include "gmlp/propagation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gmlp {

enum class PartitionScheme { Range, Hash };

inline const char* to_string(PartitionScheme s) {
    return s == PartitionScheme::Range ? "range" : "hash";
}

inline std::optional<PartitionScheme> partition_scheme_from_string(const std::string& s) {
    if (s == "range") return PartitionScheme::Range;
    if (s == "hash") return PartitionScheme::Hash;
    return std::nullopt;
}

struct PartitionPlan {
    int num_workers = 1;
    std::vector<int> owner;  // one worker id per node
};

/// Assigns every node to exactly one simulated worker. Range partitions are
/// balanced within one node; hash assignment is deterministic in the node id.
inline PartitionPlan partition_nodes(const CsrGraph& g, int num_workers, PartitionScheme scheme) {
    if (num_workers < 1) throw InputError("partition_nodes: worker count must be >= 1");
    if (static_cast<Index>(num_workers) > g.num_nodes)
        throw InputError("partition_nodes: " + std::to_string(num_workers) + " workers for " +
                         std::to_string(g.num_nodes) + " nodes");
    PartitionPlan plan;
    plan.num_workers = num_workers;
    plan.owner.resize(static_cast<std::size_t>(g.num_nodes));
    if (scheme == PartitionScheme::Range) {
        const Index base = g.num_nodes / num_workers;
        const Index extra = g.num_nodes % num_workers;
        Index v = 0;
        for (int w = 0; w < num_workers; ++w) {
            const Index size = base + (w < extra ? 1 : 0);
            for (Index i = 0; i < size; ++i) plan.owner[static_cast<std::size_t>(v++)] = w;
        }
    } else {
        for (Index v = 0; v < g.num_nodes; ++v)
            plan.owner[static_cast<std::size_t>(v)] = static_cast<int>(
                splitmix64(static_cast<std::uint64_t>(v)) % static_cast<std::uint64_t>(num_workers));
    }
    return plan;
}

struct StepCost {
    std::uint64_t pulled = 0;  // message entries fetched across partitions
    std::uint64_t pushed = 0;  // computed entries written back to the store
    std::uint64_t local = 0;   // same-partition reads
};

/// Traffic is counted in message-vector entries, not bytes, so the numbers
/// are hardware-independent and exactly checkable against the cost model.
struct CostReport {
    std::uint64_t pulled_entries = 0;
    std::uint64_t pushed_entries = 0;
    std::uint64_t local_entries = 0;
    std::uint64_t flops_estimate = 0;
    std::vector<StepCost> per_step;
};

template <typename Scalar>
struct PrecomputeResult {
    MessageSet<Scalar> messages;
    CostReport cost;
};

/// Bulk-synchronous batched precompute. Each step reads only the previous
/// step's completed store; batches run in ascending batch index and ascending
/// node index, reusing the propagation row kernel, so the result is
/// bit-identical to propagate for every worker count and batch size.
template <typename Scalar>
PrecomputeResult<Scalar> precompute_batched(const PropagationOperator<Scalar>& op,
                                            const Matrix<Scalar>& features, Index num_steps,
                                            const PartitionPlan& plan, Index batch_size) {
    if (num_steps < 0) throw InputError("precompute_batched: step count must be >= 0");
    if (features.rows() != op.num_nodes)
        throw InputError("precompute_batched: feature matrix has " +
                         std::to_string(features.rows()) + " rows, operator expects " +
                         std::to_string(op.num_nodes));
    if (!all_finite(features)) throw InputError("precompute_batched: features contain NaN/Inf");
    if (plan.owner.size() != static_cast<std::size_t>(op.num_nodes))
        throw InputError("precompute_batched: partition plan does not match the graph");
    if (batch_size < 1) throw InputError("precompute_batched: batch_size must be >= 1");

    const Index n = op.num_nodes;
    const auto d = static_cast<std::uint64_t>(features.cols());

    PrecomputeResult<Scalar> res;
    res.messages.kind = op.kind;
    res.messages.restart_alpha = static_cast<double>(op.restart_alpha);
    res.messages.steps.reserve(static_cast<std::size_t>(num_steps) + 1);
    res.messages.steps.push_back(features);

    for (Index t = 1; t <= num_steps; ++t) {
        const Matrix<Scalar>& prev = res.messages.steps.back();
        Matrix<Scalar> next(n, features.cols());
        StepCost sc;
        for (Index first = 0; first < n; first += batch_size) {
            const Index last = std::min(n, first + batch_size);
            detail::apply_step_rows(op, prev, res.messages.steps.front(), first, last, next);
            for (Index v = first; v < last; ++v) {
                const int owner_v = plan.owner[static_cast<std::size_t>(v)];
                for (Index e = op.row_begin(v); e < op.row_end(v); ++e) {
                    const Index u = op.col_indices[static_cast<std::size_t>(e)];
                    if (plan.owner[static_cast<std::size_t>(u)] != owner_v)
                        sc.pulled += d;
                    else
                        sc.local += d;
                }
                sc.pushed += d;
            }
        }
        if (!all_finite(next))
            throw NumericError("precompute_batched: non-finite message at step " +
                               std::to_string(t));
        res.messages.steps.push_back(std::move(next));

        res.cost.pulled_entries += sc.pulled;
        res.cost.pushed_entries += sc.pushed;
        res.cost.local_entries += sc.local;
        // two flops (multiply, add) per entry per edge; the restart blend
        // adds three per output entry
        res.cost.flops_estimate += 2 * d * static_cast<std::uint64_t>(op.nnz());
        if (op.kind == OperatorKind::Ppr)
            res.cost.flops_estimate += 3 * d * static_cast<std::uint64_t>(n);
        res.cost.per_step.push_back(sc);
    }
    return res;
}

template <typename Scalar>
PrecomputeResult<Scalar> precompute_batched(const CsrGraph& g, const Matrix<Scalar>& features,
                                            OperatorKind kind, Index num_steps,
                                            const PartitionPlan& plan, Index batch_size,
                                            std::optional<double> restart_alpha = std::nullopt) {
    return precompute_batched(make_operator<Scalar>(g, kind, restart_alpha), features, num_steps,
                              plan, batch_size);
}

enum class CostScheme { Nmp, Dnmp, Fmp, Sage };

inline const char* to_string(CostScheme s) {
    switch (s) {
        case CostScheme::Nmp: return "nmp";
        case CostScheme::Dnmp: return "dnmp";
        case CostScheme::Fmp: return "fmp";
        case CostScheme::Sage: return "sage";
    }
    return "?";
}

struct CostModelResult {
    std::uint64_t forward_flops = 0;
    std::uint64_t comm_entries = 0;
};

/// Closed-form per-scheme cost with unit constants. Neural message passing
/// pays the propagation traffic every epoch; feature message passing pays it
/// once. Neighbor sampling fans out k^L_p per node, per epoch.
inline CostModelResult cost_model(std::uint64_t n, std::uint64_t m, std::uint64_t d,
                                  std::uint64_t l_p, std::uint64_t l_u, std::uint64_t t_epochs,
                                  std::uint64_t k, CostScheme scheme) {
    CostModelResult r;
    switch (scheme) {
        case CostScheme::Nmp:
        case CostScheme::Dnmp:
            r.forward_flops = l_p * m * d + l_u * n * d * d;
            r.comm_entries = l_p * m * t_epochs * d;
            break;
        case CostScheme::Fmp:
            r.forward_flops = l_u * n * d * d;
            r.comm_entries = l_p * m * d;  // one-time precompute
            break;
        case CostScheme::Sage: {
            std::uint64_t fanout = 1;
            for (std::uint64_t i = 0; i < l_p; ++i) fanout *= k;
            r.forward_flops = fanout * n * d * d;
            r.comm_entries = fanout * n * t_epochs * d;
            break;
        }
    }
    return r;
}

template <typename Scalar>
struct MeasuredPrecompute {
    PrecomputeResult<Scalar> result;
    double wall_ms = 0.0;
};

template <typename Scalar>
MeasuredPrecompute<Scalar> measure_precompute(const PropagationOperator<Scalar>& op,
                                              const Matrix<Scalar>& features, Index num_steps,
                                              const PartitionPlan& plan, Index batch_size) {
    MeasuredPrecompute<Scalar> m;
    const auto t0 = std::chrono::steady_clock::now();
    m.result = precompute_batched(op, features, num_steps, plan, batch_size);
    m.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return m;
}

template <typename Scalar>
MeasuredPrecompute<Scalar> measure_precompute(const CsrGraph& g, const Matrix<Scalar>& features,
                                              OperatorKind kind, Index num_steps,
                                              const PartitionPlan& plan, Index batch_size,
                                              std::optional<double> restart_alpha = std::nullopt) {
    return measure_precompute(make_operator<Scalar>(g, kind, restart_alpha), features, num_steps,
                              plan, batch_size);
}

}  // namespace gmlp
