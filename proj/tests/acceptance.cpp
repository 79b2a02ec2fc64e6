// Acceptance gate: one criterion per entry, one [PASS]/[FAIL] line each.
// Exit code is the number of failed criteria.

#include "oracles.hpp"

#include <gmlp/cli.hpp>
#include <gmlp/dataset.hpp>
#include <gmlp/model.hpp>
#include <gmlp/pipeline.hpp>
#include <gmlp/propagation.hpp>
#include <gmlp/serialize.hpp>
#include <gmlp/train.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/wait.h>

using namespace gmlp;
using testutil::TestRand;

namespace {

std::filesystem::path source_dir() { return std::filesystem::path(GMLP_SOURCE_DIR); }
std::filesystem::path toy_dir() { return source_dir() / "data" / "toy"; }
std::filesystem::path cora_dir() { return source_dir() / "data" / "cora"; }
bool has_cora() { return std::filesystem::exists(cora_dir() / "features.txt"); }

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt_seconds(double s) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << s << "s";
    return os.str();
}

[[noreturn]] void fail(const std::string& reason) { throw std::runtime_error(reason); }

void require(bool ok, const std::string& reason) {
    if (!ok) fail(reason);
}

std::optional<double> alpha_for(OperatorKind k, double a) {
    if (k == OperatorKind::Ppr) return a;
    return std::nullopt;
}

constexpr OperatorKind kKinds[] = {OperatorKind::AugNormAdj, OperatorKind::RandomWalk,
                                   OperatorKind::Ppr, OperatorKind::Triangle};

// ---- criterion 1: sparse propagation equals the dense oracle ------------

std::string criterion_dense_oracle() {
    Timer timer;
    TestRand rnd(1001);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const CsrGraph g = testutil::random_graph(rnd, 64);
        const Index d = rnd.randint(1, 8);
        const Index t = rnd.randint(0, 8);
        const Matrix<double> x = testutil::random_matrix<double>(rnd, g.num_nodes, d);
        for (OperatorKind kind : kKinds) {
            const auto op = make_operator<double>(g, kind, alpha_for(kind, rnd.uniform(0.05, 0.95)));
            const MessageSet<double> fast = propagate(op, x, t);
            const auto dense = testutil::dense_propagate(op, x, t);
            for (Index s = 0; s <= t; ++s) {
                const double diff = testutil::max_abs_diff(fast.steps[static_cast<std::size_t>(s)],
                                                           dense[static_cast<std::size_t>(s)]);
                worst = std::max(worst, diff);
                if (diff > 1e-6)
                    fail("trial " + std::to_string(trial) + " kind " + to_string(kind) + " step " +
                         std::to_string(s) + " max|diff|=" + std::to_string(diff) + " > 1e-6");
            }
        }
    }
    const double elapsed = timer.seconds();
    require(elapsed < 10.0, "took " + fmt_seconds(elapsed) + ", budget 10s");
    std::ostringstream os;
    os << "200 graphs x 4 operators, T<=8, max|diff|=" << std::scientific << std::setprecision(2)
       << worst << ", " << fmt_seconds(elapsed);
    return os.str();
}

// ---- criterion 2: analytic gradients vs central differences -------------

// Central differences are meaningless when a ReLU pre-activation sits inside
// the +/-eps window, so fixtures must keep every hidden pre-activation at
// least one order of magnitude away from the step size.
double min_hidden_preactivation(const ModelParams<double>& params, const testutil::FdProblem& prob) {
    Rng rng(0);
    const auto trace = forward(params, prob.cfg, prob.ms, /*train_mode=*/false, rng);
    double lo = std::numeric_limits<double>::infinity();
    const auto scan = [&lo](const std::vector<MlpLayer<double>>& layers,
                            const MlpCache<double>& cache) {
        for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
            Matrix<double> z = cache.inputs[l] * layers[l].weight.transpose();
            z.rowwise() += layers[l].bias.transpose();
            lo = std::min(lo, z.cwiseAbs().minCoeff());
        }
    };
    scan(params.na_mlp, trace.na_cache);
    scan(params.sga_mlp, trace.sga_cache);
    return lo;
}

std::string criterion_gradcheck() {
    Timer timer;
    double worst = 0.0;
    std::string worst_group = "none";
    int resampled = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        testutil::FdProblem prob;
        ModelParams<double> params;
        for (std::uint64_t salt = 0;; ++salt) {
            if (salt > 50) fail("could not find a kink-free fixture for seed " + std::to_string(seed));
            TestRand rnd(9000 + seed + 7919 * salt);
            prob = testutil::FdProblem{};
            prob.cfg.variant = Variant::Full;
            prob.cfg.num_steps = 2;
            prob.cfg.hidden_widths = {5};
            prob.cfg.dropout = 0.0;
            prob.cfg.reference_source = ReferenceSource::LastHidden;
            const Index n = 6, d = 4;
            const int c = 3;
            for (Index t = 0; t <= prob.cfg.num_steps; ++t)
                prob.ms.steps.push_back(testutil::random_matrix<double>(rnd, n, d, -1.5, 1.5));
            prob.labels.resize(static_cast<std::size_t>(n));
            for (auto& y : prob.labels) y = static_cast<int>(rnd.randint(0, c - 1));
            prob.mask.assign(static_cast<std::size_t>(n), 1);
            prob.epoch = 1;
            prob.total_epochs = 4;

            Rng init_rng(seed);
            params = init_params<double>(prob.cfg, d, c, init_rng);
            testutil::randomize_params(params, rnd, 0.5);

            if (min_hidden_preactivation(params, prob) >= 1e-3) break;
            ++resampled;
        }

        const auto rep = testutil::fd_gradcheck(params, prob, 1e-4);
        if (rep.max_rel_error > worst) {
            worst = rep.max_rel_error;
            worst_group = rep.worst_group;
        }
        if (rep.max_rel_error > 1e-4)
            fail("seed " + std::to_string(seed) + " group " + rep.worst_group + " rel error " +
                 std::to_string(rep.max_rel_error) + " > 1e-4");
    }
    const double elapsed = timer.seconds();
    require(elapsed < 30.0, "took " + fmt_seconds(elapsed) + ", budget 30s");
    std::ostringstream os;
    os << "20 seeds (" << resampled << " kink-adjacent fixtures resampled), eps 1e-4, worst rel err "
       << std::scientific << std::setprecision(2) << worst << " (" << worst_group << "), "
       << fmt_seconds(elapsed);
    return os.str();
}

// ---- criterion 3: batched precompute is bit-identical -------------------

template <typename Scalar>
void check_bit_identity(const CsrGraph& g, const Matrix<Scalar>& x, int& combos) {
    const Index t = 3;
    for (OperatorKind kind : kKinds) {
        const auto op = make_operator<Scalar>(g, kind, alpha_for(kind, 0.2));
        const MessageSet<Scalar> expected = propagate(op, x, t);
        for (int workers : {1, 2, 4}) {
            if (static_cast<Index>(workers) > g.num_nodes) continue;
            for (PartitionScheme scheme : {PartitionScheme::Range, PartitionScheme::Hash}) {
                const PartitionPlan plan = partition_nodes(g, workers, scheme);
                for (Index batch :
                     {Index(1), std::max<Index>(1, g.num_nodes / 3), g.num_nodes}) {
                    const auto res = precompute_batched(op, x, t, plan, batch);
                    ++combos;
                    if (!testutil::bit_equal(res.messages, expected))
                        fail(std::string("mismatch kind=") + to_string(kind) +
                             " workers=" + std::to_string(workers) + " batch=" +
                             std::to_string(batch) + " n=" + std::to_string(g.num_nodes) +
                             " scalar=" + (sizeof(Scalar) == 4 ? "f32" : "f64"));
                }
            }
        }
    }
}

std::string criterion_bit_identity() {
    int combos = 0;

    const auto toy64 = load_dataset<double>(toy_dir().string());
    check_bit_identity<double>(toy64.graph, toy64.features, combos);
    const auto toy32 = load_dataset<float>(toy_dir().string());
    check_bit_identity<float>(toy32.graph, toy32.features, combos);

    TestRand rnd(3003);
    for (int trial = 0; trial < 10; ++trial) {
        const CsrGraph g = testutil::random_graph(rnd, 48);
        const Index d = rnd.randint(1, 6);
        const Matrix<double> xd = testutil::random_matrix<double>(rnd, g.num_nodes, d);
        check_bit_identity<double>(g, xd, combos);
        const Matrix<float> xf = xd.cast<float>();
        check_bit_identity<float>(g, xf, combos);
    }
    return std::to_string(combos) + " worker/batch/operator combinations bit-identical";
}

// ---- criterion 4: measured traffic equals the cost model ----------------

std::string criterion_traffic_model() {
    TestRand rnd(4004);
    int checks = 0;
    for (int trial = 0; trial < 6; ++trial) {
        const CsrGraph g = testutil::random_graph(rnd, 40);
        const Index d = rnd.randint(1, 6);
        const Index t = rnd.randint(1, 5);
        const Matrix<double> x = testutil::random_matrix<double>(rnd, g.num_nodes, d);
        for (OperatorKind kind : kKinds) {
            const auto op = make_operator<double>(g, kind, alpha_for(kind, 0.3));
            const int workers = static_cast<int>(std::min<Index>(3, g.num_nodes));
            const PartitionPlan plan = partition_nodes(g, workers, PartitionScheme::Hash);
            const auto res = precompute_batched(op, x, t, plan, 8);
            const auto fmp = cost_model(static_cast<std::uint64_t>(g.num_nodes),
                                        static_cast<std::uint64_t>(op.nnz()),
                                        static_cast<std::uint64_t>(d),
                                        static_cast<std::uint64_t>(t), 2, 100, 5, CostScheme::Fmp);
            ++checks;
            if (res.cost.pulled_entries + res.cost.local_entries != fmp.comm_entries)
                fail("measured " +
                     std::to_string(res.cost.pulled_entries + res.cost.local_entries) +
                     " != predicted " + std::to_string(fmp.comm_entries) + " (kind " +
                     to_string(kind) + ")");
        }
    }
    for (int i = 0; i < 20; ++i) {
        const auto n = static_cast<std::uint64_t>(rnd.randint(1, 10000));
        const auto m = static_cast<std::uint64_t>(rnd.randint(1, 50000));
        const auto d = static_cast<std::uint64_t>(rnd.randint(1, 2048));
        const auto lp = static_cast<std::uint64_t>(rnd.randint(1, 6));
        const auto t = static_cast<std::uint64_t>(rnd.randint(1, 500));
        const auto nmp = cost_model(n, m, d, lp, 2, t, 5, CostScheme::Nmp);
        const auto fmp = cost_model(n, m, d, lp, 2, t, 5, CostScheme::Fmp);
        ++checks;
        if (nmp.comm_entries != fmp.comm_entries * t)
            fail("comm ratio != T_epochs for n=" + std::to_string(n) + " m=" + std::to_string(m));
    }
    return std::to_string(checks) + " exact traffic/ratio identities";
}

// ---- criteria 5 and 6: Cora accuracy ------------------------------------

struct CoraData {
    Dataset<float> ds;
};

CoraData load_cora() {
    if (!has_cora())
        fail("data/cora missing; run scripts/convert_planetoid.py (downloads need network)");
    return {load_dataset<float>(cora_dir().string())};
}

// FULL's loss schedule reaches pure-SGA weight only at the final epoch, so
// early stopping must not truncate the horizon; GU converges within ~30
// epochs and keeps conventional patience.
TrainConfig cora_train_config(Variant v) {
    TrainConfig t;
    t.batch_size = 64;
    t.learning_rate = 0.01;
    t.weight_decay = 5e-4;
    t.optimizer = OptimizerKind::Adam;
    t.seed = 1;
    if (v == Variant::Full) {
        t.epochs = 100;
        t.patience = 100;
        // The attention branch's validation peak is sharp and late, so the
        // best-checkpoint scan has to run every epoch.
        t.eval_every = 1;
    } else {
        t.epochs = 200;
        t.patience = 50;
        t.eval_every = 5;
    }
    return t;
}

VariantConfig cora_variant(Variant v, Index steps) {
    VariantConfig cfg;
    cfg.variant = v;
    cfg.graph_agg = OperatorKind::AugNormAdj;
    cfg.num_steps = steps;
    cfg.hidden_widths = {64};
    cfg.dropout = v == Variant::Full ? 0.6 : 0.5;
    cfg.reference_source = ReferenceSource::LastHidden;
    return cfg;
}

TrialStats cora_trials(const CoraData& cora, Variant v, Index steps, Index n_trials) {
    const auto op = make_operator<float>(cora.ds.graph, OperatorKind::AugNormAdj, std::nullopt);
    const MessageSet<float> ms = propagate(op, cora.ds.features, steps);
    return run_trials(cora_train_config(v), cora_variant(v, steps), ms, cora.ds.labels,
                      cora.ds.splits, n_trials);
}

std::string criterion_cora_accuracy() {
    Timer timer;
    const CoraData cora = load_cora();

    const TrialStats gu = cora_trials(cora, Variant::GU, 2, 10);
    const TrialStats full = cora_trials(cora, Variant::Full, 5, 10);
    const double elapsed = timer.seconds();

    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << "GU(T=2) " << gu.mean << "+/-" << gu.stddev
       << ", FULL(T=5) " << full.mean << "+/-" << full.stddev << ", " << fmt_seconds(elapsed);
    require(gu.mean >= 0.78, "GU mean " + std::to_string(gu.mean) + " < 0.78 [" + os.str() + "]");
    require(full.mean >= 0.80,
            "FULL mean " + std::to_string(full.mean) + " < 0.80 [" + os.str() + "]");
    require(full.mean >= gu.mean, "FULL did not reach GU [" + os.str() + "]");
    require(elapsed < 600.0, "took " + fmt_seconds(elapsed) + ", budget 600s");
    return os.str();
}

std::string criterion_deep_stack() {
    const CoraData cora = load_cora();

    const TrialStats full2 = cora_trials(cora, Variant::Full, 2, 5);
    const TrialStats full10 = cora_trials(cora, Variant::Full, 10, 5);
    const TrialStats gu2 = cora_trials(cora, Variant::GU, 2, 5);
    const TrialStats gu10 = cora_trials(cora, Variant::GU, 10, 5);

    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << "FULL T=2 " << full2.mean << " vs T=10 "
       << full10.mean << "; GU T=2 " << gu2.mean << " vs T=10 " << gu10.mean << " (reported)";
    require(full10.mean >= full2.mean - 0.015,
            "FULL degraded by more than 1.5 points at T=10 [" + os.str() + "]");
    return os.str();
}

// ---- criterion 7: loss schedule endpoints and branch gating -------------

std::string criterion_schedule_gating() {
    for (Index total : {Index(1), Index(7), Index(100), Index(200)}) {
        require(loss_schedule_alpha(0, total) == 1.0,
                "alpha(0," + std::to_string(total) + ") != 1.0 exactly");
        require(loss_schedule_alpha(total, total) == 0.0,
                "alpha(T,T) != 0.0 exactly for T=" + std::to_string(total));
    }

    TestRand rnd(7007);
    testutil::FdProblem prob;
    prob.cfg.variant = Variant::Full;
    prob.cfg.num_steps = 2;
    prob.cfg.hidden_widths = {5};
    prob.cfg.dropout = 0.0;
    const Index n = 6, d = 4;
    const int c = 3;
    for (Index t = 0; t <= 2; ++t)
        prob.ms.steps.push_back(testutil::random_matrix<double>(rnd, n, d, -1.5, 1.5));
    prob.labels.resize(static_cast<std::size_t>(n));
    for (auto& y : prob.labels) y = static_cast<int>(rnd.randint(0, c - 1));
    prob.mask.assign(static_cast<std::size_t>(n), 1);
    prob.epoch = 0;  // alpha = 1: the SGA branch must receive exact zeros
    prob.total_epochs = 4;

    Rng init_rng(7);
    auto params = init_params<double>(prob.cfg, d, c, init_rng);
    testutil::randomize_params(params, rnd, 0.5);
    const auto grads = testutil::analytic_grads(params, prob);

    auto all_zero = [](const auto& tensor) {
        for (Index i = 0; i < tensor.size(); ++i)
            if (tensor.data()[i] != 0.0) return false;
        return true;
    };
    for (const auto& l : grads.sga_mlp)
        require(all_zero(l.weight) && all_zero(l.bias), "sga mlp gradient not exactly zero");
    require(all_zero(grads.attention.w1), "attention W1 gradient not exactly zero");
    require(all_zero(grads.attention.w2), "attention W2 gradient not exactly zero");
    require(all_zero(grads.attention.q), "attention q gradient not exactly zero");

    double na_abs = 0.0;
    for (const auto& l : grads.na_mlp) na_abs += l.weight.cwiseAbs().sum();
    require(na_abs > 0.0, "NA gradients vanished at alpha=1");
    return "endpoints exact, alpha=1 zeroes every SGA-only gradient bit";
}

// ---- criterion 8: learned attention favors informative steps ------------

std::string criterion_attention_mass() {
    const auto ds = load_dataset<double>(toy_dir().string());
    const Index t = 6;
    const auto op = make_operator<double>(ds.graph, OperatorKind::AugNormAdj, std::nullopt);
    const MessageSet<double> ms = propagate(op, ds.features, t);

    VariantConfig vcfg;
    vcfg.variant = Variant::Full;
    vcfg.num_steps = t;
    vcfg.hidden_widths = {16};
    vcfg.dropout = 0.1;
    vcfg.reference_source = ReferenceSource::LastHidden;

    TrainConfig tcfg;
    tcfg.epochs = 400;
    tcfg.batch_size = 8;
    tcfg.learning_rate = 0.01;
    tcfg.weight_decay = 5e-4;
    tcfg.optimizer = OptimizerKind::Adam;
    tcfg.patience = 400;
    tcfg.seed = 1;

    const auto res = train(tcfg, vcfg, ms, ds.labels, ds.splits);

    Rng rng(0);
    const auto trace = forward(res.params, vcfg, ms, /*train_mode=*/false, rng);
    const Vector<double> mean_w = trace.attn.colwise().mean().transpose();

    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << "mean attention: step1=" << mean_w(1)
       << " step2=" << mean_w(2) << " step6=" << mean_w(6) << " (uniform would be "
       << 1.0 / 7.0 << ")";
    require(mean_w(1) + mean_w(2) >= 1.0 / 7.0,
            "steps 1+2 carry " + std::to_string(mean_w(1) + mean_w(2)) + " < 1/7 [" + os.str() +
                "]");
    return os.str();
}

// ---- criterion 9: full unit suite in one command -------------------------

std::string criterion_unit_suite() {
    Timer timer;
    const std::string cmd = std::string(GMLP_TESTS_BIN);
    const int status = std::system(cmd.c_str());
    const double elapsed = timer.seconds();
    if (status == -1) fail("could not launch " + cmd);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        fail("unit suite exited with status " + std::to_string(WEXITSTATUS(status)));
    require(elapsed < 900.0, "took " + fmt_seconds(elapsed) + ", budget 900s");
    return "unit suite green in " + fmt_seconds(elapsed);
}

struct Criterion {
    int id;
    std::string name;
    std::function<std::string()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "sparse propagation matches the dense oracle", criterion_dense_oracle},
        {2, "analytic gradients match finite differences", criterion_gradcheck},
        {3, "partitioned precompute is bit-identical", criterion_bit_identity},
        {4, "measured traffic equals the cost model", criterion_traffic_model},
        {5, "Cora accuracy (GU and FULL)", criterion_cora_accuracy},
        {6, "deep stacks do not collapse (T=10 vs T=2)", criterion_deep_stack},
        {7, "loss schedule endpoints and branch gating", criterion_schedule_gating},
        {8, "learned attention mass on informative steps", criterion_attention_mass},
        {9, "unit suite green in one command", criterion_unit_suite},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        try {
            const std::string detail = c.run();
            std::cout << "[PASS] criterion " << c.id << ": " << c.name << " - " << detail
                      << std::endl;
        } catch (const std::exception& e) {
            ++failures;
            std::cout << "[FAIL] criterion " << c.id << ": " << c.name << " - " << e.what()
                      << std::endl;
        }
    }
    std::cout << failures << " of " << criteria.size() << " criteria failed" << std::endl;
    return failures;
}
