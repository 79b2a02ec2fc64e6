#pragma once

#include "gmlp/common.hpp"
#include "gmlp/dataset.hpp"
#include "gmlp/pipeline.hpp"
#include "gmlp/propagation.hpp"
#include "gmlp/run_config.hpp"
#include "gmlp/serialize.hpp"
#include "gmlp/train.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gmlp {

namespace cli_detail {

// Disk formats are float32, so the CLI pipeline runs in float end to end.
using CliScalar = float;

using Overrides = std::vector<std::pair<std::string, std::string>>;

inline RunConfig build_config(const std::string& config_file, const Overrides& overrides) {
    RunConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    for (const auto& [key, value] : overrides) apply_config_value(cfg, key, value);
    return cfg;
}

inline std::optional<double> restart_opt(const RunConfig& cfg) {
    if (cfg.graph_agg == OperatorKind::Ppr) return cfg.restart_alpha;
    return std::nullopt;
}

inline std::string messages_path_or_default(const RunConfig& cfg) {
    return cfg.messages_path.empty() ? std::string("messages.fmpm") : cfg.messages_path;
}

/// Reads the message file when present, otherwise precomputes in-process.
template <typename Scalar>
MessageSet<Scalar> obtain_messages(const RunConfig& cfg, const Dataset<Scalar>& ds,
                                   std::ostream& out) {
    if (!cfg.messages_path.empty() && std::filesystem::exists(cfg.messages_path)) {
        MessageSet<Scalar> ms = read_messages<Scalar>(cfg.messages_path);
        ms.kind = cfg.graph_agg;
        ms.restart_alpha = cfg.graph_agg == OperatorKind::Ppr ? cfg.restart_alpha : 0.0;
        if (ms.num_nodes() != ds.num_nodes() || ms.dim() != ds.feature_dim())
            throw InputError(cfg.messages_path + ": message set does not match the dataset (" +
                             std::to_string(ms.num_nodes()) + "x" + std::to_string(ms.dim()) +
                             " vs " + std::to_string(ds.num_nodes()) + "x" +
                             std::to_string(ds.feature_dim()) + ")");
        if (ms.num_steps() != cfg.steps)
            throw InputError(cfg.messages_path + ": message set has T=" +
                             std::to_string(ms.num_steps()) + ", config expects T=" +
                             std::to_string(cfg.steps));
        out << "messages loaded from " << cfg.messages_path << "\n";
        return ms;
    }
    const auto op = make_operator<Scalar>(ds.graph, cfg.graph_agg, restart_opt(cfg));
    const auto plan = partition_nodes(ds.graph, cfg.workers, cfg.partition);
    auto res = precompute_batched(op, ds.features, cfg.steps, plan, cfg.precompute_batch);
    out << "messages precomputed in-process (T=" << cfg.steps << ")\n";
    return std::move(res.messages);
}

inline int cmd_precompute(const RunConfig& cfg, std::ostream& out) {
    const auto ds = load_dataset<CliScalar>(cfg.dataset_dir);
    const auto op = make_operator<CliScalar>(ds.graph, cfg.graph_agg, restart_opt(cfg));
    const auto plan = partition_nodes(ds.graph, cfg.workers, cfg.partition);
    const auto measured =
        measure_precompute(op, ds.features, cfg.steps, plan, cfg.precompute_batch);
    const std::string msg_path = messages_path_or_default(cfg);
    write_messages(msg_path, measured.result.messages);
    write_cost_json(cfg.cost_path, measured.result.cost);
    const auto& c = measured.result.cost;
    out << "precompute dataset=" << cfg.dataset_dir << " agg=" << to_string(cfg.graph_agg)
        << " steps=" << cfg.steps << " workers=" << cfg.workers << " wall_ms=" << measured.wall_ms
        << "\n";
    out << "traffic pulled=" << c.pulled_entries << " pushed=" << c.pushed_entries
        << " local=" << c.local_entries << " flops=" << c.flops_estimate << "\n";
    out << "written " << msg_path << " and " << cfg.cost_path << "\n";
    return 0;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto ds = load_dataset<CliScalar>(cfg.dataset_dir);
    const MessageSet<CliScalar> ms = obtain_messages(cfg, ds, out);
    const VariantConfig vcfg = to_variant_config(cfg);
    const TrainConfig tcfg = to_train_config(cfg);
    const auto res = train(tcfg, vcfg, ms, ds.labels, ds.splits);

    write_checkpoint(cfg.checkpoint_path, vcfg, res.params);
    write_history_csv(cfg.history_path, res.history);

    out << "trained variant=" << to_string(cfg.variant)
        << " parameters=" << res.params.parameter_count()
        << " epochs_run=" << res.history.epochs.size() << "\n";
    out << "best_epoch=" << res.history.best_epoch << " best_val=" << res.history.best_val_accuracy
        << "\n";
    if (!mask_indices(ds.splits.test).empty())
        out << "test_acc=" << evaluate(res.params, vcfg, ms, ds.labels, ds.splits.test) << "\n";
    out << "written " << cfg.checkpoint_path << " and " << cfg.history_path << "\n";
    return 0;
}

inline int cmd_eval(const RunConfig& cfg, const std::string& split, std::ostream& out) {
    const auto ds = load_dataset<CliScalar>(cfg.dataset_dir);
    const auto ck = read_checkpoint<CliScalar>(cfg.checkpoint_path);
    RunConfig msg_cfg = cfg;
    msg_cfg.steps = ck.config.num_steps;
    msg_cfg.graph_agg = ck.config.graph_agg;
    msg_cfg.restart_alpha = ck.config.restart_alpha;
    const MessageSet<CliScalar> ms = obtain_messages(msg_cfg, ds, out);

    const std::vector<std::uint8_t>* mask = nullptr;
    if (split == "train")
        mask = &ds.splits.train;
    else if (split == "val")
        mask = &ds.splits.val;
    else if (split == "test")
        mask = &ds.splits.test;
    else
        throw InputError("eval: unknown split '" + split + "' (want train/val/test)");

    const double acc = evaluate(ck.params, ck.config, ms, ds.labels, *mask);
    out << "accuracy=" << acc << " split=" << split
        << " nodes=" << mask_indices(*mask).size() << "\n";
    return 0;
}

inline int cmd_bench(const RunConfig& cfg, std::ostream& out) {
    const auto ds = load_dataset<CliScalar>(cfg.dataset_dir);
    const MessageSet<CliScalar> ms = obtain_messages(cfg, ds, out);
    const VariantConfig vcfg = to_variant_config(cfg);
    const TrainConfig tcfg = to_train_config(cfg);
    const TrialStats stats = run_trials(tcfg, vcfg, ms, ds.labels, ds.splits, cfg.trials);
    for (std::size_t i = 0; i < stats.accuracies.size(); ++i)
        out << "trial " << i << " test_acc=" << stats.accuracies[i] << "\n";
    out << "trials=" << stats.accuracies.size() << " mean=" << stats.mean
        << " std=" << stats.stddev << "\n";
    return 0;
}

struct CostModelArgs {
    std::uint64_t n = 0, m = 0, d = 0;
    std::uint64_t l_p = 2, l_u = 2, epochs = 100, k = 5;
};

inline int cmd_cost_model(const CostModelArgs& a, std::ostream& out) {
    const auto nmp = cost_model(a.n, a.m, a.d, a.l_p, a.l_u, a.epochs, a.k, CostScheme::Nmp);
    const auto dnmp = cost_model(a.n, a.m, a.d, a.l_p, a.l_u, a.epochs, a.k, CostScheme::Dnmp);
    const auto sage = cost_model(a.n, a.m, a.d, a.l_p, a.l_u, a.epochs, a.k, CostScheme::Sage);
    const auto fmp = cost_model(a.n, a.m, a.d, a.l_p, a.l_u, a.epochs, a.k, CostScheme::Fmp);
    out << "scheme forward_flops comm_entries\n";
    out << "nmp " << nmp.forward_flops << " " << nmp.comm_entries << "\n";
    out << "dnmp " << dnmp.forward_flops << " " << dnmp.comm_entries << "\n";
    out << "sage " << sage.forward_flops << " " << sage.comm_entries << "\n";
    out << "fmp " << fmp.forward_flops << " " << fmp.comm_entries << "\n";
    if (fmp.comm_entries > 0)
        out << "comm_ratio_nmp_over_fmp=" << nmp.comm_entries / fmp.comm_entries << "\n";
    else
        out << "comm_ratio_nmp_over_fmp=n/a\n";
    return 0;
}

inline int cmd_validate(const RunConfig& cfg, std::ostream& out) {
    const auto ds = load_dataset<CliScalar>(cfg.dataset_dir);
    const std::vector<std::string> issues = validate(ds.graph);
    for (const auto& issue : issues) out << "issue: " << issue << "\n";
    if (!issues.empty()) throw InputError(cfg.dataset_dir + ": graph validation failed");
    out << "ok nodes=" << ds.num_nodes() << " edges=" << ds.graph.nnz()
        << " dim=" << ds.feature_dim() << " classes=" << ds.num_classes
        << " train=" << mask_indices(ds.splits.train).size()
        << " val=" << mask_indices(ds.splits.val).size()
        << " test=" << mask_indices(ds.splits.test).size() << "\n";
    return 0;
}

}  // namespace cli_detail

/// Entry point shared by the binary and the tests. argv follows main()
/// convention (argv[0] is the program name). Exit codes: 0 ok, 1 usage,
/// 2 input/config error, 3 numeric or internal error.
inline int run_cli(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    CLI::App app{"feature-message-passing graph learner"};
    app.require_subcommand(1);

    std::string config_file;
    cli_detail::Overrides overrides;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "key=value config file");
        auto add_kv = [&overrides, sub](const std::string& flag, const std::string& key,
                                        const std::string& help) {
            sub->add_option_function<std::string>(
                flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
                help);
        };
        add_kv("--dataset", "dataset", "dataset directory");
        add_kv("--messages", "messages", "message file path (FMPM)");
        add_kv("--checkpoint", "checkpoint", "checkpoint path (FMPP)");
        add_kv("--history", "history", "history CSV path");
        add_kv("--cost", "cost", "cost report JSON path");
        add_kv("--variant", "variant", "gu/gmu/full");
        add_kv("--agg", "agg", "graph aggregator: aug_norm_adj/random_walk/ppr/triangle");
        add_kv("--restart-alpha", "restart_alpha", "ppr restart probability");
        add_kv("--message-agg", "message_agg", "gmu combiner: concat/mean_pool/max_pool/gating");
        add_kv("--steps", "steps", "propagation steps T");
        add_kv("--hidden", "hidden", "hidden widths, comma separated");
        add_kv("--dropout", "dropout", "dropout rate in [0,1)");
        add_kv("--reference", "reference", "attention reference: last_hidden/logits");
        add_kv("--epochs", "epochs", "training epochs");
        add_kv("--batch-size", "batch_size", "mini-batch size");
        add_kv("--lr", "lr", "learning rate");
        add_kv("--weight-decay", "weight_decay", "L2 weight decay");
        add_kv("--optimizer", "optimizer", "sgd/adam");
        add_kv("--beta1", "beta1", "adam beta1");
        add_kv("--beta2", "beta2", "adam beta2");
        add_kv("--eps", "eps", "adam epsilon");
        add_kv("--patience", "patience", "early stopping patience (epochs)");
        add_kv("--seed", "seed", "base RNG seed");
        add_kv("--eval-every", "eval_every", "validation cadence (epochs)");
        add_kv("--workers", "workers", "simulated worker count");
        add_kv("--partition", "partition", "range/hash");
        add_kv("--precompute-batch", "precompute_batch", "precompute batch size (nodes)");
        add_kv("--trials", "trials", "bench trial count");
    };

    int rc = 0;
    auto* sub_pre = app.add_subcommand("precompute", "propagate features and write the message file");
    add_common(sub_pre);
    sub_pre->callback([&] {
        rc = cli_detail::cmd_precompute(cli_detail::build_config(config_file, overrides), out);
    });

    auto* sub_train = app.add_subcommand("train", "train a model on precomputed messages");
    add_common(sub_train);
    sub_train->callback([&] {
        rc = cli_detail::cmd_train(cli_detail::build_config(config_file, overrides), out);
    });

    std::string eval_split = "test";
    auto* sub_eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(sub_eval);
    sub_eval->add_option("--split", eval_split, "train/val/test (default test)");
    sub_eval->callback([&] {
        rc = cli_detail::cmd_eval(cli_detail::build_config(config_file, overrides), eval_split, out);
    });

    auto* sub_bench = app.add_subcommand("bench", "repeated trials, mean and std test accuracy");
    add_common(sub_bench);
    sub_bench->callback([&] {
        rc = cli_detail::cmd_bench(cli_detail::build_config(config_file, overrides), out);
    });

    cli_detail::CostModelArgs cm;
    auto* sub_cost = app.add_subcommand("cost-model", "closed-form scheme comparison");
    sub_cost->add_option("--N", cm.n, "node count")->required();
    sub_cost->add_option("--M", cm.m, "edge count")->required();
    sub_cost->add_option("--d", cm.d, "feature dimension")->required();
    sub_cost->add_option("--Lp", cm.l_p, "propagation layers");
    sub_cost->add_option("--Lu", cm.l_u, "update (MLP) layers");
    sub_cost->add_option("--epochs", cm.epochs, "training epochs");
    sub_cost->add_option("--k", cm.k, "sampling fanout (sage)");
    sub_cost->callback([&] { rc = cli_detail::cmd_cost_model(cm, out); });

    auto* sub_validate = app.add_subcommand("validate", "check a dataset directory");
    add_common(sub_validate);
    sub_validate->callback([&] {
        rc = cli_detail::cmd_validate(cli_detail::build_config(config_file, overrides), out);
    });

    std::vector<const char*> ptrs;
    ptrs.reserve(argv.size());
    for (const auto& a : argv) ptrs.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(ptrs.size()), ptrs.data());
        return rc;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace gmlp
