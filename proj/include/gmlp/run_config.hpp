#pragma once

#include "gmlp/common.hpp"
#include "gmlp/model.hpp"
#include "gmlp/pipeline.hpp"
#include "gmlp/train.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace gmlp {

/// Every run-time knob in one flat bag. Values arrive as strings from a
/// key=value file or CLI flags and are parsed/validated on assignment;
/// precedence is CLI flag > config file > default.
struct RunConfig {
    // io
    std::string dataset_dir = "data/toy";
    std::string messages_path;    // empty: derived or in-memory
    std::string checkpoint_path = "model.fmpp";
    std::string history_path = "history.csv";
    std::string cost_path = "cost.json";

    // variant
    Variant variant = Variant::Full;
    OperatorKind graph_agg = OperatorKind::AugNormAdj;
    double restart_alpha = 0.15;
    MessageAggKind message_agg = MessageAggKind::Concat;
    Index steps = 2;
    std::vector<Index> hidden = {64};
    double dropout = 0.5;
    ReferenceSource reference = ReferenceSource::LastHidden;

    // training
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

    // pipeline
    int workers = 1;
    PartitionScheme partition = PartitionScheme::Range;
    Index precompute_batch = 1024;
    Index trials = 10;
};

namespace detail {

inline long long parse_int(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not an integer: '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config key '" + key + "': not an integer: '" + value + "'");
    return v;
}

inline double parse_float(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
    return v;
}

inline std::vector<Index> parse_width_list(const std::string& key, const std::string& value) {
    std::vector<Index> widths;
    if (value.empty() || value == "none") return widths;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const long long w = parse_int(key, item);
        if (w < 1) throw ConfigError("config key '" + key + "': width must be >= 1");
        widths.push_back(static_cast<Index>(w));
    }
    return widths;
}

}  // namespace detail

/// Assigns one key. Unknown keys and malformed values raise ConfigError.
inline void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto bad_choice = [&key, &value](const char* wanted) -> ConfigError {
        return ConfigError("config key '" + key + "': unknown value '" + value + "' (want " +
                           wanted + ")");
    };
    if (key == "dataset") {
        cfg.dataset_dir = value;
    } else if (key == "messages") {
        cfg.messages_path = value;
    } else if (key == "checkpoint") {
        cfg.checkpoint_path = value;
    } else if (key == "history") {
        cfg.history_path = value;
    } else if (key == "cost") {
        cfg.cost_path = value;
    } else if (key == "variant") {
        const auto v = variant_from_string(value);
        if (!v) throw bad_choice("gu/gmu/full");
        cfg.variant = *v;
    } else if (key == "agg") {
        const auto v = operator_kind_from_string(value);
        if (!v) throw bad_choice("aug_norm_adj/random_walk/ppr/triangle");
        cfg.graph_agg = *v;
    } else if (key == "restart_alpha") {
        cfg.restart_alpha = detail::parse_float(key, value);
    } else if (key == "message_agg") {
        const auto v = message_agg_from_string(value);
        if (!v) throw bad_choice("concat/mean_pool/max_pool/gating/attention");
        cfg.message_agg = *v;
    } else if (key == "steps") {
        cfg.steps = static_cast<Index>(detail::parse_int(key, value));
    } else if (key == "hidden") {
        cfg.hidden = detail::parse_width_list(key, value);
    } else if (key == "dropout") {
        cfg.dropout = detail::parse_float(key, value);
    } else if (key == "reference") {
        if (value == "last_hidden")
            cfg.reference = ReferenceSource::LastHidden;
        else if (value == "logits")
            cfg.reference = ReferenceSource::Logits;
        else
            throw bad_choice("last_hidden/logits");
    } else if (key == "epochs") {
        cfg.epochs = static_cast<Index>(detail::parse_int(key, value));
    } else if (key == "batch_size") {
        cfg.batch_size = static_cast<Index>(detail::parse_int(key, value));
    } else if (key == "lr") {
        cfg.learning_rate = detail::parse_float(key, value);
    } else if (key == "weight_decay") {
        cfg.weight_decay = detail::parse_float(key, value);
    } else if (key == "optimizer") {
        const auto v = optimizer_kind_from_string(value);
        if (!v) throw bad_choice("sgd/adam");
        cfg.optimizer = *v;
    } else if (key == "beta1") {
        cfg.adam_beta1 = detail::parse_float(key, value);
    } else if (key == "beta2") {
        cfg.adam_beta2 = detail::parse_float(key, value);
    } else if (key == "eps") {
        cfg.adam_eps = detail::parse_float(key, value);
    } else if (key == "patience") {
        cfg.patience = static_cast<Index>(detail::parse_int(key, value));
    } else if (key == "seed") {
        const long long v = detail::parse_int(key, value);
        if (v < 0) throw ConfigError("config key 'seed': must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(v);
    } else if (key == "eval_every") {
        cfg.eval_every = static_cast<Index>(detail::parse_int(key, value));
    } else if (key == "workers") {
        cfg.workers = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "partition") {
        const auto v = partition_scheme_from_string(value);
        if (!v) throw bad_choice("range/hash");
        cfg.partition = *v;
    } else if (key == "precompute_batch") {
        cfg.precompute_batch = static_cast<Index>(detail::parse_int(key, value));
    } else if (key == "trials") {
        cfg.trials = static_cast<Index>(detail::parse_int(key, value));
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace detail

/// key=value per line; '#' starts a comment, blank lines are ignored.
inline void apply_config_stream(RunConfig& cfg, std::istream& in, const std::string& name) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + " line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError(name + " line " + std::to_string(line_no) + ": empty key");
        apply_config_value(cfg, key, value);
    }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path);
    apply_config_stream(cfg, in, path);
}

inline VariantConfig to_variant_config(const RunConfig& cfg) {
    VariantConfig v;
    v.variant = cfg.variant;
    v.graph_agg = cfg.graph_agg;
    v.restart_alpha = cfg.restart_alpha;
    v.message_agg = cfg.message_agg;
    v.num_steps = cfg.steps;
    v.hidden_widths = cfg.hidden;
    v.dropout = cfg.dropout;
    v.reference_source = cfg.reference;
    if (v.num_steps < 0) throw ConfigError("config key 'steps': must be >= 0");
    if (!(v.dropout >= 0.0 && v.dropout < 1.0))
        throw ConfigError("config key 'dropout': must lie in [0,1)");
    return v;
}

inline TrainConfig to_train_config(const RunConfig& cfg) {
    TrainConfig t;
    t.epochs = cfg.epochs;
    t.batch_size = cfg.batch_size;
    t.learning_rate = cfg.learning_rate;
    t.weight_decay = cfg.weight_decay;
    t.optimizer = cfg.optimizer;
    t.adam_beta1 = cfg.adam_beta1;
    t.adam_beta2 = cfg.adam_beta2;
    t.adam_eps = cfg.adam_eps;
    t.patience = cfg.patience;
    t.seed = cfg.seed;
    t.eval_every = cfg.eval_every;
    validate(t);
    return t;
}

}  // namespace gmlp
