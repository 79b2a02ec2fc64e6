#pragma once

#include "gmlp/common.hpp"
#include "gmlp/model.hpp"
#include "gmlp/pipeline.hpp"
#include "gmlp/propagation.hpp"
#include "gmlp/train.hpp"

#include "json.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

namespace gmlp {

static_assert(std::endian::native == std::endian::little,
              "serialized formats are little-endian; big-endian hosts are unsupported");

namespace detail {

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw InputError("truncated file while reading " + what);
    return value;
}

inline std::ofstream open_binary_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open " + path + " for writing");
    return out;
}

inline std::ifstream open_binary_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return in;
}

inline void expect_magic(std::istream& in, const char expected[4], const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, expected, 4) != 0)
        throw InputError(path + ": not a " + std::string(expected, 4) + " file");
}

template <typename Scalar>
void write_f32_matrix(std::ostream& out, const Matrix<Scalar>& m) {
    std::vector<float> row(static_cast<std::size_t>(m.cols()));
    for (Index v = 0; v < m.rows(); ++v) {
        for (Index j = 0; j < m.cols(); ++j)
            row[static_cast<std::size_t>(j)] = static_cast<float>(m(v, j));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
}

template <typename Scalar>
Matrix<Scalar> read_f32_matrix(std::istream& in, Index rows, Index cols, const std::string& what) {
    Matrix<Scalar> m(rows, cols);
    std::vector<float> row(static_cast<std::size_t>(cols));
    for (Index v = 0; v < rows; ++v) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw InputError("truncated file while reading " + what);
        for (Index j = 0; j < cols; ++j) m(v, j) = static_cast<Scalar>(row[static_cast<std::size_t>(j)]);
    }
    return m;
}

}  // namespace detail

inline constexpr std::uint32_t kMessagesVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Message stack container: header {magic "FMPM", version u32, N u64, T u32,
/// d u32}, then (T+1)*N*d little-endian float32 values, step-major then
/// row-major.
template <typename Scalar>
void write_messages(const std::string& path, const MessageSet<Scalar>& ms) {
    if (ms.steps.empty()) throw InputError("write_messages: empty message set");
    auto out = detail::open_binary_out(path);
    out.write("FMPM", 4);
    detail::write_pod<std::uint32_t>(out, kMessagesVersion);
    detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(ms.num_nodes()));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ms.num_steps()));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ms.dim()));
    for (const auto& step : ms.steps) detail::write_f32_matrix(out, step);
    if (!out) throw InputError("write failed for " + path);
}

/// The file stores only the stack; operator provenance (kind, restart alpha)
/// comes from the caller's configuration.
template <typename Scalar>
MessageSet<Scalar> read_messages(const std::string& path) {
    auto in = detail::open_binary_in(path);
    detail::expect_magic(in, "FMPM", path);
    const auto version = detail::read_pod<std::uint32_t>(in, path + " version");
    if (version != kMessagesVersion)
        throw InputError(path + ": unsupported version " + std::to_string(version));
    const auto n = static_cast<Index>(detail::read_pod<std::uint64_t>(in, path + " node count"));
    const auto t = static_cast<Index>(detail::read_pod<std::uint32_t>(in, path + " step count"));
    const auto d = static_cast<Index>(detail::read_pod<std::uint32_t>(in, path + " dimension"));
    if (n < 1 || d < 1) throw InputError(path + ": invalid header dimensions");

    MessageSet<Scalar> ms;
    ms.steps.reserve(static_cast<std::size_t>(t) + 1);
    for (Index s = 0; s <= t; ++s)
        ms.steps.push_back(detail::read_f32_matrix<Scalar>(in, n, d, path + " payload"));
    if (in.peek() != std::char_traits<char>::eof())
        throw InputError(path + ": trailing bytes after payload");
    return ms;
}

template <typename Scalar>
struct Checkpoint {
    VariantConfig config;
    ModelParams<Scalar> params;
};

namespace detail {

template <typename Scalar>
void write_tensor(std::ostream& out, const Matrix<Scalar>& m) {
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    write_f32_matrix(out, m);
}

template <typename Scalar>
void write_tensor(std::ostream& out, const Vector<Scalar>& v) {
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
    write_pod<std::uint64_t>(out, 1);
    Matrix<Scalar> m = v;
    write_f32_matrix(out, m);
}

template <typename Scalar>
Matrix<Scalar> read_tensor_matrix(std::istream& in, const std::string& what) {
    const auto rows = static_cast<Index>(read_pod<std::uint64_t>(in, what));
    const auto cols = static_cast<Index>(read_pod<std::uint64_t>(in, what));
    return read_f32_matrix<Scalar>(in, rows, cols, what);
}

template <typename Scalar>
Vector<Scalar> read_tensor_vector(std::istream& in, const std::string& what) {
    Matrix<Scalar> m = read_tensor_matrix<Scalar>(in, what);
    if (m.cols() != 1) throw InputError(what + ": expected a column vector");
    return m.col(0);
}

}  // namespace detail

/// Checkpoint container: "FMPP", version, the full variant configuration,
/// then every parameter tensor (shape-prefixed float32) in visit order.
template <typename Scalar>
void write_checkpoint(const std::string& path, const VariantConfig& cfg,
                      const ModelParams<Scalar>& params) {
    auto out = detail::open_binary_out(path);
    out.write("FMPP", 4);
    detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.variant));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.graph_agg));
    detail::write_pod<double>(out, cfg.restart_alpha);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.message_agg));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.num_steps));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.hidden_widths.size()));
    for (Index w : cfg.hidden_widths)
        detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(w));
    detail::write_pod<double>(out, cfg.dropout);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.reference_source));

    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.na_mlp.size()));
    for (const auto& l : params.na_mlp) {
        detail::write_tensor(out, l.weight);
        detail::write_tensor(out, l.bias);
    }
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.sga_mlp.size()));
    for (const auto& l : params.sga_mlp) {
        detail::write_tensor(out, l.weight);
        detail::write_tensor(out, l.bias);
    }
    detail::write_tensor(out, params.attention.w1);
    detail::write_tensor(out, params.attention.w2);
    detail::write_tensor(out, params.attention.q);
    detail::write_tensor(out, params.gating_s);
    if (!out) throw InputError("write failed for " + path);
}

template <typename Scalar>
Checkpoint<Scalar> read_checkpoint(const std::string& path) {
    auto in = detail::open_binary_in(path);
    detail::expect_magic(in, "FMPP", path);
    const auto version = detail::read_pod<std::uint32_t>(in, path + " version");
    if (version != kCheckpointVersion)
        throw InputError(path + ": unsupported version " + std::to_string(version));

    Checkpoint<Scalar> ck;
    const auto variant_raw = detail::read_pod<std::uint32_t>(in, path + " variant");
    if (variant_raw > static_cast<std::uint32_t>(Variant::Full))
        throw InputError(path + ": unknown variant " + std::to_string(variant_raw));
    ck.config.variant = static_cast<Variant>(variant_raw);
    const auto agg_raw = detail::read_pod<std::uint32_t>(in, path + " graph aggregator");
    if (agg_raw > static_cast<std::uint32_t>(OperatorKind::Triangle))
        throw InputError(path + ": unknown graph aggregator " + std::to_string(agg_raw));
    ck.config.graph_agg = static_cast<OperatorKind>(agg_raw);
    ck.config.restart_alpha = detail::read_pod<double>(in, path + " restart alpha");
    const auto msg_raw = detail::read_pod<std::uint32_t>(in, path + " message aggregator");
    if (msg_raw > static_cast<std::uint32_t>(MessageAggKind::Attention))
        throw InputError(path + ": unknown message aggregator " + std::to_string(msg_raw));
    ck.config.message_agg = static_cast<MessageAggKind>(msg_raw);
    ck.config.num_steps =
        static_cast<Index>(detail::read_pod<std::uint32_t>(in, path + " step count"));
    const auto n_hidden = detail::read_pod<std::uint32_t>(in, path + " hidden count");
    ck.config.hidden_widths.clear();
    for (std::uint32_t i = 0; i < n_hidden; ++i)
        ck.config.hidden_widths.push_back(
            static_cast<Index>(detail::read_pod<std::uint64_t>(in, path + " hidden width")));
    ck.config.dropout = detail::read_pod<double>(in, path + " dropout");
    const auto ref_raw = detail::read_pod<std::uint32_t>(in, path + " reference source");
    if (ref_raw > static_cast<std::uint32_t>(ReferenceSource::Logits))
        throw InputError(path + ": unknown reference source " + std::to_string(ref_raw));
    ck.config.reference_source = static_cast<ReferenceSource>(ref_raw);

    const auto n_na = detail::read_pod<std::uint32_t>(in, path + " classifier layer count");
    for (std::uint32_t i = 0; i < n_na; ++i) {
        MlpLayer<Scalar> l;
        l.weight = detail::read_tensor_matrix<Scalar>(in, path + " weight");
        l.bias = detail::read_tensor_vector<Scalar>(in, path + " bias");
        ck.params.na_mlp.push_back(std::move(l));
    }
    const auto n_sga = detail::read_pod<std::uint32_t>(in, path + " sga layer count");
    for (std::uint32_t i = 0; i < n_sga; ++i) {
        MlpLayer<Scalar> l;
        l.weight = detail::read_tensor_matrix<Scalar>(in, path + " weight");
        l.bias = detail::read_tensor_vector<Scalar>(in, path + " bias");
        ck.params.sga_mlp.push_back(std::move(l));
    }
    ck.params.attention.w1 = detail::read_tensor_matrix<Scalar>(in, path + " attention w1");
    ck.params.attention.w2 = detail::read_tensor_matrix<Scalar>(in, path + " attention w2");
    ck.params.attention.q = detail::read_tensor_vector<Scalar>(in, path + " attention q");
    ck.params.gating_s = detail::read_tensor_vector<Scalar>(in, path + " gating s");
    if (in.peek() != std::char_traits<char>::eof())
        throw InputError(path + ": trailing bytes after payload");
    return ck;
}

inline nlohmann::json to_json(const CostReport& cost) {
    nlohmann::json j;
    j["pulled"] = cost.pulled_entries;
    j["pushed"] = cost.pushed_entries;
    j["local"] = cost.local_entries;
    j["flops"] = cost.flops_estimate;
    j["per_step"] = nlohmann::json::array();
    for (const auto& sc : cost.per_step)
        j["per_step"].push_back({{"pulled", sc.pulled}, {"pushed", sc.pushed}, {"local", sc.local}});
    return j;
}

inline void write_cost_json(const std::string& path, const CostReport& cost) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    out << to_json(cost).dump(2) << "\n";
    if (!out) throw InputError("write failed for " + path);
}

template <typename Scalar>
void write_history_csv(std::ostream& out, const TrainHistory<Scalar>& hist) {
    out << "epoch,train_loss,val_acc,alpha_t,wall_ms\n";
    out << std::setprecision(10);
    for (const auto& rec : hist.epochs)
        out << rec.epoch << ',' << rec.train_loss << ',' << rec.val_accuracy << ',' << rec.alpha
            << ',' << rec.wall_ms << '\n';
}

template <typename Scalar>
void write_history_csv(const std::string& path, const TrainHistory<Scalar>& hist) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    write_history_csv(out, hist);
    if (!out) throw InputError("write failed for " + path);
}

}  // namespace gmlp
