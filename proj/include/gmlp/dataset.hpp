#pragma once

#include "gmlp/common.hpp"
#include "gmlp/csr_graph.hpp"
#include "gmlp/train.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace gmlp {

/// A node-classification dataset in the transductive setting: one graph,
/// dense features, integer labels in [0, C), and disjoint split masks.
template <typename Scalar>
struct Dataset {
    CsrGraph graph;
    Matrix<Scalar> features;
    std::vector<int> labels;
    Splits splits;
    int num_classes = 0;

    Index num_nodes() const { return graph.num_nodes; }
    Index feature_dim() const { return features.cols(); }
};

namespace detail {

inline std::ifstream open_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

template <typename Scalar>
Matrix<Scalar> read_feature_matrix(std::istream& in, const std::string& name) {
    std::vector<std::vector<Scalar>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::vector<Scalar> row;
        double value = 0.0;
        while (ls >> value) row.push_back(static_cast<Scalar>(value));
        if (!ls.eof())
            throw InputError(name + " line " + std::to_string(line_no) + ": bad feature value");
        if (row.empty()) continue;  // blank or comment line
        if (!rows.empty() && row.size() != rows.front().size())
            throw InputError(name + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " values, got " +
                             std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InputError(name + ": no feature rows");
    Matrix<Scalar> m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index v = 0; v < m.rows(); ++v)
        for (Index j = 0; j < m.cols(); ++j)
            m(v, j) = rows[static_cast<std::size_t>(v)][static_cast<std::size_t>(j)];
    if (!all_finite(m)) throw InputError(name + ": features contain NaN/Inf");
    return m;
}

inline std::vector<int> read_label_file(std::istream& in, const std::string& name) {
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        long long y = 0;
        if (!(ls >> y)) {
            std::string token;
            std::istringstream probe(line);
            if (probe >> token)
                throw InputError(name + " line " + std::to_string(line_no) + ": bad label '" +
                                 token + "'");
            continue;  // blank line
        }
        std::string extra;
        if (ls >> extra)
            throw InputError(name + " line " + std::to_string(line_no) + ": trailing token '" +
                             extra + "'");
        if (y < 0)
            throw InputError(name + " line " + std::to_string(line_no) + ": label out of range (" +
                             std::to_string(y) + ")");
        labels.push_back(static_cast<int>(y));
    }
    return labels;
}

inline Splits read_split_file(std::istream& in, const std::string& name) {
    Splits s;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string token;
        if (!(ls >> token)) continue;  // blank line
        std::string extra;
        if (ls >> extra)
            throw InputError(name + " line " + std::to_string(line_no) + ": trailing token '" +
                             extra + "'");
        std::uint8_t tr = 0, va = 0, te = 0;
        if (token == "train")
            tr = 1;
        else if (token == "val")
            va = 1;
        else if (token == "test")
            te = 1;
        else if (token != "none")
            throw InputError(name + " line " + std::to_string(line_no) + ": unknown split '" +
                             token + "' (want train/val/test/none)");
        s.train.push_back(tr);
        s.val.push_back(va);
        s.test.push_back(te);
    }
    return s;
}

}  // namespace detail

/// Loads edges.tsv, features.txt, labels.txt and splits.txt from a
/// directory. The feature file fixes N; every other file must agree.
template <typename Scalar>
Dataset<Scalar> load_dataset(const std::string& dir, const BuildOptions& opts = {}) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    if (!fs::is_directory(root)) throw InputError("dataset directory not found: " + dir);

    Dataset<Scalar> ds;
    {
        auto in = detail::open_text_file(root / "features.txt");
        ds.features = detail::read_feature_matrix<Scalar>(in, (root / "features.txt").string());
    }
    const Index n = ds.features.rows();
    {
        auto in = detail::open_text_file(root / "labels.txt");
        ds.labels = detail::read_label_file(in, (root / "labels.txt").string());
    }
    if (ds.labels.size() != static_cast<std::size_t>(n))
        throw InputError(dir + ": labels.txt has " + std::to_string(ds.labels.size()) +
                         " entries for " + std::to_string(n) + " nodes");
    {
        auto in = detail::open_text_file(root / "splits.txt");
        ds.splits = detail::read_split_file(in, (root / "splits.txt").string());
    }
    if (ds.splits.train.size() != static_cast<std::size_t>(n))
        throw InputError(dir + ": splits.txt has " + std::to_string(ds.splits.train.size()) +
                         " entries for " + std::to_string(n) + " nodes");

    const EdgeList edges = read_edge_list_file((root / "edges.tsv").string());
    ds.graph = build_csr(edges, n, opts);

    int max_label = -1;
    for (int y : ds.labels) max_label = std::max(max_label, y);
    ds.num_classes = max_label + 1;
    if (ds.num_classes < 1) throw InputError(dir + ": no labels found");
    return ds;
}

}  // namespace gmlp
