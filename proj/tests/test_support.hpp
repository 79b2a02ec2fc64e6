#pragma once

#if defined(GMLP_CATCH_AMALGAMATED)
#include <catch2/catch_amalgamated.hpp>
#else
#include <catch2/catch_all.hpp>
#endif

#include "oracles.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

namespace testutil {

inline std::filesystem::path source_dir() { return std::filesystem::path(GMLP_SOURCE_DIR); }

inline std::filesystem::path toy_dir() { return source_dir() / "data" / "toy"; }

inline std::filesystem::path cora_dir() { return source_dir() / "data" / "cora"; }

inline bool has_cora() { return std::filesystem::exists(cora_dir() / "features.txt"); }

// Unique scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<std::uint64_t> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("gmlp-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

// Minimal well-formed 4-node dataset; corruption tests tweak one file at a
// time starting from this baseline.
inline void write_tiny_dataset(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "edges.tsv", "0\t1\n1\t2\n2\t3\n");
    write_text(dir / "features.txt", "1.0 0.0\n0.9 0.1\n0.1 0.9\n0.0 1.0\n");
    write_text(dir / "labels.txt", "0\n0\n1\n1\n");
    write_text(dir / "splits.txt", "train\nval\ntrain\ntest\n");
}

}  // namespace testutil
