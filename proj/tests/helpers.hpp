#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spellbee/common.hpp"

namespace test_helpers {

// Fresh directory under the system temp root; removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        std::string tmpl = (base / "spellbee-test-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        char* got = mkdtemp(buf.data());
        if (!got) throw std::runtime_error("mkdtemp failed");
        path = got;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out.good()) throw std::runtime_error("write_file failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw std::runtime_error("read_file failed: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes a rank file with the shape and scale of a cl100k-style vocabulary:
// 100,256 dense ranks, base64-encoded byte strings. It contains the 256
// single-byte tokens, a set of real surface-form tokens around "apple" and
// "strawberry", and synthetic filler drawn from an alphabet that cannot spell
// "apple".
inline void write_cl100k_style_rank_file(const std::string& path) {
    std::vector<std::string> tokens;
    tokens.reserve(100256);
    for (int i = 0; i < 256; ++i) tokens.push_back(std::string(1, static_cast<char>(i)));
    const char* apple_tokens[] = {" Apple", "apple",  " apple",       "Apple",
                                  ".apple", " apples", " AppleWebKit", "/apple",
                                  " pineapple", "APPLE", " APPLE"};
    for (const char* t : apple_tokens) tokens.push_back(t);
    const char* strawberry_tokens[] = {
        "str", "aw",  "berry", " strawberry", "Str", " Strawberry", "(str", "(Str",
        ",str", "=str", "ST",   "RAW",         "ERRY", "'S",          "TR",   "AW",
        "'s",  "tr",  ".Str",  ".str",        "[str", "-str",        "_str"};
    for (const char* t : strawberry_tokens) tokens.push_back(t);
    // Filler: 'q' + base-18 digits over letters excluding a/p/l/e, so no
    // filler token can contain "apple".
    const char* alphabet = "bcdfghjkmnqrstvwxz";
    std::size_t n = 0;
    while (tokens.size() < 100256) {
        std::string t = "q";
        std::size_t v = n++;
        do {
            t += alphabet[v % 18];
            v /= 18;
        } while (v > 0);
        tokens.push_back(t);
    }
    std::ofstream out(path, std::ios::binary);
    for (std::size_t rank = 0; rank < tokens.size(); ++rank)
        out << spellbee::base64_encode(tokens[rank]) << " " << rank << "\n";
    if (!out.good()) throw std::runtime_error("failed to write rank file");
}

}  // namespace test_helpers
