#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "spellbee/common.hpp"

namespace spellbee {

enum class VocabKind { ByteFallback, MiniBpe, RankFile };

inline std::string to_string(VocabKind k) {
    switch (k) {
        case VocabKind::ByteFallback: return "byte-fallback";
        case VocabKind::MiniBpe: return "mini-bpe";
        case VocabKind::RankFile: return "rank-file";
    }
    return "?";
}

inline VocabKind vocab_kind_from_string(std::string_view s) {
    if (s == "byte-fallback") return VocabKind::ByteFallback;
    if (s == "mini-bpe") return VocabKind::MiniBpe;
    if (s == "rank-file") return VocabKind::RankFile;
    fail("unknown vocabulary format '" + std::string(s) +
         "' (expected byte-fallback, mini-bpe, or rank-file)");
}

// Token inventory. Ids are dense in [0, size). Mini-BPE vocabularies start
// with the 256 byte tokens, place merge products from 256 on, and append a
// reserved <|endoftext|> separator as the final id.
class Vocabulary {
public:
    VocabKind kind = VocabKind::ByteFallback;
    std::vector<std::string> entries;                      // id -> byte string
    std::vector<std::pair<std::int32_t, std::int32_t>> merges;  // mini-bpe, rank order
    std::unordered_set<std::int32_t> specials;             // exempt from spelling
    std::int32_t eot_id = -1;                              // -1 when absent
    bool undersized = false;  // set when BPE training ran out of pairs

    std::size_t size() const { return entries.size(); }

    const std::string& bytes_of(std::int32_t id) const {
        check(id >= 0 && static_cast<std::size_t>(id) < entries.size(),
              "Vocabulary: token id " + std::to_string(id) + " out of range");
        return entries[static_cast<std::size_t>(id)];
    }

    bool is_special(std::int32_t id) const { return specials.count(id) > 0; }

    // Specials contribute nothing to decoded text.
    std::string decode(std::span<const std::int32_t> ids) const {
        std::string out;
        for (auto id : ids)
            if (!is_special(id)) out += bytes_of(id);
        return out;
    }

    std::vector<std::int32_t> encode(std::string_view text) const {
        switch (kind) {
            case VocabKind::ByteFallback: {
                std::vector<std::int32_t> ids(text.size());
                for (std::size_t i = 0; i < text.size(); ++i)
                    ids[i] = static_cast<unsigned char>(text[i]);
                return ids;
            }
            case VocabKind::MiniBpe: return encode_bpe(text);
            case VocabKind::RankFile: return encode_greedy_longest_match(text);
        }
        fail("Vocabulary::encode: bad kind");
    }

    // BPE encode: repeatedly apply the earliest-ranked merge present. This is
    // equivalent to replaying merges in rank order, since a later merge can
    // never create the operands of an earlier one.
    std::vector<std::int32_t> encode_bpe(std::string_view text) const {
        std::vector<std::int32_t> ids(text.size());
        for (std::size_t i = 0; i < text.size(); ++i)
            ids[i] = static_cast<unsigned char>(text[i]);
        if (merge_rank_.empty() && !merges.empty()) build_merge_index();
        while (ids.size() >= 2) {
            std::size_t best_rank = SIZE_MAX;
            for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
                auto it = merge_rank_.find(pack_pair(ids[i], ids[i + 1]));
                if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
            }
            if (best_rank == SIZE_MAX) break;
            auto [a, b] = merges[best_rank];
            std::int32_t merged = first_merge_id() + static_cast<std::int32_t>(best_rank);
            std::size_t w = 0;
            for (std::size_t r = 0; r < ids.size();) {
                if (r + 1 < ids.size() && ids[r] == a && ids[r + 1] == b) {
                    ids[w++] = merged;
                    r += 2;
                } else {
                    ids[w++] = ids[r++];
                }
            }
            ids.resize(w);
        }
        return ids;
    }

    // Rank-file vocabularies approximate the original tokenizer with greedy
    // longest-match (no pre-splitter); results are best-effort.
    std::vector<std::int32_t> encode_greedy_longest_match(std::string_view text) const {
        if (token_ids_.empty() && !entries.empty()) build_token_index();
        std::vector<std::int32_t> out;
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t try_len = std::min(max_token_len_, text.size() - pos);
            bool matched = false;
            for (std::size_t len = try_len; len >= 1; --len) {
                auto it = token_ids_.find(std::string(text.substr(pos, len)));
                if (it != token_ids_.end()) {
                    out.push_back(it->second);
                    pos += len;
                    matched = true;
                    break;
                }
            }
            if (!matched)
                fail("encode: no vocabulary token matches input at byte offset " +
                     std::to_string(pos));
        }
        return out;
    }

    std::int32_t first_merge_id() const { return 256; }

    static std::uint64_t pack_pair(std::int32_t a, std::int32_t b) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint32_t>(b);
    }

private:
    void build_merge_index() const {
        merge_rank_.reserve(merges.size());
        for (std::size_t r = 0; r < merges.size(); ++r)
            merge_rank_[pack_pair(merges[r].first, merges[r].second)] = r;
    }
    void build_token_index() const {
        token_ids_.reserve(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (specials.count(static_cast<std::int32_t>(i))) continue;
            token_ids_.emplace(entries[i], static_cast<std::int32_t>(i));
            max_token_len_ = std::max(max_token_len_, entries[i].size());
        }
    }

    mutable std::unordered_map<std::uint64_t, std::size_t> merge_rank_;
    mutable std::unordered_map<std::string, std::int32_t> token_ids_;
    mutable std::size_t max_token_len_ = 0;
};

inline Vocabulary byte_fallback_vocab() {
    Vocabulary v;
    v.kind = VocabKind::ByteFallback;
    v.entries.resize(256);
    for (int i = 0; i < 256; ++i) v.entries[i] = std::string(1, static_cast<char>(i));
    return v;
}

// ---------------------------------------------------------------------------
// Mini-BPE training. Starts from the 256 byte tokens and merges the most
// frequent adjacent pair until target_size tokens exist; merge products take
// ids 256, 257, ... Ties break toward the lexicographically smaller
// (left-bytes, right-bytes) pair. Pair counts are maintained incrementally
// during the left-to-right rewrite pass. A reserved <|endoftext|> separator
// is appended after the merges as the final id.
// ---------------------------------------------------------------------------
inline Vocabulary train_mini_bpe(std::string_view corpus, std::size_t target_size) {
    check(target_size >= 256, "train_mini_bpe: target size must be >= 256");
    Vocabulary v;
    v.kind = VocabKind::MiniBpe;
    v.entries.resize(256);
    for (int i = 0; i < 256; ++i) v.entries[i] = std::string(1, static_cast<char>(i));

    std::vector<std::int32_t> seq(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i)
        seq[i] = static_cast<unsigned char>(corpus[i]);

    std::unordered_map<std::uint64_t, std::int64_t> counts;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i)
        ++counts[Vocabulary::pack_pair(seq[i], seq[i + 1])];

    while (v.entries.size() < target_size) {
        std::uint64_t best_key = 0;
        std::int64_t best_count = 0;
        const std::string* best_l = nullptr;
        const std::string* best_r = nullptr;
        for (const auto& [key, count] : counts) {
            if (count <= 0) continue;
            auto a = static_cast<std::int32_t>(key >> 32);
            auto b = static_cast<std::int32_t>(key & 0xFFFFFFFF);
            const std::string& lb = v.entries[static_cast<std::size_t>(a)];
            const std::string& rb = v.entries[static_cast<std::size_t>(b)];
            bool better = count > best_count;
            if (count == best_count && best_l) {
                // lexicographic tie-break on (left bytes, right bytes)
                if (lb < *best_l || (lb == *best_l && rb < *best_r)) better = true;
            }
            if (better) {
                best_key = key;
                best_count = count;
                best_l = &lb;
                best_r = &rb;
            }
        }
        if (best_count <= 0) {
            v.undersized = true;
            break;
        }
        auto a = static_cast<std::int32_t>(best_key >> 32);
        auto b = static_cast<std::int32_t>(best_key & 0xFFFFFFFF);
        std::int32_t merged = static_cast<std::int32_t>(v.entries.size());
        v.entries.push_back(v.entries[static_cast<std::size_t>(a)] +
                            v.entries[static_cast<std::size_t>(b)]);
        v.merges.emplace_back(a, b);

        // Rewrite pass with incremental count updates. prev reads the already
        // rewritten buffer so cascading adjacencies stay consistent.
        std::size_t w = 0;
        for (std::size_t r = 0; r < seq.size();) {
            if (r + 1 < seq.size() && seq[r] == a && seq[r + 1] == b) {
                --counts[best_key];
                if (w > 0) {
                    --counts[Vocabulary::pack_pair(seq[w - 1], a)];
                    ++counts[Vocabulary::pack_pair(seq[w - 1], merged)];
                }
                if (r + 2 < seq.size()) {
                    --counts[Vocabulary::pack_pair(b, seq[r + 2])];
                    ++counts[Vocabulary::pack_pair(merged, seq[r + 2])];
                }
                seq[w++] = merged;
                r += 2;
            } else {
                seq[w++] = seq[r++];
            }
        }
        seq.resize(w);
    }
    v.eot_id = static_cast<std::int32_t>(v.entries.size());
    v.entries.push_back("<|endoftext|>");
    v.specials.insert(v.eot_id);
    return v;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

// Rank file: one "base64(token) rank" pair per line. Ranks must form a dense
// range starting at 0.
inline Vocabulary load_rank_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open rank file: " + path);
    Vocabulary v;
    v.kind = VocabKind::RankFile;
    std::vector<std::optional<std::string>> by_rank;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        auto space = t.find(' ');
        check(space != std::string::npos,
              path + ":" + std::to_string(lineno) + ": expected 'base64 rank'");
        std::string token;
        check(base64_decode(t.substr(0, space), token),
              path + ":" + std::to_string(lineno) + ": invalid base64 token");
        std::size_t rank = 0;
        try {
            rank = std::stoul(t.substr(space + 1));
        } catch (...) {
            fail(path + ":" + std::to_string(lineno) + ": invalid rank");
        }
        if (rank >= by_rank.size()) by_rank.resize(rank + 1);
        check(!by_rank[rank].has_value(),
              path + ":" + std::to_string(lineno) + ": duplicate rank " + std::to_string(rank));
        by_rank[rank] = std::move(token);
    }
    v.entries.reserve(by_rank.size());
    for (std::size_t r = 0; r < by_rank.size(); ++r) {
        check(by_rank[r].has_value(), path + ": rank " + std::to_string(r) + " missing; ids must be dense");
        v.entries.push_back(std::move(*by_rank[r]));
    }
    check(!v.entries.empty(), path + ": empty rank file");
    return v;
}

inline void save_vocab(const Vocabulary& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "cannot write vocabulary file: " + path);
    out << "spellbee-vocab 1\n";
    out << "kind=" << to_string(v.kind) << "\n";
    out << "size=" << v.size() << "\n";
    out << "eot=" << v.eot_id << "\n";
    out << "undersized=" << (v.undersized ? 1 : 0) << "\n";
    out << "merges=" << v.merges.size() << "\n";
    for (auto [a, b] : v.merges) out << a << " " << b << "\n";
    check(out.good(), "write failed: " + path);
}

inline Vocabulary load_saved_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open vocabulary file: " + path);
    std::string header;
    std::getline(in, header);
    check(header == "spellbee-vocab 1", path + ": not a spellbee vocabulary file");
    auto read_kv = [&](const std::string& key) {
        std::string line;
        check(static_cast<bool>(std::getline(in, line)), path + ": truncated vocabulary file");
        check(line.rfind(key + "=", 0) == 0, path + ": expected '" + key + "=' line");
        return line.substr(key.size() + 1);
    };
    std::string kind = read_kv("kind");
    std::size_t size = std::stoul(read_kv("size"));
    std::int32_t eot = std::stoi(read_kv("eot"));
    bool undersized = read_kv("undersized") == "1";
    std::size_t n_merges = std::stoul(read_kv("merges"));

    Vocabulary v;
    v.kind = vocab_kind_from_string(kind);
    check(v.kind != VocabKind::RankFile, path + ": rank-file vocabularies load from rank files");
    v.entries.resize(256);
    for (int i = 0; i < 256; ++i) v.entries[i] = std::string(1, static_cast<char>(i));
    v.undersized = undersized;
    for (std::size_t i = 0; i < n_merges; ++i) {
        std::int64_t a, b;
        check(static_cast<bool>(in >> a >> b), path + ": truncated merge list");
        check(a >= 0 && b >= 0 && a < static_cast<std::int64_t>(v.entries.size()) &&
                  b < static_cast<std::int64_t>(v.entries.size()),
              path + ": merge references unknown token");
        v.merges.emplace_back(static_cast<std::int32_t>(a), static_cast<std::int32_t>(b));
        v.entries.push_back(v.entries[static_cast<std::size_t>(a)] +
                            v.entries[static_cast<std::size_t>(b)]);
    }
    if (eot >= 0) {
        check(eot == static_cast<std::int32_t>(v.entries.size()), path + ": unexpected eot id");
        v.eot_id = eot;
        v.entries.push_back("<|endoftext|>");
        v.specials.insert(eot);
    }
    check(v.size() == size, path + ": size field does not match merge count");
    return v;
}

inline Vocabulary load_vocab(const std::string& path, VocabKind format) {
    switch (format) {
        case VocabKind::ByteFallback: return byte_fallback_vocab();
        case VocabKind::RankFile: return load_rank_file(path);
        case VocabKind::MiniBpe: return load_saved_vocab(path);
    }
    fail("load_vocab: bad format");
}

}  // namespace spellbee
