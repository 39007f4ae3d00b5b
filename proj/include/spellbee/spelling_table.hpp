#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "spellbee/common.hpp"
#include "spellbee/vocab.hpp"

namespace spellbee {

constexpr std::size_t kSpellingBytes = 16;
constexpr std::uint8_t kSpellingPad = 0x00;

// Fixed-width byte spellings: one 16-byte row per token, null-padded or
// truncated. Special tokens get all-pad rows.
struct SpellingTable {
    std::vector<std::uint8_t> rows;  // size = vocab_size * 16

    std::size_t size() const { return rows.size() / kSpellingBytes; }

    const std::uint8_t* row(std::size_t token) const {
        check(token < size(), "SpellingTable: token out of range");
        return rows.data() + token * kSpellingBytes;
    }
};

inline SpellingTable build_spelling_table(const Vocabulary& vocab) {
    SpellingTable table;
    table.rows.assign(vocab.size() * kSpellingBytes, kSpellingPad);
    for (std::size_t t = 0; t < vocab.size(); ++t) {
        if (vocab.is_special(static_cast<std::int32_t>(t))) continue;
        const std::string& bytes = vocab.entries[t];
        std::size_t n = std::min(bytes.size(), kSpellingBytes);
        for (std::size_t i = 0; i < n; ++i)
            table.rows[t * kSpellingBytes + i] = static_cast<std::uint8_t>(bytes[i]);
    }
    return table;
}

enum class TableVariant { Shuffled, FirstChar };

// shuffled: rows permuted by a seeded uniform permutation of token ids.
// first_char: keep the first byte, pad the rest.
inline SpellingTable table_variant(const SpellingTable& table, TableVariant variant,
                                   std::uint64_t seed = 0) {
    SpellingTable out;
    out.rows.assign(table.rows.size(), kSpellingPad);
    std::size_t n = table.size();
    if (variant == TableVariant::Shuffled) {
        Rng rng(seed);
        auto perm = rng.permutation(n);
        for (std::size_t t = 0; t < n; ++t)
            std::copy(table.row(perm[t]), table.row(perm[t]) + kSpellingBytes,
                      out.rows.begin() + static_cast<std::ptrdiff_t>(t * kSpellingBytes));
    } else {
        for (std::size_t t = 0; t < n; ++t)
            out.rows[t * kSpellingBytes] = table.row(t)[0];
    }
    return out;
}

inline void save_spelling_table(const SpellingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "cannot write spelling table: " + path);
    out << "spellbee-table 1\n";
    out << "vocab_size=" << table.size() << "\n";
    out << "row_bytes=" << kSpellingBytes << "\n";
    out << "---\n";
    out.write(reinterpret_cast<const char*>(table.rows.data()),
              static_cast<std::streamsize>(table.rows.size()));
    check(out.good(), "write failed: " + path);
}

inline SpellingTable load_spelling_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open spelling table: " + path);
    std::string line;
    std::getline(in, line);
    check(line == "spellbee-table 1", path + ": not a spelling table file");
    std::getline(in, line);
    check(line.rfind("vocab_size=", 0) == 0, path + ": missing vocab_size");
    std::size_t n = std::stoul(line.substr(11));
    std::getline(in, line);
    check(line == "row_bytes=16", path + ": unsupported row width");
    std::getline(in, line);
    check(line == "---", path + ": missing blob separator");
    SpellingTable table;
    table.rows.resize(n * kSpellingBytes);
    in.read(reinterpret_cast<char*>(table.rows.data()),
            static_cast<std::streamsize>(table.rows.size()));
    check(in.gcount() == static_cast<std::streamsize>(table.rows.size()),
          path + ": truncated spelling table");
    return table;
}

// ---------------------------------------------------------------------------
// Vocabulary fragmentation analysis
// ---------------------------------------------------------------------------

// All tokens whose byte string, ASCII-case-folded, contains the word.
inline std::vector<std::int32_t> vocab_substring_count(const Vocabulary& vocab,
                                                       const std::string& word) {
    check(!word.empty(), "vocab_substring_count: word must be non-empty");
    std::string needle = ascii_lower(word);
    std::vector<std::int32_t> out;
    for (std::size_t t = 0; t < vocab.size(); ++t) {
        if (ascii_lower(vocab.entries[t]).find(needle) != std::string::npos)
            out.push_back(static_cast<std::int32_t>(t));
    }
    return out;
}

struct CensusEntry {
    std::string variant;
    bool encoded = false;              // false when the tokenizer cannot cover it
    std::vector<std::int32_t> tokens;
};

struct CensusReport {
    std::string word;
    std::vector<CensusEntry> entries;
    std::size_t distinct_tokens = 0;   // union over successfully encoded variants
};

// Surface-variant census: lower/capitalized forms behind common leading
// characters, plus the all-caps forms. Returns the distinct tokens used.
inline CensusReport variant_token_census(const Vocabulary& vocab, const std::string& word) {
    check(!word.empty(), "variant_token_census: word must be non-empty");
    for (char c : word)
        check((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'),
              "variant_token_census: word must be alphabetic");

    std::string lower = ascii_lower(word);
    std::string capitalized = lower;
    capitalized[0] = static_cast<char>(capitalized[0] - 'a' + 'A');
    std::string upper = lower;
    for (auto& c : upper) c = static_cast<char>(c - 'a' + 'A');

    const char* prefixes[] = {"", " ", "(", ",", "=", "'", ".", "[", "-", "_"};
    std::vector<std::string> variants;
    for (const auto& form : {lower, capitalized})
        for (const char* p : prefixes) variants.push_back(std::string(p) + form);
    variants.push_back(upper);
    variants.push_back("'" + upper);

    CensusReport report;
    report.word = word;
    std::unordered_set<std::int32_t> seen;
    for (const auto& variant : variants) {
        CensusEntry entry;
        entry.variant = variant;
        try {
            entry.tokens = vocab.encode(variant);
            entry.encoded = true;
            for (auto id : entry.tokens) seen.insert(id);
        } catch (const Error&) {
            entry.encoded = false;  // reported per-variant, excluded from union
        }
        report.entries.push_back(std::move(entry));
    }
    report.distinct_tokens = seen.size();
    return report;
}

// CSV rows: variant, token-count, token-ids (ids joined with spaces).
inline std::string census_csv(const CensusReport& report) {
    std::string out = "variant,token_count,token_ids\n";
    for (const auto& e : report.entries) {
        out += "\"" + e.variant + "\",";
        if (!e.encoded) {
            out += "encode-failed,\n";
            continue;
        }
        out += std::to_string(e.tokens.size()) + ",\"";
        for (std::size_t i = 0; i < e.tokens.size(); ++i)
            out += (i ? " " : "") + std::to_string(e.tokens[i]);
        out += "\"\n";
    }
    return out;
}

}  // namespace spellbee
