#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "spellbee/spelling_table.hpp"

using namespace spellbee;
using test_helpers::TempDir;

namespace {

Vocabulary vocab_from_words(const std::vector<std::string>& words) {
    Vocabulary v;
    v.kind = VocabKind::RankFile;
    v.entries = words;
    return v;
}

std::multiset<std::vector<std::uint8_t>> row_multiset(const SpellingTable& t) {
    std::multiset<std::vector<std::uint8_t>> out;
    for (std::size_t i = 0; i < t.size(); ++i)
        out.insert(std::vector<std::uint8_t>(t.row(i), t.row(i) + kSpellingBytes));
    return out;
}

}  // namespace

TEST_CASE("spelling rows are null-padded ASCII bytes") {
    auto v = vocab_from_words({"cat"});
    auto t = build_spelling_table(v);
    const std::uint8_t* row = t.row(0);
    CHECK(row[0] == 0x63);
    CHECK(row[1] == 0x61);
    CHECK(row[2] == 0x74);
    for (std::size_t i = 3; i < 16; ++i) CHECK(row[i] == 0x00);
}

TEST_CASE("long tokens truncate to the first 16 bytes") {
    std::string long_token = "abcdefghijklmnopqrst";  // 20 bytes
    auto t = build_spelling_table(vocab_from_words({long_token}));
    for (std::size_t i = 0; i < 16; ++i)
        CHECK(t.row(0)[i] == static_cast<std::uint8_t>(long_token[i]));
}

TEST_CASE("multibyte characters keep their UTF-8 encoding") {
    auto t = build_spelling_table(vocab_from_words({"é"}));
    CHECK(t.row(0)[0] == 0xC3);
    CHECK(t.row(0)[1] == 0xA9);
    CHECK(t.row(0)[2] == 0x00);
}

TEST_CASE("special tokens get all-pad rows") {
    auto v = train_mini_bpe("aaaa", 257);
    auto t = build_spelling_table(v);
    const std::uint8_t* eot_row = t.row(static_cast<std::size_t>(v.eot_id));
    for (std::size_t i = 0; i < 16; ++i) CHECK(eot_row[i] == 0x00);
    CHECK(t.row(256)[0] == 'a');
    CHECK(t.row(256)[1] == 'a');
}

TEST_CASE("every row is exactly 16 bytes with trailing pads") {
    auto v = byte_fallback_vocab();
    auto t = build_spelling_table(v);
    CHECK(t.rows.size() == 256 * kSpellingBytes);
    for (std::size_t tok = 0; tok < 256; ++tok)
        for (std::size_t i = 1; i < kSpellingBytes; ++i) CHECK(t.row(tok)[i] == kSpellingPad);
}

TEST_CASE("first_char variant keeps one byte") {
    auto t = build_spelling_table(vocab_from_words({"cat", "dog"}));
    auto fc = table_variant(t, TableVariant::FirstChar);
    CHECK(fc.row(0)[0] == 0x63);
    for (std::size_t i = 1; i < 16; ++i) CHECK(fc.row(0)[i] == 0x00);
    CHECK(fc.row(1)[0] == 0x64);
}

TEST_CASE("shuffled variant preserves the row multiset") {
    std::vector<std::string> words;
    for (int i = 0; i < 40; ++i) words.push_back("w" + std::to_string(i));
    auto t = build_spelling_table(vocab_from_words(words));
    auto shuffled = table_variant(t, TableVariant::Shuffled, 123);
    CHECK(row_multiset(shuffled) == row_multiset(t));
    CHECK(shuffled.rows != t.rows);  // 40 rows, seed 123: permutation is not identity
}

TEST_CASE("shuffled variant with identity permutation equals input") {
    // one row: every permutation is the identity
    auto t1 = build_spelling_table(vocab_from_words({"solo"}));
    auto s1 = table_variant(t1, TableVariant::Shuffled, 9);
    CHECK(s1.rows == t1.rows);
    // identical rows: shuffling cannot change the table
    auto t2 = build_spelling_table(vocab_from_words({"same", "same", "same"}));
    auto s2 = table_variant(t2, TableVariant::Shuffled, 9);
    CHECK(s2.rows == t2.rows);
}

TEST_CASE("inverse permutation recovers the original table") {
    std::vector<std::string> words;
    for (int i = 0; i < 17; ++i) words.push_back("tok" + std::to_string(i));
    auto t = build_spelling_table(vocab_from_words(words));
    std::uint64_t seed = 4242;
    auto shuffled = table_variant(t, TableVariant::Shuffled, seed);
    auto perm = Rng(seed).permutation(words.size());  // same draw as table_variant
    SpellingTable recovered;
    recovered.rows.assign(t.rows.size(), 0);
    for (std::size_t dst = 0; dst < words.size(); ++dst)
        std::copy(shuffled.row(dst), shuffled.row(dst) + kSpellingBytes,
                  recovered.rows.begin() + static_cast<std::ptrdiff_t>(perm[dst] * kSpellingBytes));
    CHECK(recovered.rows == t.rows);
}

TEST_CASE("spelling table save/load round trip") {
    TempDir dir;
    auto t = build_spelling_table(vocab_from_words({"alpha", "beta", "gamma"}));
    save_spelling_table(t, dir.file("t.table"));
    auto t2 = load_spelling_table(dir.file("t.table"));
    CHECK(t2.rows == t.rows);
}

TEST_CASE("substring query finds case-insensitive containment") {
    auto v = vocab_from_words({"apple", " Apple", "grape", "pineapple", "APPLEsauce", "banana"});
    auto hits = vocab_substring_count(v, "apple");
    CHECK(hits == std::vector<std::int32_t>{0, 1, 3, 4});
    CHECK(vocab_substring_count(v, "zzzz").empty());
}

TEST_CASE("substring query on byte-fallback single letters") {
    auto v = byte_fallback_vocab();
    auto hits = vocab_substring_count(v, "a");
    CHECK(hits == std::vector<std::int32_t>{0x41, 0x61});
}

TEST_CASE("apple occurs 11 times in a cl100k-style vocabulary") {
    TempDir dir;
    test_helpers::write_cl100k_style_rank_file(dir.file("cl100k.ranks"));
    auto v = load_rank_file(dir.file("cl100k.ranks"));
    auto hits = vocab_substring_count(v, "apple");
    CHECK(hits.size() == 11);
}

TEST_CASE("variant census on byte-fallback equals distinct bytes") {
    auto v = byte_fallback_vocab();
    auto report = variant_token_census(v, "a");
    // hand enumeration: {a, A} plus the nine distinct leading characters
    CHECK(report.distinct_tokens == 11);
    REQUIRE(report.entries.size() == 22);
    for (const auto& e : report.entries) CHECK(e.encoded);
}

TEST_CASE("census reports per-variant tokenizations on a rank-file vocab") {
    TempDir dir;
    test_helpers::write_cl100k_style_rank_file(dir.file("cl100k.ranks"));
    auto v = load_rank_file(dir.file("cl100k.ranks"));
    auto report = variant_token_census(v, "strawberry");
    CHECK(report.entries.size() == 22);
    CHECK(report.distinct_tokens > 0);
    auto csv = census_csv(report);
    CHECK(csv.find("variant,token_count,token_ids") == 0);
}
