#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "spellbee/datapipe.hpp"

using namespace spellbee;

namespace {

using Docs = std::vector<std::vector<std::int32_t>>;

// Reference stream: documents concatenated with a separator between them.
std::vector<std::int32_t> reference_stream(const Docs& docs, std::int32_t sep) {
    std::vector<std::int32_t> s;
    bool first = true;
    for (const auto& d : docs) {
        if (d.empty()) continue;
        if (!first && sep >= 0) s.push_back(sep);
        s.insert(s.end(), d.begin(), d.end());
        first = false;
    }
    return s;
}

}  // namespace

TEST_CASE("packing hand trace with separator and carry") {
    Docs docs{{1, 2, 3}, {4, 5, 6, 7}};
    PackedBatchStream stream(&docs, 1, 4, /*separator=*/99);
    PackedBatch batch;
    REQUIRE(stream.next(batch));
    CHECK(batch.tokens == std::vector<std::int32_t>{1, 2, 3, 99, 4});
    CHECK(stream.carry() == std::vector<std::int32_t>{5, 6, 7});
    CHECK_FALSE(stream.next(batch));  // 3 leftover tokens cannot fill a row
}

TEST_CASE("a document of exactly seq_len+1 tokens forms one row with no carry") {
    Docs docs{{10, 11, 12, 13, 14}};
    PackedBatchStream stream(&docs, 1, 4, 99);
    PackedBatch batch;
    REQUIRE(stream.next(batch));
    CHECK(batch.tokens == std::vector<std::int32_t>{10, 11, 12, 13, 14});
    CHECK(stream.carry().empty());
}

TEST_CASE("no separator is inserted when the vocabulary has none") {
    Docs docs{{1, 2}, {3, 4, 5}};
    PackedBatchStream stream(&docs, 1, 4, /*separator=*/-1);
    PackedBatch batch;
    REQUIRE(stream.next(batch));
    CHECK(batch.tokens == std::vector<std::int32_t>{1, 2, 3, 4, 5});
}

TEST_CASE("empty corpus yields no batches") {
    Docs docs;
    PackedBatchStream stream(&docs, 2, 4, 0);
    PackedBatch batch;
    CHECK_FALSE(stream.next(batch));
}

TEST_CASE("token conservation over randomized document lists") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n_docs = 1 + rng.uniform_index(12);
        Docs docs(n_docs);
        for (auto& d : docs) {
            std::size_t len = rng.uniform_index(17);
            d.resize(len);
            for (auto& t : d) t = static_cast<std::int32_t>(rng.uniform_index(1000));
        }
        std::size_t batch_size = 1 + rng.uniform_index(3);
        std::size_t seq_len = 2 + rng.uniform_index(6);
        std::int32_t sep = (trial % 2 == 0) ? 7777 : -1;

        PackedBatchStream stream(&docs, batch_size, seq_len, sep);
        std::vector<std::int32_t> reconstructed;
        PackedBatch batch;
        std::size_t n_batches = 0;
        while (stream.next(batch)) {
            REQUIRE(batch.tokens.size() == batch_size * (seq_len + 1));
            reconstructed.insert(reconstructed.end(), batch.tokens.begin(), batch.tokens.end());
            ++n_batches;
        }
        (void)n_batches;
        auto expect = reference_stream(docs, sep);
        REQUIRE(reconstructed.size() <= expect.size());
        for (std::size_t i = 0; i < reconstructed.size(); ++i)
            REQUIRE(reconstructed[i] == expect[i]);
        // whatever was not emitted sits in carry (plus unconsumed full rows
        // that no longer fill a whole batch)
        const auto& carry = stream.carry();
        REQUIRE(carry.size() < seq_len + 1 + (batch_size - 1) * (seq_len + 1) + seq_len + 1);
        for (std::size_t i = 0; i < carry.size(); ++i)
            REQUIRE(carry[i] == expect[reconstructed.size() + i]);
    }
}

TEST_CASE("split_corpus counts and determinism") {
    std::vector<std::string> docs;
    for (int i = 0; i < 10; ++i) docs.push_back("doc" + std::to_string(i));
    auto [train1, test1] = split_corpus(docs, 0.1, 42);
    CHECK(test1.size() == 1);
    CHECK(train1.size() == 9);
    auto [train2, test2] = split_corpus(docs, 0.1, 42);
    CHECK(train1 == train2);
    CHECK(test1 == test2);
    auto [train3, test3] = split_corpus(docs, 0.1, 43);
    CHECK((train3 != train1 || test3 != test1));
}

TEST_CASE("split_corpus partitions the multiset") {
    std::vector<std::string> docs;
    for (int i = 0; i < 37; ++i) docs.push_back("d" + std::to_string(i % 7));
    auto [train, test] = split_corpus(docs, 0.25, 5);
    std::multiset<std::string> all(docs.begin(), docs.end());
    std::multiset<std::string> split;
    split.insert(train.begin(), train.end());
    split.insert(test.begin(), test.end());
    CHECK(all == split);
}

TEST_CASE("split_corpus rejects bad inputs") {
    std::vector<std::string> docs{"a"};
    CHECK_THROWS_AS(split_corpus(docs, 0.1, 1), Error);
    std::vector<std::string> two{"a", "b"};
    CHECK_THROWS_AS(split_corpus(two, 0.7, 1), Error);
}

TEST_CASE("synthetic corpus statements carry true counts") {
    auto docs = synth_spelling_corpus(7, 200);
    REQUIRE(docs.size() == 200);
    for (const auto& doc : docs) {
        // parse "The number of times the letter L occurs in W is N."
        std::string prefix = "The number of times the letter ";
        REQUIRE(doc.rfind(prefix, 0) == 0);
        char letter = doc[prefix.size()];
        std::string rest = doc.substr(prefix.size() + 1);
        REQUIRE(rest.rfind(" occurs in ", 0) == 0);
        rest = rest.substr(11);
        auto is_pos = rest.find(" is ");
        REQUIRE(is_pos != std::string::npos);
        std::string word = rest.substr(0, is_pos);
        std::string num = rest.substr(is_pos + 4);
        REQUIRE(num.back() == '.');
        num.pop_back();
        // independent count oracle
        char lower = static_cast<char>(letter - 'A' + 'a');
        auto expect = std::count(word.begin(), word.end(), lower);
        CHECK(std::to_string(expect) == num);
        CHECK(word.size() >= 4);
        CHECK(word.size() <= 10);
        CHECK(expect >= 1);
    }
}

TEST_CASE("synthetic corpus is deterministic under seed") {
    auto a = synth_spelling_corpus(123, 50);
    auto b = synth_spelling_corpus(123, 50);
    CHECK(a == b);
    auto c = synth_spelling_corpus(124, 50);
    CHECK(a != c);
}

TEST_CASE("banana count doc renders as expected") {
    // direct template check with a fixed word
    std::string word = "banana";
    auto n = std::count(word.begin(), word.end(), 'a');
    std::string doc = "The number of times the letter A occurs in banana is " +
                      std::to_string(n) + ".";
    CHECK(doc == "The number of times the letter A occurs in banana is 3.");
}
