#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spellbee/common.hpp"

namespace spellbee {

// One training batch: batch_size rows of (seq_len+1) token ids. Inputs are
// row[0..seq) and targets row[1..seq]; rows are consecutive disjoint chunks
// of the packed document stream.
struct PackedBatch {
    std::size_t batch_size = 0;
    std::size_t seq_len = 0;
    std::vector<std::int32_t> tokens;  // batch_size * (seq_len+1)

    const std::int32_t* row(std::size_t r) const { return tokens.data() + r * (seq_len + 1); }
};

// Packs documents by concatenation (separator id between documents, when one
// exists) into rows of seq_len+1 tokens. Overhanging tokens carry over to the
// next row; only full batches are emitted.
class PackedBatchStream {
public:
    PackedBatchStream(const std::vector<std::vector<std::int32_t>>* docs, std::size_t batch_size,
                      std::size_t seq_len, std::int32_t separator_id = -1)
        : docs_(docs), batch_size_(batch_size), seq_len_(seq_len), separator_(separator_id) {
        check(batch_size_ >= 1 && seq_len_ >= 1, "PackedBatchStream: sizes must be positive");
    }

    void reset() {
        carry_.clear();
        next_doc_ = 0;
        any_appended_ = false;
    }

    // False once the remaining documents cannot fill another full batch; in
    // that case the stream state is left untouched, so no tokens are lost and
    // the final partial row stays in carry().
    bool next(PackedBatch& out) {
        out.batch_size = batch_size_;
        out.seq_len = seq_len_;
        out.tokens.clear();
        out.tokens.reserve(batch_size_ * (seq_len_ + 1));
        auto saved_carry = carry_;
        auto saved_doc = next_doc_;
        auto saved_appended = any_appended_;
        std::size_t row_len = seq_len_ + 1;
        for (std::size_t r = 0; r < batch_size_; ++r) {
            while (carry_.size() < row_len && next_doc_ < docs_->size()) {
                const auto& doc = (*docs_)[next_doc_++];
                if (doc.empty()) continue;
                if (any_appended_ && separator_ >= 0) carry_.push_back(separator_);
                carry_.insert(carry_.end(), doc.begin(), doc.end());
                any_appended_ = true;
            }
            if (carry_.size() < row_len) {
                carry_ = std::move(saved_carry);
                next_doc_ = saved_doc;
                any_appended_ = saved_appended;
                return false;
            }
            out.tokens.insert(out.tokens.end(), carry_.begin(),
                              carry_.begin() + static_cast<std::ptrdiff_t>(row_len));
            carry_.erase(carry_.begin(), carry_.begin() + static_cast<std::ptrdiff_t>(row_len));
        }
        return true;
    }

    const std::vector<std::int32_t>& carry() const { return carry_; }

private:
    const std::vector<std::vector<std::int32_t>>* docs_;
    std::size_t batch_size_;
    std::size_t seq_len_;
    std::int32_t separator_;
    std::vector<std::int32_t> carry_;
    std::size_t next_doc_ = 0;
    bool any_appended_ = false;
};

// Seeded document-level split. Test documents are chosen by a seeded
// permutation; both halves keep their original relative order.
template <class Doc>
std::pair<std::vector<Doc>, std::vector<Doc>> split_corpus(const std::vector<Doc>& docs,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
    check(test_fraction > 0.0 && test_fraction < 0.5,
          "split_corpus: test_fraction must be in (0, 0.5)");
    std::size_t n = docs.size();
    check(n >= 2, "split_corpus: need at least 2 documents");
    std::size_t k = static_cast<std::size_t>(static_cast<double>(n) * test_fraction);
    k = std::max<std::size_t>(1, std::min(k, n - 1));
    auto perm = Rng(seed).permutation(n);
    std::vector<bool> is_test(n, false);
    for (std::size_t i = 0; i < k; ++i) is_test[perm[i]] = true;
    std::pair<std::vector<Doc>, std::vector<Doc>> out;
    for (std::size_t i = 0; i < n; ++i)
        (is_test[i] ? out.second : out.first).push_back(docs[i]);
    return out;
}

// Synthetic letter-counting corpus. Nonce words make token-level
// memorization useless: the answer is only predictable from spelling.
inline std::vector<std::string> synth_spelling_corpus(std::uint64_t seed, std::size_t n_docs) {
    check(n_docs >= 1, "synth_spelling_corpus: n_docs must be >= 1");
    Rng rng(seed);
    std::vector<std::string> docs;
    docs.reserve(n_docs);
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::size_t len = 4 + rng.uniform_index(7);  // 4..10
        std::string word(len, 'a');
        for (auto& c : word) c = static_cast<char>('a' + rng.uniform_index(26));
        std::string distinct;
        for (char c : word)
            if (distinct.find(c) == std::string::npos) distinct.push_back(c);
        char letter = distinct[rng.uniform_index(distinct.size())];
        std::size_t count = static_cast<std::size_t>(std::count(word.begin(), word.end(), letter));
        docs.push_back("The number of times the letter " +
                       std::string(1, static_cast<char>(letter - 'a' + 'A')) + " occurs in " +
                       word + " is " + std::to_string(count) + ".");
    }
    return docs;
}

// Corpus directory convention: plain-text files in lexicographic filename
// order, one document per non-empty line.
inline std::vector<std::string> read_corpus_dir(const std::string& dir) {
    std::vector<std::string> files;
    check(std::filesystem::is_directory(dir), "corpus path is not a directory: " + dir);
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    std::vector<std::string> docs;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        check(in.good(), "cannot open corpus file: " + f);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) docs.push_back(line);
        }
    }
    return docs;
}

inline void write_corpus_file(const std::vector<std::string>& docs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "cannot write corpus file: " + path);
    for (const auto& d : docs) out << d << "\n";
    check(out.good(), "write failed: " + path);
}

}  // namespace spellbee
