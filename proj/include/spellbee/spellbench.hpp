#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spellbee/common.hpp"
#include "spellbee/model.hpp"

namespace spellbee {

enum class TaskKind { Count, Index, Reverse };

inline std::string to_string(TaskKind k) {
    switch (k) {
        case TaskKind::Count: return "count";
        case TaskKind::Index: return "index";
        case TaskKind::Reverse: return "reverse";
    }
    return "?";
}

inline TaskKind task_kind_from_string(std::string_view s) {
    if (s == "count") return TaskKind::Count;
    if (s == "index") return TaskKind::Index;
    if (s == "reverse") return TaskKind::Reverse;
    fail("unknown task kind '" + std::string(s) + "'");
}

struct SpellingTask {
    TaskKind kind = TaskKind::Count;
    std::string prompt;  // 3 few-shot examples + query, newline-joined
    std::string answer;
    std::string word;
    std::string meta;  // letter (count) or 1-based position (index)
};

inline std::string ordinal(int n) {
    static const char* words[] = {"first", "second", "third",  "fourth", "fifth",
                                  "sixth", "seventh", "eighth", "ninth",  "tenth"};
    check(n >= 1 && n <= 10, "ordinal: position " + std::to_string(n) + " out of range 1..10");
    return words[n - 1];
}

// The three task templates. Queries are the same strings truncated right
// before the answer; count and reverse keep their trailing space.
inline std::string count_example(const std::string& word, char letter, std::size_t n) {
    return "The number of times the letter " + std::string(1, letter) + " occurs in " + word +
           " is " + std::to_string(n);
}
inline std::string count_query(const std::string& word, char letter) {
    return "The number of times the letter " + std::string(1, letter) + " occurs in " + word +
           " is ";
}
inline std::string index_example(const std::string& word, int position, char c) {
    return "Q: What is the " + ordinal(position) + " letter of the word '" + word +
           "'? A: " + std::string(1, c);
}
inline std::string index_query(const std::string& word, int position) {
    return "Q: What is the " + ordinal(position) + " letter of the word '" + word + "'? A:";
}
inline std::string reverse_example(const std::string& word, const std::string& reversed) {
    return word + " reversed is " + reversed;
}
inline std::string reverse_query(const std::string& word) { return word + " reversed is "; }

inline const std::string kStrawberryPrompt =
    "The number of times the letter R occurs in strawberry is ";

namespace detail {

inline std::size_t letter_count(const std::string& word, char lower_letter) {
    std::size_t n = 0;
    for (char c : word)
        if (ascii_lower(c) == lower_letter) ++n;
    return n;
}

inline bool is_palindrome(const std::string& w) {
    for (std::size_t i = 0, j = w.size(); i + 1 <= j; ++i, --j)
        if (ascii_lower(w[i]) != ascii_lower(w[j - 1])) return false;
    return true;
}

}  // namespace detail

inline std::vector<std::string> load_wordlist(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "cannot open wordlist: " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        std::string w = trim(line);
        if (!w.empty()) words.push_back(ascii_lower(w));
    }
    return words;
}

// Benchmark generator: 2,450 count, 2,450 index, 100 reverse tasks from
// words of 4-10 letters. Each prompt carries three same-kind few-shot
// examples over words distinct from the query word. Count letters are drawn
// from the distinct letters of the word, so every count answer is >= 1;
// palindromes are excluded from the reverse task.
inline std::vector<SpellingTask> gen_benchmark(const std::vector<std::string>& wordlist,
                                               std::uint64_t seed) {
    std::vector<std::string> eligible;
    for (const auto& raw : wordlist) {
        std::string w = ascii_lower(trim(raw));
        if (w.size() < 4 || w.size() > 10) continue;
        bool alpha = !w.empty();
        for (char c : w) alpha = alpha && c >= 'a' && c <= 'z';
        if (alpha) eligible.push_back(w);
    }
    std::sort(eligible.begin(), eligible.end());
    eligible.erase(std::unique(eligible.begin(), eligible.end()), eligible.end());
    if (eligible.size() < 200)
        fail("gen_benchmark: need at least 200 eligible words (4-10 letters), found " +
             std::to_string(eligible.size()) + "; short by " +
             std::to_string(200 - eligible.size()));
    std::vector<std::string> non_palindromes;
    for (const auto& w : eligible)
        if (!detail::is_palindrome(w)) non_palindromes.push_back(w);
    check(non_palindromes.size() >= 4, "gen_benchmark: not enough non-palindrome words");

    Rng rng(seed);
    auto pick = [&rng](const std::vector<std::string>& pool, const std::string& exclude) {
        while (true) {
            const auto& w = pool[rng.uniform_index(pool.size())];
            if (w != exclude) return w;
        }
    };
    auto pick_distinct3 = [&](const std::vector<std::string>& pool, const std::string& exclude) {
        std::vector<std::string> out;
        while (out.size() < 3) {
            auto w = pick(pool, exclude);
            if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
        }
        return out;
    };
    auto count_letter_of = [&](const std::string& w) {
        std::string distinct;
        for (char c : w)
            if (distinct.find(c) == std::string::npos) distinct.push_back(c);
        char lower = distinct[rng.uniform_index(distinct.size())];
        return static_cast<char>(lower - 'a' + 'A');
    };

    std::vector<SpellingTask> tasks;
    tasks.reserve(5000);
    for (int i = 0; i < 2450; ++i) {
        const auto& word = eligible[rng.uniform_index(eligible.size())];
        char letter = count_letter_of(word);
        auto shots = pick_distinct3(eligible, word);
        std::string prompt;
        for (const auto& s : shots) {
            char l = count_letter_of(s);
            prompt += count_example(s, l, detail::letter_count(s, ascii_lower(l))) + "\n";
        }
        prompt += count_query(word, letter);
        SpellingTask t;
        t.kind = TaskKind::Count;
        t.prompt = std::move(prompt);
        t.answer = std::to_string(detail::letter_count(word, ascii_lower(letter)));
        t.word = word;
        t.meta = std::string(1, letter);
        tasks.push_back(std::move(t));
    }
    for (int i = 0; i < 2450; ++i) {
        const auto& word = eligible[rng.uniform_index(eligible.size())];
        int pos = 1 + static_cast<int>(rng.uniform_index(word.size()));
        auto shots = pick_distinct3(eligible, word);
        std::string prompt;
        for (const auto& s : shots) {
            int p = 1 + static_cast<int>(rng.uniform_index(s.size()));
            prompt += index_example(s, p, s[static_cast<std::size_t>(p - 1)]) + "\n";
        }
        prompt += index_query(word, pos);
        SpellingTask t;
        t.kind = TaskKind::Index;
        t.prompt = std::move(prompt);
        t.answer = std::string(1, word[static_cast<std::size_t>(pos - 1)]);
        t.word = word;
        t.meta = std::to_string(pos);
        tasks.push_back(std::move(t));
    }
    for (int i = 0; i < 100; ++i) {
        const auto& word = non_palindromes[rng.uniform_index(non_palindromes.size())];
        auto shots = pick_distinct3(non_palindromes, word);
        std::string prompt;
        for (const auto& s : shots)
            prompt += reverse_example(s, std::string(s.rbegin(), s.rend())) + "\n";
        prompt += reverse_query(word);
        SpellingTask t;
        t.kind = TaskKind::Reverse;
        t.prompt = std::move(prompt);
        t.answer = std::string(word.rbegin(), word.rend());
        t.word = word;
        tasks.push_back(std::move(t));
    }
    return tasks;
}

// JSON-lines persistence: {"kind", "prompt", "answer", "word", "meta"}.
inline void save_benchmark(const std::vector<SpellingTask>& tasks, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "cannot write benchmark: " + path);
    for (const auto& t : tasks) {
        nlohmann::json j{{"kind", to_string(t.kind)},
                         {"prompt", t.prompt},
                         {"answer", t.answer},
                         {"word", t.word},
                         {"meta", t.meta}};
        out << j.dump() << "\n";
    }
    check(out.good(), "write failed: " + path);
}

inline std::vector<SpellingTask> load_benchmark(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open benchmark: " + path);
    std::vector<SpellingTask> tasks;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            fail(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
        }
        SpellingTask t;
        t.kind = task_kind_from_string(j.at("kind").get<std::string>());
        t.prompt = j.at("prompt").get<std::string>();
        t.answer = j.at("answer").get<std::string>();
        t.word = j.value("word", "");
        t.meta = j.value("meta", "");
        tasks.push_back(std::move(t));
    }
    return tasks;
}

// A completer maps a prompt to generated text (already truncated at the stop
// mark), or nullopt when the prompt does not fit the model context.
using Completer = std::function<std::optional<std::string>(const std::string&)>;

struct KindScore {
    std::size_t n = 0;
    std::size_t correct = 0;
    std::size_t skipped = 0;
    double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
};

struct BenchReport {
    KindScore count, index, reverse, overall;
};

// Exact-match evaluation, ASCII case-insensitive, surrounding whitespace
// stripped. Skipped tasks (prompt too long) count toward n but not correct.
inline BenchReport evaluate(const Completer& completer, const std::vector<SpellingTask>& tasks) {
    BenchReport report;
    for (const auto& task : tasks) {
        KindScore* score = task.kind == TaskKind::Count   ? &report.count
                           : task.kind == TaskKind::Index ? &report.index
                                                          : &report.reverse;
        ++score->n;
        ++report.overall.n;
        auto completion = completer(task.prompt);
        if (!completion.has_value()) {
            ++score->skipped;
            ++report.overall.skipped;
            continue;
        }
        if (iequals_ascii(trim(*completion), trim(task.answer))) {
            ++score->correct;
            ++report.overall.correct;
        }
    }
    return report;
}

inline std::string bench_report_csv(const BenchReport& r) {
    std::ostringstream os;
    os.precision(6);
    os << "kind,n,correct,skipped,accuracy\n";
    auto row = [&os](const char* kind, const KindScore& s) {
        os << kind << "," << s.n << "," << s.correct << "," << s.skipped << "," << s.accuracy()
           << "\n";
    };
    row("count", r.count);
    row("index", r.index);
    row("reverse", r.reverse);
    row("overall", r.overall);
    return os.str();
}

// Wraps a trained model as a completer: greedy decode, stop at the first
// newline, at most 32 new tokens.
template <class Real>
Completer model_completer(ModelWeights<Real>& weights, const SpellingTable& table,
                          const Vocabulary& vocab) {
    return [&weights, &table, &vocab](const std::string& prompt) -> std::optional<std::string> {
        auto ids = vocab.encode(prompt);
        if (ids.size() >= static_cast<std::size_t>(weights.config.seq_len)) return std::nullopt;
        return generate_greedy(weights, table, vocab, ids, 32, "\n");
    };
}

// The exact probe prompt; ground truth is "3".
inline std::string strawberry_probe(const Completer& completer) {
    auto out = completer(kStrawberryPrompt);
    check(out.has_value(), "strawberry_probe: prompt does not fit the model context");
    return trim(*out);
}

}  // namespace spellbee
