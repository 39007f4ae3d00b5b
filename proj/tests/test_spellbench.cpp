#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "spellbee/spellbench.hpp"

using namespace spellbee;
using test_helpers::TempDir;

#ifndef SPELLBEE_DATA_DIR
#define SPELLBEE_DATA_DIR "data"
#endif

namespace {

std::vector<std::string> sample_words() {
    return load_wordlist(std::string(SPELLBEE_DATA_DIR) + "/words_sample.txt");
}

// Pulls the word used in a few-shot example line back out of the template.
std::string word_of_example_line(TaskKind kind, const std::string& line) {
    if (kind == TaskKind::Count) {
        auto at = line.find(" occurs in ");
        auto end = line.find(" is ", at);
        return line.substr(at + 11, end - (at + 11));
    }
    if (kind == TaskKind::Index) {
        auto open = line.find('\'');
        auto close = line.find('\'', open + 1);
        return line.substr(open + 1, close - open - 1);
    }
    return line.substr(0, line.find(" reversed is "));
}

}  // namespace

TEST_CASE("ordinal words") {
    CHECK(ordinal(1) == "first");
    CHECK(ordinal(2) == "second");
    CHECK(ordinal(3) == "third");
    CHECK(ordinal(10) == "tenth");
    CHECK_THROWS_AS(ordinal(0), Error);
    CHECK_THROWS_AS(ordinal(11), Error);
}

TEST_CASE("task templates are byte-exact") {
    CHECK(count_example("banana", 'A', 3) ==
          "The number of times the letter A occurs in banana is 3");
    CHECK(count_query("banana", 'A') == "The number of times the letter A occurs in banana is ");
    CHECK(index_example("banana", 3, 'n') ==
          "Q: What is the third letter of the word 'banana'? A: n");
    CHECK(index_query("banana", 3) == "Q: What is the third letter of the word 'banana'? A:");
    CHECK(reverse_example("cat", "tac") == "cat reversed is tac");
    CHECK(reverse_query("cat") == "cat reversed is ");
    CHECK(kStrawberryPrompt == "The number of times the letter R occurs in strawberry is ");
}

TEST_CASE("benchmark has exact task counts and valid words") {
    auto tasks = gen_benchmark(sample_words(), 7);
    std::size_t n_count = 0, n_index = 0, n_reverse = 0;
    for (const auto& t : tasks) {
        if (t.kind == TaskKind::Count) ++n_count;
        if (t.kind == TaskKind::Index) ++n_index;
        if (t.kind == TaskKind::Reverse) ++n_reverse;
        CHECK(t.word.size() >= 4);
        CHECK(t.word.size() <= 10);
    }
    CHECK(n_count == 2450);
    CHECK(n_index == 2450);
    CHECK(n_reverse == 100);
    CHECK(tasks.size() == 5000);
}

TEST_CASE("every benchmark answer matches the string oracle") {
    auto tasks = gen_benchmark(sample_words(), 11);
    for (const auto& t : tasks) {
        switch (t.kind) {
            case TaskKind::Count: {
                REQUIRE(t.meta.size() == 1);
                char lower = static_cast<char>(t.meta[0] - 'A' + 'a');
                auto n = std::count(t.word.begin(), t.word.end(), lower);
                REQUIRE(t.answer == std::to_string(n));
                REQUIRE(n >= 1);
                break;
            }
            case TaskKind::Index: {
                int pos = std::stoi(t.meta);
                REQUIRE(pos >= 1);
                REQUIRE(pos <= static_cast<int>(t.word.size()));
                REQUIRE(t.answer == std::string(1, t.word[static_cast<std::size_t>(pos - 1)]));
                break;
            }
            case TaskKind::Reverse: {
                REQUIRE(t.answer == std::string(t.word.rbegin(), t.word.rend()));
                REQUIRE(t.answer != t.word);  // no palindromes
                break;
            }
        }
    }
}

TEST_CASE("prompts carry three same-kind examples over other words") {
    auto tasks = gen_benchmark(sample_words(), 3);
    for (std::size_t i = 0; i < tasks.size(); i += 97) {
        const auto& t = tasks[i];
        std::vector<std::string> lines;
        std::size_t start = 0;
        while (true) {
            auto nl = t.prompt.find('\n', start);
            if (nl == std::string::npos) {
                lines.push_back(t.prompt.substr(start));
                break;
            }
            lines.push_back(t.prompt.substr(start, nl - start));
            start = nl + 1;
        }
        REQUIRE(lines.size() == 4);
        for (int s = 0; s < 3; ++s) {
            auto w = word_of_example_line(t.kind, lines[static_cast<std::size_t>(s)]);
            CHECK(w != t.word);
        }
        // the query line is the template prefix for this task's word
        switch (t.kind) {
            case TaskKind::Count:
                CHECK(lines[3] == count_query(t.word, t.meta[0]));
                break;
            case TaskKind::Index:
                CHECK(lines[3] == index_query(t.word, std::stoi(t.meta)));
                break;
            case TaskKind::Reverse:
                CHECK(lines[3] == reverse_query(t.word));
                break;
        }
    }
}

TEST_CASE("benchmark generation is deterministic under seed") {
    auto words = sample_words();
    auto a = gen_benchmark(words, 42);
    auto b = gen_benchmark(words, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); i += 131) {
        CHECK(a[i].prompt == b[i].prompt);
        CHECK(a[i].answer == b[i].answer);
    }
    auto c = gen_benchmark(words, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) any_diff = any_diff || a[i].prompt != c[i].prompt;
    CHECK(any_diff);
}

TEST_CASE("generator reports the eligible-word shortfall") {
    std::vector<std::string> few{"alpha", "beta", "gamma", "delta", "epsilon"};
    CHECK_THROWS_WITH(gen_benchmark(few, 1), Catch::Matchers::ContainsSubstring("short by"));
}

TEST_CASE("benchmark JSONL round trip") {
    TempDir dir;
    auto tasks = gen_benchmark(sample_words(), 5);
    tasks.resize(50);
    save_benchmark(tasks, dir.file("bench.jsonl"));
    auto loaded = load_benchmark(dir.file("bench.jsonl"));
    REQUIRE(loaded.size() == tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        CHECK(loaded[i].kind == tasks[i].kind);
        CHECK(loaded[i].prompt == tasks[i].prompt);
        CHECK(loaded[i].answer == tasks[i].answer);
        CHECK(loaded[i].word == tasks[i].word);
        CHECK(loaded[i].meta == tasks[i].meta);
    }
}

TEST_CASE("evaluation is case-insensitive exact match with trimming") {
    std::vector<SpellingTask> tasks(3);
    tasks[0] = {TaskKind::Index, "p0", "n", "noun", "1"};
    tasks[1] = {TaskKind::Index, "p1", "x", "xray", "1"};
    tasks[2] = {TaskKind::Count, "p2", "3", "banana", "A"};
    Completer completer = [](const std::string& prompt) -> std::optional<std::string> {
        if (prompt == "p0") return " N ";   // case + whitespace still match
        if (prompt == "p1") return "xx";    // wrong
        return "3";
    };
    auto report = evaluate(completer, tasks);
    CHECK(report.index.n == 2);
    CHECK(report.index.correct == 1);
    CHECK(report.count.correct == 1);
    CHECK(report.overall.n == 3);
    CHECK(report.overall.correct == 2);
    auto csv = bench_report_csv(report);
    CHECK(csv.find("kind,n,correct,skipped,accuracy") == 0);
}

TEST_CASE("prompts that do not fit are skipped and reported") {
    std::vector<SpellingTask> tasks(2);
    tasks[0] = {TaskKind::Count, "fits", "1", "word", "W"};
    tasks[1] = {TaskKind::Count, "too long", "2", "word", "W"};
    Completer completer = [](const std::string& prompt) -> std::optional<std::string> {
        if (prompt == "too long") return std::nullopt;
        return "1";
    };
    auto report = evaluate(completer, tasks);
    CHECK(report.count.n == 2);
    CHECK(report.count.correct == 1);
    CHECK(report.count.skipped == 1);
}

TEST_CASE("a perfect completer scores accuracy one") {
    auto tasks = gen_benchmark(sample_words(), 9);
    tasks.resize(300);
    std::map<std::string, std::string> gold;
    for (const auto& t : tasks) gold[t.prompt] = t.answer;
    Completer completer = [&gold](const std::string& p) -> std::optional<std::string> {
        return gold.at(p);
    };
    auto report = evaluate(completer, tasks);
    CHECK(report.overall.correct == report.overall.n);
    CHECK(report.overall.accuracy() == 1.0);
}

TEST_CASE("a random-digit stub scores near chance on count tasks") {
    auto tasks = gen_benchmark(sample_words(), 13);
    std::vector<SpellingTask> counts;
    for (auto& t : tasks)
        if (t.kind == TaskKind::Count) counts.push_back(t);
    auto rng = std::make_shared<Rng>(99);
    Completer stub = [rng](const std::string&) -> std::optional<std::string> {
        return std::to_string(rng->uniform_index(10));
    };
    auto report = evaluate(stub, counts);
    CHECK(report.count.accuracy() > 0.02);
    CHECK(report.count.accuracy() < 0.25);  // near 1/10 over digit answers
}

TEST_CASE("strawberry probe plumbing and oracle") {
    std::string word = "strawberry";
    CHECK(std::count(word.begin(), word.end(), 'r') == 3);
    bool saw_prompt = false;
    Completer fixed = [&saw_prompt](const std::string& prompt) -> std::optional<std::string> {
        saw_prompt = prompt == kStrawberryPrompt;
        return " 3";
    };
    CHECK(strawberry_probe(fixed) == "3");
    CHECK(saw_prompt);
}
