#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "semvar/corpus.hpp"
#include "semvar/ssm.hpp"

namespace semvar::test {

inline std::filesystem::path data_dir() { return SEMVAR_TEST_DATA; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("semvar_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Symmetric z matrix from the strict upper triangle, row by row.
inline StandardizedSSM z_from_upper(const std::string& model, std::size_t n, const std::vector<float>& upper,
                                    const std::string& doc = "toy")
{
    StandardizedSSM z;
    z.model = ModelId(model);
    z.doc_id = doc;
    z.values = SquareMatrix<float>(n, 0.0f);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            z.values(i, j) = upper.at(k);
            z.values(j, i) = upper.at(k);
            ++k;
        }
    }
    return z;
}

inline const std::vector<std::string>& word_pool()
{
    static const std::vector<std::string> words = {
        "the",   "ghost", "night", "cold",  "fire",  "money", "heart", "door",  "bell",  "child",
        "old",   "merry", "dark",  "light", "sea",   "ship",  "river", "storm", "house", "clerk",
        "snow",  "bread", "candle", "grave", "voice", "street", "window", "dream", "clock", "chain"};
    return words;
}

/// Random prose: n sentences of 2..max_tokens words, each capitalized and
/// ending in '.', '!' or '?'.
inline std::string random_text(std::mt19937_64& rng, std::size_t sentences, std::size_t max_tokens = 12)
{
    const auto& words = word_pool();
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::uniform_int_distribution<std::size_t> len(2, max_tokens);
    std::uniform_int_distribution<int> term(0, 5);
    std::string out;
    for (std::size_t s = 0; s < sentences; ++s) {
        const std::size_t n = len(rng);
        std::string sentence;
        for (std::size_t t = 0; t < n; ++t) {
            if (t) sentence.push_back(' ');
            sentence += words[pick(rng)];
        }
        sentence[0] = static_cast<char>(sentence[0] - 'a' + 'A');
        const int k = term(rng);
        sentence.push_back(k == 0 ? '!' : (k == 1 ? '?' : '.'));
        if (s) out.push_back(' ');
        out += sentence;
    }
    out.push_back('\n');
    return out;
}

} // namespace semvar::test
