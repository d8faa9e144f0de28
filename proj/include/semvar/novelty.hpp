#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semvar/corpus.hpp"
#include "semvar/embedding.hpp"
#include "semvar/error.hpp"
#include "semvar/ssm.hpp"

namespace semvar {

/// Negated mean standardized similarity of each sentence to all others.
/// Higher means the sentence's row is darker than the document average.
inline std::vector<double> row_novelty(const StandardizedSSM& z)
{
    const std::size_t n = z.n();
    if (n < 3) throw Error("row novelty needs at least 3 sentences");
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        const std::span<const float> row = z.values.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sum += row[j];
        }
        scores[i] = -sum / static_cast<double>(n - 1) + 0.0; // no negative zero
    }
    return scores;
}

/// Inverse-CDF empirical quantile: the ceil(p*N)-th smallest value (1-based).
inline double empirical_quantile(std::span<const double> values, double p)
{
    if (values.empty()) throw Error("quantile of an empty list");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = std::ceil(p * static_cast<double>(sorted.size()) - 1e-9);
    const std::size_t rank = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(pos, 1.0)), 1, sorted.size());
    return sorted[rank - 1];
}

/// Per sentence, how many models put it strictly above their (1 - q) quantile.
inline std::vector<std::size_t> candidate_counts(std::span<const std::vector<double>> scores, double q)
{
    if (scores.empty()) throw Error("empty model set");
    if (!(q > 0.0 && q < 1.0)) throw Error("invalid q: must lie in (0, 1)");
    const std::size_t n = scores.front().size();
    std::vector<std::size_t> counts(n, 0);
    for (const std::vector<double>& s : scores) {
        if (s.size() != n) throw Error("score lists differ in length");
        if (n == 0) continue;
        const double threshold = empirical_quantile(s, 1.0 - q);
        for (std::size_t i = 0; i < n; ++i) {
            if (s[i] > threshold) ++counts[i];
        }
    }
    return counts;
}

struct NoveltyFlag {
    std::size_t index = 0;
    std::size_t count = 0;

    friend bool operator==(const NoveltyFlag&, const NoveltyFlag&) = default;
};

/// Sentences marked by at least k models, sorted by count descending then
/// index ascending.
inline std::vector<NoveltyFlag> ensemble_flags(std::span<const std::vector<double>> scores, double q, std::size_t k)
{
    if (scores.empty()) throw Error("empty model set");
    if (k < 1 || k > scores.size()) throw Error("min agreement k must lie in [1, number of models]");
    const std::vector<std::size_t> counts = candidate_counts(scores, q);
    std::vector<NoveltyFlag> flags;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] >= k) flags.push_back({i, counts[i]});
    }
    std::sort(flags.begin(), flags.end(), [](const NoveltyFlag& a, const NoveltyFlag& b) {
        return a.count != b.count ? a.count > b.count : a.index < b.index;
    });
    return flags;
}

inline std::size_t default_min_agreement(std::size_t models) noexcept { return (models + 1) / 2; }

struct NoveltyReport {
    std::string doc_id;
    std::vector<ModelId> models;
    std::vector<std::vector<double>> scores;
    std::vector<std::size_t> agree_counts;
    std::vector<NoveltyFlag> flags;
    double q = 0.05;
    std::size_t k = 1;
};

inline NoveltyReport novelty_report(std::span<const StandardizedSSM> ssms, double q, std::size_t k)
{
    if (ssms.empty()) throw Error("empty model set");
    NoveltyReport report;
    report.doc_id = ssms.front().doc_id;
    report.q = q;
    report.k = k;
    for (const StandardizedSSM& z : ssms) {
        if (z.doc_id != report.doc_id || z.n() != ssms.front().n()) throw Error("novelty report mixes documents");
        report.models.push_back(z.model);
        report.scores.push_back(row_novelty(z));
    }
    report.agree_counts = candidate_counts(report.scores, q);
    report.flags = ensemble_flags(report.scores, q, k);
    return report;
}

namespace detail {

/// First `max_chars` UTF-8 code points of s.
inline std::string utf8_prefix(std::string_view s, std::size_t max_chars)
{
    std::size_t chars = 0;
    std::size_t i = 0;
    while (i < s.size() && chars < max_chars) {
        ++i;
        while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
        ++chars;
    }
    return std::string(s.substr(0, i));
}

inline std::string csv_quote(std::string_view s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace detail

inline void write_novelty_csv(std::ostream& out, const NoveltyReport& r, const Document& doc)
{
    if (doc.size() != r.agree_counts.size()) throw Error("document does not match novelty report");
    out << "index,sentence_excerpt,agree_count";
    for (const ModelId& m : r.models) out << ",score_" << m.str();
    out << '\n';
    for (std::size_t i = 0; i < doc.size(); ++i) {
        out << i << ',' << detail::csv_quote(detail::utf8_prefix(doc.sentences[i].text, 60)) << ','
            << r.agree_counts[i];
        for (const auto& s : r.scores) out << ',' << format_shortest(s[i]);
        out << '\n';
    }
}

inline std::string novelty_csv(const NoveltyReport& r, const Document& doc)
{
    std::ostringstream out;
    write_novelty_csv(out, r, doc);
    return out.str();
}

inline nlohmann::ordered_json novelty_json(const NoveltyReport& r, const Document& doc)
{
    if (doc.size() != r.agree_counts.size()) throw Error("document does not match novelty report");
    nlohmann::ordered_json j;
    j["doc_id"] = r.doc_id;
    j["models"] = nlohmann::ordered_json::array();
    for (const ModelId& m : r.models) j["models"].push_back(m.str());
    j["params"] = {{"q", r.q}, {"k", r.k}};
    j["flags"] = nlohmann::ordered_json::array();
    for (const NoveltyFlag& f : r.flags) j["flags"].push_back({{"index", f.index}, {"count", f.count}});
    j["sentences"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < doc.size(); ++i) {
        nlohmann::ordered_json row;
        row["index"] = i;
        row["sentence_excerpt"] = detail::utf8_prefix(doc.sentences[i].text, 60);
        row["agree_count"] = r.agree_counts[i];
        nlohmann::ordered_json scores;
        for (std::size_t m = 0; m < r.models.size(); ++m) scores[r.models[m].str()] = r.scores[m][i];
        row["scores"] = std::move(scores);
        j["sentences"].push_back(std::move(row));
    }
    return j;
}

} // namespace semvar
