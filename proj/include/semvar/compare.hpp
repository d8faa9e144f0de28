#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "semvar/embedding.hpp"
#include "semvar/error.hpp"
#include "semvar/ssm.hpp"

namespace semvar {

enum class MatrixKind { correlation, paf, naf, ddaf };

inline std::string_view to_string(MatrixKind kind) noexcept
{
    switch (kind) {
    case MatrixKind::correlation: return "correlation";
    case MatrixKind::paf: return "paf";
    case MatrixKind::naf: return "naf";
    case MatrixKind::ddaf: return "ddaf";
    }
    return "?";
}

inline MatrixKind parse_matrix_kind(std::string_view s)
{
    if (s == "correlation") return MatrixKind::correlation;
    if (s == "paf") return MatrixKind::paf;
    if (s == "naf") return MatrixKind::naf;
    if (s == "ddaf") return MatrixKind::ddaf;
    throw Error("unknown matrix kind: " + std::string(s));
}

inline constexpr std::string_view mean_doc_id = "<mean>";

/// Small labeled M x M matrix over models.
struct ModelMatrix {
    MatrixKind kind = MatrixKind::correlation;
    std::vector<ModelId> models;
    std::vector<double> values;
    std::string doc_id;

    ModelMatrix() = default;
    ModelMatrix(MatrixKind k, std::vector<ModelId> m, std::string doc)
        : kind(k), models(std::move(m)), values(models.size() * models.size(), 0.0), doc_id(std::move(doc))
    {
    }

    std::size_t size() const noexcept { return models.size(); }
    double& at(std::size_t a, std::size_t b) noexcept { return values[a * models.size() + b]; }
    double at(std::size_t a, std::size_t b) const noexcept { return values[a * models.size() + b]; }
};

// ---- Pearson correlation -----------------------------------------------------

namespace detail {

template <std::floating_point T, std::floating_point U>
double pearson_impl(std::span<const T> x, std::span<const U> y)
{
    if (x.size() != y.size()) throw Error("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw Error("pearson: need at least 3 points");
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error("pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

} // namespace detail

inline double pearson(std::span<const double> x, std::span<const double> y) { return detail::pearson_impl(x, y); }
inline double pearson(std::span<const float> x, std::span<const float> y) { return detail::pearson_impl(x, y); }

namespace detail {

inline void require_distinct(const std::vector<ModelId>& models)
{
    for (std::size_t a = 0; a < models.size(); ++a) {
        for (std::size_t b = a + 1; b < models.size(); ++b) {
            if (models[a] == models[b]) throw Error("duplicate model " + models[a].str());
        }
    }
}

template <typename Item, typename Corr>
ModelMatrix pairwise_correlation(std::span<const Item> items, Corr&& corr)
{
    if (items.size() < 2) throw Error("correlation map needs at least 2 models");
    std::vector<ModelId> models;
    for (const Item& it : items) {
        if (it.doc_id != items.front().doc_id) throw Error("correlation map mixes documents");
        models.push_back(it.model);
    }
    require_distinct(models);
    ModelMatrix out(MatrixKind::correlation, std::move(models), items.front().doc_id);
    for (std::size_t a = 0; a < items.size(); ++a) {
        out.at(a, a) = 1.0;
        for (std::size_t b = a + 1; b < items.size(); ++b) {
            const double r = corr(items[a], items[b]);
            out.at(a, b) = r;
            out.at(b, a) = r;
        }
    }
    return out;
}

} // namespace detail

/// Pearson correlation between every pair of successive-similarity series.
inline ModelMatrix correlation_map(std::span<const TimeSeries> series)
{
    return detail::pairwise_correlation(series, [](const TimeSeries& a, const TimeSeries& b) {
        if (a.values.size() != b.values.size()) throw Error("correlation map: series lengths differ");
        return pearson(std::span<const float>(a.values), std::span<const float>(b.values));
    });
}

/// Pearson correlation over the flattened strict upper triangles.
inline double upper_triangle_pearson(const SquareMatrix<float>& a, const SquareMatrix<float>& b)
{
    if (a.size() != b.size()) throw Error("matrix sizes differ");
    const std::size_t n = a.size();
    const std::size_t count = n * (n - 1) / 2;
    if (count < 3) throw Error("pearson: need at least 3 points");
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            ma += a(i, j);
            mb += b(i, j);
        }
    }
    ma /= static_cast<double>(count);
    mb /= static_cast<double>(count);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a(i, j) - ma;
            const double db = b(i, j) - mb;
            sab += da * db;
            saa += da * da;
            sbb += db * db;
        }
    }
    if (saa == 0.0 || sbb == 0.0) throw Error("pearson: zero variance");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline ModelMatrix full_ssm_correlation_map(std::span<const StandardizedSSM> ssms)
{
    return detail::pairwise_correlation(ssms, [](const StandardizedSSM& a, const StandardizedSSM& b) {
        return upper_triangle_pearson(a.values, b.values);
    });
}

/// Entrywise mean of per-document correlation maps over the same models.
inline ModelMatrix mean_correlation_map(std::span<const ModelMatrix> maps)
{
    if (maps.empty()) throw Error("mean correlation map needs at least one map");
    ModelMatrix out(MatrixKind::correlation, maps.front().models, std::string(mean_doc_id));
    for (const ModelMatrix& m : maps) {
        if (m.kind != MatrixKind::correlation) throw Error("mean correlation map needs correlation maps");
        if (m.models != out.models) throw Error("inconsistent model lists across maps");
        for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += m.values[k];
    }
    for (double& v : out.values) v /= static_cast<double>(maps.size());
    return out;
}

// ---- sign agreement -----------------------------------------------------------

/// Counts of unordered sentence pairs (i < j) by the signs two models assign.
/// Positive means z > 0; zero counts as negative.
struct PairSignSummary {
    ModelId model_a;
    ModelId model_b;
    std::uint64_t pos_pos = 0;
    std::uint64_t neg_neg = 0;
    std::uint64_t pos_neg = 0;
    std::uint64_t neg_pos = 0;
    std::uint64_t total_pairs = 0;
};

inline PairSignSummary sign_summary(const StandardizedSSM& a, const StandardizedSSM& b)
{
    if (a.n() != b.n()) throw Error("sign summary: sentence counts differ");
    if (a.doc_id != b.doc_id) throw Error("sign summary: documents differ");
    PairSignSummary out{a.model, b.model};
    const std::size_t n = a.n();
    std::uint64_t counts[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const float> ra = a.values.row(i);
        const std::span<const float> rb = b.values.row(i);
        for (std::size_t j = i + 1; j < n; ++j) ++counts[ra[j] > 0.0f][rb[j] > 0.0f];
    }
    out.pos_pos = counts[1][1];
    out.neg_neg = counts[0][0];
    out.pos_neg = counts[1][0];
    out.neg_pos = counts[0][1];
    out.total_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    return out;
}

struct AgreementMatrices {
    ModelMatrix paf;
    ModelMatrix naf;
    ModelMatrix ddaf;
    /// summaries[a * M + b] for a != b; the diagonal holds the self summary.
    std::vector<PairSignSummary> summaries;

    const PairSignSummary& summary(std::size_t a, std::size_t b) const { return summaries[a * paf.size() + b]; }
};

/// PAF, NAF and directional DDAF over all models of one document. The
/// ddaf[a][b] cell is the fraction of pairs positive under a and negative
/// under b.
inline AgreementMatrices agreement_matrices(std::span<const StandardizedSSM> ssms)
{
    if (ssms.size() < 2) throw Error("agreement matrices need at least 2 models");
    std::vector<ModelId> models;
    for (const StandardizedSSM& z : ssms) models.push_back(z.model);
    detail::require_distinct(models);
    const std::size_t m = models.size();
    const std::string& doc = ssms.front().doc_id;
    AgreementMatrices out{ModelMatrix(MatrixKind::paf, models, doc), ModelMatrix(MatrixKind::naf, models, doc),
                          ModelMatrix(MatrixKind::ddaf, models, doc), std::vector<PairSignSummary>(m * m)};
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a; b < m; ++b) {
            const PairSignSummary s = sign_summary(ssms[a], ssms[b]);
            const double total = static_cast<double>(s.total_pairs);
            out.paf.at(a, b) = out.paf.at(b, a) = static_cast<double>(s.pos_pos) / total;
            out.naf.at(a, b) = out.naf.at(b, a) = static_cast<double>(s.neg_neg) / total;
            if (a != b) {
                out.ddaf.at(a, b) = static_cast<double>(s.pos_neg) / total;
                out.ddaf.at(b, a) = static_cast<double>(s.neg_pos) / total;
            }
            out.summaries[a * m + b] = s;
            out.summaries[b * m + a] = PairSignSummary{s.model_b, s.model_a, s.pos_pos, s.neg_neg,
                                                       s.neg_pos, s.pos_neg, s.total_pairs};
        }
    }
    return out;
}

// ---- CSV -----------------------------------------------------------------------

inline void write_model_matrix_csv(std::ostream& out, const ModelMatrix& m)
{
    for (const ModelId& id : m.models) {
        if (id.str().find_first_of(",\"") != std::string::npos) throw Error("model name not CSV-safe: " + id.str());
    }
    out << to_string(m.kind) << ',' << m.doc_id << '\n';
    for (const ModelId& id : m.models) out << ',' << id.str();
    out << '\n';
    char buf[64];
    for (std::size_t a = 0; a < m.size(); ++a) {
        out << m.models[a].str();
        for (std::size_t b = 0; b < m.size(); ++b) {
            std::snprintf(buf, sizeof buf, "%.6f", m.at(a, b));
            out << ',' << buf;
        }
        out << '\n';
    }
}

inline std::string model_matrix_csv(const ModelMatrix& m)
{
    std::ostringstream out;
    write_model_matrix_csv(out, m);
    return out.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace detail

inline ModelMatrix read_model_matrix_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw Error("empty model matrix CSV");
    const auto head = detail::split_csv_line(line);
    if (head.size() != 2) throw Error("model matrix CSV must start with 'kind,doc_id'");
    const MatrixKind kind = parse_matrix_kind(head[0]);
    if (!std::getline(in, line)) throw Error("model matrix CSV is missing the model row");
    const auto names = detail::split_csv_line(line);
    if (names.size() < 2 || !names[0].empty()) throw Error("model matrix CSV has a malformed model row");
    std::vector<ModelId> models;
    for (std::size_t k = 1; k < names.size(); ++k) models.emplace_back(names[k]);
    ModelMatrix m(kind, std::move(models), head[1]);
    for (std::size_t a = 0; a < m.size(); ++a) {
        if (!std::getline(in, line)) throw Error("model matrix CSV is truncated");
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != m.size() + 1 || cells[0] != m.models[a].str()) {
            throw Error("model matrix CSV row " + std::to_string(a) + " is malformed");
        }
        for (std::size_t b = 0; b < m.size(); ++b) {
            try {
                std::size_t used = 0;
                m.at(a, b) = std::stod(cells[b + 1], &used);
                if (used != cells[b + 1].size()) throw Error("trailing characters");
            } catch (const std::exception&) {
                throw Error("model matrix CSV has a non-numeric cell: " + cells[b + 1]);
            }
        }
    }
    return m;
}

} // namespace semvar
