#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "semvar/embedding.hpp"
#include "semvar/error.hpp"
#include "semvar/io.hpp"
#include "semvar/semv.hpp"

namespace semvar {

/// Dense row-major n x n matrix.
template <typename T>
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n, T fill = T{}) : n_(n), data_(n * n, fill) {}
    SquareMatrix(std::size_t n, std::vector<T> data) : n_(n), data_(std::move(data))
    {
        if (data_.size() != n_ * n_) throw Error("square matrix needs n*n values");
    }

    std::size_t size() const noexcept { return n_; }
    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
    std::span<const T> row(std::size_t i) const noexcept { return std::span(data_).subspan(i * n_, n_); }
    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<T> data_;
};

/// Raw cosine similarities between every pair of sentences.
struct SSM {
    ModelId model;
    std::string doc_id;
    SquareMatrix<float> values;

    std::size_t n() const noexcept { return values.size(); }
};

/// SSM mapped to z-scores with the population statistics it was scaled by.
struct StandardizedSSM {
    ModelId model;
    std::string doc_id;
    SquareMatrix<float> values;
    double mu = 0.0;
    double sigma = 1.0;

    std::size_t n() const noexcept { return values.size(); }
};

/// Standardized similarity of each sentence to the next (first superdiagonal).
struct TimeSeries {
    ModelId model;
    std::string doc_id;
    std::vector<float> values;
};

// ---- cosine ----------------------------------------------------------------

namespace detail {

template <std::floating_point T>
double cosine_impl(std::span<const T> u, std::span<const T> v)
{
    if (u.size() != v.size()) throw Error("cosine: length mismatch");
    double dot = 0.0;
    double uu = 0.0;
    double vv = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double a = u[k];
        const double b = v[k];
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if (uu == 0.0 || vv == 0.0) throw Error("cosine: zero-norm input");
    return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

} // namespace detail

/// Cosine similarity with 64-bit accumulation, clamped to [-1, 1].
inline double cosine(std::span<const float> u, std::span<const float> v) { return detail::cosine_impl(u, v); }
inline double cosine(std::span<const double> u, std::span<const double> v) { return detail::cosine_impl(u, v); }

// ---- build -----------------------------------------------------------------

namespace detail {

inline constexpr std::size_t ssm_block = 64;

inline unsigned resolve_workers(unsigned requested) noexcept
{
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs body(task) for task in [0, count) on `workers` threads, handing out
/// tasks dynamically. Rethrows the first exception.
template <typename Body>
void parallel_tasks(std::size_t count, unsigned workers, Body&& body)
{
    workers = static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(count, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto run = [&] {
        try {
            for (std::size_t t = next++; t < count && !failed; t = next++) body(t);
        } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
        }
    };
    if (workers <= 1) {
        run();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace detail

/// Builds the cosine similarity matrix. Rows are normalized once in double
/// precision; each entry is then a 64-bit dot product computed for i <= j and
/// mirrored. Entry values do not depend on the worker count.
inline SSM build_ssm(const EmbeddingMatrix& m, unsigned workers = 0)
{
    const std::size_t n = m.n();
    const std::size_t d = m.d();
    if (n < 2) throw Error("build_ssm needs at least 2 sentences");
    constexpr std::size_t B = detail::ssm_block;
    const std::size_t blocks = (n + B - 1) / B;

    std::vector<double> unit(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const float> r = m.row(i);
        double norm_sq = 0.0;
        for (float v : r) norm_sq += static_cast<double>(v) * static_cast<double>(v);
        const double norm = std::sqrt(norm_sq);
        for (std::size_t k = 0; k < d; ++k) unit[i * d + k] = static_cast<double>(r[k]) / norm;
    }
    // Column blocks stored k-major so the inner loop runs over contiguous
    // columns; each accumulator still sums over k in order.
    std::vector<double> columns(blocks * d * B, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t jb = j / B;
        const std::size_t jj = j % B;
        for (std::size_t k = 0; k < d; ++k) columns[(jb * d + k) * B + jj] = unit[j * d + k];
    }

    SSM out{m.model(), m.doc_id(), SquareMatrix<float>(n)};
    SquareMatrix<float>& s = out.values;
    detail::parallel_tasks(blocks, workers, [&](std::size_t ib) {
        alignas(64) double acc[B];
        const std::size_t i_end = std::min(n, (ib + 1) * B);
        for (std::size_t jb = ib; jb < blocks; ++jb) {
            const double* cols = &columns[jb * d * B];
            const std::size_t j_begin = jb * B;
            const std::size_t j_end = std::min(n, j_begin + B);
            for (std::size_t i = ib * B; i < i_end; ++i) {
                std::fill(acc, acc + B, 0.0);
                const double* x = &unit[i * d];
                for (std::size_t k = 0; k < d; ++k) {
                    const double a = x[k];
                    const double* c = cols + k * B;
                    for (std::size_t jj = 0; jj < B; ++jj) acc[jj] += a * c[jj];
                }
                for (std::size_t j = std::max(i, j_begin); j < j_end; ++j) {
                    const float v = static_cast<float>(std::clamp(acc[j - j_begin], -1.0, 1.0));
                    s(i, j) = v;
                    s(j, i) = v;
                }
            }
        }
    });
    return out;
}

// ---- standardize -------------------------------------------------------------

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
};

/// Two-pass population mean and standard deviation over the strict upper
/// triangle, or over all n*n entries when include_diagonal is set.
template <typename T>
Moments triangle_moments(const SquareMatrix<T>& m, bool include_diagonal = false)
{
    const std::size_t n = m.size();
    Moments out;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = include_diagonal ? 0 : i + 1; j < n; ++j) sum += m(i, j);
    }
    out.count = include_diagonal ? n * n : n * (n - 1) / 2;
    if (out.count == 0) return out;
    out.mean = sum / static_cast<double>(out.count);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = include_diagonal ? 0 : i + 1; j < n; ++j) {
            const double dev = m(i, j) - out.mean;
            ss += dev * dev;
        }
    }
    out.stddev = std::sqrt(ss / static_cast<double>(out.count));
    return out;
}

/// Maps every entry to (x - mu) / sigma. By default mu and sigma come from the
/// strict upper triangle; include_diagonal uses the full matrix instead.
inline StandardizedSSM standardize(const SSM& s, bool include_diagonal = false)
{
    const std::size_t n = s.n();
    if (n < 3) throw Error("standardize needs at least 3 sentences");
    const Moments mom = triangle_moments(s.values, include_diagonal);
    if (!(mom.stddev >= 1e-9)) throw Error("degenerate sigma: all sentence pairs are equally similar");

    StandardizedSSM out{s.model, s.doc_id, SquareMatrix<float>(n), mom.mean, mom.stddev};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const float z = static_cast<float>((static_cast<double>(s.values(i, j)) - mom.mean) / mom.stddev);
            out.values(i, j) = z;
            out.values(j, i) = z;
        }
    }
    return out;
}

inline TimeSeries successive_series(const StandardizedSSM& z)
{
    const std::size_t n = z.n();
    if (n < 2) throw Error("successive_series needs at least 2 sentences");
    TimeSeries out{z.model, z.doc_id, std::vector<float>(n - 1)};
    for (std::size_t t = 0; t + 1 < n; ++t) out.values[t] = z.values(t, t + 1);
    return out;
}

// ---- persistence -------------------------------------------------------------

namespace detail {

inline SemvRecord similarity_record(const ModelId& model, const std::string& doc_id, const SquareMatrix<float>& m)
{
    SemvRecord rec;
    rec.model = model.str();
    rec.doc_id = doc_id;
    rec.n = static_cast<std::uint32_t>(m.size());
    rec.d = rec.n;
    rec.values.assign(m.data().begin(), m.data().end());
    return rec;
}

inline SemvRecord read_similarity(const std::filesystem::path& path)
{
    SemvRecord rec = decode_semv(read_file(path), SemvLayout::similarity);
    if (rec.n != rec.d) throw Error("similarity file is not square: " + path.string());
    return rec;
}

} // namespace detail

inline std::string encode_ssm(const SSM& s)
{
    return encode_semv(detail::similarity_record(s.model, s.doc_id, s.values), SemvLayout::similarity);
}

inline std::string encode_ssm(const StandardizedSSM& z)
{
    SemvRecord rec = detail::similarity_record(z.model, z.doc_id, z.values);
    rec.flag = SimilarityFlag::standardized;
    rec.mu = z.mu;
    rec.sigma = z.sigma;
    return encode_semv(rec, SemvLayout::similarity);
}

inline void write_ssm(const SSM& s, const std::filesystem::path& path) { write_file_atomic(path, encode_ssm(s)); }
inline void write_ssm(const StandardizedSSM& z, const std::filesystem::path& path)
{
    write_file_atomic(path, encode_ssm(z));
}

inline SSM read_ssm(const std::filesystem::path& path)
{
    SemvRecord rec = detail::read_similarity(path);
    if (rec.flag != SimilarityFlag::raw) throw Error("expected a raw SSM: " + path.string());
    return SSM{ModelId(rec.model), std::move(rec.doc_id), SquareMatrix<float>(rec.n, std::move(rec.values))};
}

inline StandardizedSSM read_standardized_ssm(const std::filesystem::path& path)
{
    SemvRecord rec = detail::read_similarity(path);
    if (rec.flag != SimilarityFlag::standardized) throw Error("expected a standardized SSM: " + path.string());
    return StandardizedSSM{ModelId(rec.model), std::move(rec.doc_id), SquareMatrix<float>(rec.n, std::move(rec.values)),
                           rec.mu, rec.sigma};
}

/// True when the file holds a standardized SSM.
inline bool is_standardized_file(const std::filesystem::path& path)
{
    return detail::read_similarity(path).flag == SimilarityFlag::standardized;
}

// ---- time series CSV -----------------------------------------------------------

/// Shortest decimal text that parses back to the same float.
inline std::string format_shortest(float v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_shortest(double v)
{
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void write_series_csv(std::ostream& out, const TimeSeries& ts)
{
    out << "index,z\n";
    for (std::size_t t = 0; t < ts.values.size(); ++t) out << t << ',' << format_shortest(ts.values[t]) << '\n';
}

inline std::string series_csv(const TimeSeries& ts)
{
    std::ostringstream out;
    write_series_csv(out, ts);
    return out.str();
}

inline std::vector<float> read_series_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != "index,z") throw Error("time series CSV must start with 'index,z'");
    std::vector<float> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) throw Error("malformed time series row: " + line);
        float v = 0.0f;
        const char* first = line.data() + comma + 1;
        const char* last = line.data() + line.size();
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc() || res.ptr != last) throw Error("malformed time series value: " + line);
        values.push_back(v);
    }
    return values;
}

} // namespace semvar
