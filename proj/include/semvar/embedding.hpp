#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semvar/corpus.hpp"
#include "semvar/error.hpp"
#include "semvar/hash.hpp"
#include "semvar/io.hpp"
#include "semvar/semv.hpp"

namespace semvar {

/// Short label for an embedding model ("MPNet", "I-F", ...).
class ModelId {
public:
    ModelId() = default;

    explicit ModelId(std::string name) : name_(std::move(name))
    {
        if (name_.empty()) throw Error("model name is empty");
        if (name_.size() > 32) throw Error("model name longer than 32 bytes: " + name_);
        if (std::any_of(name_.begin(), name_.end(), detail::is_space)) {
            throw Error("model name contains whitespace: " + name_);
        }
    }

    const std::string& str() const noexcept { return name_; }

    friend auto operator<=>(const ModelId&, const ModelId&) = default;

private:
    std::string name_;
};

/// N x D sentence vectors for one (document, model) pair. Construction
/// rejects non-finite entries and all-zero rows.
class EmbeddingMatrix {
public:
    EmbeddingMatrix(ModelId model, std::string doc_id, std::size_t n, std::size_t d, std::vector<float> values)
        : model_(std::move(model)), doc_id_(std::move(doc_id)), n_(n), d_(d), values_(std::move(values))
    {
        if (n_ == 0 || d_ == 0) throw Error("embedding matrix must be non-empty");
        if (values_.size() != n_ * d_) throw Error("value count does not match n*d");
        for (std::size_t i = 0; i < n_; ++i) {
            bool nonzero = false;
            for (float v : row(i)) {
                if (!std::isfinite(v)) throw Error("non-finite value in row " + std::to_string(i));
                nonzero = nonzero || v != 0.0f;
            }
            if (!nonzero) throw Error("zero vector in row " + std::to_string(i));
        }
    }

    const ModelId& model() const noexcept { return model_; }
    const std::string& doc_id() const noexcept { return doc_id_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t d() const noexcept { return d_; }
    std::span<const float> values() const noexcept { return values_; }
    std::span<const float> row(std::size_t i) const noexcept { return std::span(values_).subspan(i * d_, d_); }

    friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) noexcept
    {
        // Bitwise comparison: -0.0f and 0.0f differ, NaN never appears.
        return a.model_ == b.model_ && a.doc_id_ == b.doc_id_ && a.n_ == b.n_ && a.d_ == b.d_ &&
               a.values_.size() == b.values_.size() &&
               std::equal(a.values_.begin(), a.values_.end(), b.values_.begin(),
                          [](float x, float y) { return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y); });
    }

private:
    ModelId model_;
    std::string doc_id_;
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::vector<float> values_;
};

// ---- reference embedder ------------------------------------------------

/// Deterministic hash-based sentence vector. Tokens are the ASCII-lowercased
/// whitespace-separated words; each token seeds a splitmix64 stream with its
/// FNV-1a hash and takes `dim` values mapped to [-1, 1). The sentence vector
/// is the L2-normalized mean of its token vectors.
inline std::vector<float> reference_embed(std::string_view sentence_text, std::size_t dim)
{
    if (dim < 2) throw Error("reference embedder needs dim >= 2");
    std::vector<std::string> tokens;
    {
        const std::string lowered = detail::ascii_lower(sentence_text);
        std::size_t i = 0;
        while (i < lowered.size()) {
            while (i < lowered.size() && detail::is_space(lowered[i])) ++i;
            std::size_t j = i;
            while (j < lowered.size() && !detail::is_space(lowered[j])) ++j;
            if (j > i) tokens.emplace_back(lowered.substr(i, j - i));
            i = j;
        }
    }
    if (tokens.empty()) tokens.emplace_back("\xE2\x88\x85"); // U+2205

    std::vector<double> acc(dim, 0.0);
    for (const std::string& token : tokens) {
        SplitMix64 stream(fnv1a64(token));
        for (std::size_t k = 0; k < dim; ++k) {
            acc[k] += static_cast<double>(stream.next()) / 9223372036854775808.0 - 1.0;
        }
    }
    double norm_sq = 0.0;
    for (double& v : acc) {
        v /= static_cast<double>(tokens.size());
        norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    if (norm == 0.0) throw Error("reference embedder produced a zero vector");
    std::vector<float> out(dim);
    for (std::size_t k = 0; k < dim; ++k) out[k] = static_cast<float>(acc[k] / norm);
    return out;
}

// ---- persistence ---------------------------------------------------------

inline std::string encode_embeddings(const EmbeddingMatrix& m)
{
    SemvRecord rec;
    rec.model = m.model().str();
    rec.doc_id = m.doc_id();
    rec.n = static_cast<std::uint32_t>(m.n());
    rec.d = static_cast<std::uint32_t>(m.d());
    rec.values.assign(m.values().begin(), m.values().end());
    return encode_semv(rec, SemvLayout::embedding);
}

inline EmbeddingMatrix decode_embeddings(std::string_view bytes)
{
    SemvRecord rec = decode_semv(bytes, SemvLayout::embedding);
    return EmbeddingMatrix(ModelId(rec.model), std::move(rec.doc_id), rec.n, rec.d, std::move(rec.values));
}

inline void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path)
{
    write_file_atomic(path, encode_embeddings(m));
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path)
{
    return decode_embeddings(read_file(path));
}

// ---- providers -----------------------------------------------------------

enum class ProviderKind { file, remote, reference };

inline std::string_view to_string(ProviderKind kind) noexcept
{
    switch (kind) {
    case ProviderKind::file: return "file";
    case ProviderKind::remote: return "remote";
    case ProviderKind::reference: return "reference";
    }
    return "?";
}

inline ProviderKind parse_provider_kind(std::string_view s)
{
    if (s == "file") return ProviderKind::file;
    if (s == "remote") return ProviderKind::remote;
    if (s == "reference") return ProviderKind::reference;
    throw Error("unknown provider kind: " + std::string(s));
}

struct ProviderConfig {
    ProviderKind kind = ProviderKind::reference;
    /// File or directory (file), base URL (remote); unused by reference.
    std::string location;
    std::size_t dim = 64;
    std::size_t batch_size = 32;

    void validate() const
    {
        if (batch_size < 1) throw Error("batch_size must be >= 1");
        if (kind == ProviderKind::reference && dim < 2) throw Error("reference provider needs dim >= 2");
        if (kind != ProviderKind::reference && location.empty()) {
            throw Error(std::string(to_string(kind)) + " provider needs a location");
        }
    }

    friend bool operator==(const ProviderConfig&, const ProviderConfig&) = default;
};

/// Parses "kind:location". For the reference provider the location is the
/// dimension ("reference:64"); an empty location keeps the default.
inline ProviderConfig parse_provider_spec(std::string_view spec)
{
    const std::size_t colon = spec.find(':');
    ProviderConfig cfg;
    cfg.kind = parse_provider_kind(spec.substr(0, colon));
    if (colon != std::string_view::npos) cfg.location = std::string(spec.substr(colon + 1));
    if (cfg.kind == ProviderKind::reference && !cfg.location.empty()) {
        std::size_t dim = 0;
        const auto [ptr, ec] = std::from_chars(cfg.location.data(), cfg.location.data() + cfg.location.size(), dim);
        if (ec != std::errc() || ptr != cfg.location.data() + cfg.location.size()) {
            throw Error("reference provider location must be a dimension: " + cfg.location);
        }
        cfg.dim = dim;
        cfg.location.clear();
    }
    cfg.validate();
    return cfg;
}

inline EmbeddingMatrix embed_with_reference(const Document& doc, const ModelId& model, std::size_t dim)
{
    if (doc.sentences.empty()) throw Error("document has no sentences");
    std::vector<float> values;
    values.reserve(doc.size() * dim);
    for (const Sentence& s : doc.sentences) {
        const std::vector<float> v = reference_embed(s.text, dim);
        values.insert(values.end(), v.begin(), v.end());
    }
    return EmbeddingMatrix(model, doc.id, doc.size(), dim, std::move(values));
}

/// Reads precomputed vectors. A directory location resolves to
/// `<location>/<doc id>.semv`.
inline EmbeddingMatrix embed_from_file(const Document& doc, const ModelId& model, const std::filesystem::path& location)
{
    std::filesystem::path path = location;
    if (std::filesystem::is_directory(path)) path /= doc.id + ".semv";
    const EmbeddingMatrix stored = read_embeddings(path);
    if (stored.n() != doc.size()) {
        throw Error("row count mismatch: file has " + std::to_string(stored.n()) + " rows, document has " +
                    std::to_string(doc.size()) + " sentences");
    }
    return EmbeddingMatrix(model, doc.id, stored.n(), stored.d(),
                           std::vector<float>(stored.values().begin(), stored.values().end()));
}

} // namespace semvar
