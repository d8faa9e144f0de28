#pragma once

// SEMV1 container: the on-disk format for embedding matrices and similarity
// matrices.
//
//   "SEMV" | u8 version=1 | u8 len + model | u8 len + doc id | u32 n | u32 d
//   [similarity files only: u8 flag (0 raw, 1 standardized) | f64 mu | f64 sigma (flag 1)]
//   n*d f32 values, row-major | u32 CRC32 of the value bytes
//
// Every integer and float is little-endian.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semvar/error.hpp"
#include "semvar/hash.hpp"
#include "semvar/io.hpp"

namespace semvar {

enum class SemvLayout { embedding, similarity };

enum class SimilarityFlag : std::uint8_t { raw = 0, standardized = 1 };

struct SemvRecord {
    std::string model;
    std::string doc_id;
    std::uint32_t n = 0;
    std::uint32_t d = 0;
    SimilarityFlag flag = SimilarityFlag::raw; // similarity layout only
    double mu = 0.0;
    double sigma = 0.0;
    std::vector<float> values;
};

namespace detail {

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_short_string(std::string& out, std::string_view s, const char* what)
{
    if (s.size() > 255) throw Error(std::string(what) + " longer than 255 bytes");
    put_u8(out, static_cast<std::uint8_t>(s.size()));
    out.append(s);
}

class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::string_view take(std::size_t len)
    {
        if (data_.size() - pos_ < len) throw Error("truncated payload");
        const std::string_view out = data_.substr(pos_, len);
        pos_ += len;
        return out;
    }

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

    std::uint32_t u32()
    {
        const std::string_view b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
        return v;
    }

    std::uint64_t u64()
    {
        const std::string_view b = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
        return v;
    }

    std::string short_string() { return std::string(take(u8())); }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string encode_semv(const SemvRecord& rec, SemvLayout layout)
{
    if (static_cast<std::uint64_t>(rec.n) * rec.d != rec.values.size()) {
        throw Error("value count does not match n*d");
    }
    std::string out = "SEMV";
    detail::put_u8(out, 1);
    detail::put_short_string(out, rec.model, "model name");
    detail::put_short_string(out, rec.doc_id, "doc id");
    detail::put_u32(out, rec.n);
    detail::put_u32(out, rec.d);
    if (layout == SemvLayout::similarity) {
        detail::put_u8(out, static_cast<std::uint8_t>(rec.flag));
        if (rec.flag == SimilarityFlag::standardized) {
            detail::put_u64(out, std::bit_cast<std::uint64_t>(rec.mu));
            detail::put_u64(out, std::bit_cast<std::uint64_t>(rec.sigma));
        }
    }
    const std::size_t payload_begin = out.size();
    out.reserve(out.size() + 4 * rec.values.size() + 4);
    for (float v : rec.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
    const std::uint32_t crc = crc32(std::as_bytes(std::span(out).subspan(payload_begin)));
    detail::put_u32(out, crc);
    return out;
}

inline SemvRecord decode_semv(std::string_view bytes, SemvLayout layout)
{
    detail::ByteReader in(bytes);
    if (bytes.size() < 4 || bytes.substr(0, 4) != "SEMV") throw Error("bad magic");
    in.take(4);
    const std::uint8_t version = in.u8();
    if (version != 1) throw Error("unsupported version " + std::to_string(version));
    SemvRecord rec;
    rec.model = in.short_string();
    rec.doc_id = in.short_string();
    rec.n = in.u32();
    rec.d = in.u32();
    if (layout == SemvLayout::similarity) {
        const std::uint8_t flag = in.u8();
        if (flag > 1) throw Error("bad similarity flag");
        rec.flag = static_cast<SimilarityFlag>(flag);
        if (rec.flag == SimilarityFlag::standardized) {
            rec.mu = std::bit_cast<double>(in.u64());
            rec.sigma = std::bit_cast<double>(in.u64());
        }
    }
    const std::uint64_t count = static_cast<std::uint64_t>(rec.n) * rec.d;
    if (count * 4 + 4 > in.remaining()) throw Error("truncated payload");
    const std::string_view payload = in.take(static_cast<std::size_t>(count * 4));
    const std::uint32_t stored = in.u32();
    if (in.remaining() != 0) throw Error("trailing bytes after checksum");
    if (crc32(std::as_bytes(std::span(payload.data(), payload.size()))) != stored) {
        throw Error("checksum mismatch");
    }
    rec.values.resize(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < rec.values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(payload[4 * i + b]);
        rec.values[i] = std::bit_cast<float>(bits);
    }
    return rec;
}

} // namespace semvar
