#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semvar/compare.hpp"
#include "semvar/error.hpp"
#include "semvar/io.hpp"
#include "semvar/ssm.hpp"

namespace semvar {

enum class Palette { grayscale, viridis };

inline std::string_view to_string(Palette p) noexcept { return p == Palette::grayscale ? "grayscale" : "viridis"; }

inline Palette parse_palette(std::string_view s)
{
    if (s == "grayscale") return Palette::grayscale;
    if (s == "viridis") return Palette::viridis;
    throw Error("unknown palette: " + std::string(s));
}

struct RenderSpec {
    Palette palette = Palette::viridis;
    int width = 800;
    int height = 800;
    int downsample = 256;
    std::string title;

    void validate() const
    {
        if (width < 64 || height < 64) throw Error("render width and height must be >= 64");
        if (downsample < 16) throw Error("render downsample must be >= 16");
    }
};

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline double luma(Rgb c) noexcept { return 0.2126 * c.r + 0.7152 * c.g + 0.0722 * c.b; }

namespace detail {

// Eight fixed stops along viridis; stop 4 is nudged so luma never decreases.
inline constexpr std::array<Rgb, 8> viridis_stops = {{{68, 1, 84},
                                                      {70, 50, 126},
                                                      {54, 92, 141},
                                                      {39, 127, 142},
                                                      {31, 161, 134},
                                                      {74, 193, 109},
                                                      {160, 218, 57},
                                                      {253, 231, 37}}};

inline std::array<Rgb, 256> make_viridis_lut()
{
    std::array<Rgb, 256> lut{};
    for (int i = 0; i < 256; ++i) {
        const double t = i / 255.0 * 7.0;
        const int k = std::min(static_cast<int>(t), 6);
        const double f = t - k;
        auto mix = [&](std::uint8_t a, std::uint8_t b) {
            return static_cast<std::uint8_t>(std::floor(a + (b - a) * f + 0.5));
        };
        const Rgb lo = viridis_stops[k];
        const Rgb hi = viridis_stops[k + 1];
        lut[i] = {mix(lo.r, hi.r), mix(lo.g, hi.g), mix(lo.b, hi.b)};
    }
    return lut;
}

} // namespace detail

/// Color for t in [0, 1], quantized to 256 levels. Lighter means larger t.
inline Rgb palette_color(Palette p, double t)
{
    const int level = static_cast<int>(std::floor(std::clamp(t, 0.0, 1.0) * 255.0 + 0.5));
    if (p == Palette::grayscale) {
        const auto v = static_cast<std::uint8_t>(level);
        return {v, v, v};
    }
    static const std::array<Rgb, 256> lut = detail::make_viridis_lut();
    return lut[level];
}

// ---- downsampling ----------------------------------------------------------

/// cells x cells block averages of an n x n matrix.
struct Grid {
    std::size_t cells = 0;
    std::vector<double> values;

    double at(std::size_t r, std::size_t c) const noexcept { return values[r * cells + c]; }
};

/// Block-averages to at most max_cells per axis. Cell c covers source
/// indices [floor(c*n/cells), floor((c+1)*n/cells)).
template <typename T>
Grid downsample_blocks(std::span<const T> matrix, std::size_t n, std::size_t max_cells)
{
    if (n == 0 || matrix.size() != n * n) throw Error("empty matrix");
    Grid g;
    g.cells = std::min(n, max_cells);
    g.values.assign(g.cells * g.cells, 0.0);
    std::vector<std::size_t> cell_of(n);
    std::vector<std::size_t> width(g.cells, 0);
    for (std::size_t c = 0; c < g.cells; ++c) {
        for (std::size_t i = c * n / g.cells; i < (c + 1) * n / g.cells; ++i) cell_of[i] = c;
        width[c] = (c + 1) * n / g.cells - c * n / g.cells;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double* dst = &g.values[cell_of[i] * g.cells];
        const T* src = &matrix[i * n];
        for (std::size_t j = 0; j < n; ++j) dst[cell_of[j]] += src[j];
    }
    for (std::size_t r = 0; r < g.cells; ++r) {
        for (std::size_t c = 0; c < g.cells; ++c) {
            g.values[r * g.cells + c] /= static_cast<double>(width[r] * width[c]);
        }
    }
    return g;
}

// ---- raster ------------------------------------------------------------------

namespace detail {

// 5x7 glyphs, one byte per row, bit 4 is the leftmost column.
struct Glyph {
    char ch;
    std::array<std::uint8_t, 7> rows;
};

inline constexpr std::array<Glyph, 52> font5x7 = {{
    {' ', {0, 0, 0, 0, 0, 0, 0}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
    {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},
    {',', {0, 0, 0, 0, 0x0C, 0x04, 0x08}},
    {'_', {0, 0, 0, 0, 0, 0, 0x1F}},
    {':', {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0}},
    {'<', {0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02}},
    {'>', {0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'/', {0, 0x01, 0x02, 0x04, 0x08, 0x10, 0}},
    {'=', {0, 0, 0x1F, 0, 0x1F, 0, 0}},
    {'+', {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0}},
    {'\'', {0x0C, 0x04, 0x08, 0, 0, 0, 0}},
    {'#', {0x0A, 0x0A, 0x1F, 0x0A, 0x1F, 0x0A, 0x0A}},
    {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0, 0x04}},
}};

inline const Glyph& glyph_for(char c)
{
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    for (const Glyph& g : font5x7) {
        if (g.ch == c) return g;
    }
    return font5x7.back();
}

} // namespace detail

/// 8-bit RGB raster that serializes to binary PPM (P6).
class Image {
public:
    Image(int width, int height, Rgb background = {255, 255, 255})
        : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height * 3)
    {
        fill_rect(0, 0, width, height, background);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    Rgb pixel(int x, int y) const
    {
        const std::size_t k = (static_cast<std::size_t>(y) * width_ + x) * 3;
        return {pixels_[k], pixels_[k + 1], pixels_[k + 2]};
    }

    void set_pixel(int x, int y, Rgb c)
    {
        if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
        const std::size_t k = (static_cast<std::size_t>(y) * width_ + x) * 3;
        pixels_[k] = c.r;
        pixels_[k + 1] = c.g;
        pixels_[k + 2] = c.b;
    }

    void fill_rect(int x, int y, int w, int h, Rgb c)
    {
        const int x1 = std::min(width_, x + w);
        const int y1 = std::min(height_, y + h);
        for (int yy = std::max(0, y); yy < y1; ++yy) {
            for (int xx = std::max(0, x); xx < x1; ++xx) set_pixel(xx, yy, c);
        }
    }

    void stroke_rect(int x, int y, int w, int h, Rgb c)
    {
        draw_line(x, y, x + w - 1, y, c);
        draw_line(x, y + h - 1, x + w - 1, y + h - 1, c);
        draw_line(x, y, x, y + h - 1, c);
        draw_line(x + w - 1, y, x + w - 1, y + h - 1, c);
    }

    void draw_line(int x0, int y0, int x1, int y1, Rgb c)
    {
        const int dx = std::abs(x1 - x0);
        const int dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1;
        const int sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set_pixel(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    /// Draws text with the built-in 5x7 font (lowercase renders as capitals).
    /// Each glyph advances 6 pixels; (x, y) is the top-left corner.
    void draw_text(int x, int y, std::string_view text, Rgb c)
    {
        for (char ch : text) {
            const detail::Glyph& g = detail::glyph_for(ch);
            for (int row = 0; row < 7; ++row) {
                for (int col = 0; col < 5; ++col) {
                    if (g.rows[row] & (0x10 >> col)) set_pixel(x + col, y + row, c);
                }
            }
            x += 6;
        }
    }

    static int text_width(std::string_view text) noexcept { return static_cast<int>(text.size()) * 6 - 1; }

    std::string to_ppm() const
    {
        std::string out = "P6\n" + std::to_string(width_) + " " + std::to_string(height_) + "\n255\n";
        out.append(reinterpret_cast<const char*>(pixels_.data()), pixels_.size());
        return out;
    }

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> pixels_;
};

// ---- SVG helpers ---------------------------------------------------------------

namespace detail {

inline std::string hex_color(Rgb c)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

inline std::string xml_escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

inline std::string fixed2(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

class SvgWriter {
public:
    SvgWriter(int width, int height)
    {
        out_ = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
        out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(width) +
                "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " +
                std::to_string(height) + "\">\n";
        rect(0, 0, width, height, {255, 255, 255});
    }

    void raw(std::string_view s) { out_ += s; }

    void rect(int x, int y, int w, int h, Rgb fill)
    {
        out_ += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" + std::to_string(w) +
                "\" height=\"" + std::to_string(h) + "\" fill=\"" + hex_color(fill) + "\"/>\n";
    }

    void frame(int x, int y, int w, int h, Rgb stroke)
    {
        out_ += "<rect x=\"" + fixed2(x + 0.5) + "\" y=\"" + fixed2(y + 0.5) + "\" width=\"" + std::to_string(w - 1) +
                "\" height=\"" + std::to_string(h - 1) + "\" fill=\"none\" stroke=\"" + hex_color(stroke) + "\"/>\n";
    }

    void text(int x, int y, std::string_view s, std::string_view anchor, Rgb fill, int size = 12)
    {
        out_ += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" font-family=\"monospace\" font-size=\"" +
                std::to_string(size) + "\" text-anchor=\"" + std::string(anchor) + "\" fill=\"" + hex_color(fill) +
                "\">" + xml_escape(s) + "</text>\n";
    }

    std::string finish()
    {
        out_ += "</svg>\n";
        return std::move(out_);
    }

private:
    std::string out_;
};

enum class ImageFormat { svg, ppm };

inline ImageFormat format_for(const std::filesystem::path& path)
{
    const std::string ext = ascii_lower(path.extension().string());
    if (ext == ".svg") return ImageFormat::svg;
    if (ext == ".ppm") return ImageFormat::ppm;
    throw Error("unsupported image extension (use .svg or .ppm): " + path.string());
}

inline constexpr Rgb black{0, 0, 0};
inline constexpr Rgb gray{160, 160, 160};
inline constexpr int margin = 8;
inline constexpr int title_band = 24;

inline int span_edge(int origin, int extent, std::size_t k, std::size_t count)
{
    return origin + static_cast<int>(static_cast<long long>(k) * extent / static_cast<long long>(count));
}

} // namespace detail

// ---- heatmap -----------------------------------------------------------------------

struct HeatmapInput {
    Grid grid;
    std::vector<std::string> labels; // empty for sentence matrices
};

namespace detail {

struct HeatmapLayout {
    int left = 0, top = 0, plot_w = 0, plot_h = 0;
    double lo = 0.0, hi = 0.0;
};

inline HeatmapLayout heatmap_layout(const HeatmapInput& in, const RenderSpec& spec)
{
    HeatmapLayout l;
    std::size_t longest = 0;
    for (const std::string& s : in.labels) longest = std::max(longest, s.size());
    const int label_band = in.labels.empty() ? 0 : static_cast<int>(longest) * 7 + 8;
    // A bare sentence matrix fills the whole canvas.
    const int pad = (in.labels.empty() && spec.title.empty()) ? 0 : margin;
    l.left = pad + label_band;
    l.top = pad + (spec.title.empty() ? 0 : title_band) + (in.labels.empty() ? 0 : 16);
    l.plot_w = std::max(1, spec.width - l.left - pad);
    l.plot_h = std::max(1, spec.height - l.top - pad);
    const auto [mn, mx] = std::minmax_element(in.grid.values.begin(), in.grid.values.end());
    l.lo = *mn;
    l.hi = *mx;
    return l;
}

inline double unit_position(double v, double lo, double hi) noexcept
{
    return hi > lo ? (v - lo) / (hi - lo) : 0.5;
}

inline std::string cell_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline Rgb ink_for(Rgb background) noexcept { return luma(background) > 128.0 ? Rgb{0, 0, 0} : Rgb{255, 255, 255}; }

} // namespace detail

inline std::string heatmap_svg(const HeatmapInput& in, const RenderSpec& spec)
{
    spec.validate();
    const detail::HeatmapLayout l = detail::heatmap_layout(in, spec);
    const std::size_t cells = in.grid.cells;
    detail::SvgWriter svg(spec.width, spec.height);
    if (!spec.title.empty()) svg.text(spec.width / 2, detail::margin + 16, spec.title, "middle", detail::black, 14);
    svg.raw("<g shape-rendering=\"crispEdges\">\n");
    for (std::size_t r = 0; r < cells; ++r) {
        const int y0 = detail::span_edge(l.top, l.plot_h, r, cells);
        const int y1 = detail::span_edge(l.top, l.plot_h, r + 1, cells);
        if (y1 == y0) continue;
        // Merge horizontal runs of equal color.
        std::size_t c = 0;
        while (c < cells) {
            const Rgb color = palette_color(spec.palette, detail::unit_position(in.grid.at(r, c), l.lo, l.hi));
            std::size_t end = c + 1;
            while (end < cells &&
                   palette_color(spec.palette, detail::unit_position(in.grid.at(r, end), l.lo, l.hi)) == color) {
                ++end;
            }
            const int x0 = detail::span_edge(l.left, l.plot_w, c, cells);
            const int x1 = detail::span_edge(l.left, l.plot_w, end, cells);
            if (x1 > x0) svg.rect(x0, y0, x1 - x0, y1 - y0, color);
            c = end;
        }
    }
    svg.raw("</g>\n");
    if (!in.labels.empty()) {
        for (std::size_t k = 0; k < cells; ++k) {
            const int x0 = detail::span_edge(l.left, l.plot_w, k, cells);
            const int x1 = detail::span_edge(l.left, l.plot_w, k + 1, cells);
            const int y0 = detail::span_edge(l.top, l.plot_h, k, cells);
            const int y1 = detail::span_edge(l.top, l.plot_h, k + 1, cells);
            svg.text((x0 + x1) / 2, l.top - 4, in.labels[k], "middle", detail::black);
            svg.text(l.left - 4, (y0 + y1) / 2 + 4, in.labels[k], "end", detail::black);
        }
        for (std::size_t r = 0; r < cells; ++r) {
            for (std::size_t c = 0; c < cells; ++c) {
                const Rgb bg = palette_color(spec.palette, detail::unit_position(in.grid.at(r, c), l.lo, l.hi));
                const int cx = (detail::span_edge(l.left, l.plot_w, c, cells) + detail::span_edge(l.left, l.plot_w, c + 1, cells)) / 2;
                const int cy = (detail::span_edge(l.top, l.plot_h, r, cells) + detail::span_edge(l.top, l.plot_h, r + 1, cells)) / 2;
                svg.text(cx, cy + 4, detail::cell_label(in.grid.at(r, c)), "middle", detail::ink_for(bg), 11);
            }
        }
    }
    return svg.finish();
}

inline Image heatmap_image(const HeatmapInput& in, const RenderSpec& spec)
{
    spec.validate();
    const detail::HeatmapLayout l = detail::heatmap_layout(in, spec);
    const std::size_t cells = in.grid.cells;
    Image img(spec.width, spec.height);
    if (!spec.title.empty()) {
        img.draw_text((spec.width - Image::text_width(spec.title)) / 2, detail::margin + 6, spec.title, detail::black);
    }
    for (std::size_t r = 0; r < cells; ++r) {
        const int y0 = detail::span_edge(l.top, l.plot_h, r, cells);
        const int y1 = detail::span_edge(l.top, l.plot_h, r + 1, cells);
        for (std::size_t c = 0; c < cells; ++c) {
            const int x0 = detail::span_edge(l.left, l.plot_w, c, cells);
            const int x1 = detail::span_edge(l.left, l.plot_w, c + 1, cells);
            img.fill_rect(x0, y0, x1 - x0, y1 - y0,
                          palette_color(spec.palette, detail::unit_position(in.grid.at(r, c), l.lo, l.hi)));
        }
    }
    if (!in.labels.empty()) {
        for (std::size_t k = 0; k < cells; ++k) {
            const int x0 = detail::span_edge(l.left, l.plot_w, k, cells);
            const int x1 = detail::span_edge(l.left, l.plot_w, k + 1, cells);
            const int y0 = detail::span_edge(l.top, l.plot_h, k, cells);
            const int y1 = detail::span_edge(l.top, l.plot_h, k + 1, cells);
            const std::string& label = in.labels[k];
            img.draw_text((x0 + x1 - Image::text_width(label)) / 2, l.top - 12, label, detail::black);
            img.draw_text(l.left - 4 - Image::text_width(label), (y0 + y1) / 2 - 3, label, detail::black);
        }
        for (std::size_t r = 0; r < cells; ++r) {
            for (std::size_t c = 0; c < cells; ++c) {
                const Rgb bg = palette_color(spec.palette, detail::unit_position(in.grid.at(r, c), l.lo, l.hi));
                const std::string text = detail::cell_label(in.grid.at(r, c));
                const int x0 = detail::span_edge(l.left, l.plot_w, c, cells);
                const int x1 = detail::span_edge(l.left, l.plot_w, c + 1, cells);
                const int y0 = detail::span_edge(l.top, l.plot_h, r, cells);
                const int y1 = detail::span_edge(l.top, l.plot_h, r + 1, cells);
                if (x1 - x0 > Image::text_width(text) + 2 && y1 - y0 > 9) {
                    img.draw_text((x0 + x1 - Image::text_width(text)) / 2, (y0 + y1) / 2 - 3, text, detail::ink_for(bg));
                }
            }
        }
    }
    return img;
}

inline HeatmapInput heatmap_input(const SquareMatrix<float>& m, const RenderSpec& spec)
{
    return {downsample_blocks(m.data(), m.size(), static_cast<std::size_t>(spec.downsample)), {}};
}

inline HeatmapInput heatmap_input(const ModelMatrix& m)
{
    if (m.size() == 0) throw Error("empty matrix");
    HeatmapInput in{Grid{m.size(), m.values}, {}};
    for (const ModelId& id : m.models) in.labels.push_back(id.str());
    return in;
}

namespace detail {

inline void write_heatmap(const HeatmapInput& in, const RenderSpec& spec, const std::filesystem::path& path)
{
    const ImageFormat fmt = format_for(path);
    write_file_atomic(path, fmt == ImageFormat::svg ? heatmap_svg(in, spec) : heatmap_image(in, spec).to_ppm());
}

} // namespace detail

/// Writes an SVG or binary PPM heatmap, chosen by the file extension. The
/// color scale runs linearly over the (block-averaged) matrix's min..max.
inline void render_heatmap(const SSM& s, const RenderSpec& spec, const std::filesystem::path& path)
{
    detail::write_heatmap(heatmap_input(s.values, spec), spec, path);
}

inline void render_heatmap(const StandardizedSSM& z, const RenderSpec& spec, const std::filesystem::path& path)
{
    detail::write_heatmap(heatmap_input(z.values, spec), spec, path);
}

inline void render_heatmap(const ModelMatrix& m, const RenderSpec& spec, const std::filesystem::path& path)
{
    detail::write_heatmap(heatmap_input(m), spec, path);
}

// ---- time series ----------------------------------------------------------------

namespace detail {

inline constexpr std::array<Rgb, 8> series_colors = {{{31, 119, 180},
                                                      {214, 39, 40},
                                                      {44, 160, 44},
                                                      {148, 103, 189},
                                                      {255, 127, 14},
                                                      {140, 86, 75},
                                                      {227, 119, 194},
                                                      {23, 190, 207}}};

struct SeriesLayout {
    int left = 0, top = 0, plot_w = 0, panel_h = 0;
    double lo = 0.0, hi = 0.0;
    std::size_t length = 0;

    double x_at(std::size_t t) const
    {
        if (length <= 1) return left + (plot_w - 1) / 2.0;
        return left + static_cast<double>(t) * (plot_w - 1) / static_cast<double>(length - 1);
    }

    double y_at(std::size_t panel, double v) const
    {
        const double top_px = top + static_cast<double>(panel) * panel_h + 2.0;
        return top_px + (hi - v) / (hi - lo) * (panel_h - 5);
    }
};

inline SeriesLayout series_layout(std::span<const TimeSeries> series, const RenderSpec& spec)
{
    if (series.empty()) throw Error("render_timeseries: empty input");
    SeriesLayout l;
    l.length = series.front().values.size();
    if (l.length == 0) throw Error("render_timeseries: empty series");
    std::size_t longest = 0;
    bool first = true;
    for (const TimeSeries& ts : series) {
        if (ts.values.size() != l.length) throw Error("render_timeseries: length mismatch");
        longest = std::max(longest, ts.model.str().size());
        for (float v : ts.values) {
            l.lo = first ? v : std::min<double>(l.lo, v);
            l.hi = first ? v : std::max<double>(l.hi, v);
            first = false;
        }
    }
    if (!(l.hi > l.lo)) {
        l.lo -= 1.0;
        l.hi += 1.0;
    }
    l.left = margin + static_cast<int>(longest) * 7 + 8;
    l.top = margin + (spec.title.empty() ? 0 : title_band);
    l.plot_w = std::max(2, spec.width - l.left - margin);
    const int axis_band = 16;
    l.panel_h = std::max(8, (spec.height - l.top - margin - axis_band) / static_cast<int>(series.size()));
    return l;
}

} // namespace detail

inline std::string timeseries_svg(std::span<const TimeSeries> series, const RenderSpec& spec)
{
    spec.validate();
    const detail::SeriesLayout l = detail::series_layout(series, spec);
    detail::SvgWriter svg(spec.width, spec.height);
    if (!spec.title.empty()) svg.text(spec.width / 2, detail::margin + 16, spec.title, "middle", detail::black, 14);
    for (std::size_t p = 0; p < series.size(); ++p) {
        const int panel_top = l.top + static_cast<int>(p) * l.panel_h;
        svg.frame(l.left, panel_top, l.plot_w, l.panel_h, detail::gray);
        if (l.lo < 0.0 && l.hi > 0.0) {
            const std::string y = detail::fixed2(l.y_at(p, 0.0));
            svg.raw("<line x1=\"" + std::to_string(l.left) + "\" y1=\"" + y + "\" x2=\"" +
                    std::to_string(l.left + l.plot_w - 1) + "\" y2=\"" + y + "\" stroke=\"#dddddd\"/>\n");
        }
        svg.text(l.left - 4, panel_top + l.panel_h / 2 + 4, series[p].model.str(), "end", detail::black);
        std::string points;
        for (std::size_t t = 0; t < l.length; ++t) {
            if (t) points.push_back(' ');
            points += detail::fixed2(l.x_at(t)) + "," + detail::fixed2(l.y_at(p, series[p].values[t]));
        }
        svg.raw("<polyline fill=\"none\" stroke=\"" +
                detail::hex_color(detail::series_colors[p % detail::series_colors.size()]) +
                "\" stroke-width=\"1\" points=\"" + points + "\"/>\n");
    }
    const int axis_y = l.top + static_cast<int>(series.size()) * l.panel_h + 12;
    svg.text(l.left, axis_y, "0", "start", detail::black);
    svg.text(l.left + l.plot_w - 1, axis_y, std::to_string(l.length - 1), "end", detail::black);
    return svg.finish();
}

inline Image timeseries_image(std::span<const TimeSeries> series, const RenderSpec& spec)
{
    spec.validate();
    const detail::SeriesLayout l = detail::series_layout(series, spec);
    Image img(spec.width, spec.height);
    if (!spec.title.empty()) {
        img.draw_text((spec.width - Image::text_width(spec.title)) / 2, detail::margin + 6, spec.title, detail::black);
    }
    for (std::size_t p = 0; p < series.size(); ++p) {
        const int panel_top = l.top + static_cast<int>(p) * l.panel_h;
        img.stroke_rect(l.left, panel_top, l.plot_w, l.panel_h, detail::gray);
        if (l.lo < 0.0 && l.hi > 0.0) {
            const int y = static_cast<int>(std::lround(l.y_at(p, 0.0)));
            img.draw_line(l.left + 1, y, l.left + l.plot_w - 2, y, {221, 221, 221});
        }
        const std::string& label = series[p].model.str();
        img.draw_text(l.left - 4 - Image::text_width(label), panel_top + l.panel_h / 2 - 3, label, detail::black);
        const Rgb color = detail::series_colors[p % detail::series_colors.size()];
        int px = static_cast<int>(std::lround(l.x_at(0)));
        int py = static_cast<int>(std::lround(l.y_at(p, series[p].values[0])));
        img.set_pixel(px, py, color);
        for (std::size_t t = 1; t < l.length; ++t) {
            const int x = static_cast<int>(std::lround(l.x_at(t)));
            const int y = static_cast<int>(std::lround(l.y_at(p, series[p].values[t])));
            img.draw_line(px, py, x, y, color);
            px = x;
            py = y;
        }
    }
    const int axis_y = l.top + static_cast<int>(series.size()) * l.panel_h + 4;
    img.draw_text(l.left, axis_y, "0", detail::black);
    const std::string last = std::to_string(l.length - 1);
    img.draw_text(l.left + l.plot_w - Image::text_width(last), axis_y, last, detail::black);
    return img;
}

/// Stacked per-model panels sharing the x axis (transition index) and y range.
inline void render_timeseries(std::span<const TimeSeries> series, const RenderSpec& spec,
                              const std::filesystem::path& path)
{
    const detail::ImageFormat fmt = detail::format_for(path);
    write_file_atomic(path, fmt == detail::ImageFormat::svg ? timeseries_svg(series, spec)
                                                             : timeseries_image(series, spec).to_ppm());
}

} // namespace semvar
