#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "fieldmap/png.hpp"
#include "fieldmap/raster.hpp"
#include "fieldmap/uncertainty.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

// ---------------------------------------------------------------------------
// Colormaps: piecewise-linear ramps over >= 5 stops, clamped outside range.
// ---------------------------------------------------------------------------

struct ColorStop {
    double pos;  // in [0,1]
    uint8_t r, g, b;
};

struct Colormap {
    std::string name;
    std::vector<ColorStop> stops;
};

inline const Colormap& get_colormap(const std::string& name) {
    static const Colormap viridis{
        "viridis",
        {{0.00, 68, 1, 84},
         {0.25, 59, 82, 139},
         {0.50, 33, 145, 140},
         {0.75, 94, 201, 98},
         {1.00, 253, 231, 37}}};
    static const Colormap magma{
        "magma",
        {{0.00, 0, 0, 4},
         {0.25, 81, 18, 124},
         {0.50, 183, 55, 121},
         {0.75, 252, 137, 97},
         {1.00, 252, 253, 191}}};
    static const Colormap grays{
        "grays",
        {{0.00, 20, 20, 20},
         {0.25, 77, 77, 77},
         {0.50, 134, 134, 134},
         {0.75, 191, 191, 191},
         {1.00, 248, 248, 248}}};
    if (name == "viridis" || name.empty()) return viridis;
    if (name == "magma") return magma;
    if (name == "grays") return grays;
    throw config_error("unknown colormap: " + name + " (available: viridis, magma, grays)");
}

inline std::array<uint8_t, 3> colormap_rgb(double value, double vmin, double vmax,
                                           const Colormap& ramp) {
    if (!(vmin < vmax)) throw pipeline_error("colormap: vmin must be < vmax");
    double t = std::clamp((value - vmin) / (vmax - vmin), 0.0, 1.0);
    const auto& s = ramp.stops;
    if (t <= s.front().pos) return {s.front().r, s.front().g, s.front().b};
    for (size_t i = 1; i < s.size(); ++i) {
        if (t > s[i].pos) continue;
        double span = s[i].pos - s[i - 1].pos;
        double f = span > 0.0 ? (t - s[i - 1].pos) / span : 1.0;
        auto lerp = [f](uint8_t a, uint8_t b) {
            return static_cast<uint8_t>(std::lround(a + (b - a) * f));
        };
        return {lerp(s[i - 1].r, s[i].r), lerp(s[i - 1].g, s[i].g), lerp(s[i - 1].b, s[i].b)};
    }
    return {s.back().r, s.back().g, s.back().b};
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

struct RenderSpec {
    int width_px = 800;
    std::string colormap = "viridis";
    double vmin = std::nan("");  // NaN: derive from the rendered frame
    double vmax = std::nan("");
    int hatch_tiles = 64;        // hatch tile count along the longer axis
    double stripe_period = 7.0;  // px between hatch stripes
    bool legend = true;
    std::string title;           // legend caption
};

namespace detail {

inline std::string fmt2(double v) { return strprintf("%.2f", v); }

struct PixelMapper {
    Bounds bounds;
    double width_px, height_px;
    double x(double lng) const { return (lng - bounds.min_x) / bounds.width() * width_px; }
    double y(double lat) const { return (bounds.max_y - lat) / bounds.height() * height_px; }
};

}  // namespace detail

// Layer order: heatmap image, hatch stripes, reliability glyphs, legend,
// boundary outline. Glyph and hatch layers use grayscale paint only. Output
// is byte-identical for identical inputs.
inline std::string render_svg(const RasterField& raster, int frame, const Polygon& boundary,
                              const GlyphGrid* glyphs, const HatchField* hatch,
                              const RenderSpec& spec) {
    if (frame < 0 || frame >= raster.steps) throw config_error("render: frame out of range");
    Bounds bb = boundary.bounds();
    auto close = [](double a, double b, double scale) {
        return std::fabs(a - b) <= 1e-9 * std::max(1.0, scale);
    };
    double scale = std::max(bb.width(), bb.height());
    if (!close(bb.min_x, raster.bounds.min_x, scale) ||
        !close(bb.max_x, raster.bounds.max_x, scale) ||
        !close(bb.min_y, raster.bounds.min_y, scale) ||
        !close(bb.max_y, raster.bounds.max_y, scale))
        throw pipeline_error("render: raster bounds do not match the boundary bounds");

    const double W = spec.width_px;
    const double H = std::max(2.0, std::round(spec.width_px * bb.height() / bb.width()));
    detail::PixelMapper px{bb, W, H};
    const Colormap& ramp = get_colormap(spec.colormap);

    double vmin = spec.vmin, vmax = spec.vmax;
    if (std::isnan(vmin) || std::isnan(vmax)) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int r = 0; r < raster.height; ++r)
            for (int c = 0; c < raster.width; ++c) {
                float v = raster.at(frame, r, c);
                if (std::isnan(v)) continue;
                lo = std::min<double>(lo, v);
                hi = std::max<double>(hi, v);
            }
        if (!(hi >= lo)) throw pipeline_error("render: frame has no valid pixels");
        if (hi <= lo) hi = lo + 1.0;
        if (std::isnan(vmin)) vmin = lo;
        if (std::isnan(vmax)) vmax = hi;
    }
    if (!(vmin < vmax)) throw config_error("render: vmin must be < vmax");

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += strprintf(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" "
        "xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"%s\" height=\"%s\" "
        "viewBox=\"0 0 %s %s\">\n",
        detail::fmt2(W).c_str(), detail::fmt2(H).c_str(), detail::fmt2(W).c_str(),
        detail::fmt2(H).c_str());

    // --- heatmap ---------------------------------------------------------
    {
        std::vector<uint8_t> rgba(static_cast<size_t>(raster.width) * raster.height * 4, 0);
        for (int r = 0; r < raster.height; ++r) {
            int src_row = raster.height - 1 - r;  // raster row 0 is south; PNG row 0 is top
            for (int c = 0; c < raster.width; ++c) {
                float v = raster.at(frame, src_row, c);
                uint8_t* dst = &rgba[(static_cast<size_t>(r) * raster.width + c) * 4];
                if (std::isnan(v)) continue;  // transparent nodata
                auto rgb = colormap_rgb(v, vmin, vmax, ramp);
                dst[0] = rgb[0];
                dst[1] = rgb[1];
                dst[2] = rgb[2];
                dst[3] = 255;
            }
        }
        svg += "<g id=\"heatmap\">\n";
        svg += strprintf(
            "<image x=\"0\" y=\"0\" width=\"%s\" height=\"%s\" "
            "preserveAspectRatio=\"none\" image-rendering=\"pixelated\" "
            "xlink:href=\"data:image/png;base64,%s\"/>\n",
            detail::fmt2(W).c_str(), detail::fmt2(H).c_str(),
            base64_encode(encode_png_rgba(raster.width, raster.height, rgba)).c_str());
        svg += "</g>\n";
    }

    // --- hatch -------------------------------------------------------------
    if (hatch) {
        svg += "<g id=\"hatch\">\n";
        double period = std::max(2.0, spec.stripe_period);
        svg += strprintf(
            "<defs><pattern id=\"hatchstripes\" width=\"%s\" height=\"%s\" "
            "patternUnits=\"userSpaceOnUse\" patternTransform=\"rotate(45)\">"
            "<rect width=\"%s\" height=\"%s\" fill=\"none\"/>"
            "<rect width=\"%s\" height=\"%s\" fill=\"#555555\"/></pattern></defs>\n",
            detail::fmt2(period).c_str(), detail::fmt2(period).c_str(),
            detail::fmt2(period).c_str(), detail::fmt2(period).c_str(),
            detail::fmt2(period * 0.4).c_str(), detail::fmt2(period).c_str());
        int tiles_x = std::max(1, spec.hatch_tiles);
        double tile_geo = std::max(bb.width(), bb.height()) / tiles_x;
        int nx = std::max(1, static_cast<int>(std::ceil(bb.width() / tile_geo - 1e-9)));
        int ny = std::max(1, static_cast<int>(std::ceil(bb.height() / tile_geo - 1e-9)));
        const DensityField& f = hatch->field;
        for (int ty = 0; ty < ny; ++ty) {
            for (int tx = 0; tx < nx; ++tx) {
                // Average the opacity field over the cells under this tile.
                double x0 = bb.min_x + tx * tile_geo, y0 = bb.min_y + ty * tile_geo;
                double x1 = std::min(x0 + tile_geo, bb.max_x);
                double y1 = std::min(y0 + tile_geo, bb.max_y);
                int c0 = std::clamp(static_cast<int>((x0 - f.bounds.min_x) / f.cell_size), 0,
                                    f.width - 1);
                int c1 = std::clamp(static_cast<int>((x1 - f.bounds.min_x) / f.cell_size), c0,
                                    f.width - 1);
                int r0 = std::clamp(static_cast<int>((y0 - f.bounds.min_y) / f.cell_size), 0,
                                    f.height - 1);
                int r1 = std::clamp(static_cast<int>((y1 - f.bounds.min_y) / f.cell_size), r0,
                                    f.height - 1);
                double acc = 0.0;
                int cnt = 0;
                bool interior = false;
                for (int r = r0; r <= r1; ++r)
                    for (int c = c0; c <= c1; ++c) {
                        acc += f.at(r, c);
                        interior = interior || f.interior(r, c);
                        ++cnt;
                    }
                double opacity = cnt > 0 ? acc / cnt : 0.0;
                if (!interior || opacity < 0.005) continue;  // no element for zero opacity
                svg += strprintf(
                    "<rect x=\"%s\" y=\"%s\" width=\"%s\" height=\"%s\" "
                    "fill=\"url(#hatchstripes)\" opacity=\"%s\"/>\n",
                    detail::fmt2(px.x(x0)).c_str(), detail::fmt2(px.y(y1)).c_str(),
                    detail::fmt2(px.x(x1) - px.x(x0)).c_str(),
                    detail::fmt2(px.y(y0) - px.y(y1)).c_str(), detail::fmt2(opacity).c_str());
            }
        }
        svg += "</g>\n";
    }

    // --- glyphs ------------------------------------------------------------
    // Geometry per cell (center cx,cy; half extents hw,hh):
    //   value offset  y(h) = cy - h * 0.45 * cell_height
    //   primary arrow: stem from (cx,cy) to (cx,y(h_p)), flat head of width
    //     0.24*cell_width at the tip; dark gray
    //   auxiliary band: chevron pair spanning y(h_low)..y(h_high), half width
    //     0.30*cell_width, apex depth = (1-w) * half width; light gray fill
    //   zero heights: neutral dot; empty cell: chevron outline only
    if (glyphs) {
        svg += "<g id=\"glyphs\">\n";
        double cw = W / glyphs->cols, ch = H / glyphs->rows;
        for (int r = 0; r < glyphs->rows; ++r) {
            for (int c = 0; c < glyphs->cols; ++c) {
                Vec2 center = glyphs->cell_center(r, c);
                if (!boundary.contains(center)) continue;
                const GlyphCell& cell = glyphs->at(r, c);
                double cx = px.x(center.x), cy = px.y(center.y);
                double bw = 0.30 * cw;
                double depth = std::clamp(1.0 - cell.w, 0.0, 1.0) * bw;
                if (cell.count == 0) {
                    svg += strprintf(
                        "<polyline points=\"%s,%s %s,%s %s,%s\" fill=\"none\" "
                        "stroke=\"#909090\" stroke-width=\"1.00\"/>\n",
                        detail::fmt2(cx - bw).c_str(), detail::fmt2(cy).c_str(),
                        detail::fmt2(cx).c_str(), detail::fmt2(cy - depth).c_str(),
                        detail::fmt2(cx + bw).c_str(), detail::fmt2(cy).c_str());
                    continue;
                }
                bool flat = cell.h_p == 0.0 && cell.h_low == 0.0 && cell.h_high == 0.0;
                if (flat) {
                    svg += strprintf(
                        "<circle cx=\"%s\" cy=\"%s\" r=\"1.50\" fill=\"#808080\"/>\n",
                        detail::fmt2(cx).c_str(), detail::fmt2(cy).c_str());
                    continue;
                }
                auto yof = [&](double h) { return cy - h * 0.45 * ch; };
                double ylo = yof(cell.h_low), yhi = yof(cell.h_high);
                svg += strprintf(
                    "<polygon points=\"%s,%s %s,%s %s,%s %s,%s %s,%s %s,%s\" "
                    "fill=\"#b4b4b4\" fill-opacity=\"0.85\"/>\n",
                    detail::fmt2(cx - bw).c_str(), detail::fmt2(ylo).c_str(),
                    detail::fmt2(cx).c_str(), detail::fmt2(ylo - depth).c_str(),
                    detail::fmt2(cx + bw).c_str(), detail::fmt2(ylo).c_str(),
                    detail::fmt2(cx + bw).c_str(), detail::fmt2(yhi).c_str(),
                    detail::fmt2(cx).c_str(), detail::fmt2(yhi - depth).c_str(),
                    detail::fmt2(cx - bw).c_str(), detail::fmt2(yhi).c_str());
                if (std::fabs(cell.h_p) > 1e-9) {
                    double yp = yof(cell.h_p);
                    svg += strprintf(
                        "<line x1=\"%s\" y1=\"%s\" x2=\"%s\" y2=\"%s\" stroke=\"#404040\" "
                        "stroke-width=\"1.40\"/>\n",
                        detail::fmt2(cx).c_str(), detail::fmt2(cy).c_str(),
                        detail::fmt2(cx).c_str(), detail::fmt2(yp).c_str());
                    svg += strprintf(
                        "<line x1=\"%s\" y1=\"%s\" x2=\"%s\" y2=\"%s\" stroke=\"#404040\" "
                        "stroke-width=\"1.40\"/>\n",
                        detail::fmt2(cx - 0.12 * cw).c_str(), detail::fmt2(yp).c_str(),
                        detail::fmt2(cx + 0.12 * cw).c_str(), detail::fmt2(yp).c_str());
                }
            }
        }
        svg += "</g>\n";
    }

    // --- legend --------------------------------------------------------------
    if (spec.legend) {
        svg += "<g id=\"legend\">\n";
        double lx = W - 66.0, ly = 14.0, lw = 14.0, lh = 110.0;
        svg += "<defs><linearGradient id=\"legendramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">";
        for (const ColorStop& s : ramp.stops)
            svg += strprintf("<stop offset=\"%s\" stop-color=\"#%02x%02x%02x\"/>",
                             detail::fmt2(s.pos).c_str(), s.r, s.g, s.b);
        svg += "</linearGradient></defs>\n";
        svg += strprintf(
            "<rect x=\"%s\" y=\"%s\" width=\"%s\" height=\"%s\" fill=\"#ffffff\" "
            "fill-opacity=\"0.85\" stroke=\"#303030\" stroke-width=\"0.50\"/>\n",
            detail::fmt2(lx - 6).c_str(), detail::fmt2(ly - 6).c_str(),
            detail::fmt2(60.0).c_str(), detail::fmt2(lh + 26).c_str());
        svg += strprintf(
            "<rect x=\"%s\" y=\"%s\" width=\"%s\" height=\"%s\" "
            "fill=\"url(#legendramp)\" stroke=\"#303030\" stroke-width=\"0.50\"/>\n",
            detail::fmt2(lx).c_str(), detail::fmt2(ly).c_str(), detail::fmt2(lw).c_str(),
            detail::fmt2(lh).c_str());
        svg += strprintf(
            "<text x=\"%s\" y=\"%s\" font-family=\"sans-serif\" font-size=\"9\" "
            "fill=\"#202020\">%s</text>\n",
            detail::fmt2(lx + lw + 4).c_str(), detail::fmt2(ly + 8).c_str(),
            detail::fmt2(vmax).c_str());
        svg += strprintf(
            "<text x=\"%s\" y=\"%s\" font-family=\"sans-serif\" font-size=\"9\" "
            "fill=\"#202020\">%s</text>\n",
            detail::fmt2(lx + lw + 4).c_str(), detail::fmt2(ly + lh).c_str(),
            detail::fmt2(vmin).c_str());
        if (!spec.title.empty())
            svg += strprintf(
                "<text x=\"%s\" y=\"%s\" font-family=\"sans-serif\" font-size=\"9\" "
                "fill=\"#202020\">%s</text>\n",
                detail::fmt2(lx - 2).c_str(), detail::fmt2(ly + lh + 14).c_str(),
                spec.title.c_str());
        svg += "</g>\n";
    }

    // --- boundary ----------------------------------------------------------
    {
        svg += "<g id=\"boundary\">\n<path d=\"";
        for (size_t i = 0; i < boundary.ring.size(); ++i) {
            const Vec2& v = boundary.ring[i];
            svg += (i == 0 ? "M" : " L") + detail::fmt2(px.x(v.x)) + "," +
                   detail::fmt2(px.y(v.y));
        }
        svg += " Z\" fill=\"none\" stroke=\"#101010\" stroke-width=\"1.20\"/>\n</g>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace fieldmap
