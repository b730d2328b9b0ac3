#pragma once

// Pixel-level primitives: grayscale conversion, rotation, cropping, Gaussian
// filtering and bilinear resizing.
//
// Coordinates: pixel (row r, column c) has its center at (x = c, y = r).
// All arithmetic is double precision; quantization happens only on export.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specdiff/error.hpp"

namespace specdiff {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Row-major H x W x C intensity grid, values in [0, 255].
class ImageGrid {
public:
    ImageGrid() = default;

    ImageGrid(std::size_t height, std::size_t width, std::size_t channels = 1, double fill = 0.0)
        : height_(height), width_(width), channels_(channels),
          data_(height * width * channels, fill) {
        if (channels != 1 && channels != 3) throw ShapeError("image channels must be 1 or 3");
    }

    ImageGrid(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
        : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
        if (channels != 1 && channels != 3) throw ShapeError("image channels must be 1 or 3");
        if (data_.size() != height * width * channels)
            throw ShapeError("image data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(height) + "x" +
                             std::to_string(width) + "x" + std::to_string(channels));
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c, std::size_t ch = 0) noexcept {
        assert(r < height_ && c < width_ && ch < channels_);
        return data_[(r * width_ + c) * channels_ + ch];
    }
    double operator()(std::size_t r, std::size_t c, std::size_t ch = 0) const noexcept {
        assert(r < height_ && c < width_ && ch < channels_);
        return data_[(r * width_ + c) * channels_ + ch];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 1;
    std::vector<double> data_;
};

/// Half-open pixel box [top, bottom) x [left, right). Coordinates may lie
/// outside the image; crop() clamps them.
struct RegionBox {
    long top = 0;
    long left = 0;
    long bottom = 0;
    long right = 0;

    long height() const noexcept { return bottom - top; }
    long width() const noexcept { return right - left; }

    friend bool operator==(const RegionBox&, const RegionBox&) = default;
};

/// 2x3 affine map: (x, y) -> (a x + b y + tx, c x + d y + ty).
struct AffineTransform {
    double a = 1.0, b = 0.0, tx = 0.0;
    double c = 0.0, d = 1.0, ty = 0.0;

    Point apply(Point p) const noexcept {
        return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty};
    }

    AffineTransform inverse() const {
        const double det = a * d - b * c;
        if (det == 0.0) throw DegenerateGeometryError("affine transform is singular");
        AffineTransform inv;
        inv.a = d / det;
        inv.b = -b / det;
        inv.c = -c / det;
        inv.d = a / det;
        inv.tx = -(inv.a * tx + inv.b * ty);
        inv.ty = -(inv.c * tx + inv.d * ty);
        return inv;
    }

    bool is_identity() const noexcept {
        return a == 1.0 && b == 0.0 && tx == 0.0 && c == 0.0 && d == 1.0 && ty == 0.0;
    }
};

// BT.601 luma weights.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// RGB -> single channel luma. Single-channel input is returned unchanged.
inline ImageGrid grayscale(const ImageGrid& img) {
    if (img.channels() == 1) return img;
    ImageGrid out(img.height(), img.width(), 1);
    const auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = kLumaR * src[3 * i] + kLumaG * src[3 * i + 1] + kLumaB * src[3 * i + 2];
    }
    return out;
}

/// Bilinear sample at (x, y); taps outside the image read as 0.
inline double sample_bilinear_zero(const ImageGrid& img, double x, double y, std::size_t ch = 0) {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double wx = x - fx;
    const double wy = y - fy;
    const long x0 = static_cast<long>(fx);
    const long y0 = static_cast<long>(fy);
    const auto H = static_cast<long>(img.height());
    const auto W = static_cast<long>(img.width());
    auto tap = [&](long r, long c) -> double {
        if (r < 0 || c < 0 || r >= H || c >= W) return 0.0;
        return img(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch);
    };
    double v = 0.0;
    // Skip zero-weight taps so that integer coordinates sample exactly.
    if (wx != 1.0 && wy != 1.0) v += (1.0 - wx) * (1.0 - wy) * tap(y0, x0);
    if (wx != 0.0 && wy != 1.0) v += wx * (1.0 - wy) * tap(y0, x0 + 1);
    if (wx != 1.0 && wy != 0.0) v += (1.0 - wx) * wy * tap(y0 + 1, x0);
    if (wx != 0.0 && wy != 0.0) v += wx * wy * tap(y0 + 1, x0 + 1);
    return v;
}

/// Forward transform of a rotation by `radians` (counter-clockwise in the
/// x-right / y-down frame appears clockwise on screen) about the image center.
inline AffineTransform rotation_about_center(std::size_t height, std::size_t width, double radians) {
    const double cx = (static_cast<double>(width) - 1.0) / 2.0;
    const double cy = (static_cast<double>(height) - 1.0) / 2.0;
    double cs = std::cos(radians);
    double sn = std::sin(radians);
    if (radians == 0.0) {
        cs = 1.0;
        sn = 0.0;
    }
    AffineTransform t;
    t.a = cs;
    t.b = -sn;
    t.c = sn;
    t.d = cs;
    t.tx = cx - (cs * cx - sn * cy);
    t.ty = cy - (sn * cx + cs * cy);
    return t;
}

struct RotationResult {
    ImageGrid image;
    AffineTransform transform;  ///< maps source coordinates to output coordinates
};

/// Warps `img` through the forward map `forward` (same output size), pulling
/// each output pixel from the inverse-mapped source position.
inline ImageGrid warp_affine(const ImageGrid& img, const AffineTransform& forward) {
    if (forward.is_identity()) return img;
    const AffineTransform inv = forward.inverse();
    ImageGrid out(img.height(), img.width(), img.channels());
    for (std::size_t r = 0; r < img.height(); ++r) {
        for (std::size_t c = 0; c < img.width(); ++c) {
            const Point src = inv.apply({static_cast<double>(c), static_cast<double>(r)});
            for (std::size_t ch = 0; ch < img.channels(); ++ch) {
                out(r, c, ch) = std::clamp(sample_bilinear_zero(img, src.x, src.y, ch), 0.0, 255.0);
            }
        }
    }
    return out;
}

/// Rotates by `radians` about the image center with bilinear sampling.
inline RotationResult rotate(const ImageGrid& img, double radians) {
    const AffineTransform t = rotation_about_center(img.height(), img.width(), radians);
    return {warp_affine(img, t), t};
}

/// Rotation angle that makes the segment left_eye -> right_eye point along +x.
inline double upright_angle(Point left_eye, Point right_eye) {
    const double dx = right_eye.x - left_eye.x;
    const double dy = right_eye.y - left_eye.y;
    if (dx == 0.0 && dy == 0.0)
        throw DegenerateGeometryError("eye centers coincide; cannot determine face orientation");
    if (dy == 0.0 && dx > 0.0) return 0.0;
    return -std::atan2(dy, dx);
}

/// Rotates the image so that the eye line is horizontal with the left eye at
/// the smaller x. The returned transform maps original landmarks.
inline RotationResult rotate_upright(const ImageGrid& img, Point left_eye, Point right_eye) {
    return rotate(img, upright_angle(left_eye, right_eye));
}

/// Intersects `box` with the image bounds.
inline RegionBox clamp_box(const RegionBox& box, std::size_t height, std::size_t width) {
    RegionBox b;
    b.top = std::clamp(box.top, 0L, static_cast<long>(height));
    b.bottom = std::clamp(box.bottom, 0L, static_cast<long>(height));
    b.left = std::clamp(box.left, 0L, static_cast<long>(width));
    b.right = std::clamp(box.right, 0L, static_cast<long>(width));
    return b;
}

inline ImageGrid crop(const ImageGrid& img, const RegionBox& box) {
    const RegionBox b = clamp_box(box, img.height(), img.width());
    if (b.top >= b.bottom || b.left >= b.right)
        throw EmptyRegionError("crop box [" + std::to_string(box.top) + "," +
                               std::to_string(box.bottom) + ")x[" + std::to_string(box.left) +
                               "," + std::to_string(box.right) + ") is empty inside " +
                               std::to_string(img.height()) + "x" + std::to_string(img.width()));
    const auto h = static_cast<std::size_t>(b.height());
    const auto w = static_cast<std::size_t>(b.width());
    const std::size_t ch = img.channels();
    ImageGrid out(h, w, ch);
    auto dst = out.data();
    const auto src = img.data();
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t src_row = (static_cast<std::size_t>(b.top) + r) * img.width() +
                                    static_cast<std::size_t>(b.left);
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(src_row * ch), w * ch,
                    dst.begin() + static_cast<std::ptrdiff_t>(r * w * ch));
    }
    return out;
}

/// Normalized 1-D Gaussian taps for offsets -radius..radius, radius = ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw Error("gaussian sigma must be positive");
    const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Separable Gaussian blur, edge-replicated borders.
inline ImageGrid gaussian_filter(const ImageGrid& img, double sigma) {
    const std::vector<double> k = gaussian_kernel(sigma);
    const long radius = static_cast<long>(k.size() / 2);
    const auto H = static_cast<long>(img.height());
    const auto W = static_cast<long>(img.width());
    const std::size_t C = img.channels();
    if (img.empty()) return img;

    ImageGrid tmp(img.height(), img.width(), C);
    for (long r = 0; r < H; ++r) {
        for (long c = 0; c < W; ++c) {
            for (std::size_t ch = 0; ch < C; ++ch) {
                double acc = 0.0;
                for (long i = -radius; i <= radius; ++i) {
                    const long cc = std::clamp(c + i, 0L, W - 1);
                    acc += k[static_cast<std::size_t>(i + radius)] *
                           img(static_cast<std::size_t>(r), static_cast<std::size_t>(cc), ch);
                }
                tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch) = acc;
            }
        }
    }
    ImageGrid out(img.height(), img.width(), C);
    for (long r = 0; r < H; ++r) {
        for (long c = 0; c < W; ++c) {
            for (std::size_t ch = 0; ch < C; ++ch) {
                double acc = 0.0;
                for (long i = -radius; i <= radius; ++i) {
                    const long rr = std::clamp(r + i, 0L, H - 1);
                    acc += k[static_cast<std::size_t>(i + radius)] *
                           tmp(static_cast<std::size_t>(rr), static_cast<std::size_t>(c), ch);
                }
                out(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch) = acc;
            }
        }
    }
    return out;
}

namespace detail {

struct ResizeTap {
    std::size_t lo;
    std::size_t hi;
    double w;  ///< weight of `hi`
};

// Half-pixel-center mapping: src = (dst + 0.5) * scale - 0.5, clamped to [0, n-1].
inline std::vector<ResizeTap> resize_taps(std::size_t in, std::size_t out) {
    std::vector<ResizeTap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
        double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const double f = std::floor(src);
        const auto lo = static_cast<std::size_t>(f);
        const std::size_t hi = std::min(lo + 1, in - 1);
        taps[i] = {lo, hi, src - f};
    }
    return taps;
}

}  // namespace detail

inline ImageGrid resize_bilinear(const ImageGrid& img, std::size_t out_h, std::size_t out_w) {
    if (out_h < 1 || out_w < 1) throw Error("resize target must be at least 1x1");
    if (img.empty()) throw EmptyRegionError("cannot resize an empty image");
    if (out_h == img.height() && out_w == img.width()) return img;
    const auto ty = detail::resize_taps(img.height(), out_h);
    const auto tx = detail::resize_taps(img.width(), out_w);
    ImageGrid out(out_h, out_w, img.channels());
    for (std::size_t r = 0; r < out_h; ++r) {
        const auto& yr = ty[r];
        for (std::size_t c = 0; c < out_w; ++c) {
            const auto& xc = tx[c];
            for (std::size_t ch = 0; ch < img.channels(); ++ch) {
                const double top = (1.0 - xc.w) * img(yr.lo, xc.lo, ch) + xc.w * img(yr.lo, xc.hi, ch);
                const double bot = (1.0 - xc.w) * img(yr.hi, xc.lo, ch) + xc.w * img(yr.hi, xc.hi, ch);
                out(r, c, ch) = (1.0 - yr.w) * top + yr.w * bot;
            }
        }
    }
    return out;
}

/// Round half away from zero, clamp to [0, 255].
inline unsigned char quantize_u8(double v) noexcept {
    if (!(v > 0.0)) return 0;
    if (v >= 255.0) return 255;
    return static_cast<unsigned char>(std::round(v));
}

}  // namespace specdiff
