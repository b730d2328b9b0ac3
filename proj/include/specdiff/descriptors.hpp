#pragma once

// Flash/no-flash reflection descriptors.
//
//   spec      per-eye sorted normalized difference over 40x40 iris crops (3200)
//   diff      unsorted normalized difference over the 100x100 face crop (10000)
//   specdiff  spec followed by diff (13200)
//   sd_fic, lbp_fi, relative_ref, implicit3d   baseline descriptors

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specdiff/dataset.hpp"
#include "specdiff/error.hpp"
#include "specdiff/image.hpp"

namespace specdiff {

inline constexpr std::size_t kIrisSize = 40;
inline constexpr std::size_t kFaceSize = 100;
inline constexpr double kIrisSigma = 2.0;
inline constexpr double kFaceSigma = 5.0;

enum class DescriptorKind : std::uint32_t {
    spec = 1,
    diff = 2,
    specdiff = 3,
    sd_fic = 4,
    lbp_fi = 5,
    relative_ref = 6,
    implicit3d = 7,
};

inline constexpr std::array kAllDescriptorKinds = {
    DescriptorKind::spec,   DescriptorKind::diff,         DescriptorKind::specdiff,
    DescriptorKind::sd_fic, DescriptorKind::lbp_fi,       DescriptorKind::relative_ref,
    DescriptorKind::implicit3d};

inline const char* to_string(DescriptorKind k) noexcept {
    switch (k) {
        case DescriptorKind::spec: return "spec";
        case DescriptorKind::diff: return "diff";
        case DescriptorKind::specdiff: return "specdiff";
        case DescriptorKind::sd_fic: return "sd_fic";
        case DescriptorKind::lbp_fi: return "lbp_fi";
        case DescriptorKind::relative_ref: return "relative_ref";
        case DescriptorKind::implicit3d: return "implicit3d";
    }
    return "?";
}

inline std::optional<DescriptorKind> parse_descriptor_kind(std::string_view s) {
    for (auto k : kAllDescriptorKinds) {
        if (s == to_string(k)) return k;
    }
    return std::nullopt;
}

inline constexpr std::size_t descriptor_length(DescriptorKind k) noexcept {
    switch (k) {
        case DescriptorKind::spec: return 2 * kIrisSize * kIrisSize;
        case DescriptorKind::diff: return kFaceSize * kFaceSize;
        case DescriptorKind::specdiff: return 2 * kIrisSize * kIrisSize + kFaceSize * kFaceSize;
        case DescriptorKind::sd_fic: return 1;
        case DescriptorKind::lbp_fi:
        case DescriptorKind::relative_ref:
        case DescriptorKind::implicit3d: return kFaceSize * kFaceSize;
    }
    return 0;
}

/// True for kinds whose values are bounded in [-1, 1].
inline constexpr bool is_bounded_kind(DescriptorKind k) noexcept {
    return k == DescriptorKind::spec || k == DescriptorKind::diff || k == DescriptorKind::specdiff;
}

struct Descriptor {
    DescriptorKind kind = DescriptorKind::specdiff;
    std::vector<double> values;
    bool degenerate = false;  ///< relative_ref with a zero reference pixel
};

/// Normalized score grid; same shape as its source grids.
struct ScoreGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    double operator()(std::size_t r, std::size_t c) const noexcept { return values[r * width + c]; }
};

/// Iris crops of both eyes; index 0 = left eye, 1 = right eye.
struct IrisPair {
    std::array<ImageGrid, 2> flash;
    std::array<ImageGrid, 2> noflash;
};

struct FacePair {
    ImageGrid flash;
    ImageGrid noflash;
};

/// (a - b) / (a + b) element-wise, 0 where both are exactly 0.
inline void normalized_difference(std::span<const double> a, std::span<const double> b,
                                  std::span<double> out) {
    if (a.size() != b.size() || a.size() != out.size())
        throw ShapeError("normalized_difference: inputs differ in length");
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double sum = a[i] + b[i];
        // Nonnegative inputs: the sum is zero only when both are zero.
        out[i] = sum == 0.0 ? 0.0 : (a[i] - b[i]) / sum;
    }
}

inline std::vector<double> normalized_difference(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size());
    normalized_difference(a, b, out);
    return out;
}

inline ScoreGrid normalized_difference(const ImageGrid& a, const ImageGrid& b) {
    if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels())
        throw ShapeError("normalized_difference: grids differ in shape");
    return {a.height(), a.width() * a.channels(), normalized_difference(a.data(), b.data())};
}

namespace detail {

inline long round_half_away(double v) noexcept { return static_cast<long>(std::round(v)); }

inline void require_gray(const ImageGrid& img, const char* what) {
    if (img.channels() != 1) throw ShapeError(std::string(what) + " must be single-channel");
}

}  // namespace detail

/// Square iris box: edge round(|outer.x - inner.x| / 3) (at least 2) centered on
/// the pupil, or on the corner midpoint when the pupil is unknown.
inline RegionBox iris_box(const EyeLandmarks& eye) {
    const double len = std::abs(eye.outer.x - eye.inner.x);
    if (!(len > 0.0)) throw DegenerateGeometryError("eye has zero horizontal length");
    const long edge = std::max(2L, detail::round_half_away(len / 3.0));
    const Point c = eye.center();
    const long left = detail::round_half_away(c.x - static_cast<double>(edge) / 2.0);
    const long top = detail::round_half_away(c.y - static_cast<double>(edge) / 2.0);
    return {top, left, top + edge, left + edge};
}

inline ImageGrid extract_iris(const ImageGrid& img, const EyeLandmarks& eye) {
    detail::require_gray(img, "iris source image");
    ImageGrid roi;
    try {
        roi = crop(img, iris_box(eye));
    } catch (const EmptyRegionError& e) {
        throw DegenerateGeometryError(std::string("iris ROI outside the image: ") + e.what());
    }
    return resize_bilinear(gaussian_filter(roi, kIrisSigma), kIrisSize, kIrisSize);
}

/// Both eyes from both images; each image has its own landmarks.
inline IrisPair extract_iris_pair(const ImageGrid& flash, const ImageGrid& noflash,
                                  const std::array<EyeLandmarks, 2>& flash_eyes,
                                  const std::array<EyeLandmarks, 2>& noflash_eyes) {
    IrisPair p;
    for (std::size_t s = 0; s < 2; ++s) {
        p.flash[s] = extract_iris(flash, flash_eyes[s]);
        p.noflash[s] = extract_iris(noflash, noflash_eyes[s]);
    }
    return p;
}

inline ImageGrid extract_face(const ImageGrid& img, const FaceLandmarks& face) {
    detail::require_gray(img, "face source image");
    ImageGrid roi;
    try {
        roi = crop(img, face.bounding_box());
    } catch (const EmptyRegionError& e) {
        throw DegenerateGeometryError(std::string("face ROI outside the image: ") + e.what());
    }
    return resize_bilinear(gaussian_filter(roi, kFaceSigma), kFaceSize, kFaceSize);
}

inline FacePair extract_face_pair(const ImageGrid& flash, const ImageGrid& noflash,
                                  const FaceLandmarks& flash_face, const FaceLandmarks& noflash_face) {
    return {extract_face(flash, flash_face), extract_face(noflash, noflash_face)};
}

namespace detail {

inline void require_shape(const ImageGrid& g, std::size_t h, std::size_t w, const char* what) {
    if (g.height() != h || g.width() != w || g.channels() != 1)
        throw ShapeError(std::string(what) + " must be " + std::to_string(h) + "x" + std::to_string(w));
}

inline void require_face_pair(const FacePair& p) {
    require_shape(p.flash, kFaceSize, kFaceSize, "face flash grid");
    require_shape(p.noflash, kFaceSize, kFaceSize, "face no-flash grid");
}

}  // namespace detail

inline Descriptor spec_descriptor(const IrisPair& p) {
    Descriptor d{DescriptorKind::spec, std::vector<double>(descriptor_length(DescriptorKind::spec))};
    constexpr std::size_t block = kIrisSize * kIrisSize;
    for (std::size_t s = 0; s < 2; ++s) {
        detail::require_shape(p.flash[s], kIrisSize, kIrisSize, "iris flash grid");
        detail::require_shape(p.noflash[s], kIrisSize, kIrisSize, "iris no-flash grid");
        std::span<double> out(d.values.data() + s * block, block);
        normalized_difference(p.flash[s].data(), p.noflash[s].data(), out);
        std::sort(out.begin(), out.end());
    }
    return d;
}

inline Descriptor diff_descriptor(const FacePair& p) {
    detail::require_face_pair(p);
    return {DescriptorKind::diff, normalized_difference(p.flash.data(), p.noflash.data())};
}

inline Descriptor specdiff_descriptor(const Descriptor& spec, const Descriptor& diff) {
    if (spec.kind != DescriptorKind::spec || diff.kind != DescriptorKind::diff)
        throw ModelMismatchError("specdiff needs a spec descriptor followed by a diff descriptor");
    if (spec.values.size() != descriptor_length(DescriptorKind::spec) ||
        diff.values.size() != descriptor_length(DescriptorKind::diff))
        throw ShapeError("specdiff inputs have wrong lengths");
    Descriptor d{DescriptorKind::specdiff, {}};
    d.values.reserve(descriptor_length(DescriptorKind::specdiff));
    d.values.insert(d.values.end(), spec.values.begin(), spec.values.end());
    d.values.insert(d.values.end(), diff.values.begin(), diff.values.end());
    return d;
}

/// Population standard deviation of the flash minus no-flash face difference.
inline Descriptor sd_fic(const FacePair& p) {
    detail::require_face_pair(p);
    const auto f = p.flash.data();
    const auto b = p.noflash.data();
    const double n = static_cast<double>(f.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) mean += f[i] - b[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = f[i] - b[i] - mean;
        ss += d * d;
    }
    return {DescriptorKind::sd_fic, {std::sqrt(ss / n)}};
}

/// 8-neighbour LBP code of pixel (r, c). Bit 7 is the top-left neighbour and
/// the bits run clockwise; a bit is set when neighbour >= center; neighbours
/// outside the grid read as 0.
inline unsigned lbp_code(const ImageGrid& g, std::size_t r, std::size_t c) {
    static constexpr int dr[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
    static constexpr int dc[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
    const double center = g(r, c);
    unsigned code = 0;
    for (int i = 0; i < 8; ++i) {
        const long rr = static_cast<long>(r) + dr[i];
        const long cc = static_cast<long>(c) + dc[i];
        double v = 0.0;
        if (rr >= 0 && cc >= 0 && rr < static_cast<long>(g.height()) && cc < static_cast<long>(g.width()))
            v = g(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        if (v >= center) code |= 1u << (7 - i);
    }
    return code;
}

inline Descriptor lbp_fi(const ImageGrid& flash_face) {
    detail::require_shape(flash_face, kFaceSize, kFaceSize, "LBP input");
    Descriptor d{DescriptorKind::lbp_fi, std::vector<double>(flash_face.size())};
    for (std::size_t r = 0; r < flash_face.height(); ++r) {
        for (std::size_t c = 0; c < flash_face.width(); ++c) {
            d.values[r * flash_face.width() + c] = static_cast<double>(lbp_code(flash_face, r, c)) / 255.0;
        }
    }
    return d;
}

inline constexpr std::size_t kRelativeRefRow = kFaceSize / 2;
inline constexpr std::size_t kRelativeRefCol = kFaceSize / 2;

/// Every pixel divided by the grid-center reference pixel; all zeros and
/// `degenerate` set when the reference is 0.
inline Descriptor relative_ref(const ImageGrid& flash_face) {
    detail::require_shape(flash_face, kFaceSize, kFaceSize, "RelativeRef input");
    Descriptor d{DescriptorKind::relative_ref, std::vector<double>(flash_face.size(), 0.0)};
    const double ref = flash_face(kRelativeRefRow, kRelativeRefCol);
    if (ref == 0.0) {
        d.degenerate = true;
        return d;
    }
    const auto src = flash_face.data();
    for (std::size_t i = 0; i < src.size(); ++i) d.values[i] = src[i] / ref;
    return d;
}

/// (flash - noflash) / noflash per pixel, 0 where noflash is 0.
inline Descriptor implicit3d(const FacePair& p) {
    detail::require_face_pair(p);
    const auto f = p.flash.data();
    const auto b = p.noflash.data();
    Descriptor d{DescriptorKind::implicit3d, std::vector<double>(f.size())};
    for (std::size_t i = 0; i < f.size(); ++i) d.values[i] = b[i] == 0.0 ? 0.0 : (f[i] - b[i]) / b[i];
    return d;
}

inline Descriptor compute_descriptor(DescriptorKind kind, const IrisPair& iris, const FacePair& face) {
    switch (kind) {
        case DescriptorKind::spec: return spec_descriptor(iris);
        case DescriptorKind::diff: return diff_descriptor(face);
        case DescriptorKind::specdiff: return specdiff_descriptor(spec_descriptor(iris), diff_descriptor(face));
        case DescriptorKind::sd_fic: return sd_fic(face);
        case DescriptorKind::lbp_fi: return lbp_fi(face.flash);
        case DescriptorKind::relative_ref: return relative_ref(face.flash);
        case DescriptorKind::implicit3d: return implicit3d(face);
    }
    throw Error("unknown descriptor kind");
}

/// Kinds that only need the face crops.
inline constexpr bool needs_iris(DescriptorKind k) noexcept {
    return k == DescriptorKind::spec || k == DescriptorKind::specdiff;
}
inline constexpr bool needs_face(DescriptorKind k) noexcept { return k != DescriptorKind::spec; }

}  // namespace specdiff
