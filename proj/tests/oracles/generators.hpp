#pragma once

// Hand-rolled random generators for property tests. Every generator takes
// the SplitMix64 stream explicitly so failures replay from the seed.

#include <cmath>
#include <numbers>
#include <vector>

#include "specdiff/dataset.hpp"
#include "specdiff/image.hpp"
#include "specdiff/matrix.hpp"
#include "specdiff/random.hpp"

namespace gen {

using specdiff::SplitMix64;

inline specdiff::ImageGrid image(SplitMix64& g, std::size_t h, std::size_t w, std::size_t ch = 1,
                                 double zero_fraction = 0.0) {
    specdiff::ImageGrid img(h, w, ch);
    for (double& v : img.data()) v = g.uniform() < zero_fraction ? 0.0 : g.uniform(0.0, 255.0);
    return img;
}

/// Like image() but with integral values, as decoded 8-bit files would be.
inline specdiff::ImageGrid image_u8(SplitMix64& g, std::size_t h, std::size_t w, std::size_t ch = 1) {
    specdiff::ImageGrid img(h, w, ch);
    for (double& v : img.data()) v = static_cast<double>(g.below(256));
    return img;
}

/// Random but valid landmarks for an h x w image: two eyes roughly level,
/// a face polygon around them, everything inside the frame.
struct Landmarks {
    specdiff::EyeLandmarks left, right;
    specdiff::FaceLandmarks face;
};

inline Landmarks landmarks(SplitMix64& g, std::size_t h, std::size_t w) {
    const double W = static_cast<double>(w), H = static_cast<double>(h);
    const double cx = g.uniform(0.4, 0.6) * W, cy = g.uniform(0.4, 0.6) * H;
    const double half_span = g.uniform(0.12, 0.2) * W;  // eye center distance / 2
    const double roll = g.uniform(-0.3, 0.3);
    const double cs = std::cos(roll), sn = std::sin(roll);
    auto at = [&](double u, double v) { return specdiff::Point{cx + cs * u - sn * v, cy + sn * u + cs * v}; };
    const double eye_len = g.uniform(0.5, 0.9) * half_span;
    Landmarks lm;
    lm.left.outer = at(-half_span - eye_len / 2, -0.1 * H);
    lm.left.inner = at(-half_span + eye_len / 2, -0.1 * H);
    lm.right.inner = at(half_span - eye_len / 2, -0.1 * H);
    lm.right.outer = at(half_span + eye_len / 2, -0.1 * H);
    if (g.uniform() < 0.5) lm.left.pupil = at(-half_span + g.uniform(-2, 2), -0.1 * H + g.uniform(-2, 2));
    if (g.uniform() < 0.5) lm.right.pupil = at(half_span + g.uniform(-2, 2), -0.1 * H + g.uniform(-2, 2));
    const double rx = g.uniform(0.25, 0.33) * W, ry = g.uniform(0.28, 0.36) * H;
    const std::size_t n = 4 + g.below(9);
    for (std::size_t k = 0; k < n; ++k) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        lm.face.points.push_back(at(rx * std::cos(a), ry * std::sin(a)));
    }
    return lm;
}

/// Height field built from a few random bumps and a tilt.
inline specdiff::Matrix height_field(SplitMix64& g, std::size_t h, std::size_t w) {
    specdiff::Matrix z(h, w);
    const double tx = g.uniform(-0.5, 0.5), ty = g.uniform(-0.5, 0.5);
    struct Bump { double r, c, s, a; };
    std::vector<Bump> bumps(1 + g.below(4));
    for (auto& b : bumps)
        b = {g.uniform(0.0, static_cast<double>(h)), g.uniform(0.0, static_cast<double>(w)),
             g.uniform(3.0, 15.0), g.uniform(-20.0, 20.0)};
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            double v = tx * static_cast<double>(c) + ty * static_cast<double>(r);
            for (const auto& b : bumps) {
                const double dr = static_cast<double>(r) - b.r, dc = static_cast<double>(c) - b.c;
                v += b.a * std::exp(-(dr * dr + dc * dc) / (2 * b.s * b.s));
            }
            z(r, c) = v;
        }
    return z;
}

inline specdiff::Matrix reflectance(SplitMix64& g, std::size_t h, std::size_t w) {
    specdiff::Matrix k(h, w);
    for (double& v : k.data()) v = g.uniform(0.02, 1.0);
    return k;
}

}  // namespace gen
