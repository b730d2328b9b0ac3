#pragma once

// Lambertian flash/no-flash renderer and synthetic dataset generator.
//
// Per pixel, with frontal flash and fully ambient background light:
//     I_flash   = 255 * (L_f * K * cos(theta) + L_b * K)
//     I_noflash = 255 * L_b * K
// so the normalized difference is L_f cos / (L_f cos + 2 L_b), independent
// of the reflectance K.
//
// Iris specular spots are additive Gaussian blobs, truncated at three
// radii, with a peak far above 255 so they saturate after clamping.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "specdiff/dataset.hpp"
#include "specdiff/descriptor_io.hpp"
#include "specdiff/descriptors.hpp"
#include "specdiff/error.hpp"
#include "specdiff/image.hpp"
#include "specdiff/image_io.hpp"
#include "specdiff/matrix.hpp"
#include "specdiff/random.hpp"

namespace specdiff {

enum class Liveness { live, flat_paper, bent_paper, display };

inline const char* to_string(Liveness l) noexcept {
    switch (l) {
        case Liveness::live: return "live";
        case Liveness::flat_paper: return "flat_paper";
        case Liveness::bent_paper: return "bent_paper";
        case Liveness::display: return "display";
    }
    return "?";
}

struct IrisSpot {
    Point center;
    double radius = 1.0;  ///< Gaussian sigma of the blob, pixels
    bool in_flash = true;
    bool in_noflash = false;
};

inline constexpr double kSpotPeak = 2.0 * 255.0;
inline constexpr double kSpotSupport = 3.0;  ///< blob truncation, in radii

struct SurfaceSpec {
    Matrix height;       ///< Z, camera-facing, pixel units
    Matrix reflectance;  ///< K in (0, 1]
    std::array<double, 3> tint{1.0, 1.0, 1.0};  ///< per-channel reflectance scale; RGB output
    bool color = false;
    double flash_intensity = 0.5;       ///< L_f > 0
    double background_intensity = 0.5;  ///< L_b >= 0
    Liveness liveness = Liveness::live;
    std::vector<IrisSpot> spots;
    double sensor_noise = 0.0;  ///< std of additive noise on the output images only
    std::uint64_t noise_seed = 0;
};

struct RenderedPair {
    ImageGrid flash;    ///< clamped to [0, 255], not quantized
    ImageGrid noflash;
    ScoreGrid ground_truth_S;    ///< normalized difference of the noise-free, unclamped luma
    std::vector<bool> spot_mask; ///< pixels touched by a spot blob
};

/// cos(theta) of the surface normal against the frontal light (0, 0, 1),
/// from central differences (one-sided at the borders).
inline Matrix cos_theta(const Matrix& z) {
    const std::size_t H = z.rows(), W = z.cols();
    Matrix out(H, W);
    for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) {
            double gx = 0.0, gy = 0.0;
            if (W > 1) {
                const std::size_t c0 = c == 0 ? 0 : c - 1;
                const std::size_t c1 = c + 1 == W ? c : c + 1;
                gx = (z(r, c1) - z(r, c0)) / static_cast<double>(c1 - c0);
            }
            if (H > 1) {
                const std::size_t r0 = r == 0 ? 0 : r - 1;
                const std::size_t r1 = r + 1 == H ? r : r + 1;
                gy = (z(r1, c) - z(r0, c)) / static_cast<double>(r1 - r0);
            }
            // normal = (-gx, -gy, 1) / |.|, so n . l = 1 / sqrt(1 + gx^2 + gy^2)
            out(r, c) = std::clamp(1.0 / std::sqrt(1.0 + gx * gx + gy * gy), 0.0, 1.0);
        }
    }
    return out;
}

/// S = L_f cos / (L_f cos + 2 L_b), 0 where numerator and L_b both vanish.
inline ScoreGrid closed_form_S(const Matrix& cos, double flash_intensity, double background_intensity) {
    ScoreGrid s{cos.rows(), cos.cols(), std::vector<double>(cos.rows() * cos.cols())};
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double num = flash_intensity * cos.data()[i];
        const double den = num + 2.0 * background_intensity;
        s.values[i] = den == 0.0 ? 0.0 : num / den;
    }
    return s;
}

inline RenderedPair render_pair(const SurfaceSpec& s) {
    const std::size_t H = s.height.rows(), W = s.height.cols();
    if (s.reflectance.rows() != H || s.reflectance.cols() != W)
        throw ShapeError("reflectance map and height field differ in shape");
    if (!(s.flash_intensity > 0.0)) throw Error("flash intensity must be positive");
    if (!(s.background_intensity >= 0.0)) throw Error("background intensity must be nonnegative");
    for (double k : s.reflectance.data()) {
        if (!(k > 0.0)) throw Error("reflectance must be positive everywhere");
    }

    const Matrix cos = cos_theta(s.height);
    const std::size_t C = s.color ? 3 : 1;
    std::vector<double> spot_f(H * W, 0.0), spot_b(H * W, 0.0);
    std::vector<bool> mask(H * W, false);
    for (const IrisSpot& spot : s.spots) {
        const double reach = kSpotSupport * spot.radius;
        const long r0 = std::max(0L, static_cast<long>(std::floor(spot.center.y - reach)));
        const long r1 = std::min(static_cast<long>(H) - 1, static_cast<long>(std::ceil(spot.center.y + reach)));
        const long c0 = std::max(0L, static_cast<long>(std::floor(spot.center.x - reach)));
        const long c1 = std::min(static_cast<long>(W) - 1, static_cast<long>(std::ceil(spot.center.x + reach)));
        for (long r = r0; r <= r1; ++r) {
            for (long c = c0; c <= c1; ++c) {
                const double dx = static_cast<double>(c) - spot.center.x;
                const double dy = static_cast<double>(r) - spot.center.y;
                const double d2 = dx * dx + dy * dy;
                if (d2 > reach * reach) continue;
                const double v = kSpotPeak * std::exp(-d2 / (2.0 * spot.radius * spot.radius));
                const auto i = static_cast<std::size_t>(r) * W + static_cast<std::size_t>(c);
                if (spot.in_flash) spot_f[i] += v;
                if (spot.in_noflash) spot_b[i] += v;
                if (spot.in_flash || spot.in_noflash) mask[i] = true;
            }
        }
    }

    RenderedPair out;
    out.flash = ImageGrid(H, W, C);
    out.noflash = ImageGrid(H, W, C);
    out.ground_truth_S = {H, W, std::vector<double>(H * W)};
    out.spot_mask = std::move(mask);

    const double luma_tint = s.color ? kLumaR * s.tint[0] + kLumaG * s.tint[1] + kLumaB * s.tint[2] : 1.0;
    SplitMix64 noise(s.noise_seed);
    auto f = out.flash.data();
    auto b = out.noflash.data();
    for (std::size_t i = 0; i < H * W; ++i) {
        const double k = s.reflectance.data()[i];
        const double diffuse_f = 255.0 * (s.flash_intensity * k * cos.data()[i] + s.background_intensity * k);
        const double diffuse_b = 255.0 * s.background_intensity * k;
        const double gf = diffuse_f * luma_tint + spot_f[i];
        const double gb = diffuse_b * luma_tint + spot_b[i];
        const double sum = gf + gb;
        out.ground_truth_S.values[i] = sum == 0.0 ? 0.0 : (gf - gb) / sum;
        for (std::size_t ch = 0; ch < C; ++ch) {
            const double t = s.color ? s.tint[ch] : 1.0;
            double vf = diffuse_f * t + spot_f[i];
            double vb = diffuse_b * t + spot_b[i];
            if (s.sensor_noise > 0.0) {
                vf += s.sensor_noise * noise.normal();
                vb += s.sensor_noise * noise.normal();
            }
            f[i * C + ch] = std::clamp(vf, 0.0, 255.0);
            b[i * C + ch] = std::clamp(vb, 0.0, 255.0);
        }
    }
    return out;
}

// Ground-truth sidecar: "SDGT", uint32 height, uint32 width (little-endian),
// then height*width f64 values, row-major.
inline constexpr char kGroundTruthMagic[4] = {'S', 'D', 'G', 'T'};

inline void write_ground_truth(const std::filesystem::path& path, const ScoreGrid& s) {
    std::string buf(kGroundTruthMagic, 4);
    detail::put_le(buf, static_cast<std::uint32_t>(s.height));
    detail::put_le(buf, static_cast<std::uint32_t>(s.width));
    for (double v : s.values) detail::put_le(buf, v);
    std::ofstream out(path, std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError(path.string() + ": write failed");
}

inline ScoreGrid read_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kGroundTruthMagic, 4) != 0)
        throw FormatError(path.string() + ": not a ground-truth grid");
    ScoreGrid s;
    s.height = detail::get_le<std::uint32_t>(bytes.data() + 4);
    s.width = detail::get_le<std::uint32_t>(bytes.data() + 8);
    if (bytes.size() != 12 + 8 * s.height * s.width) throw FormatError(path.string() + ": truncated grid");
    s.values.resize(s.height * s.width);
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = detail::get_le<double>(bytes.data() + 12 + 8 * i);
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SynthOptions {
    std::size_t image_size = 240;
    std::size_t n_subjects = 20;
    double sensor_noise = 1.0;
    double flashed_print_fraction = 0.25;  ///< paper spoofs printed from a flash photo carry spots in both
    bool color = true;
};

/// Face shape of one synthetic subject.
struct SubjectShape {
    double semi_x = 66.0;    ///< face ellipse half-width
    double semi_y = 84.0;    ///< face ellipse half-height
    double depth = 48.0;     ///< dome height at the center
    double nose = 14.0;      ///< nose bump height
    double socket = 5.0;     ///< eye-socket depth
    double skin = 0.6;       ///< base reflectance
    std::array<double, 3> tint{1.0, 0.85, 0.75};
    double eye_dx = 28.0;    ///< eye center offset from the face center
    double eye_dy = -16.0;
    double eye_len = 33.0;   ///< corner-to-corner eye length
};

inline SubjectShape make_subject(std::uint64_t seed) {
    SplitMix64 g(seed);
    SubjectShape s;
    s.semi_x = g.uniform(58.0, 70.0);
    s.semi_y = s.semi_x * g.uniform(1.18, 1.35);
    s.depth = s.semi_x * g.uniform(0.6, 0.9);
    s.nose = g.uniform(10.0, 18.0);
    s.socket = g.uniform(3.0, 7.0);
    s.skin = g.uniform(0.3, 0.9);
    s.tint = {1.0, g.uniform(0.7, 0.95), g.uniform(0.55, 0.9)};
    s.eye_dx = s.semi_x * g.uniform(0.40, 0.46);
    s.eye_dy = -s.semi_y * g.uniform(0.15, 0.24);
    s.eye_len = s.semi_x * g.uniform(0.44, 0.52);
    return s;
}

/// A rendered synthetic scene together with its landmarks.
struct SyntheticScene {
    SurfaceSpec surface;
    EyeLandmarks left_eye;
    EyeLandmarks right_eye;
    FaceLandmarks face;
};

namespace detail {

struct SceneFrame {
    Point center;
    double roll = 0.0;

    // face-local (u, v) -> image (x, y)
    Point to_image(double u, double v) const noexcept {
        const double c = std::cos(roll), s = std::sin(roll);
        return {center.x + c * u - s * v, center.y + s * u + c * v};
    }
    // image -> face-local
    Point to_local(double x, double y) const noexcept {
        const double c = std::cos(roll), s = std::sin(roll);
        const double dx = x - center.x, dy = y - center.y;
        return {c * dx + s * dy, -s * dx + c * dy};
    }
};

inline double gauss2(double du, double dv, double sigma) noexcept {
    return std::exp(-(du * du + dv * dv) / (2.0 * sigma * sigma));
}

/// Height of a live face at face-local (u, v); 0 on the backdrop.
inline double live_height(const SubjectShape& s, double u, double v) {
    const double rho2 = (u / s.semi_x) * (u / s.semi_x) + (v / s.semi_y) * (v / s.semi_y);
    if (rho2 >= 1.0) return 0.0;
    double z = s.depth * std::sqrt(1.0 - rho2);
    z += s.nose * gauss2(u, v + 0.05 * s.semi_y, 0.12 * s.semi_x);
    z -= s.socket * gauss2(u - s.eye_dx, v - s.eye_dy, 0.2 * s.semi_x);
    z -= s.socket * gauss2(u + s.eye_dx, v - s.eye_dy, 0.2 * s.semi_x);
    return z;
}

struct Blob {
    double u, v, sigma, amp;
};

/// Facial reflectance at face-local (u, v): skin with smooth blotches,
/// darker brows, lips and irises.
inline double face_reflectance(const SubjectShape& s, const std::vector<Blob>& blotches, double u, double v) {
    const double rho2 = (u / s.semi_x) * (u / s.semi_x) + (v / s.semi_y) * (v / s.semi_y);
    double k = rho2 < 1.0 ? s.skin : 0.55;  // backdrop
    if (rho2 < 1.0) {
        for (const Blob& b : blotches) k *= 1.0 + b.amp * gauss2(u - b.u, v - b.v, b.sigma);
        const double iris_r = s.eye_len / 6.0;
        for (double side : {-1.0, 1.0}) {
            const double eu = u - side * s.eye_dx;
            const double ev = v - s.eye_dy;
            const double brow = gauss2(eu / 2.2, (ev + 0.13 * s.semi_y), 0.04 * s.semi_y);
            k *= 1.0 - 0.5 * brow;
            const double r = std::sqrt(eu * eu + ev * ev);
            if (r < iris_r) k *= r < 0.4 * iris_r ? 0.15 : 0.45;
        }
        k *= 1.0 - 0.35 * gauss2(u / 2.5, v - 0.55 * s.semi_y, 0.06 * s.semi_y);
    }
    return std::clamp(k, 0.03, 1.0);
}

}  // namespace detail

/// Builds one synthetic scene. `pair_seed` drives every per-pair choice.
inline SyntheticScene make_scene(const SubjectShape& subject, Liveness liveness, std::uint64_t pair_seed,
                                 const SynthOptions& opt = {}) {
    SplitMix64 g(pair_seed);
    const auto N = opt.image_size;
    const double half = (static_cast<double>(N) - 1.0) / 2.0;
    detail::SceneFrame frame{{half + g.uniform(-5.0, 5.0), half + 6.0 + g.uniform(-5.0, 5.0)},
                             g.uniform(-10.0, 10.0) * std::numbers::pi / 180.0};

    // Lights: L_f / L_b ratio log-uniform in [0.2, 5], total in [0.6, 0.95].
    const double ratio = std::exp(g.uniform(std::log(0.2), std::log(5.0)));
    const double total = g.uniform(0.6, 0.95);
    const double lb = total / (1.0 + ratio);
    const double lf = total - lb;

    std::vector<detail::Blob> blotches(6);
    for (auto& b : blotches)
        b = {g.uniform(-0.8, 0.8) * subject.semi_x, g.uniform(-0.8, 0.8) * subject.semi_y,
             g.uniform(6.0, 20.0), g.uniform(-0.25, 0.25)};

    // Geometry of the presented medium.
    double bend = 0.0, bend_angle = 0.0;
    if (liveness == Liveness::bent_paper) {
        bend = g.uniform(0.004, 0.012);
        bend_angle = static_cast<double>(g.below(4)) * std::numbers::pi / 4.0;
    }
    const bool flashed_print = liveness == Liveness::display ||
                               ((liveness == Liveness::flat_paper || liveness == Liveness::bent_paper) &&
                                g.uniform() < opt.flashed_print_fraction);
    const double print_gain = g.uniform(0.75, 1.0);

    SyntheticScene sc;
    SurfaceSpec& s = sc.surface;
    s.height = Matrix(N, N);
    s.reflectance = Matrix(N, N);
    s.flash_intensity = lf;
    s.background_intensity = lb;
    s.liveness = liveness;
    s.color = opt.color;
    s.tint = subject.tint;
    s.sensor_noise = opt.sensor_noise;
    s.noise_seed = g.next();

    for (std::size_t r = 0; r < N; ++r) {
        for (std::size_t c = 0; c < N; ++c) {
            const Point loc = frame.to_local(static_cast<double>(c), static_cast<double>(r));
            const double k_face = detail::face_reflectance(subject, blotches, loc.x, loc.y);
            if (liveness == Liveness::live) {
                s.height(r, c) = detail::live_height(subject, loc.x, loc.y);
                s.reflectance(r, c) = k_face;
            } else {
                // A print or screen shows the face with the shading it was photographed under.
                const double zx = detail::live_height(subject, loc.x + 1.0, loc.y) -
                                  detail::live_height(subject, loc.x - 1.0, loc.y);
                const double zy = detail::live_height(subject, loc.x, loc.y + 1.0) -
                                  detail::live_height(subject, loc.x, loc.y - 1.0);
                const double shade = 1.0 / std::sqrt(1.0 + 0.25 * (zx * zx + zy * zy));
                s.reflectance(r, c) = std::clamp(print_gain * k_face * (0.35 + 0.65 * shade), 0.03, 1.0);
                if (liveness == Liveness::bent_paper) {
                    const double dx = static_cast<double>(c) - half, dy = static_cast<double>(r) - half;
                    const double along = std::cos(bend_angle) * dx + std::sin(bend_angle) * dy;
                    s.height(r, c) = -0.5 * bend * along * along;
                }
            }
        }
    }

    // Landmarks in image coordinates.
    auto eye = [&](double side) {
        const double u = side * subject.eye_dx, v = subject.eye_dy;
        EyeLandmarks e;
        // outer corner is away from the face center
        e.outer = frame.to_image(u + side * subject.eye_len / 2.0, v);
        e.inner = frame.to_image(u - side * subject.eye_len / 2.0, v);
        e.pupil = frame.to_image(u, v);
        return e;
    };
    sc.left_eye = eye(-1.0);
    sc.right_eye = eye(+1.0);
    for (int k = 0; k < 12; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 12.0;
        sc.face.points.push_back(
            frame.to_image(0.9 * subject.semi_x * std::cos(a), 0.9 * subject.semi_y * std::sin(a)));
    }

    // Specular spots: cornea glints under flash for live eyes; a flash photo
    // reproduced on paper or a screen carries the glint in both captures.
    const double roi_edge = std::max(2.0, std::round(subject.eye_len / 3.0));
    for (double side : {-1.0, 1.0}) {
        const double jitter = roi_edge / 4.0;
        IrisSpot spot;
        spot.center = frame.to_image(side * subject.eye_dx + g.uniform(-jitter, jitter),
                                     subject.eye_dy + g.uniform(-jitter, jitter));
        spot.radius = roi_edge / 8.0;
        if (liveness == Liveness::live) {
            spot.in_flash = true;
            spot.in_noflash = false;
            s.spots.push_back(spot);
        } else if (flashed_print) {
            spot.in_flash = true;
            spot.in_noflash = true;
            s.spots.push_back(spot);
        }
    }
    return sc;
}

inline SpoofKind spoof_kind_of(Liveness l) {
    switch (l) {
        case Liveness::flat_paper: return SpoofKind::flat_paper;
        case Liveness::bent_paper: return SpoofKind::bent_paper;
        case Liveness::display: return SpoofKind::display;
        case Liveness::live: break;
    }
    throw Error("live scenes have no spoof kind");
}

inline std::string synth_pair_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%05zu", index);
    return buf;
}

inline std::string synth_subject_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%02zu", index + 1);
    return buf;
}

/// Scene description for pair `index` of a synthetic dataset. Pairs
/// [0, n) are live and [n, 2n) spoof; spoofs cycle flat, bent, display.
/// Subjects are assigned round-robin.
inline SyntheticScene synth_scene(std::size_t n_per_class, std::uint64_t seed, std::size_t index,
                                  const SynthOptions& opt = {}) {
    const std::size_t subject = (index % n_per_class) % opt.n_subjects;
    const SubjectShape shape = make_subject(derive_seed(derive_seed(seed, "subject"), subject));
    Liveness l = Liveness::live;
    if (index >= n_per_class) {
        static constexpr Liveness kinds[3] = {Liveness::flat_paper, Liveness::bent_paper, Liveness::display};
        l = kinds[(index - n_per_class) % 3];
    }
    return make_scene(shape, l, derive_seed(derive_seed(seed, "pair"), index), opt);
}

inline PairRecord synth_record(const SyntheticScene& sc, std::size_t n_per_class, std::size_t index,
                               const std::filesystem::path& out_dir, const SynthOptions& opt = {}) {
    PairRecord r;
    r.pair_id = synth_pair_id(index);
    r.subject_id = synth_subject_id((index % n_per_class) % opt.n_subjects);
    r.label = sc.surface.liveness == Liveness::live ? Label::live : Label::spoof;
    if (r.label == Label::spoof) r.spoof_kind = spoof_kind_of(sc.surface.liveness);
    r.flash_path = out_dir / "images" / (r.pair_id + "_flash.png");
    r.noflash_path = out_dir / "images" / (r.pair_id + "_noflash.png");
    r.left_eye = sc.left_eye;
    r.right_eye = sc.right_eye;
    r.face = sc.face;
    r.lighting_tag = sc.surface.background_intensity >= 0.3 ? "bright" : "dark";
    return r;
}

/// Writes `2 * n_per_class` rendered pairs, their ground-truth grids and
/// manifest.jsonl under `out_dir`, and returns the dataset.
inline Dataset synth_dataset(std::size_t n_per_class, std::uint64_t seed, const std::filesystem::path& out_dir,
                             const SynthOptions& opt = {}, std::size_t threads = 1) {
    if (n_per_class < 1) throw Error("synthetic dataset needs at least one pair per class");
    if (opt.n_subjects < 1) throw Error("synthetic dataset needs at least one subject");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    std::filesystem::create_directories(out_dir / "ground_truth", ec);
    if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());

    const std::size_t n = 2 * n_per_class;
    std::vector<PairRecord> records(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const SyntheticScene sc = synth_scene(n_per_class, seed, i, opt);
        const RenderedPair rp = render_pair(sc.surface);
        records[i] = synth_record(sc, n_per_class, i, out_dir, opt);
        write_png(records[i].flash_path, rp.flash);
        write_png(records[i].noflash_path, rp.noflash);
        write_ground_truth(out_dir / "ground_truth" / (records[i].pair_id + "_S.bin"), rp.ground_truth_S);
    });
    Dataset ds = Dataset::from_records(std::move(records));
    write_manifest(out_dir / "manifest.jsonl", ds);
    return ds;
}

}  // namespace specdiff
