#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles/generators.hpp"
#include "specdiff/descriptors.hpp"
#include "specdiff/pipeline.hpp"
#include "specdiff/simulator.hpp"

using namespace specdiff;

namespace {

ImageGrid constant(std::size_t n, double v) { return ImageGrid(n, n, 1, v); }

IrisPair random_iris(SplitMix64& g, double zero_fraction = 0.0) {
    IrisPair p;
    for (int s = 0; s < 2; ++s) {
        p.flash[s] = gen::image(g, kIrisSize, kIrisSize, 1, zero_fraction);
        p.noflash[s] = gen::image(g, kIrisSize, kIrisSize, 1, zero_fraction);
    }
    return p;
}

FacePair random_face(SplitMix64& g, double zero_fraction = 0.0) {
    return {gen::image(g, kFaceSize, kFaceSize, 1, zero_fraction), gen::image(g, kFaceSize, kFaceSize, 1, zero_fraction)};
}

EyeLandmarks eye(Point outer, Point inner, std::optional<Point> pupil = std::nullopt) { return {outer, inner, pupil}; }

}  // namespace

TEST(NormalizedDifference, Examples) {
    const std::vector<double> a{0, 200, 50}, b{0, 0, 150};
    const auto s = normalized_difference(a, b);
    EXPECT_EQ(s[0], 0.0);
    EXPECT_EQ(s[1], 1.0);
    EXPECT_EQ(s[2], -0.5);
}

TEST(NormalizedDifference, ShapeMismatchThrows) {
    EXPECT_THROW(normalized_difference(constant(3, 1), constant(4, 1)), ShapeError);
    const std::vector<double> a(3), b(4);
    EXPECT_THROW(normalized_difference(a, b), ShapeError);
}

TEST(NormalizedDifference, AntisymmetricProperty) {
    SplitMix64 g(1);
    for (int t = 0; t < 50; ++t) {
        const ImageGrid a = gen::image(g, 10, 10, 1, 0.3), b = gen::image(g, 10, 10, 1, 0.3);
        const auto ab = normalized_difference(a, b), ba = normalized_difference(b, a);
        for (std::size_t i = 0; i < ab.values.size(); ++i) {
            ASSERT_EQ(ab.values[i], -ba.values[i]);
            ASSERT_GE(ab.values[i], -1.0);
            ASSERT_LE(ab.values[i], 1.0);
        }
    }
}

TEST(NormalizedDifference, ScaleInvariantProperty) {
    SplitMix64 g(2);
    for (int t = 0; t < 50; ++t) {
        const ImageGrid a = gen::image(g, 8, 8, 1, 0.2), b = gen::image(g, 8, 8, 1, 0.2);
        const double c = std::exp(g.uniform(-5.0, 5.0));
        ImageGrid ca = a, cb = b;
        for (double& v : ca.data()) v *= c;
        for (double& v : cb.data()) v *= c;
        const auto s = normalized_difference(a, b), cs = normalized_difference(ca, cb);
        for (std::size_t i = 0; i < s.values.size(); ++i) ASSERT_NEAR(s.values[i], cs.values[i], 1e-12);
    }
}

TEST(IrisBox, EdgeIsThirdOfEyeLength) {
    const RegionBox b = iris_box(eye({100, 50}, {130, 50}));
    EXPECT_EQ(b.width(), 10);
    EXPECT_EQ(b.height(), 10);
    EXPECT_EQ(b, (RegionBox{45, 110, 55, 120}));
}

TEST(IrisBox, PupilCentersTheBox) {
    const RegionBox b = iris_box(eye({100, 50}, {130, 50}, Point{112, 52}));
    EXPECT_EQ(b, (RegionBox{47, 107, 57, 117}));
}

TEST(IrisBox, MinimumEdgeTwo) { EXPECT_EQ(iris_box(eye({10, 10}, {11, 10})).width(), 2); }

TEST(IrisBox, ZeroHorizontalLengthThrows) {
    EXPECT_THROW(iris_box(eye({10, 10}, {10, 20})), DegenerateGeometryError);
}

TEST(ExtractIris, ConstantImagesGiveConstantGrids) {
    const IrisPair p = extract_iris_pair(constant(200, 80), constant(200, 20),
                                         {eye({60, 100}, {90, 100}), eye({140, 100}, {110, 100})},
                                         {eye({60, 100}, {90, 100}), eye({140, 100}, {110, 100})});
    for (int s = 0; s < 2; ++s) {
        ASSERT_EQ(p.flash[s].height(), 40u);
        for (double v : p.flash[s].data()) ASSERT_NEAR(v, 80.0, 1e-9);
        for (double v : p.noflash[s].data()) ASSERT_NEAR(v, 20.0, 1e-9);
    }
}

TEST(ExtractIris, OutsideImageIsDegenerate) {
    EXPECT_THROW(extract_iris(constant(50, 1), eye({300, 300}, {330, 300})), DegenerateGeometryError);
}

TEST(ExtractIris, BrightSpotRaisesFlashMean) {
    // A live render: the flash carries a corneal glint, the no-flash does not.
    SurfaceSpec s;
    s.height = Matrix(120, 120);
    s.reflectance = Matrix(120, 120, 0.5);
    s.flash_intensity = 0.3;
    s.background_intensity = 0.5;
    s.spots.push_back({{45, 60}, 2.0, true, false});
    const RenderedPair rp = render_pair(s);
    const EyeLandmarks e = eye({30, 60}, {60, 60}, Point{45, 60});
    const ImageGrid f = extract_iris(rp.flash, e), b = extract_iris(rp.noflash, e);
    const double mf = std::accumulate(f.data().begin(), f.data().end(), 0.0);
    const double mb = std::accumulate(b.data().begin(), b.data().end(), 0.0);
    EXPECT_GT(mf, mb);
}

TEST(ExtractFace, ConstantBoxGivesConstantGrid) {
    FaceLandmarks face{{{20, 20}, {220, 20}, {220, 220}, {20, 220}}};
    const FacePair p = extract_face_pair(constant(260, 120), constant(260, 60), face, face);
    ASSERT_EQ(p.flash.height(), 100u);
    ASSERT_EQ(p.flash.width(), 100u);
    for (double v : p.flash.data()) ASSERT_NEAR(v, 120.0, 1e-9);
}

TEST(ExtractFace, SinglePointIsDegenerate) {
    FaceLandmarks face{{{20, 20}, {20, 20}, {20, 20}, {20, 20}}};
    EXPECT_THROW(extract_face(constant(50, 1), face), DegenerateGeometryError);
}

TEST(Spec, IdenticalGridsGiveZeros) {
    SplitMix64 g(3);
    IrisPair p = random_iris(g);
    p.noflash = p.flash;
    const Descriptor d = spec_descriptor(p);
    ASSERT_EQ(d.values.size(), 3200u);
    for (double v : d.values) ASSERT_EQ(v, 0.0);
}

TEST(Spec, BlocksAreSortedAndLeftFirst) {
    SplitMix64 g(4);
    IrisPair p = random_iris(g);
    for (double& v : p.flash[1].data()) v = 0.0;  // right eye all -1
    const Descriptor d = spec_descriptor(p);
    EXPECT_TRUE(std::is_sorted(d.values.begin(), d.values.begin() + 1600));
    EXPECT_TRUE(std::is_sorted(d.values.begin() + 1600, d.values.end()));
    EXPECT_GT(d.values[1599], -1.0);
    for (std::size_t i = 1600; i < 3200; ++i) ASSERT_EQ(d.values[i], -1.0);
}

TEST(Spec, WithinEyePermutationInvariance) {
    SplitMix64 g(5);
    for (int t = 0; t < 30; ++t) {
        IrisPair p = random_iris(g, 0.05);
        const Descriptor before = spec_descriptor(p);
        const std::size_t s = g.below(2);
        std::vector<std::size_t> perm(1600);
        std::iota(perm.begin(), perm.end(), 0);
        shuffle(perm.begin(), perm.end(), g);
        IrisPair q = p;
        for (std::size_t i = 0; i < 1600; ++i) {
            q.flash[s].data()[i] = p.flash[s].data()[perm[i]];
            q.noflash[s].data()[i] = p.noflash[s].data()[perm[i]];
        }
        ASSERT_EQ(spec_descriptor(q).values, before.values);
    }
}

TEST(Spec, WrongShapeThrows) {
    IrisPair p;
    for (int s = 0; s < 2; ++s) p.flash[s] = p.noflash[s] = constant(39, 1);
    EXPECT_THROW(spec_descriptor(p), ShapeError);
}

TEST(Diff, IdenticalImagesGiveZeros) {
    SplitMix64 g(6);
    FacePair p = random_face(g);
    p.noflash = p.flash;
    for (double v : diff_descriptor(p).values) ASSERT_EQ(v, 0.0);
}

TEST(Diff, TwiceTheNoFlashGivesOneThird) {
    SplitMix64 g(7);
    FacePair p;
    p.noflash = gen::image(g, 100, 100);
    for (double& v : p.noflash.data()) v = std::max(v, 1.0);
    p.flash = p.noflash;
    for (double& v : p.flash.data()) v *= 2.0;
    const Descriptor d = diff_descriptor(p);
    ASSERT_EQ(d.values.size(), 10000u);
    for (double v : d.values) ASSERT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Diff, PreservesSpatialOrder) {
    SplitMix64 g(8);
    for (int t = 0; t < 10; ++t) {
        const FacePair p = random_face(g, 0.05);
        const Descriptor d = diff_descriptor(p);
        std::vector<std::size_t> perm(10000);
        std::iota(perm.begin(), perm.end(), 0);
        shuffle(perm.begin(), perm.end(), g);
        FacePair q = p;
        for (std::size_t i = 0; i < 10000; ++i) {
            q.flash.data()[i] = p.flash.data()[perm[i]];
            q.noflash.data()[i] = p.noflash.data()[perm[i]];
        }
        const Descriptor dq = diff_descriptor(q);
        for (std::size_t i = 0; i < 10000; ++i) ASSERT_EQ(dq.values[i], d.values[perm[i]]);
    }
}

TEST(Diff, ReflectanceInvarianceOnRenderedGrids) {
    SplitMix64 g(9);
    for (int t = 0; t < 10; ++t) {
        SurfaceSpec s;
        s.height = gen::height_field(g, 100, 100);
        s.flash_intensity = g.uniform(0.1, 0.5);  // L_f + L_b <= 1 keeps the render unclamped
        s.background_intensity = g.uniform(0.0, 0.5);
        s.reflectance = gen::reflectance(g, 100, 100);
        const RenderedPair a = render_pair(s);
        s.reflectance = gen::reflectance(g, 100, 100);
        const RenderedPair b = render_pair(s);
        const auto da = diff_descriptor({a.flash, a.noflash}), db = diff_descriptor({b.flash, b.noflash});
        for (std::size_t i = 0; i < da.values.size(); ++i) ASSERT_NEAR(da.values[i], db.values[i], 1e-9);
    }
}

TEST(SpecDiff, ConcatenatesInOrder) {
    SplitMix64 g(10);
    const Descriptor spec = spec_descriptor(random_iris(g));
    const Descriptor diff = diff_descriptor(random_face(g));
    const Descriptor sd = specdiff_descriptor(spec, diff);
    ASSERT_EQ(sd.values.size(), 13200u);
    EXPECT_EQ(descriptor_length(DescriptorKind::spec) + descriptor_length(DescriptorKind::diff), 13200u);
    EXPECT_TRUE(std::equal(spec.values.begin(), spec.values.end(), sd.values.begin()));
    EXPECT_TRUE(std::equal(diff.values.begin(), diff.values.end(), sd.values.begin() + 3200));
}

TEST(SpecDiff, ZerosStayZero) {
    Descriptor spec{DescriptorKind::spec, std::vector<double>(3200, 0.0)};
    Descriptor diff{DescriptorKind::diff, std::vector<double>(10000, 0.0)};
    const Descriptor sd = specdiff_descriptor(spec, diff);
    EXPECT_EQ(sd.values, std::vector<double>(13200, 0.0));
}

TEST(SpecDiff, WrongKindsThrow) {
    Descriptor spec{DescriptorKind::spec, std::vector<double>(3200, 0.0)};
    EXPECT_THROW(specdiff_descriptor(spec, spec), ModelMismatchError);
}

TEST(SdFic, Examples) {
    SplitMix64 g(11);
    FacePair p = random_face(g);
    FacePair same{p.flash, p.flash};
    EXPECT_EQ(sd_fic(same).values, std::vector<double>{0.0});

    FacePair shifted{p.flash, p.flash};
    for (double& v : shifted.flash.data()) v += 7.0;
    EXPECT_NEAR(sd_fic(shifted).values[0], 0.0, 1e-12);

    FacePair half{constant(100, 10), constant(100, 10)};
    for (std::size_t i = 0; i < 5000; ++i) half.flash.data()[i] = 11.0;
    for (std::size_t i = 5000; i < 10000; ++i) half.flash.data()[i] = 9.0;
    EXPECT_NEAR(sd_fic(half).values[0], 1.0, 1e-12);
    EXPECT_EQ(sd_fic(half).values.size(), 1u);
}

TEST(Lbp, ConstantImageInteriorCodesAreOne) {
    const Descriptor d = lbp_fi(constant(100, 50));
    ASSERT_EQ(d.values.size(), 10000u);
    for (std::size_t r = 1; r < 99; ++r)
        for (std::size_t c = 1; c < 99; ++c) ASSERT_EQ(d.values[r * 100 + c], 1.0);
    // Corner (0,0): only right, bottom-right and bottom neighbours exist.
    EXPECT_EQ(lbp_code(constant(100, 50), 0, 0), 0b00011100u);
}

TEST(Lbp, BrightPixelOnZeroBackground) {
    // Hand-derived 5x5 table: with the >= rule a zero pixel sets a bit for
    // every neighbour (all are >= 0), so only the bright center differs.
    ImageGrid g(5, 5);
    g(2, 2) = 200.0;
    EXPECT_EQ(lbp_code(g, 2, 2), 0u);
    for (std::size_t r = 1; r <= 3; ++r)
        for (std::size_t c = 1; c <= 3; ++c)
            if (r != 2 || c != 2) EXPECT_EQ(lbp_code(g, r, c), 255u);
    // The bit pointing at the bright pixel from (1,1) is bottom-right: bit 3.
    EXPECT_TRUE(lbp_code(g, 1, 1) & (1u << 3));
    // Dark pixel on a bright background: each neighbour clears exactly the
    // one bit that points at it.
    ImageGrid inv(5, 5, 1, 200.0);
    inv(2, 2) = 0.0;
    EXPECT_EQ(lbp_code(inv, 2, 2), 255u);
    EXPECT_EQ(lbp_code(inv, 1, 1), 255u - (1u << 3));
    EXPECT_EQ(lbp_code(inv, 1, 2), 255u - (1u << 2));
    EXPECT_EQ(lbp_code(inv, 2, 1), 255u - (1u << 4));
}

TEST(RelativeRef, Examples) {
    const Descriptor ones = relative_ref(constant(100, 40));
    for (double v : ones.values) ASSERT_EQ(v, 1.0);
    EXPECT_FALSE(ones.degenerate);

    ImageGrid g = constant(100, 20);
    g(3, 4) = 40;
    EXPECT_EQ(relative_ref(g).values[3 * 100 + 4], 2.0);

    ImageGrid z = constant(100, 20);
    z(50, 50) = 0;
    const Descriptor d = relative_ref(z);
    EXPECT_TRUE(d.degenerate);
    for (double v : d.values) ASSERT_EQ(v, 0.0);
}

TEST(Implicit3d, Examples) {
    SplitMix64 g(12);
    ImageGrid b = gen::image(g, 100, 100);
    for (double& v : b.data()) v = std::max(v, 1.0);
    for (double v : implicit3d({b, b}).values) ASSERT_EQ(v, 0.0);
    const Descriptor d = implicit3d({constant(100, 3), constant(100, 1)});
    EXPECT_EQ(d.values[0], 2.0);
    ImageGrid bz = constant(100, 1);
    bz(7, 7) = 0.0;
    EXPECT_EQ(implicit3d({constant(100, 3), bz}).values[707], 0.0);
}

TEST(Lengths, ByKind) {
    SplitMix64 g(13);
    const IrisPair iris = random_iris(g);
    const FacePair face = random_face(g);
    for (DescriptorKind k : kAllDescriptorKinds)
        EXPECT_EQ(compute_descriptor(k, iris, face).values.size(), descriptor_length(k)) << to_string(k);
    EXPECT_EQ(descriptor_length(DescriptorKind::sd_fic), 1u);
    EXPECT_EQ(descriptor_length(DescriptorKind::lbp_fi), 10000u);
}

TEST(Bounds, RandomPipelinePairsStayInUnitInterval) {
    SplitMix64 g(14);
    for (int t = 0; t < 40; ++t) {
        const std::size_t n = 80 + g.below(120);
        const auto lm = gen::landmarks(g, n, n);
        const ImageGrid f = gen::image(g, n, n, 1 + 2 * g.below(2), 0.1);
        const ImageGrid b = gen::image(g, n, n, f.channels(), 0.1);
        const Descriptor d = compute_pair_descriptor(f, b, {lm.left, lm.right, lm.face}, DescriptorKind::specdiff);
        for (double v : d.values) {
            ASSERT_GE(v, -1.0);
            ASSERT_LE(v, 1.0);
        }
    }
}

TEST(Pipeline, UprightMapsLandmarks) {
    // Eyes tilted by 20 degrees; after upright rotation they are level.
    const ImageGrid img = constant(120, 100);
    const double a = 20.0 * std::numbers::pi / 180.0;
    const Point c{60, 50};
    auto at = [&](double u) { return Point{c.x + std::cos(a) * u, c.y + std::sin(a) * u}; };
    PairLandmarks lm{eye(at(-35), at(-15)), eye(at(35), at(15)),
                     FaceLandmarks{{{30, 30}, {90, 30}, {90, 100}, {30, 100}}}};
    const UprightImage up = make_upright(img, lm);
    EXPECT_NEAR(up.landmarks.left_eye.center().y, up.landmarks.right_eye.center().y, 1e-9);
}
