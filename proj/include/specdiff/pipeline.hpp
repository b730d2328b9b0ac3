#pragma once

// Preprocessing chain from a decoded flash/no-flash pair to descriptor
// inputs: grayscale, upright rotation, landmark mapping, ROI extraction.

#include <array>
#include <optional>

#include "specdiff/dataset.hpp"
#include "specdiff/descriptors.hpp"
#include "specdiff/image.hpp"
#include "specdiff/image_io.hpp"

namespace specdiff {

struct PairLandmarks {
    EyeLandmarks left_eye;
    EyeLandmarks right_eye;
    FaceLandmarks face;
};

inline PairLandmarks landmarks_of(const PairRecord& r) { return {r.left_eye, r.right_eye, r.face}; }

inline EyeLandmarks map_landmarks(const EyeLandmarks& e, const AffineTransform& t) {
    EyeLandmarks out{t.apply(e.outer), t.apply(e.inner), std::nullopt};
    if (e.pupil) out.pupil = t.apply(*e.pupil);
    return out;
}

inline FaceLandmarks map_landmarks(const FaceLandmarks& f, const AffineTransform& t) {
    FaceLandmarks out;
    out.points.reserve(f.points.size());
    for (const Point& p : f.points) out.points.push_back(t.apply(p));
    return out;
}

inline PairLandmarks map_landmarks(const PairLandmarks& l, const AffineTransform& t) {
    return {map_landmarks(l.left_eye, t), map_landmarks(l.right_eye, t), map_landmarks(l.face, t)};
}

struct UprightImage {
    ImageGrid gray;
    PairLandmarks landmarks;  ///< in the rotated frame
};

/// Grayscale, then rotate so the eye line is horizontal.
inline UprightImage make_upright(const ImageGrid& img, const PairLandmarks& lm) {
    const ImageGrid gray = grayscale(img);
    auto rot = rotate_upright(gray, lm.left_eye.center(), lm.right_eye.center());
    return {std::move(rot.image), map_landmarks(lm, rot.transform)};
}

struct PreprocessedPair {
    std::optional<IrisPair> iris;
    std::optional<FacePair> face;
};

/// Runs the chain for one pair. Both photos share the landmarks (the capture
/// interval is short enough that the face does not move between them).
inline PreprocessedPair preprocess_pair(const ImageGrid& flash, const ImageGrid& noflash,
                                        const PairLandmarks& lm, DescriptorKind kind) {
    if (flash.height() != noflash.height() || flash.width() != noflash.width())
        throw ShapeError("flash and no-flash images differ in size");
    const UprightImage f = make_upright(flash, lm);
    const UprightImage b = make_upright(noflash, lm);
    PreprocessedPair out;
    if (needs_iris(kind)) {
        out.iris = extract_iris_pair(f.gray, b.gray, {f.landmarks.left_eye, f.landmarks.right_eye},
                                     {b.landmarks.left_eye, b.landmarks.right_eye});
    }
    if (needs_face(kind)) {
        out.face = extract_face_pair(f.gray, b.gray, f.landmarks.face, b.landmarks.face);
    }
    return out;
}

inline Descriptor descriptor_from_preprocessed(DescriptorKind kind, const PreprocessedPair& p) {
    static const IrisPair kNoIris{};
    static const FacePair kNoFace{};
    return compute_descriptor(kind, p.iris ? *p.iris : kNoIris, p.face ? *p.face : kNoFace);
}

inline Descriptor compute_pair_descriptor(const ImageGrid& flash, const ImageGrid& noflash,
                                          const PairLandmarks& lm, DescriptorKind kind) {
    return descriptor_from_preprocessed(kind, preprocess_pair(flash, noflash, lm, kind));
}

/// Decodes both images of a record and computes its descriptor.
inline Descriptor compute_record_descriptor(const PairRecord& r, DescriptorKind kind) {
    return compute_pair_descriptor(read_image(r.flash_path), read_image(r.noflash_path), landmarks_of(r), kind);
}

}  // namespace specdiff
