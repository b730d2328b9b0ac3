#pragma once

// Manifest-driven ingestion of flash/no-flash pairs plus the two
// cross-validation splits (leave-one-subject-out and seeded k-fold).
//
// Manifest: UTF-8 JSON lines, one record per line:
//   {"pair_id":"p001","subject_id":"s01","label":"live","spoof_kind":null,
//    "flash_path":"f.png","noflash_path":"b.png",
//    "left_eye":{"outer":[x,y],"inner":[x,y],"pupil":[x,y]},
//    "right_eye":{...},"face":[[x,y],...],"lighting_tag":"bright"}
// Relative image paths resolve against the manifest's directory. Blank lines
// are skipped. "pupil", "spoof_kind" and "lighting_tag" may be null/absent.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "specdiff/error.hpp"
#include "specdiff/image.hpp"
#include "specdiff/image_io.hpp"
#include "specdiff/random.hpp"

namespace specdiff {

enum class Label { live, spoof };
enum class SpoofKind { flat_paper, bent_paper, display };

inline const char* to_string(Label l) noexcept { return l == Label::live ? "live" : "spoof"; }

inline const char* to_string(SpoofKind k) noexcept {
    switch (k) {
        case SpoofKind::flat_paper: return "flat_paper";
        case SpoofKind::bent_paper: return "bent_paper";
        case SpoofKind::display: return "display";
    }
    return "?";
}

inline std::optional<Label> parse_label(std::string_view s) {
    if (s == "live") return Label::live;
    if (s == "spoof") return Label::spoof;
    return std::nullopt;
}

inline std::optional<SpoofKind> parse_spoof_kind(std::string_view s) {
    if (s == "flat_paper") return SpoofKind::flat_paper;
    if (s == "bent_paper") return SpoofKind::bent_paper;
    if (s == "display") return SpoofKind::display;
    return std::nullopt;
}

struct EyeLandmarks {
    Point outer;
    Point inner;
    std::optional<Point> pupil;

    /// Pupil when known, otherwise the midpoint of the corners.
    Point center() const noexcept {
        if (pupil) return *pupil;
        return {(outer.x + inner.x) / 2.0, (outer.y + inner.y) / 2.0};
    }
};

struct FaceLandmarks {
    std::vector<Point> points;

    /// Circumscribing box [floor(min), ceil(max)) of the points.
    RegionBox bounding_box() const {
        if (points.empty()) throw DegenerateGeometryError("face landmarks are empty");
        double x0 = points[0].x, x1 = points[0].x, y0 = points[0].y, y1 = points[0].y;
        for (const Point& p : points) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
        if (!(x1 > x0) || !(y1 > y0))
            throw DegenerateGeometryError("face landmarks span a degenerate rectangle");
        return {static_cast<long>(std::floor(y0)), static_cast<long>(std::floor(x0)),
                static_cast<long>(std::ceil(y1)), static_cast<long>(std::ceil(x1))};
    }
};

struct PairRecord {
    std::string pair_id;
    std::string subject_id;
    Label label = Label::live;
    std::optional<SpoofKind> spoof_kind;
    std::filesystem::path flash_path;
    std::filesystem::path noflash_path;
    EyeLandmarks left_eye;
    EyeLandmarks right_eye;
    FaceLandmarks face;
    std::optional<std::string> lighting_tag;
};

struct Dataset {
    std::vector<PairRecord> records;
    std::set<std::string> ids;

    std::size_t size() const noexcept { return records.size(); }

    static Dataset from_records(std::vector<PairRecord> recs) {
        Dataset ds;
        ds.records = std::move(recs);
        for (const auto& r : ds.records) ds.ids.insert(r.subject_id);
        return ds;
    }
};

struct ManifestOptions {
    bool lax = false;            ///< accept unknown keys
    bool check_files = true;     ///< probe both images for existence and equal dimensions
};

namespace detail {

using nlohmann::json;

inline Point parse_point(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw Error(what + " must be an [x, y] number pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline std::string require_string(const json& obj, const char* key) {
    if (!obj.contains(key) || !obj[key].is_string())
        throw Error(std::string("missing or non-string field \"") + key + "\"");
    return obj[key].get<std::string>();
}

inline EyeLandmarks parse_eye(const json& j, const std::string& which, bool lax) {
    if (!j.is_object()) throw Error(which + " must be an object");
    if (!lax) {
        for (const auto& [k, v] : j.items()) {
            if (k != "outer" && k != "inner" && k != "pupil")
                throw Error("unknown key \"" + k + "\" in " + which);
        }
    }
    if (!j.contains("outer") || !j.contains("inner")) throw Error(which + " needs outer and inner corners");
    EyeLandmarks e;
    e.outer = parse_point(j["outer"], which + ".outer");
    e.inner = parse_point(j["inner"], which + ".inner");
    if (j.contains("pupil") && !j["pupil"].is_null()) e.pupil = parse_point(j["pupil"], which + ".pupil");
    if (e.outer == e.inner) throw DegenerateGeometryError(which + " corners coincide");
    return e;
}

inline const std::set<std::string>& known_record_keys() {
    static const std::set<std::string> keys = {
        "pair_id", "subject_id", "label", "spoof_kind", "flash_path", "noflash_path",
        "left_eye", "right_eye", "face", "lighting_tag"};
    return keys;
}

inline json point_json(Point p) { return json::array({p.x, p.y}); }

}  // namespace detail

/// Parses one manifest object (no file checks). Throws specdiff::Error.
inline PairRecord parse_record(const nlohmann::json& j, const std::filesystem::path& base_dir, bool lax) {
    using detail::json;
    if (!j.is_object()) throw Error("record must be a JSON object");
    if (!lax) {
        for (const auto& [k, v] : j.items()) {
            if (!detail::known_record_keys().count(k)) throw Error("unknown key \"" + k + "\"");
        }
    }
    PairRecord r;
    r.pair_id = detail::require_string(j, "pair_id");
    r.subject_id = detail::require_string(j, "subject_id");
    const auto label = parse_label(detail::require_string(j, "label"));
    if (!label) throw Error("label must be \"live\" or \"spoof\"");
    r.label = *label;
    if (j.contains("spoof_kind") && !j["spoof_kind"].is_null()) {
        if (!j["spoof_kind"].is_string()) throw Error("spoof_kind must be a string or null");
        r.spoof_kind = parse_spoof_kind(j["spoof_kind"].get<std::string>());
        if (!r.spoof_kind) throw Error("unknown spoof_kind \"" + j["spoof_kind"].get<std::string>() + "\"");
    }
    if (r.label == Label::live && r.spoof_kind) throw Error("live record cannot carry a spoof_kind");
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    r.flash_path = resolve(detail::require_string(j, "flash_path"));
    r.noflash_path = resolve(detail::require_string(j, "noflash_path"));
    if (!j.contains("left_eye") || !j.contains("right_eye")) throw Error("missing eye landmarks");
    r.left_eye = detail::parse_eye(j["left_eye"], "left_eye", lax);
    r.right_eye = detail::parse_eye(j["right_eye"], "right_eye", lax);
    if (!j.contains("face") || !j["face"].is_array()) throw Error("face must be an array of points");
    for (const auto& p : j["face"]) r.face.points.push_back(detail::parse_point(p, "face point"));
    if (r.face.points.size() < 4) throw Error("face needs at least 4 landmark points");
    (void)r.face.bounding_box();
    if (j.contains("lighting_tag") && !j["lighting_tag"].is_null()) {
        if (!j["lighting_tag"].is_string()) throw Error("lighting_tag must be a string or null");
        r.lighting_tag = j["lighting_tag"].get<std::string>();
    }
    return r;
}

/// Serializes a record. Paths are written relative to `base_dir` when they
/// lie beneath it.
inline nlohmann::json record_to_json(const PairRecord& r, const std::filesystem::path& base_dir = {}) {
    using detail::json;
    using detail::point_json;
    auto rel = [&](const std::filesystem::path& p) {
        if (base_dir.empty()) return p.generic_string();
        auto rp = p.lexically_relative(base_dir);
        if (rp.empty() || *rp.begin() == "..") return p.generic_string();
        return rp.generic_string();
    };
    auto eye = [&](const EyeLandmarks& e) {
        json o = json::object();
        o["outer"] = point_json(e.outer);
        o["inner"] = point_json(e.inner);
        o["pupil"] = e.pupil ? point_json(*e.pupil) : json(nullptr);
        return o;
    };
    json j = json::object();
    j["pair_id"] = r.pair_id;
    j["subject_id"] = r.subject_id;
    j["label"] = to_string(r.label);
    j["spoof_kind"] = r.spoof_kind ? json(to_string(*r.spoof_kind)) : json(nullptr);
    j["flash_path"] = rel(r.flash_path);
    j["noflash_path"] = rel(r.noflash_path);
    j["left_eye"] = eye(r.left_eye);
    j["right_eye"] = eye(r.right_eye);
    json face = json::array();
    for (const Point& p : r.face.points) face.push_back(point_json(p));
    j["face"] = std::move(face);
    if (r.lighting_tag) j["lighting_tag"] = *r.lighting_tag;
    return j;
}

inline void validate_record_files(const PairRecord& r) {
    const ImageShape f = probe_image(r.flash_path);
    const ImageShape b = probe_image(r.noflash_path);
    if (f.height != b.height || f.width != b.width)
        throw Error("flash image " + r.flash_path.string() + " and no-flash image " +
                    r.noflash_path.string() + " differ in size");
    auto inside = [&](Point p, const std::string& what) {
        if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < static_cast<double>(f.width) &&
              p.y < static_cast<double>(f.height)))
            throw Error(what + " landmark (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") lies outside the " + std::to_string(f.width) + "x" +
                        std::to_string(f.height) + " image");
    };
    for (const EyeLandmarks* e : {&r.left_eye, &r.right_eye}) {
        const std::string which = e == &r.left_eye ? "left_eye" : "right_eye";
        inside(e->outer, which + ".outer");
        inside(e->inner, which + ".inner");
        if (e->pupil) inside(*e->pupil, which + ".pupil");
    }
    for (const Point& p : r.face.points) inside(p, "face");
}

inline Dataset load_manifest(const std::filesystem::path& path, const ManifestOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw ManifestError(path.string() + ": cannot open manifest");
    const std::filesystem::path base = path.parent_path();
    Dataset ds;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        PairRecord rec;
        try {
            const auto j = nlohmann::json::parse(line);
            rec = parse_record(j, base, opt.lax);
        } catch (const nlohmann::json::exception& e) {
            throw ManifestError(std::string("JSON parse error: ") + e.what(), lineno);
        } catch (const Error& e) {
            throw ManifestError(e.what(), lineno);
        }
        if (!seen.insert(rec.pair_id).second)
            throw ManifestError("duplicate pair_id \"" + rec.pair_id + "\"", lineno);
        if (opt.check_files) {
            try {
                validate_record_files(rec);
            } catch (const Error& e) {
                throw ManifestError("pair \"" + rec.pair_id + "\": " + e.what(), lineno);
            }
        }
        ds.ids.insert(rec.subject_id);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

inline void write_manifest(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ManifestError(path.string() + ": cannot open for writing");
    for (const auto& r : ds.records) out << record_to_json(r, path.parent_path()).dump() << '\n';
    if (!out) throw ManifestError(path.string() + ": write failed");
}

struct Fold {
    std::string name;
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_index;  ///< positions in the source dataset
    std::vector<std::size_t> test_index;
};

namespace detail {

inline Fold make_fold(const Dataset& ds, std::string name, const std::vector<bool>& in_test) {
    Fold f;
    f.name = std::move(name);
    std::vector<PairRecord> tr, te;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        if (in_test[i]) {
            te.push_back(ds.records[i]);
            f.test_index.push_back(i);
        } else {
            tr.push_back(ds.records[i]);
            f.train_index.push_back(i);
        }
    }
    f.train = Dataset::from_records(std::move(tr));
    f.test = Dataset::from_records(std::move(te));
    return f;
}

}  // namespace detail

/// One fold per subject, ordered by sorted subject_id.
inline std::vector<Fold> split_leave_one_id_out(const Dataset& ds) {
    std::set<std::string> ids;
    for (const auto& r : ds.records) ids.insert(r.subject_id);
    if (ids.size() < 2)
        throw SplitError("leave-one-ID-out needs at least 2 subjects, found " + std::to_string(ids.size()));
    std::vector<Fold> folds;
    for (const auto& id : ids) {
        std::vector<bool> in_test(ds.records.size());
        for (std::size_t i = 0; i < ds.records.size(); ++i) in_test[i] = ds.records[i].subject_id == id;
        folds.push_back(detail::make_fold(ds, id, in_test));
    }
    return folds;
}

/// Shuffles record positions with SplitMix64(seed) (Fisher-Yates, see
/// specdiff::shuffle) and deals them into k contiguous folds; the first
/// n mod k folds get one extra record.
inline std::vector<Fold> split_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    const std::size_t n = ds.records.size();
    if (k < 2 || k > n)
        throw SplitError("k-fold needs 2 <= k <= " + std::to_string(n) + ", got k=" + std::to_string(k));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SplitMix64 rng(seed);
    shuffle(order.begin(), order.end(), rng);
    std::vector<Fold> folds;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = n / k + (f < n % k ? 1 : 0);
        std::vector<bool> in_test(n);
        for (std::size_t i = pos; i < pos + len; ++i) in_test[order[i]] = true;
        pos += len;
        folds.push_back(detail::make_fold(ds, "fold" + std::to_string(f), in_test));
    }
    return folds;
}

}  // namespace specdiff
