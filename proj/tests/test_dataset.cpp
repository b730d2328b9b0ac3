#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "specdiff/dataset.hpp"
#include "specdiff/random.hpp"
#include "test_support.hpp"

using namespace specdiff;
using testing_support::spit;
using testing_support::TempDir;

namespace {

std::string record_line(const std::string& id, const std::string& subject, const std::string& label = "live",
                        const std::string& extra = "") {
    std::string kind = label == "live" ? "null" : "\"flat_paper\"";
    return "{\"pair_id\":\"" + id + "\",\"subject_id\":\"" + subject + "\",\"label\":\"" + label +
           "\",\"spoof_kind\":" + kind +
           ",\"flash_path\":\"f.png\",\"noflash_path\":\"b.png\","
           "\"left_eye\":{\"outer\":[10,20],\"inner\":[20,20],\"pupil\":[15,20]},"
           "\"right_eye\":{\"outer\":[40,20],\"inner\":[30,20]},"
           "\"face\":[[5,5],[55,5],[55,55],[5,55]]" +
           extra + "}\n";
}

struct Fixture {
    TempDir dir{"ds"};
    Fixture() {
        write_png(dir / "f.png", ImageGrid(60, 60, 1, 10.0));
        write_png(dir / "b.png", ImageGrid(60, 60, 1, 5.0));
    }
    std::filesystem::path manifest(const std::string& text) {
        spit(dir / "m.jsonl", text);
        return dir / "m.jsonl";
    }
};

Dataset synthetic(std::size_t n, std::size_t ids) {
    std::vector<PairRecord> recs(n);
    for (std::size_t i = 0; i < n; ++i) {
        recs[i].pair_id = "p" + std::to_string(i);
        recs[i].subject_id = "s" + std::to_string(i % ids);
    }
    return Dataset::from_records(std::move(recs));
}

void expect_partition(const std::vector<Fold>& folds, std::size_t n) {
    std::vector<int> hits(n, 0);
    for (const Fold& f : folds) {
        for (std::size_t i : f.test_index) ++hits[i];
        EXPECT_EQ(f.train_index.size() + f.test_index.size(), n);
        std::vector<std::size_t> all = f.train_index;
        all.insert(all.end(), f.test_index.begin(), f.test_index.end());
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(all[i], i);
    }
    for (int h : hits) EXPECT_EQ(h, 1);
}

}  // namespace

TEST(Manifest, EmptyFileGivesEmptyDataset) {
    Fixture fx;
    EXPECT_EQ(load_manifest(fx.manifest("")).size(), 0u);
}

TEST(Manifest, OneValidLine) {
    Fixture fx;
    const Dataset ds = load_manifest(fx.manifest(record_line("p1", "s1")));
    ASSERT_EQ(ds.size(), 1u);
    const PairRecord& r = ds.records[0];
    EXPECT_EQ(r.pair_id, "p1");
    EXPECT_EQ(r.label, Label::live);
    EXPECT_FALSE(r.spoof_kind);
    EXPECT_EQ(r.flash_path, fx.dir / "f.png");
    ASSERT_TRUE(r.left_eye.pupil);
    EXPECT_EQ(r.left_eye.center(), (Point{15, 20}));
    EXPECT_EQ(r.right_eye.center(), (Point{35, 20}));
    EXPECT_EQ(r.face.bounding_box(), (RegionBox{5, 5, 55, 55}));
    EXPECT_EQ(ds.ids.size(), 1u);
}

TEST(Manifest, MissingImageNamesPath) {
    Fixture fx;
    std::string line = record_line("p1", "s1");
    line.replace(line.find("\"f.png\""), 7, "\"gone.png\"");
    try {
        load_manifest(fx.manifest(line));
        FAIL() << "expected ManifestError";
    } catch (const ManifestError& e) {
        EXPECT_NE(std::string(e.what()).find("gone.png"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
    }
}

TEST(Manifest, ErrorsCarryLineNumbers) {
    Fixture fx;
    const std::string text = record_line("p1", "s1") + "{not json}\n";
    try {
        load_manifest(fx.manifest(text));
        FAIL();
    } catch (const ManifestError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(Manifest, DuplicatePairIdRejected) {
    Fixture fx;
    EXPECT_THROW(load_manifest(fx.manifest(record_line("p1", "s1") + record_line("p1", "s2"))), ManifestError);
}

TEST(Manifest, LandmarkOutsideImageRejected) {
    Fixture fx;
    std::string line = record_line("p1", "s1");
    line.replace(line.find("[55,55]"), 7, "[75,55]");
    EXPECT_THROW(load_manifest(fx.manifest(line)), ManifestError);
}

TEST(Manifest, MismatchedImageSizesRejected) {
    Fixture fx;
    write_png(fx.dir / "b.png", ImageGrid(60, 61, 1, 5.0));
    EXPECT_THROW(load_manifest(fx.manifest(record_line("p1", "s1"))), ManifestError);
}

TEST(Manifest, UnknownKeyRejectedUnlessLax) {
    Fixture fx;
    const auto path = fx.manifest(record_line("p1", "s1", "live", ",\"camera\":\"x\""));
    EXPECT_THROW(load_manifest(path), ManifestError);
    ManifestOptions lax;
    lax.lax = true;
    EXPECT_EQ(load_manifest(path, lax).size(), 1u);
}

TEST(Manifest, FewerThanFourFacePointsRejected) {
    Fixture fx;
    std::string line = record_line("p1", "s1");
    line.replace(line.find(",[5,55]"), 7, "");
    EXPECT_THROW(load_manifest(fx.manifest(line)), ManifestError);
}

TEST(Manifest, DegenerateFaceRejected) {
    Fixture fx;
    std::string line = record_line("p1", "s1");
    line.replace(line.find("[[5,5],[55,5],[55,55],[5,55]]"), 29, "[[5,5],[5,5],[5,5],[5,5]]");
    EXPECT_THROW(load_manifest(fx.manifest(line)), ManifestError);
}

TEST(Manifest, LiveWithSpoofKindRejected) {
    Fixture fx;
    std::string line = record_line("p1", "s1");
    line.replace(line.find("\"spoof_kind\":null"), 17, "\"spoof_kind\":\"display\"");
    EXPECT_THROW(load_manifest(fx.manifest(line)), ManifestError);
}

TEST(Manifest, OrderPreservingAndRoundTrips) {
    Fixture fx;
    std::string text;
    for (int i = 9; i >= 0; --i) text += record_line("p" + std::to_string(i), "s" + std::to_string(i % 3),
                                                    i % 2 ? "spoof" : "live");
    const Dataset a = load_manifest(fx.manifest(text));
    ASSERT_EQ(a.size(), 10u);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.records[i].pair_id, "p" + std::to_string(9 - i));
    write_manifest(fx.dir / "copy.jsonl", a);
    const Dataset b = load_manifest(fx.dir / "copy.jsonl");
    ASSERT_EQ(b.size(), a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(record_to_json(a.records[i]), record_to_json(b.records[i]));
    }
}

TEST(Loio, TwentyIdsGiveTwentyFolds) {
    const Dataset ds = synthetic(100, 20);
    const auto folds = split_leave_one_id_out(ds);
    EXPECT_EQ(folds.size(), 20u);
    expect_partition(folds, 100);
    for (std::size_t i = 1; i < folds.size(); ++i) EXPECT_LT(folds[i - 1].name, folds[i].name);
}

TEST(Loio, TwoIdsThreePlusTwo) {
    std::vector<PairRecord> recs(5);
    for (int i = 0; i < 5; ++i) {
        recs[i].pair_id = "p" + std::to_string(i);
        recs[i].subject_id = i < 3 ? "a" : "b";
    }
    const auto folds = split_leave_one_id_out(Dataset::from_records(recs));
    ASSERT_EQ(folds.size(), 2u);
    EXPECT_EQ(folds[0].test.size(), 3u);
    EXPECT_EQ(folds[1].test.size(), 2u);
    for (const auto& r : folds[0].test.records) EXPECT_EQ(r.subject_id, "a");
}

TEST(Loio, SingleIdRejected) { EXPECT_THROW(split_leave_one_id_out(synthetic(5, 1)), SplitError); }

TEST(Kfold, HundredByTen) {
    const auto folds = split_kfold(synthetic(100, 7), 10, 42);
    ASSERT_EQ(folds.size(), 10u);
    for (const auto& f : folds) EXPECT_EQ(f.test.size(), 10u);
    expect_partition(folds, 100);
}

TEST(Kfold, UnevenSizesFrontLoaded) {
    const auto folds = split_kfold(synthetic(23, 3), 5, 1);
    const std::size_t expected[] = {5, 5, 5, 4, 4};
    for (std::size_t f = 0; f < 5; ++f) EXPECT_EQ(folds[f].test.size(), expected[f]);
    expect_partition(folds, 23);
}

TEST(Kfold, DeterministicPerSeed) {
    const Dataset ds = synthetic(50, 5);
    const auto a = split_kfold(ds, 5, 9), b = split_kfold(ds, 5, 9), c = split_kfold(ds, 5, 10);
    bool differs = false;
    for (std::size_t f = 0; f < 5; ++f) {
        EXPECT_EQ(a[f].test_index, b[f].test_index);
        differs = differs || a[f].test_index != c[f].test_index;
    }
    EXPECT_TRUE(differs);
}

TEST(Kfold, MatchesReferenceShuffle) {
    // Independent Fisher-Yates with the same generator and draw order.
    const std::size_t n = 31, k = 4;
    SplitMix64 rng(77);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto folds = split_kfold(synthetic(n, 2), k, 77);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> want(order.begin() + pos, order.begin() + pos + folds[f].test_index.size());
        std::sort(want.begin(), want.end());
        EXPECT_EQ(folds[f].test_index, want);
        pos += want.size();
    }
}

TEST(Kfold, OutOfRangeRejected) {
    EXPECT_THROW(split_kfold(synthetic(10, 2), 1, 0), SplitError);
    EXPECT_THROW(split_kfold(synthetic(10, 2), 11, 0), SplitError);
}

TEST(Kfold, RandomPartitionProperty) {
    SplitMix64 g(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + g.below(200);
        const std::size_t k = 2 + g.below(n - 1);
        expect_partition(split_kfold(synthetic(n, 1 + g.below(10)), k, g.next()), n);
    }
}
