#pragma once

// Per-pair wall-clock timing split into the preprocessing chain (grayscale,
// rotation, crops, smoothing, resize) and descriptor + SVM decision.
// Images are decoded once up front; decoding is not timed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "specdiff/dataset.hpp"
#include "specdiff/error.hpp"
#include "specdiff/image_io.hpp"
#include "specdiff/pipeline.hpp"
#include "specdiff/svm.hpp"

namespace specdiff {

struct StageTiming {
    std::string stage;
    std::size_t samples = 0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double mean_ms = 0.0;
};

struct BenchReport {
    DescriptorKind kind = DescriptorKind::specdiff;
    std::size_t n_pairs = 0;
    std::size_t repeats = 0;
    std::size_t warmup = 0;
    std::size_t support_vectors = 0;
    StageTiming preprocess;
    StageTiming descriptor_classify;
};

struct BenchOptions {
    std::size_t repeats = 10;
    std::size_t warmup = 2;  ///< untimed passes over every pair before timing
};

struct BenchInput {
    ImageGrid flash;
    ImageGrid noflash;
    PairLandmarks landmarks;
};

namespace detail {

/// Nearest-rank percentile of an already sorted sample.
inline double percentile_sorted(const std::vector<double>& v, double p) {
    if (v.empty()) return 0.0;
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

inline double median_sorted(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline StageTiming summarize(std::string name, std::vector<double> ms) {
    StageTiming t;
    t.stage = std::move(name);
    t.samples = ms.size();
    std::sort(ms.begin(), ms.end());
    t.median_ms = median_sorted(ms);
    t.p95_ms = percentile_sorted(ms, 95.0);
    double sum = 0.0;
    for (double x : ms) sum += x;
    t.mean_ms = ms.empty() ? 0.0 : sum / static_cast<double>(ms.size());
    return t;
}

}  // namespace detail

inline BenchReport run_bench(const std::vector<BenchInput>& pairs, const SvmModel& model, const BenchOptions& opt) {
    if (pairs.empty()) throw Error("benchmark needs at least one pair");
    if (opt.repeats == 0) throw Error("repeats must be positive");
    const DescriptorKind kind = model.descriptor_kind;
    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    volatile double sink = 0.0;  // keeps the work observable
    for (std::size_t w = 0; w < opt.warmup; ++w) {
        for (const auto& p : pairs) {
            const auto pre = preprocess_pair(p.flash, p.noflash, p.landmarks, kind);
            sink = sink + classify(model, descriptor_from_preprocessed(kind, pre)).score;
        }
    }

    std::vector<double> pre_ms, cls_ms;
    pre_ms.reserve(pairs.size() * opt.repeats);
    cls_ms.reserve(pairs.size() * opt.repeats);
    for (std::size_t r = 0; r < opt.repeats; ++r) {
        for (const auto& p : pairs) {
            auto t0 = clock::now();
            const auto pre = preprocess_pair(p.flash, p.noflash, p.landmarks, kind);
            pre_ms.push_back(ms_since(t0));
            t0 = clock::now();
            const Verdict v = classify(model, descriptor_from_preprocessed(kind, pre));
            cls_ms.push_back(ms_since(t0));
            sink = sink + v.score;
        }
    }

    BenchReport rep;
    rep.kind = kind;
    rep.n_pairs = pairs.size();
    rep.repeats = opt.repeats;
    rep.warmup = opt.warmup;
    rep.support_vectors = model.support_vectors.rows();
    rep.preprocess = detail::summarize("preprocess", std::move(pre_ms));
    rep.descriptor_classify = detail::summarize("descriptor_classify", std::move(cls_ms));
    return rep;
}

inline std::vector<BenchInput> load_bench_inputs(const Dataset& ds) {
    std::vector<BenchInput> out;
    out.reserve(ds.records.size());
    for (const auto& r : ds.records) out.push_back({read_image(r.flash_path), read_image(r.noflash_path), landmarks_of(r)});
    return out;
}

inline std::string bench_to_csv(const BenchReport& b) {
    std::string s = "stage,kind,n_pairs,repeats,samples,support_vectors,median_ms,p95_ms,mean_ms\n";
    for (const StageTiming* t : {&b.preprocess, &b.descriptor_classify}) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%zu,%zu,%.6f,%.6f,%.6f\n", t->stage.c_str(), to_string(b.kind),
                      b.n_pairs, b.repeats, t->samples, b.support_vectors, t->median_ms, t->p95_ms, t->mean_ms);
        s += buf;
    }
    return s;
}

inline std::string bench_to_table(const BenchReport& b) {
    char buf[256];
    std::string s;
    std::snprintf(buf, sizeof buf, "kind %s, %zu pairs x %zu repeats (%zu warm-up), %zu support vectors\n",
                  to_string(b.kind), b.n_pairs, b.repeats, b.warmup, b.support_vectors);
    s += buf;
    std::snprintf(buf, sizeof buf, "%-22s %12s %12s %12s\n", "stage", "median ms", "p95 ms", "mean ms");
    s += buf;
    for (const StageTiming* t : {&b.preprocess, &b.descriptor_classify}) {
        std::snprintf(buf, sizeof buf, "%-22s %12.3f %12.3f %12.3f\n", t->stage.c_str(), t->median_ms, t->p95_ms,
                      t->mean_ms);
        s += buf;
    }
    return s;
}

}  // namespace specdiff
