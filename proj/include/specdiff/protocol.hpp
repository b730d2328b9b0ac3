#pragma once

// Cross-validation harness: per fold, train an SVM on the training part,
// fit the decision threshold on the training scores, evaluate on the test
// part. Fold reports are averaged without weighting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "specdiff/dataset.hpp"
#include "specdiff/descriptor_io.hpp"
#include "specdiff/descriptors.hpp"
#include "specdiff/error.hpp"
#include "specdiff/metrics.hpp"
#include "specdiff/random.hpp"
#include "specdiff/svm.hpp"

namespace specdiff {

enum class ProtocolKind { loio, kfold };

struct ProtocolSpec {
    ProtocolKind kind = ProtocolKind::loio;
    std::size_t k = 10;
    std::uint64_t seed = 0;
};

struct ProtocolOptions {
    bool grid = false;        ///< search C x gamma on training-fold ACER
    std::size_t threads = 1;  ///< kernel-matrix rows are computed in parallel
};

struct HyperParams {
    double C = 1.0;
    std::optional<double> gamma_scale;  ///< multiplier on the "scale" gamma; nullopt = cfg.gamma as given
};

/// C in {0.1, 1, 10} crossed with gamma in {0.1, 1, 10} x scale (C only for linear).
inline std::vector<HyperParams> default_grid(KernelType kernel) {
    std::vector<HyperParams> g;
    for (double c : {0.1, 1.0, 10.0}) {
        if (kernel == KernelType::linear) {
            g.push_back({c, std::nullopt});
        } else {
            for (double s : {0.1, 1.0, 10.0}) g.push_back({c, s});
        }
    }
    return g;
}

struct FoldDefinition {
    std::string name;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct FoldReport {
    std::string name;
    bool ok = false;
    std::string message;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double C = 0.0;
    double gamma = 0.0;
    double threshold = 0.0;
    double train_acer = 0.0;
    std::size_t sv_count = 0;
    EvalReport report;
};

struct ProtocolReport {
    DescriptorKind descriptor_kind = DescriptorKind::specdiff;
    KernelType kernel = KernelType::rbf;
    ProtocolSpec protocol;
    bool grid = false;
    bool simulated_bpcer = false;
    std::vector<FoldReport> folds;
    EvalReport mean;                 ///< rates averaged over successful folds
    std::size_t n_ok_folds = 0;
    std::vector<double> mean_roc_far;
    std::vector<double> mean_roc_tar;
    std::vector<ScoredSample> samples;  ///< every test presentation with its fold's decision
};

namespace detail {

inline Dataset dataset_stub(std::span<const DescriptorRecord> descs) {
    std::vector<PairRecord> recs(descs.size());
    for (std::size_t i = 0; i < descs.size(); ++i) {
        recs[i].pair_id = descs[i].pair_id;
        recs[i].subject_id = descs[i].subject_id;
        recs[i].label = descs[i].label;
        recs[i].spoof_kind = descs[i].spoof_kind;
    }
    return Dataset::from_records(std::move(recs));
}

inline std::vector<FoldDefinition> to_definitions(const std::vector<Fold>& folds) {
    std::vector<FoldDefinition> defs;
    for (const Fold& f : folds) defs.push_back({f.name, f.train_index, f.test_index});
    return defs;
}

}  // namespace detail

inline std::vector<FoldDefinition> make_folds(std::span<const DescriptorRecord> descs, const ProtocolSpec& p) {
    const Dataset stub = detail::dataset_stub(descs);
    if (p.kind == ProtocolKind::loio) return detail::to_definitions(split_leave_one_id_out(stub));
    return detail::to_definitions(split_kfold(stub, p.k, derive_seed(p.seed, "kfold")));
}

/// Simulated-BPCER folds: split `source` (which trains the models) as usual,
/// but test each fold on the bona fide part of its held-out source records
/// plus every attack in `attacks`. Indices address `source ++ attacks`.
inline std::vector<FoldDefinition> make_simulated_folds(std::span<const DescriptorRecord> source,
                                                        std::span<const DescriptorRecord> attacks,
                                                        const ProtocolSpec& p) {
    auto defs = make_folds(source, p);
    for (auto& d : defs) {
        std::vector<std::size_t> test;
        for (std::size_t i : d.test)
            if (source[i].label == Label::live) test.push_back(i);
        for (std::size_t a = 0; a < attacks.size(); ++a)
            if (attacks[a].label == Label::spoof) test.push_back(source.size() + a);
        d.test = std::move(test);
    }
    return defs;
}

/// Precomputed pairwise kernel inputs over every descriptor in a run.
class KernelBase {
public:
    KernelBase(const Matrix& x, KernelType kernel, std::size_t threads)
        : n_(x.rows()), kernel_(kernel),
          base_(kernel == KernelType::linear ? gram_matrix(x, threads) : squared_distance_matrix(x, threads)) {}

    double value(std::size_t i, std::size_t j, double gamma) const noexcept {
        const double b = base_[i * n_ + j];
        return kernel_ == KernelType::linear ? b : std::exp(-gamma * b);
    }

    std::vector<double> submatrix(std::span<const std::size_t> idx, double gamma) const {
        const std::size_t m = idx.size();
        std::vector<double> k(m * m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) k[a * m + b] = value(idx[a], idx[b], gamma);
        return k;
    }

private:
    std::size_t n_;
    KernelType kernel_;
    std::vector<double> base_;
};

namespace detail {

struct TrainedFold {
    SvmModel model;
    std::vector<std::size_t> sv_index;  ///< global descriptor index of each support vector
    double threshold = 0.0;
    double train_acer = 1.0;
    double C = 0.0;
    double gamma = 0.0;
};

inline std::vector<double> scores_for(const KernelBase& kb, const TrainedFold& t, std::span<const std::size_t> idx) {
    std::vector<double> s(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) {
        double f = 0.0;
        for (std::size_t v = 0; v < t.sv_index.size(); ++v)
            f += t.model.dual_coefs[v] * kb.value(t.sv_index[v], idx[a], t.gamma);
        s[a] = f + t.model.bias;
    }
    return s;
}

}  // namespace detail

/// Runs the given folds over precomputed descriptors.
inline ProtocolReport run_folds(std::span<const DescriptorRecord> descs, const std::vector<FoldDefinition>& folds,
                                const SvmConfig& cfg, const ProtocolOptions& opt = {}) {
    if (descs.empty()) throw Error("protocol needs at least one descriptor");
    const DescriptorKind kind = descs.front().descriptor.kind;
    for (const auto& d : descs) {
        if (d.descriptor.kind != kind) throw ModelMismatchError("protocol input mixes descriptor kinds");
    }
    const LabeledSet all = make_labeled_set(descs);
    const KernelBase kb(all.features, cfg.kernel, opt.threads);
    const std::vector<HyperParams> grid =
        opt.grid ? default_grid(cfg.kernel) : std::vector<HyperParams>{{cfg.C, std::nullopt}};

    ProtocolReport rep;
    rep.descriptor_kind = kind;
    rep.kernel = cfg.kernel;
    rep.grid = opt.grid;
    const std::vector<double> far_grid = default_far_grid();
    std::vector<double> tar_sum(far_grid.size(), 0.0);

    for (const FoldDefinition& def : folds) {
        FoldReport fr;
        fr.name = def.name;
        fr.n_train = def.train.size();
        fr.n_test = def.test.size();
        try {
            LabeledSet train;
            for (std::size_t i : def.train) {
                train.features.append_row(all.features.row(i));
                train.labels.push_back(all.labels[i]);
                train.subject_ids.push_back(all.subject_ids[i]);
            }
            detail::validate_training_set(train);
            const double base_gamma = resolve_gamma(cfg, train.features);

            std::optional<detail::TrainedFold> best;
            for (const HyperParams& hp : grid) {
                SvmConfig c = cfg;
                c.C = hp.C;
                const double gamma = hp.gamma_scale ? base_gamma * *hp.gamma_scale : base_gamma;
                const auto kmat = kb.submatrix(def.train, gamma);
                detail::TrainedFold t;
                t.model = train_svm_precomputed(train, kmat, c, gamma, kind);
                t.C = c.C;
                t.gamma = gamma;
                for (std::size_t a : t.model.support_indices) t.sv_index.push_back(def.train[a]);
                const auto train_scores = detail::scores_for(kb, t, def.train);
                std::vector<double> live, spoof;
                std::vector<Label> labels;
                for (std::size_t a = 0; a < def.train.size(); ++a) {
                    (train.labels[a] > 0 ? live : spoof).push_back(train_scores[a]);
                    labels.push_back(train.labels[a] > 0 ? Label::live : Label::spoof);
                }
                t.threshold = select_threshold(live, spoof);
                t.model.threshold = t.threshold;
                t.train_acer = compute_metrics(train_scores, labels, t.threshold).acer;
                if (!best || t.train_acer < best->train_acer) best = std::move(t);
            }

            const auto test_scores = detail::scores_for(kb, *best, def.test);
            std::vector<Label> labels;
            std::vector<std::optional<SpoofKind>> kinds;
            for (std::size_t i : def.test) {
                labels.push_back(descs[i].label);
                kinds.push_back(descs[i].spoof_kind);
            }
            fr.C = best->C;
            fr.gamma = best->gamma;
            fr.threshold = best->threshold;
            fr.train_acer = best->train_acer;
            fr.sv_count = best->model.sv_count();
            for (std::size_t a = 0; a < def.test.size(); ++a) {
                const auto& d = descs[def.test[a]];
                rep.samples.push_back({d.pair_id, d.label, d.spoof_kind, d.lighting_tag, test_scores[a], fr.threshold});
            }
            fr.report = compute_metrics(test_scores, labels, fr.threshold, kinds);
            fr.report.roc = roc_curve(test_scores, labels);
            fr.ok = true;
        } catch (const Error& e) {
            fr.ok = false;
            fr.message = e.what();
        }
        if (fr.ok) {
            ++rep.n_ok_folds;
            rep.mean.apcer += fr.report.apcer;
            rep.mean.bpcer += fr.report.bpcer;
            rep.mean.n_live += fr.report.n_live;
            rep.mean.n_attack += fr.report.n_attack;
            const auto tar = tar_at_far(fr.report.roc, far_grid);
            for (std::size_t g = 0; g < tar.size(); ++g) tar_sum[g] += tar[g];
        }
        rep.folds.push_back(std::move(fr));
    }
    if (rep.n_ok_folds > 0) {
        const auto n = static_cast<double>(rep.n_ok_folds);
        rep.mean.apcer /= n;
        rep.mean.bpcer /= n;
        rep.mean.acer = (rep.mean.apcer + rep.mean.bpcer) / 2.0;
        rep.mean_roc_far = far_grid;
        rep.mean_roc_tar.resize(far_grid.size());
        for (std::size_t g = 0; g < far_grid.size(); ++g) rep.mean_roc_tar[g] = tar_sum[g] / n;
        std::map<std::string, std::pair<double, std::size_t>> kind_sum;
        for (const auto& f : rep.folds) {
            if (!f.ok) continue;
            for (const auto& [k, v] : f.report.per_spoof_kind_apcer) {
                kind_sum[k].first += v;
                ++kind_sum[k].second;
            }
        }
        for (const auto& [k, v] : kind_sum) rep.mean.per_spoof_kind_apcer[k] = v.first / static_cast<double>(v.second);
    } else {
        rep.mean.apcer = rep.mean.bpcer = rep.mean.acer = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

struct FitResult {
    SvmModel model;  ///< threshold set from the training scores
    double train_acer = 1.0;
};

/// Trains on every record of `data`, optionally searching the default grid,
/// and sets the decision threshold on the training scores.
inline FitResult fit_model(const LabeledSet& data, const SvmConfig& cfg, DescriptorKind kind, bool grid,
                           std::size_t threads = 1) {
    detail::validate_training_set(data);
    const KernelBase kb(data.features, cfg.kernel, threads);
    const double base_gamma = resolve_gamma(cfg, data.features);
    const std::vector<HyperParams> hps =
        grid ? default_grid(cfg.kernel) : std::vector<HyperParams>{{cfg.C, std::nullopt}};
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<Label> labels;
    for (int y : data.labels) labels.push_back(y > 0 ? Label::live : Label::spoof);

    std::optional<FitResult> best;
    for (const HyperParams& hp : hps) {
        SvmConfig c = cfg;
        c.C = hp.C;
        const double gamma = hp.gamma_scale ? base_gamma * *hp.gamma_scale : base_gamma;
        detail::TrainedFold t;
        t.model = train_svm_precomputed(data, kb.submatrix(idx, gamma), c, gamma, kind);
        t.gamma = gamma;
        t.sv_index = t.model.support_indices;
        const auto scores = detail::scores_for(kb, t, idx);
        std::vector<double> live, spoof;
        for (std::size_t i = 0; i < idx.size(); ++i) (data.labels[i] > 0 ? live : spoof).push_back(scores[i]);
        t.model.threshold = select_threshold(live, spoof);
        const double acer = compute_metrics(scores, labels, t.model.threshold).acer;
        if (!best || acer < best->train_acer) best = FitResult{std::move(t.model), acer};
    }
    return std::move(*best);
}

inline ProtocolReport run_protocol_descriptors(std::span<const DescriptorRecord> descs, const SvmConfig& cfg,
                                               const ProtocolSpec& p, const ProtocolOptions& opt = {}) {
    ProtocolReport rep = run_folds(descs, make_folds(descs, p), cfg, opt);
    rep.protocol = p;
    return rep;
}

/// sBPCER-style run: models and thresholds come from `source`; attacks are
/// scored from `attacks`, bona fide from the held-out part of `source`.
inline ProtocolReport run_simulated_protocol(std::span<const DescriptorRecord> source,
                                             std::span<const DescriptorRecord> attacks, const SvmConfig& cfg,
                                             const ProtocolSpec& p, const ProtocolOptions& opt = {}) {
    std::vector<DescriptorRecord> all(source.begin(), source.end());
    all.insert(all.end(), attacks.begin(), attacks.end());
    ProtocolReport rep = run_folds(all, make_simulated_folds(source, attacks, p), cfg, opt);
    rep.protocol = p;
    rep.simulated_bpcer = true;
    return rep;
}

inline std::vector<DescriptorRecord> extract_or_throw(const Dataset& ds, DescriptorKind kind, std::size_t threads) {
    ExtractionResult ex = extract_dataset(ds, kind, threads);
    if (!ex.failures.empty()) {
        const auto& f = ex.failures.front();
        throw Error("descriptor extraction failed for " + std::to_string(ex.failures.size()) + " pair(s); first: " +
                    f.pair_id + ": " + f.message);
    }
    return std::move(ex.records);
}

/// Extracts descriptors for `ds` and runs the protocol.
inline ProtocolReport run_protocol(const Dataset& ds, DescriptorKind kind, const SvmConfig& cfg,
                                   const ProtocolSpec& p, const ProtocolOptions& opt = {}) {
    const auto descs = extract_or_throw(ds, kind, opt.threads);
    return run_protocol_descriptors(descs, cfg, p, opt);
}

/// Keeps entries [offset, offset + length) of every descriptor and relabels
/// the kind, e.g. the spec or diff block of a specdiff descriptor.
inline std::vector<DescriptorRecord> slice_descriptors(std::span<const DescriptorRecord> descs, DescriptorKind to) {
    std::vector<DescriptorRecord> out;
    for (const auto& d : descs) {
        if (d.descriptor.kind != DescriptorKind::specdiff) throw ModelMismatchError("only specdiff can be sliced");
        const std::size_t off = to == DescriptorKind::diff ? descriptor_length(DescriptorKind::spec) : 0;
        if (to != DescriptorKind::spec && to != DescriptorKind::diff)
            throw ModelMismatchError("specdiff slices into spec or diff only");
        DescriptorRecord r = d;
        r.descriptor.kind = to;
        r.descriptor.values.assign(d.descriptor.values.begin() + static_cast<std::ptrdiff_t>(off),
                                   d.descriptor.values.begin() + static_cast<std::ptrdiff_t>(off + descriptor_length(to)));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace specdiff
