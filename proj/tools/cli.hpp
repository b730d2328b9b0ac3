#pragma once

// Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 usage
// error. classify is tri-state instead: 0 live, 1 spoof, 2 any error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "specdiff/specdiff.hpp"

namespace specdiff::cli {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level_from_env() {
    const char* v = std::getenv("SPECDIFF_LOG");
    if (!v) return LogLevel::info;
    const std::string s(v);
    if (s == "error") return LogLevel::error;
    if (s == "warn" || s == "warning") return LogLevel::warn;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::info;
}

class Log {
public:
    explicit Log(LogLevel level) : level_(level) {}
    void error(const std::string& m) const { emit(LogLevel::error, "error", m); }
    void warn(const std::string& m) const { emit(LogLevel::warn, "warning", m); }
    void info(const std::string& m) const { emit(LogLevel::info, "info", m); }
    void debug(const std::string& m) const { emit(LogLevel::debug, "debug", m); }

private:
    void emit(LogLevel l, const char* tag, const std::string& m) const {
        if (static_cast<int>(l) <= static_cast<int>(level_)) std::cerr << "specdiff: " << tag << ": " << m << "\n";
    }
    LogLevel level_;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct Options {
    std::string manifest;
    std::string live_manifest;
    std::string kind = "specdiff";
    bool kind_given = false;
    std::string kernel = "rbf";
    double C = 1.0;
    std::string gamma = "scale";
    std::string protocol = "loio";
    std::size_t k = 10;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string out;
    bool skip_bad = false;
    bool lax = false;
    bool grid = false;
    std::string descriptors;
    std::string model;
    std::string flash;
    std::string noflash;
    std::string landmarks;
    std::size_t repeats = 10;
    std::size_t warmup = 2;
    std::size_t n = 0;
    std::size_t size = 240;
    std::string format;
};

class UsageError : public Error {
public:
    using Error::Error;
};

inline SvmConfig svm_config(const Options& o) {
    SvmConfig cfg;
    cfg.kernel = *parse_kernel(o.kernel);
    cfg.C = o.C;
    cfg.seed = derive_seed(o.seed, "svm");
    if (o.gamma != "scale") {
        try {
            std::size_t used = 0;
            cfg.gamma = std::stod(o.gamma, &used);
            if (used != o.gamma.size()) throw std::invalid_argument(o.gamma);
        } catch (const std::exception&) {
            throw UsageError("--gamma must be a positive number or \"scale\"");
        }
        if (!(*cfg.gamma > 0.0)) throw UsageError("--gamma must be a positive number or \"scale\"");
    }
    return cfg;
}

inline ManifestOptions manifest_options(const Options& o) {
    ManifestOptions m;
    m.lax = o.lax;
    m.check_files = false;  // per-record checks happen during extraction so --skip-bad can drop them
    return m;
}

/// Extracts descriptors, logging each failure with its pair_id.
inline std::vector<DescriptorRecord> extract_logged(const Dataset& ds, DescriptorKind kind, const Options& o,
                                                    const Log& log) {
    ExtractionResult ex = extract_dataset(ds, kind, o.threads);
    for (const auto& f : ex.failures) {
        if (o.skip_bad) log.warn("skipping " + f.pair_id + ": " + f.message);
        else log.error(f.pair_id + ": " + f.message);
    }
    if (!ex.failures.empty() && !o.skip_bad)
        throw Error(std::to_string(ex.failures.size()) + " pair(s) failed; pass --skip-bad to drop them");
    return std::move(ex.records);
}

inline bool wants_binary(const Options& o) {
    if (!o.format.empty()) return o.format == "bin";
    return std::filesystem::path(o.out).extension() == ".bin";
}

inline int cmd_extract(const Options& o, const Log& log) {
    const Dataset ds = load_manifest(o.manifest, manifest_options(o));
    auto recs = extract_logged(ds, *parse_descriptor_kind(o.kind), o, log);
    std::stable_sort(recs.begin(), recs.end(),
                     [](const DescriptorRecord& a, const DescriptorRecord& b) { return a.pair_id < b.pair_id; });
    if (wants_binary(o)) write_descriptors_binary(o.out, recs);
    else write_descriptors_jsonl(o.out, recs);
    log.info("wrote " + std::to_string(recs.size()) + " " + o.kind + " descriptor(s) to " + o.out);
    return kExitOk;
}

inline int cmd_train(const Options& o, const Log& log) {
    std::vector<DescriptorRecord> recs;
    if (!o.descriptors.empty()) {
        recs = read_descriptors_jsonl(o.descriptors);
    } else {
        if (o.manifest.empty()) throw UsageError("train needs --descriptors or --manifest");
        recs = extract_logged(load_manifest(o.manifest, manifest_options(o)), *parse_descriptor_kind(o.kind), o, log);
    }
    if (recs.empty()) throw TrainingError("no training descriptors");
    const DescriptorKind kind = recs.front().descriptor.kind;
    const SvmConfig cfg = svm_config(o);
    const FitResult fit = fit_model(make_labeled_set(recs), cfg, kind, o.grid, o.threads);
    save_model(fit.model, o.out);
    std::printf("kind=%s kernel=%s C=%s gamma=%s\n", to_string(kind), to_string(fit.model.kernel),
                format_double(fit.model.C).c_str(), format_double(fit.model.gamma).c_str());
    std::printf("dual_objective=%s support_vectors=%zu train_acer=%s threshold=%s converged=%s\n",
                format_double(fit.model.dual_objective).c_str(), fit.model.sv_count(),
                format_double(fit.train_acer).c_str(), format_double(fit.model.threshold).c_str(),
                fit.model.converged ? "yes" : "no");
    if (!fit.model.converged) log.warn("solver stopped at the iteration cap before reaching tolerance");
    return kExitOk;
}

/// Landmark file: {"left_eye": {...}, "right_eye": {...}, "face": [[x, y], ...]}.
inline PairLandmarks read_landmarks(const std::filesystem::path& path, bool lax) {
    std::ifstream in(path);
    if (!in) throw Error(path.string() + ": cannot open landmark file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw Error(path.string() + ": landmarks must be a JSON object");
    if (!lax) {
        for (const auto& [k, v] : j.items())
            if (k != "left_eye" && k != "right_eye" && k != "face") throw Error("unknown key \"" + k + "\"");
    }
    nlohmann::json rec = {{"pair_id", "query"}, {"subject_id", "query"}, {"label", "live"},
                          {"flash_path", "-"}, {"noflash_path", "-"}};
    for (const char* key : {"left_eye", "right_eye", "face"})
        if (j.contains(key)) rec[key] = j[key];
    const PairRecord r = parse_record(rec, {}, lax);
    return landmarks_of(r);
}

inline int cmd_classify(const Options& o, const Log& log) {
    const SvmModel model = load_model(o.model);
    const PairLandmarks lm = read_landmarks(o.landmarks, o.lax);
    const Descriptor d = compute_pair_descriptor(read_image(o.flash), read_image(o.noflash), lm, model.descriptor_kind);
    const Verdict v = classify(model, d);
    std::printf("%s score=%s threshold=%s\n", to_string(v.label), format_double(v.score).c_str(),
                format_double(v.threshold).c_str());
    log.debug("descriptor kind " + std::string(to_string(d.kind)));
    return v.label == Label::live ? 0 : 1;
}

inline int cmd_eval(const Options& o, const Log& log) {
    const DescriptorKind kind = *parse_descriptor_kind(o.kind);
    const SvmConfig cfg = svm_config(o);
    ProtocolSpec p;
    p.kind = o.protocol == "loio" ? ProtocolKind::loio : ProtocolKind::kfold;
    p.k = o.k;
    p.seed = o.seed;
    ProtocolOptions popt;
    popt.grid = o.grid;
    popt.threads = o.threads;

    const Dataset ds = load_manifest(o.manifest, manifest_options(o));
    ProtocolReport rep;
    if (!o.live_manifest.empty()) {
        const Dataset src = load_manifest(o.live_manifest, manifest_options(o));
        const auto source = extract_logged(src, kind, o, log);
        std::vector<PairRecord> attack_recs;
        for (const auto& r : ds.records)
            if (r.label == Label::spoof) attack_recs.push_back(r);
        if (attack_recs.empty()) throw Error(o.manifest + ": no spoof records to score");
        const auto attacks = extract_logged(Dataset::from_records(std::move(attack_recs)), kind, o, log);
        rep = run_simulated_protocol(source, attacks, cfg, p, popt);
    } else {
        rep = run_protocol_descriptors(extract_logged(ds, kind, o, log), cfg, p, popt);
    }
    write_report(o.out, rep);
    for (const auto& f : rep.folds)
        if (!f.ok) log.warn("fold " + f.name + " failed: " + f.message);
    std::printf("folds=%zu ok=%zu apcer=%s bpcer=%s acer=%s\n", rep.folds.size(), rep.n_ok_folds,
                format_double(rep.mean.apcer).c_str(), format_double(rep.mean.bpcer).c_str(),
                format_double(rep.mean.acer).c_str());
    return rep.n_ok_folds > 0 ? kExitOk : kExitFailure;
}

inline int cmd_synth(const Options& o, const Log& log) {
    SynthOptions so;
    so.image_size = o.size;
    synth_dataset(o.n, o.seed, o.out, so, o.threads);
    log.info("wrote " + std::to_string(2 * o.n) + " pairs to " + o.out);
    return kExitOk;
}

inline int cmd_bench(const Options& o, const Log& log) {
    const SvmModel model = load_model(o.model);
    if (o.kind_given && o.kind != to_string(model.descriptor_kind))
        throw UsageError("--kind " + o.kind + " does not match the model's " + to_string(model.descriptor_kind));
    Dataset ds = load_manifest(o.manifest, manifest_options(o));
    const auto inputs = load_bench_inputs(ds);
    const BenchReport b = run_bench(inputs, model, {o.repeats, o.warmup});
    if (o.format == "csv") std::fputs(bench_to_csv(b).c_str(), stdout);
    else std::fputs(bench_to_table(b).c_str(), stdout);
    if (!o.out.empty()) {
        std::ofstream out(o.out, std::ios::binary);
        if (!out) throw Error(o.out + ": cannot open for writing");
        out << bench_to_csv(b);
    }
    log.debug("bench done");
    return kExitOk;
}

inline int run_cli(int argc, char** argv) {
    const Log log(log_level_from_env());
    Options o;
    CLI::App app{"Flash/no-flash face presentation attack detection"};
    app.require_subcommand(1);

    std::vector<std::string> kinds;
    for (DescriptorKind k : kAllDescriptorKinds) kinds.emplace_back(to_string(k));
    auto kind_opt = [&](CLI::App* sub) {
        return sub->add_option("--kind", o.kind, "descriptor kind")->check(CLI::IsMember(kinds));
    };
    auto svm_opts = [&](CLI::App* sub) {
        sub->add_option("--kernel", o.kernel, "linear or rbf")->check(CLI::IsMember({"linear", "rbf"}));
        sub->add_option("--C", o.C, "box constraint")->check(CLI::PositiveNumber);
        sub->add_option("--gamma", o.gamma, "RBF width or \"scale\"");
        sub->add_flag("--grid", o.grid, "search C x gamma on training ACER");
    };
    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "random seed");
        sub->add_option("--threads", o.threads, "worker threads, 0 = all cores");
        sub->add_flag("--lax", o.lax, "accept unknown manifest keys");
    };

    auto* extract = app.add_subcommand("extract", "compute descriptors for a manifest");
    extract->add_option("--manifest", o.manifest)->required();
    kind_opt(extract);
    extract->add_option("--out", o.out)->required();
    extract->add_option("--format", o.format, "jsonl or bin (default from --out extension)")
        ->check(CLI::IsMember({"jsonl", "bin"}));
    extract->add_flag("--skip-bad", o.skip_bad, "drop pairs that fail");
    common(extract);

    auto* train = app.add_subcommand("train", "train an SVM and write a model file");
    train->add_option("--descriptors", o.descriptors, "descriptor JSON lines");
    train->add_option("--manifest", o.manifest);
    kind_opt(train);
    svm_opts(train);
    train->add_option("--out", o.out)->required();
    train->add_flag("--skip-bad", o.skip_bad);
    common(train);

    auto* cls = app.add_subcommand("classify", "classify one flash/no-flash pair");
    cls->add_option("--model", o.model)->required();
    cls->add_option("--flash", o.flash)->required();
    cls->add_option("--noflash", o.noflash)->required();
    cls->add_option("--landmarks", o.landmarks)->required();
    cls->add_flag("--lax", o.lax);

    auto* eval = app.add_subcommand("eval", "cross-validated evaluation");
    eval->add_option("--manifest", o.manifest)->required();
    eval->add_option("--live-manifest", o.live_manifest, "bona fide source for simulated BPCER");
    kind_opt(eval);
    svm_opts(eval);
    eval->add_option("--protocol", o.protocol)->check(CLI::IsMember({"loio", "kfold"}));
    eval->add_option("--k", o.k, "folds for kfold")->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));
    eval->add_option("--out", o.out, "report directory")->required();
    eval->add_flag("--skip-bad", o.skip_bad);
    common(eval);

    auto* synth = app.add_subcommand("synth", "render a synthetic dataset");
    synth->add_option("--n", o.n, "pairs per class")->required()->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
    synth->add_option("--size", o.size, "image edge in pixels")->check(CLI::Range(std::size_t{64}, std::size_t{4096}));
    synth->add_option("--out", o.out)->required();
    synth->add_option("--seed", o.seed);
    synth->add_option("--threads", o.threads);

    auto* bench = app.add_subcommand("bench", "time preprocessing and classification");
    bench->add_option("--manifest", o.manifest)->required();
    bench->add_option("--model", o.model)->required();
    CLI::Option* bench_kind = kind_opt(bench);
    bench->add_option("--repeats", o.repeats)->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
    bench->add_option("--warmup", o.warmup);
    bench->add_option("--format", o.format, "table or csv")->check(CLI::IsMember({"table", "csv"}));
    bench->add_option("--out", o.out, "CSV output file");
    bench->add_flag("--lax", o.lax);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const bool is_classify = cls->parsed();
    try {
        if (extract->parsed()) return cmd_extract(o, log);
        if (train->parsed()) return cmd_train(o, log);
        if (is_classify) return cmd_classify(o, log);
        if (eval->parsed()) return cmd_eval(o, log);
        if (synth->parsed()) return cmd_synth(o, log);
        if (bench->parsed()) {
            o.kind_given = bench_kind->count() > 0;
            return cmd_bench(o, log);
        }
    } catch (const UsageError& e) {
        log.error(e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        log.error(e.what());
        return is_classify ? kExitUsage : kExitFailure;
    }
    return kExitUsage;
}

}  // namespace specdiff::cli
