#pragma once

// Protocol report export.
//
// report.json   {"descriptor_kind","kernel","protocol":{"name","k","seed"},
//                "grid","simulated_bpcer",
//                "folds":[{"name","ok","message","n_train","n_test","n_live",
//                          "n_attack","C","gamma","threshold","train_acer",
//                          "sv_count","apcer","bpcer","acer",
//                          "per_spoof_kind_apcer":{..}}],
//                "mean":{"n_folds","apcer","bpcer","acer","per_spoof_kind_apcer"},
//                "subgroups":{"spoof_kind":[..],"lighting_tag":[..]}}
// report.csv    one row per fold plus a final "mean" row
// roc.csv       fold,threshold,far,tar (thresholds may be inf/-inf)
// mean_roc.csv  far,tar averaged over folds at a fixed FAR grid

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "specdiff/error.hpp"
#include "specdiff/metrics.hpp"
#include "specdiff/protocol.hpp"

namespace specdiff {

/// %.17g, which round-trips every double; inf/nan spelled out.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline nlohmann::json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

inline nlohmann::json group_json(const std::vector<GroupMetrics>& groups) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& g : groups) {
        nlohmann::json o = nlohmann::json::object();
        o["group"] = g.group;
        o["n_live"] = g.n_live;
        o["n_attack"] = g.n_attack;
        o["apcer"] = g.apcer ? nlohmann::json(*g.apcer) : nlohmann::json(nullptr);
        o["bpcer"] = g.bpcer ? nlohmann::json(*g.bpcer) : nlohmann::json(nullptr);
        arr.push_back(std::move(o));
    }
    return arr;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw FormatError(path.string() + ": write failed");
}

}  // namespace detail

inline nlohmann::json report_to_json(const ProtocolReport& r) {
    using nlohmann::json;
    json j = json::object();
    j["descriptor_kind"] = to_string(r.descriptor_kind);
    j["kernel"] = to_string(r.kernel);
    j["protocol"] = {{"name", r.protocol.kind == ProtocolKind::loio ? "loio" : "kfold"},
                     {"k", r.protocol.k},
                     {"seed", r.protocol.seed}};
    j["grid"] = r.grid;
    j["simulated_bpcer"] = r.simulated_bpcer;
    json folds = json::array();
    for (const auto& f : r.folds) {
        json o = json::object();
        o["name"] = f.name;
        o["ok"] = f.ok;
        o["message"] = f.message;
        o["n_train"] = f.n_train;
        o["n_test"] = f.n_test;
        if (f.ok) {
            o["n_live"] = f.report.n_live;
            o["n_attack"] = f.report.n_attack;
            o["C"] = f.C;
            o["gamma"] = f.gamma;
            o["threshold"] = f.threshold;
            o["train_acer"] = f.train_acer;
            o["sv_count"] = f.sv_count;
            o["apcer"] = f.report.apcer;
            o["bpcer"] = f.report.bpcer;
            o["acer"] = f.report.acer;
            o["per_spoof_kind_apcer"] = f.report.per_spoof_kind_apcer;
        }
        folds.push_back(std::move(o));
    }
    j["folds"] = std::move(folds);
    j["mean"] = {{"n_folds", r.n_ok_folds},
                 {"apcer", detail::json_number(r.mean.apcer)},
                 {"bpcer", detail::json_number(r.mean.bpcer)},
                 {"acer", detail::json_number(r.mean.acer)},
                 {"per_spoof_kind_apcer", r.mean.per_spoof_kind_apcer}};
    json groups = json::object();
    groups["spoof_kind"] = detail::group_json(subgroup_eval(r.samples, "spoof_kind"));
    bool tagged = !r.samples.empty();
    for (const auto& s : r.samples) tagged = tagged && s.lighting_tag.has_value();
    if (tagged) groups["lighting_tag"] = detail::group_json(subgroup_eval(r.samples, "lighting_tag"));
    j["subgroups"] = std::move(groups);
    return j;
}

inline std::string report_to_csv(const ProtocolReport& r) {
    std::string s = "fold,ok,n_train,n_test,n_live,n_attack,C,gamma,threshold,apcer,bpcer,acer\n";
    for (const auto& f : r.folds) {
        s += f.name + "," + (f.ok ? "1" : "0") + "," + std::to_string(f.n_train) + "," + std::to_string(f.n_test);
        if (f.ok) {
            s += "," + std::to_string(f.report.n_live) + "," + std::to_string(f.report.n_attack) + "," +
                 format_double(f.C) + "," + format_double(f.gamma) + "," + format_double(f.threshold) + "," +
                 format_double(f.report.apcer) + "," + format_double(f.report.bpcer) + "," +
                 format_double(f.report.acer);
        } else {
            s += ",,,,,,,,";
        }
        s += "\n";
    }
    s += "mean,1,,," + std::to_string(r.mean.n_live) + "," + std::to_string(r.mean.n_attack) + ",,,," +
         format_double(r.mean.apcer) + "," + format_double(r.mean.bpcer) + "," + format_double(r.mean.acer) + "\n";
    return s;
}

inline std::string roc_to_csv(const ProtocolReport& r) {
    std::string s = "fold,threshold,far,tar\n";
    for (const auto& f : r.folds) {
        if (!f.ok) continue;
        for (const auto& p : f.report.roc)
            s += f.name + "," + format_double(p.threshold) + "," + format_double(p.far) + "," + format_double(p.tar) + "\n";
    }
    return s;
}

inline std::string mean_roc_to_csv(const ProtocolReport& r) {
    std::string s = "far,tar\n";
    for (std::size_t i = 0; i < r.mean_roc_far.size(); ++i)
        s += format_double(r.mean_roc_far[i]) + "," + format_double(r.mean_roc_tar[i]) + "\n";
    return s;
}

/// Writes report.json, report.csv, roc.csv and mean_roc.csv into `dir`.
inline void write_report(const std::filesystem::path& dir, const ProtocolReport& r) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
    detail::write_text(dir / "report.json", report_to_json(r).dump(2) + "\n");
    detail::write_text(dir / "report.csv", report_to_csv(r));
    detail::write_text(dir / "roc.csv", roc_to_csv(r));
    detail::write_text(dir / "mean_roc.csv", mean_roc_to_csv(r));
}

}  // namespace specdiff
