#pragma once

// Model file: a single JSON object
//   {"format_version":1,"kernel":"rbf","C":..,"gamma":..,"bias":..,
//    "threshold":..,"descriptor_kind":"specdiff","feature_dim":..,
//    "dual_coefs":[..],"support_vectors":[[..],..]}
// Doubles use shortest round-trip decimal form, so save -> load is bit-exact.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "specdiff/error.hpp"
#include "specdiff/svm.hpp"

namespace specdiff {

inline nlohmann::json model_to_json(const SvmModel& m) {
    nlohmann::json j = nlohmann::json::object();
    j["format_version"] = SvmModel::kFormatVersion;
    j["kernel"] = to_string(m.kernel);
    j["C"] = m.C;
    j["gamma"] = m.gamma;
    j["bias"] = m.bias;
    j["threshold"] = m.threshold;
    j["descriptor_kind"] = to_string(m.descriptor_kind);
    j["feature_dim"] = m.feature_dim;
    j["dual_coefs"] = m.dual_coefs;
    nlohmann::json svs = nlohmann::json::array();
    for (std::size_t i = 0; i < m.support_vectors.rows(); ++i) {
        const auto row = m.support_vectors.row(i);
        svs.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["support_vectors"] = std::move(svs);
    return j;
}

inline SvmModel model_from_json(const nlohmann::json& j) {
    SvmModel m;
    try {
        if (!j.is_object()) throw FormatError("model file must hold a JSON object");
        const int version = j.at("format_version").get<int>();
        if (version != SvmModel::kFormatVersion)
            throw FormatError("unsupported model format_version " + std::to_string(version));
        const auto kernel = parse_kernel(j.at("kernel").get<std::string>());
        if (!kernel) throw FormatError("unknown kernel");
        m.kernel = *kernel;
        m.C = j.at("C").get<double>();
        m.gamma = j.at("gamma").get<double>();
        m.bias = j.at("bias").get<double>();
        m.threshold = j.at("threshold").get<double>();
        const auto kind = parse_descriptor_kind(j.at("descriptor_kind").get<std::string>());
        if (!kind) throw FormatError("unknown descriptor_kind");
        m.descriptor_kind = *kind;
        m.feature_dim = j.at("feature_dim").get<std::size_t>();
        m.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
        m.support_vectors = Matrix(0, m.feature_dim);
        for (const auto& row : j.at("support_vectors")) {
            const auto values = row.get<std::vector<double>>();
            if (values.size() != m.feature_dim) throw FormatError("support vector length differs from feature_dim");
            m.support_vectors.append_row(values);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt model: ") + e.what());
    }
    if (m.support_vectors.rows() != m.dual_coefs.size())
        throw FormatError("support vector count differs from dual coefficient count");
    if (m.feature_dim != descriptor_length(m.descriptor_kind))
        throw FormatError("feature_dim does not match descriptor_kind");
    return m;
}

inline void save_model(const SvmModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path.string() + ": cannot open for writing");
    out << model_to_json(m).dump() << '\n';
    if (!out) throw FormatError(path.string() + ": write failed");
}

inline SvmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open model file");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": corrupt model: " + e.what());
    }
    return model_from_json(j);
}

}  // namespace specdiff
