#pragma once

// Descriptor export.
//
// JSON lines: {"pair_id":..,"kind":..,"label":..,"subject_id":..,
//              "spoof_kind":..,"lighting_tag":..,"values":[...]}
// Floats are written in shortest round-trip form, so reading back is exact.
//
// Binary: a sequence of blocks, each
//   bytes 0-3   magic "SDDC"
//   bytes 4-7   kind code, uint32 little-endian (DescriptorKind value)
//   bytes 8-15  value count, uint64 little-endian
//   then count IEEE-754 f64 values, little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specdiff/dataset.hpp"
#include "specdiff/descriptors.hpp"
#include "specdiff/error.hpp"
#include "specdiff/parallel.hpp"
#include "specdiff/pipeline.hpp"

namespace specdiff {

struct DescriptorRecord {
    std::string pair_id;
    std::string subject_id;
    Label label = Label::live;
    std::optional<SpoofKind> spoof_kind;
    std::optional<std::string> lighting_tag;
    Descriptor descriptor;
};

inline nlohmann::json descriptor_record_json(const DescriptorRecord& r) {
    nlohmann::json j = nlohmann::json::object();
    j["pair_id"] = r.pair_id;
    j["kind"] = to_string(r.descriptor.kind);
    j["label"] = to_string(r.label);
    j["subject_id"] = r.subject_id;
    j["spoof_kind"] = r.spoof_kind ? nlohmann::json(to_string(*r.spoof_kind)) : nlohmann::json(nullptr);
    if (r.lighting_tag) j["lighting_tag"] = *r.lighting_tag;
    j["values"] = r.descriptor.values;
    if (r.descriptor.degenerate) j["degenerate"] = true;
    return j;
}

inline DescriptorRecord parse_descriptor_record(const nlohmann::json& j) {
    DescriptorRecord r;
    try {
        r.pair_id = j.at("pair_id").get<std::string>();
        r.subject_id = j.at("subject_id").get<std::string>();
        const auto label = parse_label(j.at("label").get<std::string>());
        if (!label) throw FormatError("bad label");
        r.label = *label;
        const auto kind = parse_descriptor_kind(j.at("kind").get<std::string>());
        if (!kind) throw FormatError("unknown descriptor kind");
        r.descriptor.kind = *kind;
        if (j.contains("spoof_kind") && !j["spoof_kind"].is_null()) {
            r.spoof_kind = parse_spoof_kind(j["spoof_kind"].get<std::string>());
            if (!r.spoof_kind) throw FormatError("unknown spoof_kind");
        }
        if (j.contains("lighting_tag") && !j["lighting_tag"].is_null())
            r.lighting_tag = j["lighting_tag"].get<std::string>();
        r.descriptor.values = j.at("values").get<std::vector<double>>();
        r.descriptor.degenerate = j.value("degenerate", false);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed descriptor record: ") + e.what());
    }
    if (r.descriptor.values.size() != descriptor_length(r.descriptor.kind))
        throw FormatError("descriptor " + r.pair_id + " has " + std::to_string(r.descriptor.values.size()) +
                          " values, expected " + std::to_string(descriptor_length(r.descriptor.kind)));
    return r;
}

inline void write_descriptors_jsonl(const std::filesystem::path& path, const std::vector<DescriptorRecord>& recs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path.string() + ": cannot open for writing");
    for (const auto& r : recs) out << descriptor_record_json(r).dump() << '\n';
    if (!out) throw FormatError(path.string() + ": write failed");
}

inline std::vector<DescriptorRecord> read_descriptors_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path.string() + ": cannot open descriptor file");
    std::vector<DescriptorRecord> recs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            recs.push_back(parse_descriptor_record(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return recs;
}

inline constexpr char kDescriptorMagic[4] = {'S', 'D', 'D', 'C'};

namespace detail {

template <typename T>
void put_le(std::string& buf, T v) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buf.append(bytes, sizeof(T));
}

template <typename T>
T get_le(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

}  // namespace detail

inline std::string encode_descriptor_binary(const Descriptor& d) {
    std::string buf;
    buf.reserve(16 + 8 * d.values.size());
    buf.append(kDescriptorMagic, 4);
    detail::put_le(buf, static_cast<std::uint32_t>(d.kind));
    detail::put_le(buf, static_cast<std::uint64_t>(d.values.size()));
    for (double v : d.values) detail::put_le(buf, v);
    return buf;
}

/// Decodes every block in `bytes`.
inline std::vector<Descriptor> decode_descriptors_binary(std::string_view bytes) {
    std::vector<Descriptor> out;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < 16) throw FormatError("truncated descriptor header");
        if (std::memcmp(bytes.data() + pos, kDescriptorMagic, 4) != 0) throw FormatError("bad descriptor magic");
        const auto code = detail::get_le<std::uint32_t>(bytes.data() + pos + 4);
        const auto len = detail::get_le<std::uint64_t>(bytes.data() + pos + 8);
        pos += 16;
        if (code < 1 || code > 7) throw FormatError("unknown descriptor kind code " + std::to_string(code));
        const auto kind = static_cast<DescriptorKind>(code);
        if (len != descriptor_length(kind)) throw FormatError("descriptor length does not match its kind");
        if ((bytes.size() - pos) / 8 < len) throw FormatError("truncated descriptor payload");
        Descriptor d{kind, std::vector<double>(len)};
        for (std::uint64_t i = 0; i < len; ++i) d.values[i] = detail::get_le<double>(bytes.data() + pos + 8 * i);
        pos += 8 * len;
        out.push_back(std::move(d));
    }
    return out;
}

inline void write_descriptors_binary(const std::filesystem::path& path, const std::vector<DescriptorRecord>& recs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path.string() + ": cannot open for writing");
    for (const auto& r : recs) {
        const std::string block = encode_descriptor_binary(r.descriptor);
        out.write(block.data(), static_cast<std::streamsize>(block.size()));
    }
    if (!out) throw FormatError(path.string() + ": write failed");
}

inline std::vector<Descriptor> read_descriptors_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open descriptor file");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_descriptors_binary(bytes);
}

struct ExtractionFailure {
    std::size_t index;
    std::string pair_id;
    std::string message;
};

struct ExtractionResult {
    std::vector<DescriptorRecord> records;  ///< successful records, in dataset order
    std::vector<std::size_t> source_index;  ///< dataset position of each record
    std::vector<ExtractionFailure> failures;
};

inline DescriptorRecord make_descriptor_record(const PairRecord& r, Descriptor d) {
    return {r.pair_id, r.subject_id, r.label, r.spoof_kind, r.lighting_tag, std::move(d)};
}

/// Computes one descriptor per record. Failures are collected, not thrown.
inline ExtractionResult extract_dataset(const Dataset& ds, DescriptorKind kind, std::size_t threads = 1) {
    const std::size_t n = ds.records.size();
    std::vector<std::optional<Descriptor>> slots(n);
    std::vector<std::string> errors(n);
    parallel_for(n, threads, [&](std::size_t i) {
        try {
            validate_record_files(ds.records[i]);
            slots[i] = compute_record_descriptor(ds.records[i], kind);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    ExtractionResult out;
    for (std::size_t i = 0; i < n; ++i) {
        if (slots[i]) {
            out.records.push_back(make_descriptor_record(ds.records[i], std::move(*slots[i])));
            out.source_index.push_back(i);
        } else {
            out.failures.push_back({i, ds.records[i].pair_id, errors[i]});
        }
    }
    return out;
}

}  // namespace specdiff
