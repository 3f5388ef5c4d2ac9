#include "protoid/iq_io.hpp"

#include "protoid/error.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace protoid::io {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "IQ files are little-endian float32; big-endian hosts need byte swapping");

ordered_json parse_json(const std::string& text, const std::string& what) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(what + ": " + e.what());
    }
}

} // namespace

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

fs::path meta_path_for(const fs::path& iq_path) {
    fs::path p = iq_path;
    p.replace_extension(".meta.json");
    return p;
}

void write_recording(const fs::path& iq_path, const IqRecording& rec) {
    std::ofstream out(iq_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + iq_path.string() + "' for writing");
    static_assert(sizeof(Sample) == 2 * sizeof(float));
    out.write(reinterpret_cast<const char*>(rec.samples.data()),
              static_cast<std::streamsize>(rec.samples.size() * sizeof(Sample)));
    if (!out) throw Error("write failed for '" + iq_path.string() + "'");

    ordered_json meta;
    meta["sample_rate_hz"] = rec.sample_rate_hz;
    meta["sample_count"] = rec.samples.size();
    meta["format"] = "cf32_le";
    for (const auto& [k, v] : rec.meta) meta[k] = v;
    write_text(meta_path_for(iq_path), meta.dump(2) + "\n");
}

IqRecording read_recording(const fs::path& iq_path) {
    const auto meta_path = meta_path_for(iq_path);
    if (!fs::exists(meta_path)) {
        throw Error("missing metadata sidecar '" + meta_path.string() + "' (sample rate unknown)");
    }
    const auto meta = parse_json(read_text(meta_path), meta_path.string());
    IqRecording rec;
    if (!meta.contains("sample_rate_hz") || !meta["sample_rate_hz"].is_number()) {
        throw DataError(meta_path.string() + ": sample_rate_hz missing");
    }
    rec.sample_rate_hz = meta["sample_rate_hz"].get<double>();
    if (!(rec.sample_rate_hz > 0.0)) throw DataError(meta_path.string() + ": sample_rate_hz <= 0");
    for (const auto& [k, v] : meta.items()) {
        if (k == "sample_rate_hz" || k == "sample_count" || k == "format") continue;
        rec.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }

    std::ifstream in(iq_path, std::ios::binary);
    if (!in) throw Error("cannot open '" + iq_path.string() + "' for reading");
    const auto bytes = fs::file_size(iq_path);
    if (bytes % sizeof(Sample) != 0) {
        throw DataError(iq_path.string() + ": size is not a multiple of 8 bytes");
    }
    rec.samples.resize(bytes / sizeof(Sample));
    in.read(reinterpret_cast<char*>(rec.samples.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw Error("read failed for '" + iq_path.string() + "'");
    for (const auto& s : rec.samples) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
            throw DataError(iq_path.string() + ": non-finite sample");
        }
    }
    return rec;
}

std::string truth_to_json(const BurstTruth& truth) {
    ordered_json arr = ordered_json::array();
    for (const auto& b : truth) {
        arr.push_back({{"start_sample", b.start_sample},
                       {"end_sample", b.end_sample},
                       {"label", code(b.label)},
                       {"kind", to_string(b.kind)}});
    }
    return arr.dump(1) + "\n";
}

BurstTruth truth_from_json(const std::string& text) {
    const auto arr = parse_json(text, "truth");
    if (!arr.is_array()) throw DataError("truth: expected a JSON array");
    BurstTruth truth;
    for (const auto& e : arr) {
        TruthBurst b;
        b.start_sample = e.at("start_sample").get<SampleIndex>();
        b.end_sample = e.at("end_sample").get<SampleIndex>();
        b.label = label_from_code(e.at("label").get<int>());
        b.kind = parse_frame_kind(e.at("kind").get<std::string>());
        if (b.start_sample >= b.end_sample) throw DataError("truth: start_sample >= end_sample");
        truth.push_back(b);
    }
    return truth;
}

void write_truth(const fs::path& path, const BurstTruth& truth) {
    write_text(path, truth_to_json(truth));
}

BurstTruth read_truth(const fs::path& path) { return truth_from_json(read_text(path)); }

std::string detections_to_json(const std::vector<DetectedBurst>& bursts) {
    ordered_json arr = ordered_json::array();
    for (const auto& b : bursts) {
        arr.push_back({{"start_sample", b.start_sample},
                       {"end_sample", b.end_sample},
                       {"peak_ratio", b.peak_ratio}});
    }
    return arr.dump(1) + "\n";
}

std::vector<DetectedBurst> detections_from_json(const std::string& text) {
    const auto arr = parse_json(text, "detections");
    if (!arr.is_array()) throw DataError("detections: expected a JSON array");
    std::vector<DetectedBurst> out;
    for (const auto& e : arr) {
        DetectedBurst b;
        b.start_sample = e.at("start_sample").get<SampleIndex>();
        b.end_sample = e.at("end_sample").get<SampleIndex>();
        b.peak_ratio = e.value("peak_ratio", 0.0);
        if (b.start_sample >= b.end_sample) throw DataError("detections: start_sample >= end_sample");
        out.push_back(b);
    }
    return out;
}

void write_detections(const fs::path& path, const std::vector<DetectedBurst>& bursts) {
    write_text(path, detections_to_json(bursts));
}

std::vector<DetectedBurst> read_detections(const fs::path& path) {
    return detections_from_json(read_text(path));
}

} // namespace protoid::io
