#include "protoid/features.hpp"

#include "protoid/error.hpp"
#include "hash_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace protoid {

namespace {

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames{"frame_width_us",
                                                                   "silence_gap_us", "papr_db"};

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

double FeatureVector::operator[](std::size_t i) const {
    switch (i) {
    case 0: return frame_width_us;
    case 1: return silence_gap_us;
    case 2: return papr_db;
    }
    throw DataError("feature index out of range");
}

double& FeatureVector::operator[](std::size_t i) {
    switch (i) {
    case 0: return frame_width_us;
    case 1: return silence_gap_us;
    case 2: return papr_db;
    }
    throw DataError("feature index out of range");
}

std::string_view to_string(FeatureSet set) {
    return set == FeatureSet::TimeOnly ? "TimeOnly" : "TimePlusPapr";
}

FeatureSet parse_feature_set(std::string_view text) {
    if (text == "TimeOnly" || text == "time") return FeatureSet::TimeOnly;
    if (text == "TimePlusPapr" || text == "time+papr" || text == "all") {
        return FeatureSet::TimePlusPapr;
    }
    throw ConfigError("unknown feature set '" + std::string(text) + "'");
}

int dimension(FeatureSet set) { return set == FeatureSet::TimeOnly ? 2 : 3; }

FeaturePoint to_point(const FeatureVector& f, FeatureSet set) {
    if (set == FeatureSet::TimeOnly) return {f.frame_width_us, f.silence_gap_us};
    return {f.frame_width_us, f.silence_gap_us, f.papr_db};
}

FeatureVector Standardization::apply(const FeatureVector& raw) const {
    FeatureVector z;
    for (std::size_t i = 0; i < kNumFeatures; ++i) z[i] = (raw[i] - mean[i]) / stddev[i];
    return z;
}

FeatureVector Standardization::invert(const FeatureVector& z) const {
    FeatureVector raw;
    for (std::size_t i = 0; i < kNumFeatures; ++i) raw[i] = z[i] * stddev[i] + mean[i];
    return raw;
}

std::string Standardization::hash() const {
    std::string bytes;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        bytes += format_double(mean[i]) + "," + format_double(stddev[i]) + ";";
    }
    return detail::fnv1a_hex(bytes);
}

std::array<std::size_t, kNumLabels> LabeledDataset::class_counts() const {
    std::array<std::size_t, kNumLabels> counts{};
    for (const auto& r : rows) ++counts[static_cast<std::size_t>(code(r.label))];
    return counts;
}

double frame_width(const DetectedBurst& burst, double sample_rate_hz) {
    return static_cast<double>(burst.end_sample - burst.start_sample) / sample_rate_hz * 1e6;
}

double silence_gap(const DetectedBurst& prev, const DetectedBurst& cur, double sample_rate_hz) {
    if (prev.end_sample > cur.start_sample) {
        throw DataError("silence_gap: bursts overlap (previous ends at " +
                        std::to_string(prev.end_sample) + ", current starts at " +
                        std::to_string(cur.start_sample) + ")");
    }
    return static_cast<double>(cur.start_sample - prev.end_sample) / sample_rate_hz * 1e6;
}

double papr_linear(const IqRecording& rec, const DetectedBurst& burst) {
    if (burst.start_sample < 0 || burst.end_sample > rec.size() ||
        burst.start_sample >= burst.end_sample) {
        throw DataError("papr: burst span is empty or outside the recording");
    }
    double peak = 0.0;
    double sum = 0.0;
    for (SampleIndex i = burst.start_sample; i < burst.end_sample; ++i) {
        const double p = std::norm(std::complex<double>(rec.samples[static_cast<std::size_t>(i)]));
        peak = std::max(peak, p);
        sum += p;
    }
    if (sum <= 0.0) throw DataError("papr: all-zero span, PAPR undefined");
    const double mean = sum / static_cast<double>(burst.end_sample - burst.start_sample);
    return std::max(peak / mean, 1.0);
}

double papr(const IqRecording& rec, const DetectedBurst& burst) {
    return 10.0 * std::log10(papr_linear(rec, burst));
}

std::vector<FeatureVector> extract_features(const IqRecording& rec,
                                            std::span<const DetectedBurst> bursts) {
    std::vector<FeatureVector> out;
    for (std::size_t i = 1; i < bursts.size(); ++i) {
        out.push_back({frame_width(bursts[i], rec.sample_rate_hz),
                       silence_gap(bursts[i - 1], bursts[i], rec.sample_rate_hz),
                       papr(rec, bursts[i])});
    }
    return out;
}

LabeledDataset extract_dataset(const IqRecording& rec, std::span<const DetectedBurst> bursts,
                               std::span<const std::optional<ProtocolLabel>> labels) {
    if (labels.size() != bursts.size()) {
        throw DataError("extract_dataset: labels are not aligned with bursts");
    }
    LabeledDataset ds;
    for (std::size_t i = 1; i < bursts.size(); ++i) {
        if (bursts[i - 1].start_sample > bursts[i].start_sample) {
            throw DataError("extract_dataset: bursts are not sorted");
        }
        if (!labels[i]) continue;
        ds.rows.push_back({{frame_width(bursts[i], rec.sample_rate_hz),
                            silence_gap(bursts[i - 1], bursts[i], rec.sample_rate_hz),
                            papr(rec, bursts[i])},
                           *labels[i]});
    }
    return ds;
}

LabeledDataset extract_dataset(const IqRecording& rec, std::span<const DetectedBurst> bursts,
                               ProtocolLabel label) {
    const std::vector<std::optional<ProtocolLabel>> labels(bursts.size(), label);
    return extract_dataset(rec, bursts, labels);
}

Standardization fit_standardization(const LabeledDataset& ds, FeatureSet set) {
    if (ds.empty()) throw DataError("cannot fit standardization on an empty dataset");
    Standardization s;
    const double n = static_cast<double>(ds.size());
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        double sum = 0.0;
        for (const auto& r : ds.rows) sum += r.features[f];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : ds.rows) ss += (r.features[f] - mean) * (r.features[f] - mean);
        const double sd = std::sqrt(ss / n);
        const bool used = static_cast<int>(f) < dimension(set);
        if (!(sd > 0.0)) {
            if (used) {
                throw ConfigError("standardize: feature '" + std::string(kFeatureNames[f]) +
                                  "' has zero variance");
            }
            s.mean[f] = mean;
            s.stddev[f] = 1.0;
            continue;
        }
        s.mean[f] = mean;
        s.stddev[f] = sd;
    }
    return s;
}

LabeledDataset standardize(const LabeledDataset& ds, const std::optional<Standardization>& stats,
                           FeatureSet set) {
    const Standardization s = stats ? *stats : fit_standardization(ds, set);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (!(s.stddev[f] > 0.0)) {
            throw ConfigError("standardize: feature '" + std::string(kFeatureNames[f]) +
                              "' has non-positive stddev");
        }
    }
    LabeledDataset out;
    out.rows.reserve(ds.size());
    for (const auto& r : ds.rows) out.rows.push_back({s.apply(r.features), r.label});
    out.standardization = s;
    return out;
}

LabeledDataset destandardize(const LabeledDataset& ds) {
    if (!ds.standardization) throw DataError("destandardize: dataset carries no statistics");
    LabeledDataset out;
    out.rows.reserve(ds.size());
    for (const auto& r : ds.rows) out.rows.push_back({ds.standardization->invert(r.features), r.label});
    return out;
}

void append(LabeledDataset& into, const LabeledDataset& from) {
    into.rows.insert(into.rows.end(), from.rows.begin(), from.rows.end());
}

std::string dataset_to_csv(const LabeledDataset& ds) {
    std::string out = "frame_width_us,silence_gap_us,papr_db,label\n";
    for (const auto& r : ds.rows) {
        out += format_double(r.features.frame_width_us) + "," +
               format_double(r.features.silence_gap_us) + "," +
               format_double(r.features.papr_db) + "," + std::to_string(code(r.label)) + "\n";
    }
    return out;
}

LabeledDataset dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset CSV: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "frame_width_us,silence_gap_us,papr_db,label") {
        throw DataError("dataset CSV: unexpected header '" + line + "'");
    }
    LabeledDataset ds;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string cell;
        std::array<double, kNumFeatures> v{};
        int label = -1;
        try {
            for (std::size_t i = 0; i < kNumFeatures; ++i) {
                if (!std::getline(fields, cell, ',')) throw std::invalid_argument("short row");
                std::size_t used = 0;
                v[i] = std::stod(cell, &used);
                if (used != cell.size() || !std::isfinite(v[i])) {
                    throw std::invalid_argument("bad number");
                }
            }
            if (!std::getline(fields, cell, ',')) throw std::invalid_argument("short row");
            std::size_t used = 0;
            label = std::stoi(cell, &used);
            if (used != cell.size()) throw std::invalid_argument("bad label");
        } catch (const std::exception&) {
            throw DataError("dataset CSV: malformed row at line " + std::to_string(line_no));
        }
        ds.rows.push_back({{v[0], v[1], v[2]}, label_from_code(label)});
    }
    return ds;
}

std::string standardization_to_json(const Standardization& s) {
    nlohmann::ordered_json j;
    j["features"] = kFeatureNames;
    j["mean"] = s.mean;
    j["stddev"] = s.stddev;
    j["hash"] = s.hash();
    return j.dump(2) + "\n";
}

Standardization standardization_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        Standardization s;
        s.mean = j.at("mean").get<std::array<double, kNumFeatures>>();
        s.stddev = j.at("stddev").get<std::array<double, kNumFeatures>>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("standardization JSON: ") + e.what());
    }
}

} // namespace protoid
