#pragma once

// Per-frame features: frame width, preceding silence gap, and PAPR.

#include "protoid/burst_detect.hpp"
#include "protoid/signal_model.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace protoid {

inline constexpr int kNumFeatures = 3;

struct FeatureVector {
    double frame_width_us = 0.0;
    double silence_gap_us = 0.0;
    double papr_db = 0.0;

    double operator[](std::size_t i) const;
    double& operator[](std::size_t i);
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

enum class FeatureSet { TimeOnly, TimePlusPapr };

std::string_view to_string(FeatureSet set);
FeatureSet parse_feature_set(std::string_view text);
int dimension(FeatureSet set);

/// Point used by the classifiers: the first dimension(set) features.
using FeaturePoint = std::vector<double>;
FeaturePoint to_point(const FeatureVector& f, FeatureSet set);

/// Population mean and standard deviation per feature.
struct Standardization {
    std::array<double, kNumFeatures> mean{};
    std::array<double, kNumFeatures> stddev{1.0, 1.0, 1.0};

    FeatureVector apply(const FeatureVector& raw) const;
    FeatureVector invert(const FeatureVector& z) const;
    /// Hex digest used to pair datasets and models standardized the same way.
    std::string hash() const;
    friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct LabeledRow {
    FeatureVector features;
    ProtocolLabel label = ProtocolLabel::Wifi;
    friend bool operator==(const LabeledRow&, const LabeledRow&) = default;
};

struct LabeledDataset {
    std::vector<LabeledRow> rows;
    std::optional<Standardization> standardization;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
    std::array<std::size_t, kNumLabels> class_counts() const;
};

double frame_width(const DetectedBurst& burst, double sample_rate_hz);
double silence_gap(const DetectedBurst& prev, const DetectedBurst& cur, double sample_rate_hz);
/// Peak-to-average power ratio of the burst's samples, in dB.
double papr(const IqRecording& rec, const DetectedBurst& burst);
double papr_linear(const IqRecording& rec, const DetectedBurst& burst);

/// Features for every burst except the first, whose gap is undefined.
std::vector<FeatureVector> extract_features(const IqRecording& rec,
                                            std::span<const DetectedBurst> bursts);

/// Like extract_features but labelled. `labels` is aligned with `bursts`; rows
/// whose label is absent (false alarms) are skipped, though their interval still
/// defines the gap of the following burst.
LabeledDataset extract_dataset(const IqRecording& rec, std::span<const DetectedBurst> bursts,
                               std::span<const std::optional<ProtocolLabel>> labels);
LabeledDataset extract_dataset(const IqRecording& rec, std::span<const DetectedBurst> bursts,
                               ProtocolLabel label);

Standardization fit_standardization(const LabeledDataset& ds,
                                    FeatureSet set = FeatureSet::TimePlusPapr);

/// Z-scores every feature. With `stats` absent they are fit on `ds` itself.
/// Throws ConfigError naming the feature if a used feature has zero variance.
LabeledDataset standardize(const LabeledDataset& ds,
                           const std::optional<Standardization>& stats = std::nullopt,
                           FeatureSet set = FeatureSet::TimePlusPapr);

/// Inverse of standardize using the recorded statistics.
LabeledDataset destandardize(const LabeledDataset& ds);

void append(LabeledDataset& into, const LabeledDataset& from);

/// CSV with header `frame_width_us,silence_gap_us,papr_db,label`.
std::string dataset_to_csv(const LabeledDataset& ds);
LabeledDataset dataset_from_csv(const std::string& text);

std::string standardization_to_json(const Standardization& s);
Standardization standardization_from_json(const std::string& text);

} // namespace protoid
