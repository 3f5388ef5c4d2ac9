#pragma once

// Blind burst detection with a twin sliding window.
//
// The instantaneous power is smoothed with a centred moving average. At every
// point k a trailing window [k-L+1, k] and a leading window [k+delta,
// k+delta+L-1] are summed; their ratio (leading / trailing) crossing alpha
// marks a rising edge and crossing 1/alpha marks a falling edge. The gap delta
// between the two windows is what distinguishes this from the classic
// back-to-back window detector.

#include "protoid/signal_model.hpp"

#include <algorithm>
#include <span>
#include <vector>

namespace protoid {

struct DetectorConfig {
    double alpha = 2.7;
    int window_len_rising = 64;
    int window_len_falling = 64;
    int gap_delta = 64;
    int smooth_len = 64;
    double floor_eps = 1e-9;
    double min_burst_us = 20.0;
    double min_gap_us = 5.0;

    void validate() const;
    int max_window() const { return std::max(window_len_rising, window_len_falling); }
};

struct DetectedBurst {
    SampleIndex start_sample = 0;
    SampleIndex end_sample = 0; // exclusive
    double peak_ratio = 0.0;

    SampleIndex width() const { return end_sample - start_sample; }
    friend bool operator==(const DetectedBurst&, const DetectedBurst&) = default;
};

/// Centred moving average of |x|^2; windows shrink at the recording edges.
std::vector<double> smooth_power(const IqRecording& rec, int smooth_len);

/// Leading-over-trailing window energy ratio at index k.
double energy_ratio(std::span<const double> power, SampleIndex k, int window_len, int delta,
                    double floor_eps);

std::vector<DetectedBurst> detect_bursts(const IqRecording& rec, const DetectorConfig& cfg);

/// Detection quality against ground truth. A detection matches the truth burst
/// it overlaps most, provided the overlap covers at least half of that burst.
struct DetectionScore {
    std::size_t truth_count = 0;
    std::size_t detected_count = 0;
    std::size_t matched_truth = 0;     // truth bursts with at least one matching detection
    std::size_t matched_detections = 0;
    SampleIndex max_boundary_error = 0; // over one-to-one matched pairs

    double recall() const;
    double precision() const;
};

/// Index into `truth` of the burst a detection is attributed to, or -1.
std::ptrdiff_t match_truth(const DetectedBurst& det, const BurstTruth& truth);

DetectionScore score_detections(std::span<const DetectedBurst> detected, const BurstTruth& truth);

DetectedBurst to_detected(const TruthBurst& truth);
std::vector<DetectedBurst> to_detected(const BurstTruth& truth);

} // namespace protoid
