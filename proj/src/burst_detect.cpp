#include "protoid/burst_detect.hpp"

#include "protoid/error.hpp"

#include <algorithm>
#include <cmath>

namespace protoid {

namespace {

// Running sum of power[start, start+len) that is recomputed from scratch every
// kRefresh steps so rounding drift stays far below floor_eps.
class WindowSum {
public:
    WindowSum(std::span<const double> power, SampleIndex start, int len)
        : power_(power), start_(start), len_(len) {
        refresh();
    }

    double value() const { return std::max(sum_, 0.0); }

    void advance() {
        sum_ += power_[static_cast<std::size_t>(start_ + len_)] -
                power_[static_cast<std::size_t>(start_)];
        ++start_;
        if (++steps_ % kRefresh == 0) refresh();
    }

private:
    static constexpr int kRefresh = 4096;

    void refresh() {
        sum_ = 0.0;
        for (SampleIndex i = start_; i < start_ + len_; ++i) sum_ += power_[static_cast<std::size_t>(i)];
    }

    std::span<const double> power_;
    SampleIndex start_;
    int len_;
    double sum_ = 0.0;
    long steps_ = 0;
};

// Trailing window [k-L+1, k] and leading window [k+delta, k+delta+L-1].
class RatioTracker {
public:
    RatioTracker(std::span<const double> power, SampleIndex k0, int len, int delta, double eps)
        : trailing_(power, k0 - len + 1, len), leading_(power, k0 + delta, len), eps_(eps) {}

    double ratio() const { return (leading_.value() + eps_) / (trailing_.value() + eps_); }

    void advance() {
        trailing_.advance();
        leading_.advance();
    }

private:
    WindowSum trailing_;
    WindowSum leading_;
    double eps_;
};

SampleIndex us_to_samples(double us, double rate) { return std::llround(us * rate * 1e-6); }

std::vector<DetectedBurst> debounce(std::vector<DetectedBurst> raw, const DetectorConfig& cfg,
                                    double rate) {
    const SampleIndex min_gap = us_to_samples(cfg.min_gap_us, rate);
    const SampleIndex min_burst = us_to_samples(cfg.min_burst_us, rate);
    std::vector<DetectedBurst> merged;
    for (const auto& b : raw) {
        if (!merged.empty() && b.start_sample - merged.back().end_sample < min_gap) {
            merged.back().end_sample = std::max(merged.back().end_sample, b.end_sample);
            merged.back().peak_ratio = std::max(merged.back().peak_ratio, b.peak_ratio);
        } else {
            merged.push_back(b);
        }
    }
    std::erase_if(merged, [&](const DetectedBurst& b) { return b.width() < min_burst; });
    return merged;
}

} // namespace

void DetectorConfig::validate() const {
    if (!(alpha > 1.0) || !std::isfinite(alpha)) throw ConfigError("alpha must exceed 1");
    if (window_len_rising < 1 || window_len_falling < 1) {
        throw ConfigError("window lengths must be >= 1");
    }
    if (gap_delta < 0) throw ConfigError("gap_delta must be >= 0");
    if (smooth_len < 1) throw ConfigError("smooth_len must be >= 1");
    if (!(floor_eps > 0.0)) throw ConfigError("floor_eps must be positive");
    if (!(min_burst_us >= 0.0) || !(min_gap_us >= 0.0)) {
        throw ConfigError("min_burst_us and min_gap_us must be non-negative");
    }
}

std::vector<double> smooth_power(const IqRecording& rec, int smooth_len) {
    const auto n = rec.size();
    if (n == 0) throw DataError("smooth_power: empty recording");
    if (smooth_len < 1 || smooth_len > n) {
        throw ConfigError("smooth_power: smooth_len must be in [1, recording length]");
    }
    std::vector<double> inst(static_cast<std::size_t>(n));
    for (SampleIndex i = 0; i < n; ++i) {
        inst[static_cast<std::size_t>(i)] =
            std::norm(std::complex<double>(rec.samples[static_cast<std::size_t>(i)]));
    }
    if (smooth_len == 1) return inst;

    // Window for output k is [k - before, k + after].
    const SampleIndex before = smooth_len / 2;
    const SampleIndex after = smooth_len - 1 - before;
    std::vector<double> out(static_cast<std::size_t>(n));
    double sum = 0.0;
    SampleIndex lo = 0;  // inclusive bounds of the current window
    SampleIndex hi = -1;
    for (SampleIndex k = 0; k < n; ++k) {
        const SampleIndex want_lo = std::max<SampleIndex>(0, k - before);
        const SampleIndex want_hi = std::min<SampleIndex>(n - 1, k + after);
        while (hi < want_hi) sum += inst[static_cast<std::size_t>(++hi)];
        while (lo < want_lo) sum -= inst[static_cast<std::size_t>(lo++)];
        if (k % 4096 == 0) {
            sum = 0.0;
            for (SampleIndex i = lo; i <= hi; ++i) sum += inst[static_cast<std::size_t>(i)];
        }
        out[static_cast<std::size_t>(k)] = std::max(sum, 0.0) / static_cast<double>(hi - lo + 1);
    }
    return out;
}

double energy_ratio(std::span<const double> power, SampleIndex k, int window_len, int delta,
                    double floor_eps) {
    const auto n = static_cast<SampleIndex>(power.size());
    if (window_len < 1 || delta < 0) throw ConfigError("energy_ratio: bad window geometry");
    if (k - window_len + 1 < 0 || k + delta + window_len - 1 >= n) {
        throw DataError("energy_ratio: index " + std::to_string(k) + " out of range");
    }
    double trailing = 0.0;
    double leading = 0.0;
    for (SampleIndex i = k - window_len + 1; i <= k; ++i) trailing += power[static_cast<std::size_t>(i)];
    for (SampleIndex i = k + delta; i < k + delta + window_len; ++i) {
        leading += power[static_cast<std::size_t>(i)];
    }
    return (leading + floor_eps) / (trailing + floor_eps);
}

std::vector<DetectedBurst> detect_bursts(const IqRecording& rec, const DetectorConfig& cfg) {
    cfg.validate();
    const auto n = rec.size();
    const int wmax = cfg.max_window();
    if (n <= 2 * static_cast<SampleIndex>(wmax) + cfg.gap_delta) {
        throw DataError("detect_bursts: recording shorter than 2 * window + delta");
    }
    const auto power = smooth_power(rec, std::min<SampleIndex>(cfg.smooth_len, n));
    const SampleIndex first = wmax - 1;
    const SampleIndex last = n - cfg.gap_delta - wmax; // inclusive
    if (last < first) return {};

    RatioTracker rising(power, first, cfg.window_len_rising, cfg.gap_delta, cfg.floor_eps);
    RatioTracker falling(power, first, cfg.window_len_falling, cfg.gap_delta, cfg.floor_eps);
    const double low = 1.0 / cfg.alpha;
    const SampleIndex half_gap = cfg.gap_delta / 2;

    std::vector<DetectedBurst> raw;
    bool in_burst = false;
    bool in_run = false;
    double best = 0.0;
    SampleIndex best_k = 0;
    SampleIndex open_start = 0;
    double open_peak = 0.0;

    for (SampleIndex k = first; k <= last; ++k) {
        if (k > first) {
            rising.advance();
            falling.advance();
        }
        // A committed edge can be followed by the opposite crossing at the same k.
        for (int pass = 0; pass < 2; ++pass) {
            if (!in_burst) {
                const double r = rising.ratio();
                if (r > cfg.alpha) {
                    if (!in_run || r > best) {
                        best = r;
                        best_k = k;
                    }
                    in_run = true;
                    break;
                }
                if (!in_run) break;
                open_start = best_k + half_gap;
                open_peak = best;
                in_burst = true;
                in_run = false;
            } else {
                const double r = falling.ratio();
                if (r < low) {
                    if (!in_run || r < best) {
                        best = r;
                        best_k = k;
                    }
                    in_run = true;
                    break;
                }
                if (!in_run) break;
                const SampleIndex end = best_k + half_gap;
                if (end > open_start) raw.push_back({open_start, end, open_peak});
                in_burst = false;
                in_run = false;
            }
        }
    }
    if (in_run && !in_burst) {
        open_start = best_k + half_gap;
        open_peak = best;
        in_burst = true;
        in_run = false;
    }
    if (in_burst) {
        const SampleIndex end = in_run ? best_k + half_gap : n;
        if (end > open_start) raw.push_back({open_start, end, open_peak});
    }
    return debounce(std::move(raw), cfg, rec.sample_rate_hz);
}

double DetectionScore::recall() const {
    return truth_count == 0 ? 1.0
                            : static_cast<double>(matched_truth) / static_cast<double>(truth_count);
}

double DetectionScore::precision() const {
    return detected_count == 0 ? 1.0
                               : static_cast<double>(matched_detections) /
                                     static_cast<double>(detected_count);
}

std::ptrdiff_t match_truth(const DetectedBurst& det, const BurstTruth& truth) {
    // Truth is sorted by start but may overlap (Mixed), so ends are not monotone.
    SampleIndex max_width = 0;
    for (const auto& t : truth) max_width = std::max(max_width, t.width());
    auto it = std::lower_bound(truth.begin(), truth.end(), det.end_sample,
                               [](const TruthBurst& t, SampleIndex s) { return t.start_sample < s; });
    std::ptrdiff_t best = -1;
    SampleIndex best_overlap = 0;
    while (it != truth.begin()) {
        --it;
        if (it->start_sample + max_width <= det.start_sample) break;
        const SampleIndex overlap = std::min(it->end_sample, det.end_sample) -
                                    std::max(it->start_sample, det.start_sample);
        if (overlap <= 0) continue;
        // >= so that the earlier burst wins ties while scanning backwards
        if (2 * overlap >= it->width() && overlap >= best_overlap) {
            best_overlap = overlap;
            best = it - truth.begin();
        }
    }
    return best;
}

DetectionScore score_detections(std::span<const DetectedBurst> detected, const BurstTruth& truth) {
    DetectionScore score;
    score.truth_count = truth.size();
    score.detected_count = detected.size();
    std::vector<int> hits(truth.size(), 0);
    std::vector<std::ptrdiff_t> owner(truth.size(), -1);
    for (std::size_t d = 0; d < detected.size(); ++d) {
        const auto t = match_truth(detected[d], truth);
        if (t < 0) continue;
        ++score.matched_detections;
        if (hits[static_cast<std::size_t>(t)]++ == 0) owner[static_cast<std::size_t>(t)] = static_cast<std::ptrdiff_t>(d);
    }
    for (std::size_t t = 0; t < truth.size(); ++t) {
        if (hits[t] == 0) continue;
        ++score.matched_truth;
        if (hits[t] != 1) continue;
        const auto& d = detected[static_cast<std::size_t>(owner[t])];
        const SampleIndex err = std::max(std::llabs(d.start_sample - truth[t].start_sample),
                                         std::llabs(d.end_sample - truth[t].end_sample));
        score.max_boundary_error = std::max(score.max_boundary_error, err);
    }
    return score;
}

DetectedBurst to_detected(const TruthBurst& truth) {
    return {truth.start_sample, truth.end_sample, 0.0};
}

std::vector<DetectedBurst> to_detected(const BurstTruth& truth) {
    std::vector<DetectedBurst> out;
    out.reserve(truth.size());
    for (const auto& t : truth) out.push_back(to_detected(t));
    return out;
}

} // namespace protoid
