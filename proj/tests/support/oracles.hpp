#pragma once

// Independent reference computations used to check the library. None of these
// call into the code they verify beyond plain data types.

#include "protoid/burst_detect.hpp"
#include "protoid/knn.hpp"
#include "protoid/signal_model.hpp"
#include "protoid/svm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

namespace oracle {

using protoid::SampleIndex;

struct Interval {
    SampleIndex start = 0;
    SampleIndex end = 0;
    friend bool operator==(const Interval&, const Interval&) = default;
};

// Maximal runs of samples with |x|^2 > threshold.
inline std::vector<Interval> envelope_runs(const protoid::IqRecording& rec, double threshold = 0.0) {
    std::vector<Interval> runs;
    bool inside = false;
    for (SampleIndex i = 0; i < rec.size(); ++i) {
        const auto& s = rec.samples[static_cast<std::size_t>(i)];
        const double p = double(s.real()) * s.real() + double(s.imag()) * s.imag();
        if (p > threshold && !inside) {
            runs.push_back({i, i});
            inside = true;
        } else if (p <= threshold && inside) {
            runs.back().end = i;
            inside = false;
        }
    }
    if (inside) runs.back().end = rec.size();
    return runs;
}

// Gap before each burst (first burst excluded), in samples.
inline std::vector<SampleIndex> interval_gaps(const protoid::BurstTruth& truth) {
    std::vector<SampleIndex> gaps;
    for (std::size_t i = 1; i < truth.size(); ++i) {
        gaps.push_back(truth[i].start_sample - truth[i - 1].end_sample);
    }
    return gaps;
}

// Fraction of bursts overlapping any other burst, by exhaustive pairwise scan.
inline double overlap_fraction(const protoid::BurstTruth& truth) {
    if (truth.empty()) return 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        for (std::size_t j = 0; j < truth.size(); ++j) {
            if (i == j) continue;
            if (truth[i].start_sample < truth[j].end_sample &&
                truth[j].start_sample < truth[i].end_sample) {
                ++count;
                break;
            }
        }
    }
    return double(count) / double(truth.size());
}

inline double papr_db(const protoid::IqRecording& rec, SampleIndex start, SampleIndex end) {
    double peak = 0.0;
    long double total = 0.0L;
    for (SampleIndex i = start; i < end; ++i) {
        const auto s = std::complex<long double>(rec.samples[static_cast<std::size_t>(i)]);
        const long double p = std::norm(s);
        peak = std::max(peak, double(p));
        total += p;
    }
    const double mean = double(total / (end - start));
    return 10.0 * std::log10(peak / mean);
}

// Centred moving average computed directly for every index.
inline std::vector<double> smooth_power(const protoid::IqRecording& rec, int smooth_len) {
    const SampleIndex n = rec.size();
    const SampleIndex lo_off = smooth_len / 2;
    const SampleIndex hi_off = smooth_len - 1 - smooth_len / 2;
    std::vector<double> out(static_cast<std::size_t>(n));
    for (SampleIndex k = 0; k < n; ++k) {
        const SampleIndex a = std::max<SampleIndex>(0, k - lo_off);
        const SampleIndex b = std::min<SampleIndex>(n - 1, k + hi_off);
        long double s = 0.0L;
        for (SampleIndex i = a; i <= b; ++i) s += std::norm(std::complex<long double>(rec.samples[std::size_t(i)]));
        out[std::size_t(k)] = double(s / (b - a + 1));
    }
    return out;
}

// ---- SVM ------------------------------------------------------------------

inline double kernel(const protoid::KernelSpec& spec, const std::vector<double>& a,
                     const std::vector<double>& b) {
    double dot = 0.0, d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        d2 += (a[i] - b[i]) * (a[i] - b[i]);
    }
    switch (spec.kind) {
    case protoid::KernelKind::Linear: return dot;
    case protoid::KernelKind::Polynomial: {
        double r = 1.0;
        for (int p = 0; p < spec.poly_p; ++p) r *= dot + spec.poly_c;
        return r;
    }
    case protoid::KernelKind::Rbf: return std::exp(-d2 / spec.rbf_c);
    }
    return 0.0;
}

struct KktReport {
    double max_violation = 0.0;   // worst KKT residual over all training points
    double equality_residual = 0.0; // |sum alpha_i y_i|
    bool box_ok = true;           // 0 <= alpha_i <= C
    bool ok(double tol) const { return box_ok && max_violation <= tol && equality_residual <= tol; }
};

// Recomputes f(x_i) for every training row from the model's support expansion
// and checks the soft-margin optimality conditions.
inline KktReport kkt_audit(const protoid::BinarySvmModel& m, const std::vector<std::vector<double>>& rows,
                           const std::vector<int>& y) {
    KktReport r;
    std::vector<double> alpha(rows.size(), 0.0);
    for (std::size_t s = 0; s < m.support_indices.size(); ++s) {
        alpha[m.support_indices[s]] = m.coeffs[s] * y[m.support_indices[s]];
    }
    const double c = m.c_reg;
    const double at_bound = 1e-12 * std::max(1.0, c);
    long double eq = 0.0L;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double a = alpha[i];
        eq += a * y[i];
        if (a < -at_bound || a > c + at_bound) r.box_ok = false;
        double f = m.bias;
        for (std::size_t s = 0; s < m.support_indices.size(); ++s) {
            f += m.coeffs[s] * kernel(m.kernel, rows[m.support_indices[s]], rows[i]);
        }
        const double margin = y[i] * f;
        double v = 0.0;
        if (a <= at_bound) {
            v = std::max(0.0, 1.0 - margin);
        } else if (a >= c - at_bound) {
            v = std::max(0.0, margin - 1.0);
        } else {
            v = std::abs(margin - 1.0);
        }
        r.max_violation = std::max(r.max_violation, v);
    }
    r.equality_residual = double(std::fabs(eq));
    return r;
}

// Explicit primal weights of a linear-kernel model.
inline std::vector<double> primal_weights(const protoid::BinarySvmModel& m, std::size_t dim) {
    std::vector<double> w(dim, 0.0);
    for (std::size_t s = 0; s < m.support_vectors.size(); ++s) {
        for (std::size_t d = 0; d < dim; ++d) w[d] += m.coeffs[s] * m.support_vectors[s][d];
    }
    return w;
}

// ---- KNN ------------------------------------------------------------------

// Full sort of every training row, then the vote with the documented tie rules.
inline int knn_predict(const std::vector<std::vector<double>>& points, const std::vector<int>& labels,
                       int k, const std::vector<double>& x) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) s += (points[i][d] - x[d]) * (points[i][d] - x[d]);
        all.emplace_back(std::sqrt(s), i);
    }
    std::sort(all.begin(), all.end());
    std::map<int, std::pair<int, double>> tally; // label -> (votes, summed distance)
    for (int i = 0; i < k; ++i) {
        auto& t = tally[labels[all[std::size_t(i)].second]];
        t.first += 1;
        t.second += all[std::size_t(i)].first;
    }
    int best = -1;
    std::pair<int, double> best_t{-1, 0.0};
    for (const auto& [label, t] : tally) {
        const bool better = t.first > best_t.first ||
                            (t.first == best_t.first && t.second < best_t.second);
        if (best < 0 || better) {
            best = label;
            best_t = t;
        }
    }
    return best;
}

// ---- eval -----------------------------------------------------------------

template <class Matrix>
double recount_accuracy(const Matrix& confusion) {
    double diag = 0.0, total = 0.0;
    for (std::size_t i = 0; i < confusion.size(); ++i) {
        for (std::size_t j = 0; j < confusion[i].size(); ++j) {
            total += double(confusion[i][j]);
            if (i == j) diag += double(confusion[i][j]);
        }
    }
    return total > 0 ? diag / total : 0.0;
}

// Drops in a sequence that should be non-decreasing: (count, largest drop).
inline std::pair<int, double> inversions(const std::vector<double>& v) {
    int count = 0;
    double worst = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] < v[i - 1]) {
            ++count;
            worst = std::max(worst, v[i - 1] - v[i]);
        }
    }
    return {count, worst};
}

// 64-bit FNV-1a over raw bytes, for file comparisons.
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace oracle
