#include "protoid/knn.hpp"

#include "protoid/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace protoid {

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DataError("euclidean_distance: dimension mismatch (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
    }
    double s = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) s += (a[r] - b[r]) * (a[r] - b[r]);
    return std::sqrt(s);
}

KnnModel make_knn(const LabeledDataset& standardized, int k, FeatureSet features) {
    if (!standardized.standardization) throw DataError("make_knn: dataset must be standardized");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (static_cast<std::size_t>(k) > standardized.size()) {
        throw ConfigError("k = " + std::to_string(k) + " exceeds the " +
                          std::to_string(standardized.size()) + " training rows");
    }
    KnnModel model;
    model.k = k;
    model.features = features;
    model.standardization = *standardized.standardization;
    model.points.reserve(standardized.size());
    model.labels.reserve(standardized.size());
    for (const auto& r : standardized.rows) {
        model.points.push_back(to_point(r.features, features));
        model.labels.push_back(r.label);
    }
    return model;
}

std::vector<Neighbor> k_nearest(const KnnModel& model, std::span<const double> x) {
    std::vector<Neighbor> all(model.points.size());
    for (std::size_t i = 0; i < model.points.size(); ++i) {
        all[i] = {i, euclidean_distance(model.points[i], x)};
    }
    const auto k = std::min(static_cast<std::size_t>(model.k), all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                          return a.distance < b.distance ||
                                 (a.distance == b.distance && a.index < b.index);
                      });
    all.resize(k);
    return all;
}

ProtocolLabel predict(const KnnModel& model, std::span<const double> x) {
    std::array<int, kNumLabels> votes{};
    std::array<double, kNumLabels> dist{};
    for (const auto& nb : k_nearest(model, x)) {
        const auto l = static_cast<std::size_t>(code(model.labels[nb.index]));
        ++votes[l];
        dist[l] += nb.distance;
    }
    std::size_t best = 0;
    for (std::size_t l = 1; l < kNumLabels; ++l) {
        if (votes[l] > votes[best] || (votes[l] == votes[best] && dist[l] < dist[best])) best = l;
    }
    return label_from_code(static_cast<int>(best));
}

} // namespace protoid
