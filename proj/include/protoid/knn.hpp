#pragma once

// Brute-force k-nearest-neighbour classifier over standardized features.

#include "protoid/features.hpp"

#include <span>
#include <vector>

namespace protoid {

struct KnnModel {
    std::vector<FeaturePoint> points;
    std::vector<ProtocolLabel> labels;
    int k = 10;
    Standardization standardization;
    FeatureSet features = FeatureSet::TimePlusPapr;
};

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Stores the standardized training rows; nothing is fit.
KnnModel make_knn(const LabeledDataset& standardized, int k,
                  FeatureSet features = FeatureSet::TimePlusPapr);

/// The k closest rows, ascending by distance, ties by row index.
std::vector<Neighbor> k_nearest(const KnnModel& model, std::span<const double> x);

/// Majority vote. Vote ties go to the label whose tied neighbours have the
/// smaller summed distance, then to the smaller label code.
ProtocolLabel predict(const KnnModel& model, std::span<const double> x);

} // namespace protoid
