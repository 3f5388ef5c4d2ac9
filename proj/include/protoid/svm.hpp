#pragma once

// Soft-margin kernel SVM trained in the dual with SMO, and a one-vs-all
// three-class wrapper.

#include "protoid/features.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace protoid {

enum class KernelKind { Linear, Polynomial, Rbf };

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view text);

struct KernelSpec {
    KernelKind kind = KernelKind::Rbf;
    double poly_c = 1.0;
    int poly_p = 3;
    // Denominator of the Gaussian exponent. 0 means "pick with the median heuristic at training".
    double rbf_c = 0.0;

    /// Throws ConfigError. With `allow_auto`, rbf_c = 0 is accepted.
    void validate(bool allow_auto = false) const;
    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

/// 2 * median of pairwise squared distances.
double median_heuristic_rbf_c(std::span<const FeaturePoint> points);

struct BinarySvmModel {
    std::vector<FeaturePoint> support_vectors;
    std::vector<double> coeffs;                // alpha_i * y_i
    std::vector<std::size_t> support_indices;  // rows of the training set
    double bias = 0.0;
    KernelSpec kernel;
    double c_reg = 10.0;
    bool converged = false;
    std::size_t iterations = 0;
};

struct SmoOptions {
    double c_reg = 10.0;
    double tol = 1e-3;
    int max_passes = 100; // iteration budget is max_passes * n
};

/// `targets` must be +1/-1 with both signs present.
BinarySvmModel train_binary(std::span<const FeaturePoint> rows, std::span<const int> targets,
                            const KernelSpec& spec, const SmoOptions& options = {});

double decision_value(const BinarySvmModel& model, std::span<const double> x);

struct MultiClassSvmModel {
    std::array<BinarySvmModel, kNumLabels> per_class; // indexed by label code
    KernelSpec kernel;
    double c_reg = 10.0;
    Standardization standardization;
    FeatureSet features = FeatureSet::TimePlusPapr;
};

/// `ds` must be standardized. Class l gets target +1 in the l-th binary problem.
MultiClassSvmModel train_one_vs_all(const LabeledDataset& ds, const KernelSpec& spec,
                                    const SmoOptions& options = {},
                                    FeatureSet features = FeatureSet::TimePlusPapr);

std::array<double, kNumLabels> decision_values(const MultiClassSvmModel& model,
                                               std::span<const double> x);

/// Largest value wins; ties go to the smallest label code.
ProtocolLabel argmax_label(const std::array<double, kNumLabels>& values);

ProtocolLabel predict(const MultiClassSvmModel& model, std::span<const double> x);

} // namespace protoid
