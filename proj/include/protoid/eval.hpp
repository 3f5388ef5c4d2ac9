#pragma once

// Experiment orchestration: train/test split, classifier training by method
// name, confusion-matrix evaluation, the clean-train / noisy-test SNR study,
// and report serialization.

#include "protoid/burst_detect.hpp"
#include "protoid/features.hpp"
#include "protoid/knn.hpp"
#include "protoid/signal_model.hpp"
#include "protoid/svm.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace protoid {

enum class Method { SvmLinear, SvmPoly, SvmRbf, Knn };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct ClassifierSpec {
    Method method = Method::Knn;
    FeatureSet features = FeatureSet::TimePlusPapr;
    double c_reg = 10.0;
    double tol = 1e-3;
    int max_passes = 100;
    double poly_c = 1.0;
    int poly_p = 3;
    double rbf_c = 0.0; // 0: median heuristic
    int k = 10;

    KernelSpec kernel() const;
};

using TrainedModel = std::variant<MultiClassSvmModel, KnnModel>;

/// Fits standardization on `raw_train`, then trains the requested classifier.
TrainedModel train(const ClassifierSpec& spec, const LabeledDataset& raw_train);

const Standardization& standardization_of(const TrainedModel& model);
FeatureSet features_of(const TrainedModel& model);
std::string method_name(const TrainedModel& model);

/// `x` is a standardized feature vector.
ProtocolLabel predict(const TrainedModel& model, const FeatureVector& x);

using ConfusionMatrix = std::array<std::array<std::size_t, kNumLabels>, kNumLabels>;

struct SnrPoint {
    double snr_db = 0.0;
    std::size_t detected_frames = 0;
    std::size_t false_alarms = 0;
    std::size_t classified_frames = 0;
    std::optional<double> accuracy;
    friend bool operator==(const SnrPoint&, const SnrPoint&) = default;
};

struct EvalReport {
    std::string method;
    FeatureSet features_used = FeatureSet::TimePlusPapr;
    double accuracy = 0.0;
    ConfusionMatrix confusion{}; // rows = truth, columns = predicted
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<SnrPoint> per_snr;
    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct SplitResult {
    LabeledDataset train;
    LabeledDataset test;
};

/// Test size is floor(N * test_fraction), at least 1. Stratified mode keeps
/// per-class proportions within one row.
SplitResult split_train_test(const LabeledDataset& ds, double test_fraction, std::uint64_t seed,
                             bool stratified = true);

/// `test` must carry the model's standardization.
EvalReport evaluate(const TrainedModel& model, const LabeledDataset& test,
                    std::size_t n_train = 0);

struct TestRecording {
    IqRecording recording;
    BurstTruth truth;
};

struct NoiseStudyOptions {
    std::vector<double> snr_grid_db{0, 2, 5, 8, 10, 15, 20, 30};
    std::uint64_t seed = 0;
    DetectorConfig detector;
};

/// Per-frame labels for detections by truth overlap; false alarms are nullopt.
std::vector<std::optional<ProtocolLabel>> label_detections(std::span<const DetectedBurst> detected,
                                                           const BurstTruth& truth);

/// Trains every spec on the clean `train_ds`, then for each SNR adds noise to
/// each test recording, re-detects, re-extracts, and classifies the detected
/// frames. The top-level accuracy of each report is the noise-free pass.
std::vector<EvalReport> run_noise_study(const LabeledDataset& train_ds,
                                        const std::vector<ClassifierSpec>& specs,
                                        const std::vector<TestRecording>& test_recordings,
                                        const NoiseStudyOptions& options);

/// Same as above with already-trained models.
std::vector<EvalReport> run_noise_study(const std::vector<TrainedModel>& models,
                                        std::size_t n_train,
                                        const std::vector<TestRecording>& test_recordings,
                                        const NoiseStudyOptions& options);

enum class ReportFormat { Json, Csv };
ReportFormat parse_report_format(std::string_view text);

/// CSV columns: method,features,snr_db,detected_frames,accuracy. Each report
/// contributes one `clean` row plus one row per SNR point.
std::string emit_report(const std::vector<EvalReport>& reports, ReportFormat format);
std::vector<EvalReport> reports_from_json(const std::string& text);

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);

} // namespace protoid
