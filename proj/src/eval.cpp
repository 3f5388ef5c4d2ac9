#include "protoid/eval.hpp"

#include "protoid/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace protoid {

using nlohmann::ordered_json;

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string format_snr(double snr) {
    if (std::isinf(snr)) return snr > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", snr);
    return buf;
}

ordered_json snr_to_json(double snr) {
    if (std::isinf(snr)) return format_snr(snr);
    return snr;
}

double snr_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return kNoNoise;
        if (s == "-inf") return -kNoNoise;
        return std::stod(s);
    }
    return j.get<double>();
}

ordered_json stats_to_json(const Standardization& s) {
    return {{"mean", s.mean}, {"stddev", s.stddev}};
}

Standardization stats_from_json(const nlohmann::json& j) {
    Standardization s;
    s.mean = j.at("mean").get<std::array<double, kNumFeatures>>();
    s.stddev = j.at("stddev").get<std::array<double, kNumFeatures>>();
    return s;
}

// Standardizes and classifies `raw` with `model`, accumulating into a report.
void score_into(const TrainedModel& model, const LabeledDataset& raw, ConfusionMatrix& confusion) {
    const auto& stats = standardization_of(model);
    for (const auto& row : raw.rows) {
        const auto predicted = predict(model, stats.apply(row.features));
        ++confusion[static_cast<std::size_t>(code(row.label))]
                   [static_cast<std::size_t>(code(predicted))];
    }
}

std::size_t total(const ConfusionMatrix& m) {
    std::size_t n = 0;
    for (const auto& row : m) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return n;
}

std::size_t trace(const ConfusionMatrix& m) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < kNumLabels; ++i) n += m[i][i];
    return n;
}

struct ExtractedPoint {
    std::size_t detected = 0;
    std::size_t false_alarms = 0;
    LabeledDataset frames; // raw features of matched detections
};

ExtractedPoint extract_noisy(const std::vector<TestRecording>& recordings, double snr_db,
                             std::size_t snr_index, const NoiseStudyOptions& options) {
    ExtractedPoint out;
    for (std::size_t r = 0; r < recordings.size(); ++r) {
        const auto& tr = recordings[r];
        const IqRecording noisy =
            add_awgn(tr.recording, snr_db, derive_seed(options.seed, snr_index, r));
        const auto detected = detect_bursts(noisy, options.detector);
        const auto labels = label_detections(detected, tr.truth);
        out.detected += detected.size();
        out.false_alarms += static_cast<std::size_t>(
            std::count(labels.begin(), labels.end(), std::nullopt));
        append(out.frames, extract_dataset(noisy, detected, labels));
    }
    return out;
}

} // namespace

std::string_view to_string(Method method) {
    switch (method) {
    case Method::SvmLinear: return "svm-linear";
    case Method::SvmPoly: return "svm-poly";
    case Method::SvmRbf: return "svm-rbf";
    case Method::Knn: return "knn";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    if (text == "svm-linear") return Method::SvmLinear;
    if (text == "svm-poly") return Method::SvmPoly;
    if (text == "svm-rbf") return Method::SvmRbf;
    if (text == "knn") return Method::Knn;
    throw ConfigError("unknown method '" + std::string(text) +
                      "' (expected svm-linear, svm-poly, svm-rbf or knn)");
}

KernelSpec ClassifierSpec::kernel() const {
    KernelSpec k;
    k.poly_c = poly_c;
    k.poly_p = poly_p;
    k.rbf_c = rbf_c;
    switch (method) {
    case Method::SvmLinear: k.kind = KernelKind::Linear; break;
    case Method::SvmPoly: k.kind = KernelKind::Polynomial; break;
    case Method::SvmRbf: k.kind = KernelKind::Rbf; break;
    case Method::Knn: throw ConfigError("knn has no kernel");
    }
    return k;
}

TrainedModel train(const ClassifierSpec& spec, const LabeledDataset& raw_train) {
    const auto standardized = standardize(raw_train, std::nullopt, spec.features);
    if (spec.method == Method::Knn) return make_knn(standardized, spec.k, spec.features);
    const SmoOptions smo{spec.c_reg, spec.tol, spec.max_passes};
    return train_one_vs_all(standardized, spec.kernel(), smo, spec.features);
}

const Standardization& standardization_of(const TrainedModel& model) {
    return std::visit([](const auto& m) -> const Standardization& { return m.standardization; },
                      model);
}

FeatureSet features_of(const TrainedModel& model) {
    return std::visit([](const auto& m) { return m.features; }, model);
}

std::string method_name(const TrainedModel& model) {
    if (const auto* svm = std::get_if<MultiClassSvmModel>(&model)) {
        return "svm-" + std::string(to_string(svm->kernel.kind));
    }
    return "knn";
}

ProtocolLabel predict(const TrainedModel& model, const FeatureVector& x) {
    const auto point = to_point(x, features_of(model));
    return std::visit([&](const auto& m) { return predict(m, point); }, model);
}

SplitResult split_train_test(const LabeledDataset& ds, double test_fraction, std::uint64_t seed,
                             bool stratified) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test_fraction must be in (0, 1)");
    }
    const std::size_t n = ds.size();
    if (n < 2) throw DataError("split_train_test: need at least two rows");
    const auto n_test = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction)));

    std::mt19937_64 rng(seed);
    std::vector<bool> is_test(n, false);
    if (!stratified) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
    } else {
        std::array<std::vector<std::size_t>, kNumLabels> by_class;
        for (std::size_t i = 0; i < n; ++i) {
            by_class[static_cast<std::size_t>(code(ds.rows[i].label))].push_back(i);
        }
        std::array<std::size_t, kNumLabels> take{};
        std::array<double, kNumLabels> frac{};
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < kNumLabels; ++c) {
            const auto size = by_class[c].size();
            if (size == 0) continue;
            if (size < 2) throw DataError("split_train_test: stratified split needs >= 2 rows per class");
            const double exact = static_cast<double>(size) * test_fraction;
            take[c] = std::min(static_cast<std::size_t>(std::floor(exact)), size - 1);
            frac[c] = exact - std::floor(exact);
            assigned += take[c];
        }
        // Hand out the remainder by largest fractional part, then smallest label code.
        while (assigned < n_test) {
            std::ptrdiff_t best = -1;
            for (std::size_t c = 0; c < kNumLabels; ++c) {
                if (take[c] + 1 >= by_class[c].size()) continue;
                if (best < 0 || frac[c] > frac[static_cast<std::size_t>(best)]) {
                    best = static_cast<std::ptrdiff_t>(c);
                }
            }
            if (best < 0) break;
            ++take[static_cast<std::size_t>(best)];
            frac[static_cast<std::size_t>(best)] = -1.0;
            ++assigned;
        }
        for (std::size_t c = 0; c < kNumLabels; ++c) {
            std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
            for (std::size_t i = 0; i < take[c]; ++i) is_test[by_class[c][i]] = true;
        }
    }

    SplitResult out;
    out.train.standardization = ds.standardization;
    out.test.standardization = ds.standardization;
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? out.test : out.train).rows.push_back(ds.rows[i]);
    return out;
}

EvalReport evaluate(const TrainedModel& model, const LabeledDataset& test, std::size_t n_train) {
    if (test.empty()) throw DataError("evaluate: empty test set");
    const auto& stats = standardization_of(model);
    if (!test.standardization || test.standardization->hash() != stats.hash()) {
        throw DataError("evaluate: test set is not standardized with the model's training statistics");
    }
    EvalReport report;
    report.method = method_name(model);
    report.features_used = features_of(model);
    report.n_train = n_train;
    report.n_test = test.size();
    for (const auto& row : test.rows) {
        const auto predicted = predict(model, row.features);
        ++report.confusion[static_cast<std::size_t>(code(row.label))]
                          [static_cast<std::size_t>(code(predicted))];
    }
    report.accuracy = static_cast<double>(trace(report.confusion)) /
                      static_cast<double>(total(report.confusion));
    return report;
}

std::vector<std::optional<ProtocolLabel>> label_detections(std::span<const DetectedBurst> detected,
                                                           const BurstTruth& truth) {
    std::vector<std::optional<ProtocolLabel>> labels;
    labels.reserve(detected.size());
    for (const auto& d : detected) {
        const auto t = match_truth(d, truth);
        labels.push_back(t < 0 ? std::nullopt
                               : std::optional(truth[static_cast<std::size_t>(t)].label));
    }
    return labels;
}

std::vector<EvalReport> run_noise_study(const LabeledDataset& train_ds,
                                        const std::vector<ClassifierSpec>& specs,
                                        const std::vector<TestRecording>& test_recordings,
                                        const NoiseStudyOptions& options) {
    std::vector<TrainedModel> models;
    models.reserve(specs.size());
    for (const auto& spec : specs) models.push_back(train(spec, train_ds));
    return run_noise_study(models, train_ds.size(), test_recordings, options);
}

std::vector<EvalReport> run_noise_study(const std::vector<TrainedModel>& models,
                                        std::size_t n_train,
                                        const std::vector<TestRecording>& test_recordings,
                                        const NoiseStudyOptions& options) {
    if (options.snr_grid_db.empty()) throw ConfigError("run_noise_study: empty SNR grid");
    if (test_recordings.empty()) throw ConfigError("run_noise_study: no test recordings");

    std::vector<EvalReport> reports(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
        reports[m].method = method_name(models[m]);
        reports[m].features_used = features_of(models[m]);
        reports[m].n_train = n_train;
    }

    // Noise-free pass through the same detection and extraction chain.
    const auto clean = extract_noisy(test_recordings, kNoNoise, 0, options);
    for (std::size_t m = 0; m < models.size(); ++m) {
        score_into(models[m], clean.frames, reports[m].confusion);
        reports[m].n_test = clean.frames.size();
        reports[m].accuracy = clean.frames.empty()
                                  ? 0.0
                                  : static_cast<double>(trace(reports[m].confusion)) /
                                        static_cast<double>(clean.frames.size());
    }

    for (std::size_t s = 0; s < options.snr_grid_db.size(); ++s) {
        const double snr = options.snr_grid_db[s];
        const auto point = extract_noisy(test_recordings, snr, s + 1, options);
        for (std::size_t m = 0; m < models.size(); ++m) {
            SnrPoint p;
            p.snr_db = snr;
            p.detected_frames = point.detected;
            p.false_alarms = point.false_alarms;
            p.classified_frames = point.frames.size();
            if (!point.frames.empty()) {
                ConfusionMatrix cm{};
                score_into(models[m], point.frames, cm);
                p.accuracy = static_cast<double>(trace(cm)) / static_cast<double>(total(cm));
            }
            reports[m].per_snr.push_back(p);
        }
    }
    return reports;
}

ReportFormat parse_report_format(std::string_view text) {
    if (text == "json") return ReportFormat::Json;
    if (text == "csv") return ReportFormat::Csv;
    throw ConfigError("unknown report format '" + std::string(text) + "'");
}

std::string emit_report(const std::vector<EvalReport>& reports, ReportFormat format) {
    if (reports.empty()) throw DataError("emit_report: no reports");
    if (format == ReportFormat::Csv) {
        std::string out = "method,features,snr_db,detected_frames,accuracy\n";
        for (const auto& r : reports) {
            const std::string prefix = r.method + "," + std::string(to_string(r.features_used)) + ",";
            out += prefix + "clean," + std::to_string(r.n_test) + "," + format_fixed(r.accuracy, 8) + "\n";
            for (const auto& p : r.per_snr) {
                out += prefix + format_snr(p.snr_db) + "," + std::to_string(p.detected_frames) + "," +
                       (p.accuracy ? format_fixed(*p.accuracy, 8) : std::string()) + "\n";
            }
        }
        return out;
    }
    ordered_json arr = ordered_json::array();
    for (const auto& r : reports) {
        ordered_json j;
        j["method"] = r.method;
        j["features"] = to_string(r.features_used);
        j["accuracy"] = r.accuracy;
        j["confusion"] = r.confusion;
        j["n_train"] = r.n_train;
        j["n_test"] = r.n_test;
        ordered_json points = ordered_json::array();
        for (const auto& p : r.per_snr) {
            points.push_back({{"snr_db", snr_to_json(p.snr_db)},
                              {"detected_frames", p.detected_frames},
                              {"false_alarms", p.false_alarms},
                              {"classified_frames", p.classified_frames},
                              {"accuracy", p.accuracy ? ordered_json(*p.accuracy) : ordered_json()}});
        }
        j["per_snr"] = std::move(points);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::vector<EvalReport> reports_from_json(const std::string& text) {
    try {
        const auto arr = nlohmann::json::parse(text);
        std::vector<EvalReport> out;
        for (const auto& j : arr) {
            EvalReport r;
            r.method = j.at("method").get<std::string>();
            r.features_used = parse_feature_set(j.at("features").get<std::string>());
            r.accuracy = j.at("accuracy").get<double>();
            r.confusion = j.at("confusion").get<ConfusionMatrix>();
            r.n_train = j.at("n_train").get<std::size_t>();
            r.n_test = j.at("n_test").get<std::size_t>();
            for (const auto& p : j.at("per_snr")) {
                SnrPoint s;
                s.snr_db = snr_from_json(p.at("snr_db"));
                s.detected_frames = p.at("detected_frames").get<std::size_t>();
                s.false_alarms = p.at("false_alarms").get<std::size_t>();
                s.classified_frames = p.at("classified_frames").get<std::size_t>();
                if (!p.at("accuracy").is_null()) s.accuracy = p.at("accuracy").get<double>();
                r.per_snr.push_back(s);
            }
            out.push_back(std::move(r));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report JSON: ") + e.what());
    }
}

std::string model_to_json(const TrainedModel& model) {
    ordered_json j;
    const auto& stats = standardization_of(model);
    j["method"] = method_name(model);
    j["features"] = to_string(features_of(model));
    j["standardization"] = stats_to_json(stats);
    j["stats_hash"] = stats.hash();
    if (const auto* svm = std::get_if<MultiClassSvmModel>(&model)) {
        j["kernel"] = {{"kind", to_string(svm->kernel.kind)},
                       {"poly_c", svm->kernel.poly_c},
                       {"poly_p", svm->kernel.poly_p},
                       {"rbf_c", svm->kernel.rbf_c}};
        j["c_reg"] = svm->c_reg;
        ordered_json classes = ordered_json::array();
        for (std::size_t l = 0; l < kNumLabels; ++l) {
            const auto& b = svm->per_class[l];
            classes.push_back({{"label", l},
                               {"bias", b.bias},
                               {"converged", b.converged},
                               {"iterations", b.iterations},
                               {"support_indices", b.support_indices},
                               {"coeffs", b.coeffs},
                               {"support_vectors", b.support_vectors}});
        }
        j["classes"] = std::move(classes);
    } else {
        const auto& knn = std::get<KnnModel>(model);
        j["k"] = knn.k;
        std::vector<int> labels;
        for (auto l : knn.labels) labels.push_back(code(l));
        j["labels"] = labels;
        j["points"] = knn.points;
    }
    return j.dump() + "\n";
}

TrainedModel model_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        const auto method = j.at("method").get<std::string>();
        const auto features = parse_feature_set(j.at("features").get<std::string>());
        const auto stats = stats_from_json(j.at("standardization"));
        if (j.contains("stats_hash") && j["stats_hash"].get<std::string>() != stats.hash()) {
            throw DataError("model file: stats_hash does not match its standardization");
        }
        if (method == "knn") {
            KnnModel m;
            m.k = j.at("k").get<int>();
            m.features = features;
            m.standardization = stats;
            m.points = j.at("points").get<std::vector<FeaturePoint>>();
            for (int l : j.at("labels").get<std::vector<int>>()) m.labels.push_back(label_from_code(l));
            if (m.points.size() != m.labels.size() || m.k < 1 ||
                static_cast<std::size_t>(m.k) > m.points.size()) {
                throw DataError("model file: inconsistent knn model");
            }
            return m;
        }
        MultiClassSvmModel m;
        m.features = features;
        m.standardization = stats;
        const auto& k = j.at("kernel");
        m.kernel.kind = parse_kernel_kind(k.at("kind").get<std::string>());
        m.kernel.poly_c = k.at("poly_c").get<double>();
        m.kernel.poly_p = k.at("poly_p").get<int>();
        m.kernel.rbf_c = k.at("rbf_c").get<double>();
        m.kernel.validate();
        m.c_reg = j.at("c_reg").get<double>();
        const auto& classes = j.at("classes");
        if (classes.size() != kNumLabels) throw DataError("model file: expected three binary models");
        for (std::size_t l = 0; l < kNumLabels; ++l) {
            const auto& c = classes[l];
            auto& b = m.per_class[l];
            b.kernel = m.kernel;
            b.c_reg = m.c_reg;
            b.bias = c.at("bias").get<double>();
            b.converged = c.at("converged").get<bool>();
            b.iterations = c.at("iterations").get<std::size_t>();
            b.support_indices = c.at("support_indices").get<std::vector<std::size_t>>();
            b.coeffs = c.at("coeffs").get<std::vector<double>>();
            b.support_vectors = c.at("support_vectors").get<std::vector<FeaturePoint>>();
            if (b.coeffs.size() != b.support_vectors.size()) {
                throw DataError("model file: coeffs and support vectors differ in length");
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model JSON: ") + e.what());
    }
}

} // namespace protoid
