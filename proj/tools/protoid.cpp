// protoid: generate, detect, extract, split, train, eval, sweep, table.

#include "protoid/burst_detect.hpp"
#include "protoid/error.hpp"
#include "protoid/eval.hpp"
#include "protoid/features.hpp"
#include "protoid/iq_io.hpp"
#include "protoid/signal_model.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace protoid;

namespace {

// Options shared by every subcommand that trains classifiers.
struct ClassifierFlags {
    std::string features = "time+papr";
    double c_reg = 10.0;
    double tol = 1e-3;
    int max_passes = 100;
    double poly_c = 1.0;
    int poly_p = 3;
    double rbf_c = 0.0;
    int k = 10;

    void add_to(CLI::App& app) {
        app.add_option("--features", features, "time | time+papr")->capture_default_str();
        app.add_option("--c", c_reg, "SVM regularization C")->capture_default_str();
        app.add_option("--tol", tol, "SMO KKT tolerance")->capture_default_str();
        app.add_option("--max-passes", max_passes, "SMO budget in multiples of N")->capture_default_str();
        app.add_option("--poly-c", poly_c, "polynomial kernel offset")->capture_default_str();
        app.add_option("--poly-p", poly_p, "polynomial kernel degree")->capture_default_str();
        app.add_option("--rbf-c", rbf_c, "Gaussian kernel width, 0 = median heuristic")
            ->capture_default_str();
        app.add_option("--k", k, "KNN neighbours")->capture_default_str();
    }

    ClassifierSpec spec(Method method) const {
        ClassifierSpec s;
        s.method = method;
        s.features = parse_feature_set(features);
        s.c_reg = c_reg;
        s.tol = tol;
        s.max_passes = max_passes;
        s.poly_c = poly_c;
        s.poly_p = poly_p;
        s.rbf_c = rbf_c;
        s.k = k;
        return s;
    }
};

void add_detector_flags(CLI::App& app, DetectorConfig& d) {
    app.add_option("--alpha", d.alpha, "edge threshold (> 1)")->capture_default_str();
    app.add_option("--window-len", d.window_len_rising, "rising-edge window length L")
        ->capture_default_str();
    app.add_option("--window-len-falling", d.window_len_falling, "falling-edge window length")
        ->capture_default_str();
    app.add_option("--gap-delta", d.gap_delta, "gap between windows in samples")->capture_default_str();
    app.add_option("--smooth-len", d.smooth_len, "power smoothing length")->capture_default_str();
    app.add_option("--floor-eps", d.floor_eps, "ratio floor")->capture_default_str();
    app.add_option("--min-burst-us", d.min_burst_us, "drop bursts shorter than this")
        ->capture_default_str();
    app.add_option("--min-gap-us", d.min_gap_us, "merge bursts closer than this")->capture_default_str();
}

fs::path stats_path_for(const fs::path& csv) { return fs::path(csv.string() + ".stats.json"); }

fs::path truth_path_for(const fs::path& iq) {
    fs::path p = iq;
    return p.replace_extension(".truth.json");
}

// Keys outside any table are read as options of the invoked subcommand.
class FlatConfig : public CLI::ConfigTOML {
public:
    std::string section;

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigTOML::from_config(input);
        for (auto& item : items) {
            if (item.parents.empty() && item.name != "++" && item.name != "--" && !section.empty()) {
                item.parents = {section};
            }
        }
        return items;
    }
};

void write_snapshot(const CLI::App& sub, const fs::path& next_to) {
    io::write_text(fs::path(next_to.string() + ".config.toml"), sub.config_to_str(true, false));
}

LabeledDataset read_dataset(const fs::path& csv);

LabeledDataset read_datasets(const std::vector<std::string>& csvs) {
    LabeledDataset all = read_dataset(csvs.at(0));
    for (std::size_t i = 1; i < csvs.size(); ++i) {
        const auto ds = read_dataset(csvs[i]);
        const auto key = [](const LabeledDataset& d) {
            return d.standardization ? d.standardization->hash() : std::string("raw");
        };
        if (key(ds) != key(all)) {
            throw DataError(csvs[i] + ": standardization does not match " + csvs[0]);
        }
        append(all, ds);
    }
    return all;
}

LabeledDataset read_dataset(const fs::path& csv) {
    auto ds = dataset_from_csv(io::read_text(csv));
    const auto sidecar = stats_path_for(csv);
    if (fs::exists(sidecar)) ds.standardization = standardization_from_json(io::read_text(sidecar));
    return ds;
}

void write_dataset(const fs::path& csv, const LabeledDataset& ds) {
    io::write_text(csv, dataset_to_csv(ds));
    if (ds.standardization) {
        io::write_text(stats_path_for(csv), standardization_to_json(*ds.standardization));
    }
}

void require_all_classes(const LabeledDataset& ds) {
    const auto counts = ds.class_counts();
    for (int c = 0; c < kNumLabels; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) {
            throw DataError("training data has no rows of class " +
                            std::string(to_string(label_from_code(c))));
        }
    }
}

// Raw datasets get their statistics fitted here; a dataset that already carries
// statistics (from `split`) is trained on as is.
TrainedModel train_on(const ClassifierSpec& spec, const LabeledDataset& ds) {
    require_all_classes(ds);
    if (!ds.standardization) return train(spec, ds);
    if (spec.method == Method::Knn) return make_knn(ds, spec.k, spec.features);
    return train_one_vs_all(ds, spec.kernel(), SmoOptions{spec.c_reg, spec.tol, spec.max_passes},
                            spec.features);
}

// Brings `ds` into the model's standardized space, refusing mismatched statistics.
LabeledDataset paired_with(const TrainedModel& model, const LabeledDataset& ds) {
    const auto& stats = standardization_of(model);
    if (!ds.standardization) return standardize(ds, stats, features_of(model));
    if (ds.standardization->hash() != stats.hash()) {
        throw DataError("dataset standardization (hash " + ds.standardization->hash() +
                        ") does not match the model's training statistics (hash " + stats.hash() +
                        ")");
    }
    return ds;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& n : names) out.push_back(parse_method(n));
    if (out.empty()) throw ConfigError("no methods given");
    return out;
}

std::vector<double> parse_snr_list(const std::vector<std::string>& items) {
    std::vector<double> out;
    for (const auto& s : items) {
        if (s == "inf" || s == "clean") {
            out.push_back(kNoNoise);
            continue;
        }
        try {
            std::size_t used = 0;
            out.push_back(std::stod(s, &used));
            if (used != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
            throw ConfigError("bad SNR value '" + s + "'");
        }
    }
    return out;
}

void print_confusion(const EvalReport& r) {
    std::printf("%s %s accuracy %.4f (%zu test rows)\n", r.method.c_str(),
                std::string(to_string(r.features_used)).c_str(), r.accuracy, r.n_test);
    std::printf("%-12s %8s %8s %8s\n", "truth\\pred", "Wifi", "Beacon", "BT");
    for (int t = 0; t < kNumLabels; ++t) {
        std::printf("%-12s", std::string(to_string(label_from_code(t))).c_str());
        for (int p = 0; p < kNumLabels; ++p) {
            std::printf(" %8zu", r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
        }
        std::printf("\n");
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Synthetic ISM-band protocol identification toolkit"};
    app.require_subcommand(1);
    // --config belongs to the main app; fallthrough lets it follow the subcommand.
    app.fallthrough(true);
    app.set_config("--config", "", "TOML file of option values (flat keys or a [subcommand] table)");
    auto formatter = std::make_shared<FlatConfig>();
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") {
            ++i;
            continue;
        }
        if (!a.empty() && a[0] != '-') {
            formatter->section = a;
            break;
        }
    }
    app.config_formatter(formatter);

    // generate ---------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "synthesize an IQ recording with truth");
    GeneratorConfig gcfg;
    std::string g_scenario = "beacon";
    std::string g_out;
    double g_rate = kDefaultSampleRateHz;
    std::optional<double> g_snr;
    std::uint64_t g_noise_seed = 1;
    gen->add_option("--scenario", g_scenario, "beacon | wifi | bluetooth | mixed")->capture_default_str();
    gen->add_option("--duration", gcfg.duration_s, "seconds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gen->add_option("--seed", gcfg.seed)->capture_default_str();
    gen->add_option("--sample-rate", g_rate, "Hz")->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--amplitude", gcfg.amplitude)->capture_default_str();
    gen->add_option("--amplitude-jitter-db", gcfg.amplitude_jitter_db,
                    "per-burst attenuation drawn from [0, x] dB")
        ->capture_default_str();
    gen->add_option("--lead-in-us", gcfg.lead_in_us)->capture_default_str();
    gen->add_option("--beacon-interval-us", gcfg.beacon_interval_us)->capture_default_str();
    gen->add_option("--beacon-airtime-us", gcfg.beacon_airtime_us)->capture_default_str();
    gen->add_option("--sifs-us", gcfg.sifs_us)->capture_default_str();
    gen->add_option("--difs-us", gcfg.difs_us)->capture_default_str();
    gen->add_option("--wifi-data-min-us", gcfg.wifi_data_frame_us_range.min)->capture_default_str();
    gen->add_option("--wifi-data-max-us", gcfg.wifi_data_frame_us_range.max)->capture_default_str();
    gen->add_option("--wifi-subcarriers", gcfg.wifi_subcarrier_count)->capture_default_str();
    gen->add_option("--bt-idle-us", gcfg.bt_idle_us)->capture_default_str();
    gen->add_option("--snr", g_snr, "add white noise at this burst-region SNR (dB)");
    gen->add_option("--noise-seed", g_noise_seed)->capture_default_str();
    gen->add_option("--out", g_out, "output base path; writes <out>.iq, .meta.json, .truth.json")
        ->required();

    // detect -----------------------------------------------------------------
    auto* det = app.add_subcommand("detect", "find bursts in an IQ recording");
    DetectorConfig dcfg;
    std::string d_in, d_out, d_score;
    det->add_option("--in", d_in, "IQ file")->required();
    det->add_option("--out", d_out, "detections JSON")->required();
    det->add_option("--score-against", d_score, "truth JSON to score against");
    add_detector_flags(*det, dcfg);

    // extract ----------------------------------------------------------------
    auto* ext = app.add_subcommand("extract", "per-frame features to CSV");
    std::string e_in, e_det, e_truth, e_label, e_out;
    bool e_use_truth = false;
    ext->add_option("--in", e_in, "IQ file")->required();
    ext->add_option("--detections", e_det, "detections JSON");
    ext->add_flag("--use-truth", e_use_truth, "use truth intervals instead of detections");
    ext->add_option("--truth", e_truth, "truth JSON (default <in>.truth.json)");
    ext->add_option("--label", e_label, "constant label instead of truth matching");
    ext->add_option("--out", e_out, "dataset CSV")->required();

    // split ------------------------------------------------------------------
    auto* spl = app.add_subcommand("split", "train/test split with training-set standardization");
    std::vector<std::string> s_in;
    std::string s_train, s_test;
    double s_fraction = 0.2;
    std::uint64_t s_seed = 0;
    bool s_unstratified = false;
    spl->add_option("--in", s_in, "raw dataset CSV(s), concatenated")->required();
    spl->add_option("--train-out", s_train)->required();
    spl->add_option("--test-out", s_test)->required();
    spl->add_option("--test-fraction", s_fraction)->capture_default_str();
    spl->add_option("--seed", s_seed)->capture_default_str();
    spl->add_flag("--unstratified", s_unstratified);

    // train ------------------------------------------------------------------
    auto* trn = app.add_subcommand("train", "train a classifier");
    ClassifierFlags t_flags;
    std::vector<std::string> t_in;
    std::string t_out, t_method = "knn";
    trn->add_option("--in", t_in, "training CSV(s); standardized inputs must share one stats sidecar")
        ->required();
    trn->add_option("--out", t_out, "model JSON")->required();
    trn->add_option("--method", t_method, "svm-linear | svm-poly | svm-rbf | knn")->capture_default_str();
    t_flags.add_to(*trn);

    // eval -------------------------------------------------------------------
    auto* evl = app.add_subcommand("eval", "evaluate a model on a test CSV");
    std::string v_model, v_in, v_out, v_format = "json";
    evl->add_option("--model", v_model)->required();
    evl->add_option("--in", v_in, "test CSV")->required();
    evl->add_option("--out", v_out, "report path");
    evl->add_option("--format", v_format, "json | csv")->capture_default_str();

    // sweep ------------------------------------------------------------------
    auto* swp = app.add_subcommand("sweep", "clean-train / noisy-test SNR study");
    ClassifierFlags w_flags;
    DetectorConfig w_det;
    std::vector<std::string> w_models, w_methods{"svm-linear", "svm-poly", "svm-rbf", "knn"};
    std::vector<std::string> w_tests, w_truths, w_snr{"0", "2", "5", "8", "10", "15", "20", "30"};
    std::string w_train, w_out, w_format = "csv";
    std::uint64_t w_seed = 0;
    swp->add_option("--model", w_models, "trained model JSON (repeatable)");
    swp->add_option("--train", w_train, "training CSV, used with --methods");
    swp->add_option("--methods", w_methods)->delimiter(',')->capture_default_str();
    swp->add_option("--test", w_tests, "clean test IQ file(s)")->required();
    swp->add_option("--truth", w_truths, "truth JSON per test file (default <test>.truth.json)");
    swp->add_option("--snr", w_snr, "SNR grid in dB")->delimiter(',')->capture_default_str();
    swp->add_option("--seed", w_seed)->capture_default_str();
    swp->add_option("--out", w_out)->required();
    swp->add_option("--format", w_format, "json | csv")->capture_default_str();
    w_flags.add_to(*swp);
    add_detector_flags(*swp, w_det);

    // table ------------------------------------------------------------------
    auto* tbl = app.add_subcommand("table", "accuracy of every method and feature set over repeated splits");
    ClassifierFlags b_flags;
    std::vector<std::string> b_in;
    std::string b_out;
    double b_fraction = 0.2;
    std::uint64_t b_seed = 0;
    int b_repeats = 1;
    tbl->add_option("--in", b_in, "raw dataset CSV(s)")->required();
    tbl->add_option("--out", b_out, "CSV summary");
    tbl->add_option("--test-fraction", b_fraction)->capture_default_str();
    tbl->add_option("--seed", b_seed)->capture_default_str();
    tbl->add_option("--repeats", b_repeats, "independent splits, seeds seed..seed+repeats-1")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    b_flags.add_to(*tbl);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (gen->parsed()) {
        gcfg.scenario = parse_scenario(g_scenario);
        auto sig = generate(gcfg, g_rate);
        if (g_snr) {
            sig.recording = add_awgn(sig.recording, *g_snr, g_noise_seed);
        }
        const fs::path base(g_out);
        io::write_recording(fs::path(base.string() + ".iq"), sig.recording);
        io::write_truth(fs::path(base.string() + ".truth.json"), sig.truth);
        write_snapshot(*gen, base);
        std::printf("%zu bursts\n", sig.truth.size());
        return 0;
    }

    if (det->parsed()) {
        dcfg.validate();
        const auto rec = io::read_recording(d_in);
        const auto bursts = detect_bursts(rec, dcfg);
        io::write_detections(d_out, bursts);
        write_snapshot(*det, d_out);
        std::printf("%zu bursts\n", bursts.size());
        if (!d_score.empty()) {
            const auto s = score_detections(bursts, io::read_truth(d_score));
            std::printf("precision %.6f recall %.6f max_boundary_error %lld samples\n", s.precision(),
                        s.recall(), static_cast<long long>(s.max_boundary_error));
        }
        return 0;
    }

    if (ext->parsed()) {
        if (e_use_truth == !e_det.empty()) {
            throw ConfigError("give exactly one of --detections or --use-truth");
        }
        const auto rec = io::read_recording(e_in);
        const fs::path truth_path = e_truth.empty() ? truth_path_for(e_in) : fs::path(e_truth);
        LabeledDataset ds;
        if (e_use_truth) {
            const auto truth = io::read_truth(truth_path);
            const auto bursts = to_detected(truth);
            std::vector<std::optional<ProtocolLabel>> labels;
            for (const auto& t : truth) {
                labels.emplace_back(e_label.empty() ? t.label : parse_label(e_label));
            }
            ds = extract_dataset(rec, bursts, labels);
        } else {
            const auto bursts = io::read_detections(e_det);
            if (!e_label.empty()) {
                ds = extract_dataset(rec, bursts, parse_label(e_label));
            } else {
                const auto labels = label_detections(bursts, io::read_truth(truth_path));
                ds = extract_dataset(rec, bursts, labels);
            }
        }
        if (ds.empty()) std::fprintf(stderr, "warning: no usable frames in %s\n", e_in.c_str());
        io::write_text(e_out, dataset_to_csv(ds));
        write_snapshot(*ext, e_out);
        std::printf("%zu frames\n", ds.size());
        return 0;
    }

    if (spl->parsed()) {
        LabeledDataset raw;
        for (const auto& p : s_in) append(raw, dataset_from_csv(io::read_text(p)));
        const auto parts = split_train_test(raw, s_fraction, s_seed, !s_unstratified);
        const auto stats = fit_standardization(parts.train);
        write_dataset(s_train, standardize(parts.train, stats));
        write_dataset(s_test, standardize(parts.test, stats));
        write_snapshot(*spl, s_train);
        std::printf("%zu train, %zu test, stats %s\n", parts.train.size(), parts.test.size(),
                    stats.hash().c_str());
        return 0;
    }

    if (trn->parsed()) {
        const auto model = train_on(t_flags.spec(parse_method(t_method)), read_datasets(t_in));
        io::write_text(t_out, model_to_json(model));
        write_snapshot(*trn, t_out);
        if (const auto* svm = std::get_if<MultiClassSvmModel>(&model)) {
            for (int l = 0; l < kNumLabels; ++l) {
                const auto& b = svm->per_class[static_cast<std::size_t>(l)];
                if (!b.converged) {
                    std::fprintf(stderr, "warning: %s-vs-rest SMO stopped at the iteration budget\n",
                                 std::string(to_string(label_from_code(l))).c_str());
                }
            }
        }
        std::printf("trained %s, stats %s\n", method_name(model).c_str(),
                    standardization_of(model).hash().c_str());
        return 0;
    }

    if (evl->parsed()) {
        const auto format = parse_report_format(v_format);
        const auto model = model_from_json(io::read_text(v_model));
        const auto test = paired_with(model, read_dataset(v_in));
        const auto report = evaluate(model, test);
        print_confusion(report);
        if (!v_out.empty()) {
            io::write_text(v_out, emit_report({report}, format));
            write_snapshot(*evl, v_out);
        }
        return 0;
    }

    if (swp->parsed()) {
        w_det.validate();
        const auto format = parse_report_format(w_format);
        std::vector<TrainedModel> models;
        std::size_t n_train = 0;
        for (const auto& m : w_models) models.push_back(model_from_json(io::read_text(m)));
        if (!w_train.empty()) {
            const auto ds = read_dataset(w_train);
            n_train = ds.size();
            for (auto method : parse_methods(w_methods)) models.push_back(train_on(w_flags.spec(method), ds));
        }
        if (models.empty()) throw ConfigError("sweep needs --model or --train");
        if (!w_truths.empty() && w_truths.size() != w_tests.size()) {
            throw ConfigError("--truth must be given once per --test file");
        }
        std::vector<TestRecording> tests;
        for (std::size_t i = 0; i < w_tests.size(); ++i) {
            const fs::path tp = w_truths.empty() ? truth_path_for(w_tests[i]) : fs::path(w_truths[i]);
            tests.push_back({io::read_recording(w_tests[i]), io::read_truth(tp)});
        }
        NoiseStudyOptions opts;
        opts.snr_grid_db = parse_snr_list(w_snr);
        opts.seed = w_seed;
        opts.detector = w_det;
        const auto reports = run_noise_study(models, n_train, tests, opts);
        io::write_text(w_out, emit_report(reports, format));
        write_snapshot(*swp, w_out);
        for (const auto& r : reports) {
            std::printf("%-10s clean %.4f", r.method.c_str(), r.accuracy);
            for (const auto& p : r.per_snr) {
                if (p.accuracy) {
                    std::printf("  %g dB: %.4f/%zu", p.snr_db, *p.accuracy, p.detected_frames);
                } else {
                    std::printf("  %g dB: -/%zu", p.snr_db, p.detected_frames);
                }
            }
            std::printf("\n");
        }
        return 0;
    }

    if (tbl->parsed()) {
        LabeledDataset raw;
        for (const auto& p : b_in) append(raw, dataset_from_csv(io::read_text(p)));
        const std::vector<Method> methods{Method::SvmLinear, Method::SvmPoly, Method::SvmRbf, Method::Knn};
        const std::vector<FeatureSet> sets{FeatureSet::TimeOnly, FeatureSet::TimePlusPapr};
        // acc[set][method] over repeats
        std::vector<std::vector<std::vector<double>>> acc(sets.size(),
                                                          std::vector<std::vector<double>>(methods.size()));
        for (int r = 0; r < b_repeats; ++r) {
            const auto parts = split_train_test(raw, b_fraction, b_seed + static_cast<std::uint64_t>(r));
            require_all_classes(parts.train);
            for (std::size_t s = 0; s < sets.size(); ++s) {
                for (std::size_t m = 0; m < methods.size(); ++m) {
                    auto spec = b_flags.spec(methods[m]);
                    spec.features = sets[s];
                    const auto model = train(spec, parts.train);
                    const auto test = standardize(parts.test, standardization_of(model), sets[s]);
                    acc[s][m].push_back(evaluate(model, test, parts.train.size()).accuracy);
                }
            }
        }
        std::string csv = "method,features,repeats,mean_accuracy,min_accuracy,max_accuracy\n";
        for (std::size_t s = 0; s < sets.size(); ++s) {
            for (std::size_t m = 0; m < methods.size(); ++m) {
                const auto& a = acc[s][m];
                const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
                char line[256];
                std::snprintf(line, sizeof line, "%s,%s,%d,%.8f,%.8f,%.8f\n",
                              std::string(to_string(methods[m])).c_str(),
                              std::string(to_string(sets[s])).c_str(), b_repeats, mean,
                              *std::min_element(a.begin(), a.end()), *std::max_element(a.begin(), a.end()));
                csv += line;
            }
        }
        std::fputs(csv.c_str(), stdout);
        if (!b_out.empty()) {
            io::write_text(b_out, csv);
            write_snapshot(*tbl, b_out);
        }
        return 0;
    }
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
