#include "protoid/svm.hpp"

#include "protoid/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace protoid {

namespace {

constexpr double kTau = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

class Gram {
public:
    Gram(std::span<const FeaturePoint> rows, const KernelSpec& spec) : n_(rows.size()) {
        values_.resize(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = i; j < n_; ++j) {
                const double k = kernel_eval(spec, rows[i], rows[j]);
                values_[i * n_ + j] = k;
                values_[j * n_ + i] = k;
            }
        }
    }

    std::size_t size() const { return n_; }
    const double* row(std::size_t i) const { return values_.data() + i * n_; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }

private:
    std::size_t n_;
    std::vector<double> values_;
};

// Dual SMO with maximal-violating-pair / second-order working set selection.
// Stops when max_{I_up}(-y G) - min_{I_low}(-y G) < tol, which bounds every
// KKT residual by tol.
BinarySvmModel solve(const Gram& gram, std::span<const FeaturePoint> rows,
                     std::span<const int> targets, const KernelSpec& spec,
                     const SmoOptions& options) {
    const std::size_t n = gram.size();
    const double c = options.c_reg;
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = targets[i];

    auto in_up = [&](std::size_t t) {
        return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0);
    };
    auto in_low = [&](std::size_t t) {
        return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c);
    };

    const std::size_t max_iter =
        std::max<std::size_t>(1, static_cast<std::size_t>(options.max_passes) * n);
    std::size_t iter = 0;
    bool converged = false;
    for (; iter < max_iter; ++iter) {
        double g_max = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t i_sel = -1;
        for (std::size_t t = 0; t < n; ++t) {
            if (in_up(t) && -y[t] * grad[t] >= g_max) {
                g_max = -y[t] * grad[t];
                i_sel = static_cast<std::ptrdiff_t>(t);
            }
        }
        double g_max2 = -std::numeric_limits<double>::infinity();
        double obj_min = std::numeric_limits<double>::infinity();
        std::ptrdiff_t j_sel = -1;
        const double* k_i = i_sel >= 0 ? gram.row(static_cast<std::size_t>(i_sel)) : nullptr;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            const double v = y[t] * grad[t];
            g_max2 = std::max(g_max2, v);
            const double grad_diff = g_max + v;
            if (grad_diff > 0 && k_i != nullptr) {
                double quad = k_i[i_sel] + gram(t, t) - 2.0 * k_i[t];
                if (quad <= 0) quad = kTau;
                const double obj = -(grad_diff * grad_diff) / quad;
                if (obj <= obj_min) {
                    obj_min = obj;
                    j_sel = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        if (i_sel < 0 || j_sel < 0 || g_max + g_max2 < options.tol) {
            converged = true;
            break;
        }

        const auto i = static_cast<std::size_t>(i_sel);
        const auto j = static_cast<std::size_t>(j_sel);
        const double* k_j = gram.row(j);
        const double old_ai = alpha[i];
        const double old_aj = alpha[j];
        double quad = k_i[i] + k_j[j] - 2.0 * k_i[j];
        if (quad <= 0) quad = kTau;
        if (y[i] != y[j]) {
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }
        const double d_i = (alpha[i] - old_ai) * y[i];
        const double d_j = (alpha[j] - old_aj) * y[j];
        // grad_t = y_t * sum_s alpha_s y_s K_ts - 1
        for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (k_i[t] * d_i + k_j[t] * d_j);
    }

    // Bias: mean over free vectors of y_i - sum_j alpha_j y_j K_ij, i.e. -y_i grad_i.
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] > 0 && alpha[t] < c) {
            free_sum += -yg;
            ++free_count;
        } else if ((alpha[t] >= c && y[t] < 0) || (alpha[t] <= 0 && y[t] > 0)) {
            upper = std::min(upper, yg);
        } else {
            lower = std::max(lower, yg);
        }
    }
    BinarySvmModel model;
    if (free_count > 0) {
        model.bias = free_sum / static_cast<double>(free_count);
    } else {
        const double lo = std::isfinite(lower) ? lower : upper;
        const double hi = std::isfinite(upper) ? upper : lower;
        model.bias = -(lo + hi) / 2.0;
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] <= 0) continue;
        model.support_vectors.push_back(rows[t]);
        model.coeffs.push_back(alpha[t] * y[t]);
        model.support_indices.push_back(t);
    }
    model.kernel = spec;
    model.c_reg = c;
    model.converged = converged;
    model.iterations = iter;
    return model;
}

void check_binary_inputs(std::span<const FeaturePoint> rows, std::span<const int> targets,
                         const SmoOptions& options) {
    if (rows.size() < 2) throw DataError("train_binary: need at least two rows");
    if (rows.size() != targets.size()) throw DataError("train_binary: rows/targets size mismatch");
    bool pos = false;
    bool neg = false;
    for (int t : targets) {
        if (t == 1) pos = true;
        else if (t == -1) neg = true;
        else throw DataError("train_binary: targets must be +1 or -1");
    }
    if (!pos || !neg) throw DataError("train_binary: both classes must be present");
    if (!(options.c_reg > 0.0)) throw ConfigError("C must be positive");
    if (!(options.tol > 0.0)) throw ConfigError("tol must be positive");
    if (options.max_passes < 1) throw ConfigError("max_passes must be >= 1");
}

KernelSpec resolve(const KernelSpec& spec, std::span<const FeaturePoint> rows) {
    KernelSpec out = spec;
    if (out.kind == KernelKind::Rbf && out.rbf_c == 0.0) out.rbf_c = median_heuristic_rbf_c(rows);
    out.validate();
    return out;
}

} // namespace

std::string_view to_string(KernelKind kind) {
    switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Polynomial: return "poly";
    case KernelKind::Rbf: return "rbf";
    }
    return "?";
}

KernelKind parse_kernel_kind(std::string_view text) {
    if (text == "linear") return KernelKind::Linear;
    if (text == "poly" || text == "polynomial") return KernelKind::Polynomial;
    if (text == "rbf" || text == "gaussian") return KernelKind::Rbf;
    throw ConfigError("unknown kernel '" + std::string(text) + "'");
}

void KernelSpec::validate(bool allow_auto) const {
    if (poly_p < 1) throw ConfigError("polynomial degree must be >= 1");
    if (!std::isfinite(poly_c)) throw ConfigError("polynomial c must be finite");
    if (kind == KernelKind::Rbf) {
        if (allow_auto && rbf_c == 0.0) return;
        if (!(rbf_c > 0.0) || !std::isfinite(rbf_c)) throw ConfigError("rbf c must be positive");
    }
}

double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DataError("kernel_eval: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
    }
    switch (spec.kind) {
    case KernelKind::Linear: return dot(a, b);
    case KernelKind::Polynomial: return std::pow(dot(a, b) + spec.poly_c, spec.poly_p);
    case KernelKind::Rbf: return std::exp(-squared_distance(a, b) / spec.rbf_c);
    }
    throw ConfigError("unknown kernel kind");
}

double median_heuristic_rbf_c(std::span<const FeaturePoint> points) {
    if (points.size() < 2) throw DataError("median heuristic needs at least two points");
    std::vector<double> d;
    d.reserve(points.size() * (points.size() - 1) / 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            d.push_back(squared_distance(points[i], points[j]));
        }
    }
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    const double med = *mid;
    return med > 0.0 ? 2.0 * med : 1.0;
}

BinarySvmModel train_binary(std::span<const FeaturePoint> rows, std::span<const int> targets,
                            const KernelSpec& spec, const SmoOptions& options) {
    check_binary_inputs(rows, targets, options);
    const KernelSpec resolved = resolve(spec, rows);
    const Gram gram(rows, resolved);
    return solve(gram, rows, targets, resolved, options);
}

double decision_value(const BinarySvmModel& model, std::span<const double> x) {
    double u = model.bias;
    for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
        u += model.coeffs[i] * kernel_eval(model.kernel, model.support_vectors[i], x);
    }
    return u;
}

MultiClassSvmModel train_one_vs_all(const LabeledDataset& ds, const KernelSpec& spec,
                                    const SmoOptions& options, FeatureSet features) {
    if (!ds.standardization) throw DataError("train_one_vs_all: dataset must be standardized");
    const auto counts = ds.class_counts();
    for (int l = 0; l < kNumLabels; ++l) {
        if (counts[static_cast<std::size_t>(l)] == 0) {
            throw DataError("train_one_vs_all: class " +
                            std::string(to_string(label_from_code(l))) + " missing");
        }
    }
    std::vector<FeaturePoint> rows;
    rows.reserve(ds.size());
    for (const auto& r : ds.rows) rows.push_back(to_point(r.features, features));

    MultiClassSvmModel model;
    model.kernel = resolve(spec, rows);
    model.c_reg = options.c_reg;
    model.standardization = *ds.standardization;
    model.features = features;

    const Gram gram(rows, model.kernel);
    std::vector<int> targets(ds.size());
    for (int l = 0; l < kNumLabels; ++l) {
        for (std::size_t i = 0; i < ds.size(); ++i) targets[i] = code(ds.rows[i].label) == l ? 1 : -1;
        check_binary_inputs(rows, targets, options);
        model.per_class[static_cast<std::size_t>(l)] = solve(gram, rows, targets, model.kernel, options);
    }
    return model;
}

std::array<double, kNumLabels> decision_values(const MultiClassSvmModel& model,
                                               std::span<const double> x) {
    std::array<double, kNumLabels> v{};
    for (std::size_t l = 0; l < kNumLabels; ++l) v[l] = decision_value(model.per_class[l], x);
    return v;
}

ProtocolLabel argmax_label(const std::array<double, kNumLabels>& values) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < kNumLabels; ++l) {
        if (values[l] > values[best]) best = l;
    }
    return label_from_code(static_cast<int>(best));
}

ProtocolLabel predict(const MultiClassSvmModel& model, std::span<const double> x) {
    return argmax_label(decision_values(model, x));
}

} // namespace protoid
