#include "support/oracles.hpp"

#include "protoid/error.hpp"
#include "protoid/svm.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <random>

using namespace protoid;

namespace {

struct Problem {
    std::vector<FeaturePoint> rows;
    std::vector<int> y;
};

// Two overlapping Gaussian blobs, so some points end up at the bound C.
Problem blobs(std::size_t n, std::size_t dim, double separation, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Problem p;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = i % 2 == 0 ? 1 : -1;
        FeaturePoint x(dim);
        for (auto& v : x) v = g(rng);
        x[0] += y * separation / 2.0;
        p.rows.push_back(x);
        p.y.push_back(y);
    }
    return p;
}

LabeledDataset clusters(std::size_t per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.3);
    const double centre[3][3] = {{-2, 0, 0}, {2, 0, 0}, {0, 2.5, 1}};
    LabeledDataset ds;
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            ds.rows.push_back({{centre[c][0] + g(rng), centre[c][1] + g(rng), centre[c][2] + g(rng)},
                               label_from_code(c)});
        }
    }
    ds.standardization = Standardization{};
    return ds;
}

const KernelSpec kLinear{KernelKind::Linear};
const KernelSpec kPoly{KernelKind::Polynomial, 1.0, 3};
const KernelSpec kRbf{KernelKind::Rbf, 1.0, 3, 2.0};

} // namespace

TEST_SUITE("svm") {

TEST_CASE("kernel values") {
    const FeaturePoint a{1, 2}, b{3, 4};
    CHECK(kernel_eval(kLinear, a, b) == 11.0);
    CHECK(kernel_eval(kRbf, a, a) == 1.0);
    CHECK(kernel_eval({KernelKind::Polynomial, 1.0, 2}, FeaturePoint{1, 0}, FeaturePoint{1, 0}) == 4.0);
    CHECK_THROWS_AS(kernel_eval(kLinear, a, FeaturePoint{1, 2, 3}), DataError);
    CHECK_THROWS_AS((KernelSpec{KernelKind::Rbf, 1.0, 3, 0.0}).validate(), ConfigError);
    CHECK_NOTHROW((KernelSpec{KernelKind::Rbf, 1.0, 3, 0.0}).validate(true));
    CHECK_THROWS_AS((KernelSpec{KernelKind::Polynomial, 1.0, 0}).validate(), ConfigError);
}

TEST_CASE("kernels are symmetric, bounded and bilinear where expected") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int t = 0; t < 200; ++t) {
        FeaturePoint a{g(rng), g(rng), g(rng)}, b{g(rng), g(rng), g(rng)}, c{g(rng), g(rng), g(rng)};
        for (const auto& spec : {kLinear, kPoly, kRbf}) {
            CHECK(kernel_eval(spec, a, b) == doctest::Approx(kernel_eval(spec, b, a)));
            CHECK(kernel_eval(spec, a, b) == doctest::Approx(oracle::kernel(spec, a, b)).epsilon(1e-12));
        }
        const double r = kernel_eval(kRbf, a, b);
        CHECK(r > 0.0);
        CHECK(r <= 1.0);
        FeaturePoint ab(3);
        for (int i = 0; i < 3; ++i) ab[std::size_t(i)] = 2.0 * a[std::size_t(i)] + 3.0 * b[std::size_t(i)];
        CHECK(kernel_eval(kLinear, ab, c) ==
              doctest::Approx(2.0 * kernel_eval(kLinear, a, c) + 3.0 * kernel_eval(kLinear, b, c)));
    }
}

TEST_CASE("Gram matrices are positive semidefinite") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<FeaturePoint> pts(50, FeaturePoint(3));
        for (auto& p : pts) for (auto& v : p) v = g(rng);
        for (const auto& spec : {kLinear, KernelSpec{KernelKind::Polynomial, 1.0, 2}, kRbf}) {
            Eigen::MatrixXd k(50, 50);
            for (int i = 0; i < 50; ++i)
                for (int j = 0; j < 50; ++j) k(i, j) = kernel_eval(spec, pts[std::size_t(i)], pts[std::size_t(j)]);
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
            CHECK(es.eigenvalues().minCoeff() >= -1e-8 * std::max(1.0, es.eigenvalues().maxCoeff()));
        }
    }
}

TEST_CASE("symmetric separable pair gives f(x) = x") {
    const std::vector<FeaturePoint> rows{{-1.0}, {1.0}};
    const std::vector<int> y{-1, 1};
    const auto m = train_binary(rows, y, kLinear, {1000.0, 1e-6, 100});
    CHECK(m.converged);
    CHECK(m.bias == doctest::Approx(0.0));
    for (double x : {-1.0, -0.3, 0.0, 0.5, 1.0}) {
        CHECK(decision_value(m, FeaturePoint{x}) == doctest::Approx(x).epsilon(1e-6));
    }
}

TEST_CASE("XOR is separable with the Gaussian kernel") {
    const std::vector<FeaturePoint> rows{{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    const std::vector<int> y{-1, -1, 1, 1};
    const auto m = train_binary(rows, y, {KernelKind::Rbf, 1.0, 3, 1.0}, {10.0, 1e-3, 100});
    for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] * decision_value(m, rows[i]) > 0.0);
}

TEST_CASE("trained models pass the KKT audit") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto p = blobs(120, 3, 2.0, seed);
        for (const auto& spec : {kLinear, kPoly, kRbf, KernelSpec{KernelKind::Rbf, 1.0, 3, 0.0}}) {
            for (double c : {0.5, 10.0}) {
                // Cubic kernel values on unscaled blobs reach ~1e4, so the absolute
                // stopping tolerance needs a generous iteration budget.
                const auto m = train_binary(p.rows, p.y, spec, {c, 1e-3, 5000});
                INFO("seed ", seed, " kernel ", to_string(spec.kind), " rbf_c ", spec.rbf_c, " C ", c,
                     " iterations ", m.iterations);
                REQUIRE(m.converged);
                const auto audit = oracle::kkt_audit(m, p.rows, p.y);
                CHECK(audit.box_ok);
                CHECK(audit.max_violation <= 1e-3);
                CHECK(audit.equality_residual <= 1e-3);
                CHECK(!m.support_vectors.empty());
                for (double co : m.coeffs) CHECK(std::abs(co) <= c * (1 + 1e-12));
            }
        }
    }
}

TEST_CASE("free support vectors sit on the margin") {
    const auto p = blobs(80, 2, 3.0, 7);
    const auto m = train_binary(p.rows, p.y, kRbf, {10.0, 1e-3, 100});
    std::size_t free_count = 0;
    for (std::size_t s = 0; s < m.support_indices.size(); ++s) {
        const double a = std::abs(m.coeffs[s]);
        if (a < 10.0) {
            ++free_count;
            const auto i = m.support_indices[s];
            CHECK(p.y[i] * decision_value(m, p.rows[i]) == doctest::Approx(1.0).epsilon(1e-3));
        }
    }
    CHECK(free_count > 0);
}

TEST_CASE("linear decision equals the explicit primal form") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        const auto p = blobs(100, 3, 1.5, seed);
        const auto m = train_binary(p.rows, p.y, kLinear, {10.0, 1e-3, 100});
        const auto w = oracle::primal_weights(m, 3);
        for (int q = 0; q < 100; ++q) {
            FeaturePoint x{g(rng), g(rng), g(rng)};
            const double primal = w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + m.bias;
            CHECK(std::abs(decision_value(m, x) - primal) <= 1e-6);
        }
    }
}

TEST_CASE("binary training input errors") {
    const std::vector<FeaturePoint> rows{{0.0}, {1.0}};
    CHECK_THROWS_AS(train_binary(rows, std::vector<int>{1, 1}, kLinear), DataError);
    CHECK_THROWS_AS(train_binary(std::vector<FeaturePoint>{{0.0}}, std::vector<int>{1}, kLinear), DataError);
    CHECK_THROWS_AS(train_binary(rows, std::vector<int>{1, 0}, kLinear), DataError);
    CHECK_THROWS_AS(train_binary(rows, std::vector<int>{1, -1}, kLinear, {0.0, 1e-3, 100}), ConfigError);
}

TEST_CASE("iteration budget exhaustion is flagged") {
    const auto p = blobs(200, 3, 0.5, 3);
    const auto m = train_binary(p.rows, p.y, kRbf, {100.0, 1e-9, 1});
    CHECK_FALSE(m.converged);
    CHECK(m.iterations == 200);
}

TEST_CASE("median heuristic") {
    const std::vector<FeaturePoint> pts{{0.0}, {1.0}, {3.0}};
    // squared distances 1, 9, 4 -> median 4
    CHECK(median_heuristic_rbf_c(pts) == 8.0);
}

TEST_CASE("one-vs-all separates clusters and is deterministic") {
    const auto ds = clusters(40, 5);
    for (const auto& spec : {kLinear, kPoly, kRbf}) {
        const auto m = train_one_vs_all(ds, spec, {10.0, 1e-3, 100});
        const auto m2 = train_one_vs_all(ds, spec, {10.0, 1e-3, 100});
        for (const auto& r : ds.rows) {
            const auto x = to_point(r.features, FeatureSet::TimePlusPapr);
            CHECK(predict(m, x) == r.label);
            CHECK(predict(m2, x) == predict(m, x));
        }
    }
}

TEST_CASE("each binary problem is class versus rest") {
    auto ds = clusters(30, 6);
    ds.rows.resize(70); // 30 / 30 / 10
    const auto m = train_one_vs_all(ds, kRbf, {10.0, 1e-3, 100});
    std::vector<FeaturePoint> rows;
    for (const auto& r : ds.rows) rows.push_back(to_point(r.features, FeatureSet::TimePlusPapr));
    for (int l = 0; l < 3; ++l) {
        std::vector<int> y;
        for (const auto& r : ds.rows) y.push_back(code(r.label) == l ? 1 : -1);
        CHECK(std::count(y.begin(), y.end(), 1) == (l == 2 ? 10 : 30));
        const auto audit = oracle::kkt_audit(m.per_class[std::size_t(l)], rows, y);
        CHECK(audit.ok(1e-3));
    }
    auto missing = clusters(10, 1);
    missing.rows.resize(20);
    CHECK_THROWS_AS(train_one_vs_all(missing, kRbf), DataError);
}

TEST_CASE("argmax ties go to the smallest code and shifts do not matter") {
    CHECK(argmax_label({0.5, 0.5, 0.5}) == ProtocolLabel::Wifi);
    CHECK(argmax_label({0.1, 0.7, 0.7}) == ProtocolLabel::WifiBeacon);
    MultiClassSvmModel degenerate;
    CHECK(predict(degenerate, FeaturePoint{1, 2, 3}) == ProtocolLabel::Wifi);

    const auto ds = clusters(20, 8);
    auto m = train_one_vs_all(ds, kRbf);
    auto shifted = m;
    for (auto& b : shifted.per_class) b.bias += 3.25;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int q = 0; q < 200; ++q) {
        FeaturePoint x{g(rng), g(rng), g(rng)};
        CHECK(predict(m, x) == predict(shifted, x));
    }
}

TEST_CASE("deep cluster members are classified by their cluster") {
    const auto ds = clusters(30, 2);
    const auto m = train_one_vs_all(ds, kRbf);
    CHECK(predict(m, FeaturePoint{-2, 0, 0}) == ProtocolLabel::Wifi);
    CHECK(predict(m, FeaturePoint{2, 0, 0}) == ProtocolLabel::WifiBeacon);
    CHECK(predict(m, FeaturePoint{0, 2.5, 1}) == ProtocolLabel::Bluetooth);
}

} // TEST_SUITE
