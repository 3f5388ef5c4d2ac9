#include "support/oracles.hpp"

#include "protoid/error.hpp"
#include "protoid/knn.hpp"

#include <doctest.h>

#include <random>

using namespace protoid;

namespace {

LabeledDataset random_standardized(std::size_t n, std::uint64_t seed, bool coarse = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> lab(0, 2);
    std::uniform_int_distribution<int> grid(-3, 3);
    LabeledDataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        FeatureVector f;
        // A coarse integer grid forces many exact distance ties.
        for (std::size_t d = 0; d < 3; ++d) f[d] = coarse ? grid(rng) : g(rng);
        ds.rows.push_back({f, label_from_code(lab(rng))});
    }
    ds.standardization = Standardization{};
    return ds;
}

std::vector<int> codes(const KnnModel& m) {
    std::vector<int> out;
    for (auto l : m.labels) out.push_back(code(l));
    return out;
}

} // namespace

TEST_SUITE("knn") {

TEST_CASE("Euclidean distance") {
    CHECK(euclidean_distance(FeaturePoint{0, 0}, FeaturePoint{3, 4}) == 5.0);
    CHECK(euclidean_distance(FeaturePoint{1, 2}, FeaturePoint{1, 2}) == 0.0);
    CHECK(euclidean_distance(FeaturePoint{1, 1, 1}, FeaturePoint{2, 2, 2}) == doctest::Approx(std::sqrt(3.0)));
    CHECK_THROWS_AS(euclidean_distance(FeaturePoint{1}, FeaturePoint{1, 2}), DataError);
}

TEST_CASE("triangle inequality on sampled triples") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int t = 0; t < 1000; ++t) {
        FeaturePoint a{g(rng), g(rng), g(rng)}, b{g(rng), g(rng), g(rng)}, c{g(rng), g(rng), g(rng)};
        CHECK(euclidean_distance(a, c) <= euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12);
    }
}

TEST_CASE("k equal to N returns every row in order") {
    const auto ds = random_standardized(30, 1);
    const auto m = make_knn(ds, 30);
    const auto nb = k_nearest(m, FeaturePoint{0, 0, 0});
    REQUIRE(nb.size() == 30);
    for (std::size_t i = 1; i < nb.size(); ++i) {
        CHECK((nb[i - 1].distance < nb[i].distance ||
               (nb[i - 1].distance == nb[i].distance && nb[i - 1].index < nb[i].index)));
    }
}

TEST_CASE("a training row is its own nearest neighbour") {
    const auto ds = random_standardized(50, 2);
    const auto m = make_knn(ds, 5);
    for (std::size_t i = 0; i < 50; ++i) {
        const auto nb = k_nearest(m, m.points[i]);
        CHECK(nb[0].index == i);
        CHECK(nb[0].distance == 0.0);
    }
}

TEST_CASE("unanimous and split votes") {
    LabeledDataset ds;
    for (int i = 0; i < 5; ++i) ds.rows.push_back({{1.0 + 0.01 * i, 0, 0}, ProtocolLabel::Bluetooth});
    for (int i = 0; i < 5; ++i) ds.rows.push_back({{-2.0 - 0.01 * i, 0, 0}, ProtocolLabel::Wifi});
    ds.standardization = Standardization{};
    // Unanimous.
    CHECK(predict(make_knn(ds, 3), FeaturePoint{1, 0, 0}) == ProtocolLabel::Bluetooth);
    // 5/5 split: the nearer cluster wins even though it has the larger code.
    CHECK(predict(make_knn(ds, 10), FeaturePoint{0, 0, 0}) == ProtocolLabel::Bluetooth);
    // Exact tie in votes and summed distance: smaller code.
    LabeledDataset sym;
    sym.rows.push_back({{1, 0, 0}, ProtocolLabel::Bluetooth});
    sym.rows.push_back({{-1, 0, 0}, ProtocolLabel::WifiBeacon});
    sym.standardization = Standardization{};
    CHECK(predict(make_knn(sym, 2), FeaturePoint{0, 0, 0}) == ProtocolLabel::WifiBeacon);
}

TEST_CASE("k = 1 gives the nearest row's label") {
    const auto ds = random_standardized(100, 3);
    const auto m = make_knn(ds, 1);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int q = 0; q < 200; ++q) {
        FeaturePoint x{g(rng), g(rng), g(rng)};
        CHECK(predict(m, x) == m.labels[k_nearest(m, x)[0].index]);
    }
}

TEST_CASE("predictions match the brute-force oracle") {
    for (bool coarse : {false, true}) {
        for (int k : {1, 4, 10}) {
            const auto ds = random_standardized(300, 10 + std::uint64_t(k), coarse);
            const auto m = make_knn(ds, k);
            const auto labels = codes(m);
            std::mt19937_64 rng(77);
            std::normal_distribution<double> g;
            std::uniform_int_distribution<int> grid(-3, 3);
            for (int q = 0; q < 1000; ++q) {
                FeaturePoint x(3);
                for (auto& v : x) v = coarse ? grid(rng) + 0.5 * (grid(rng) % 2) : g(rng);
                CHECK(code(predict(m, x)) == oracle::knn_predict(m.points, labels, k, x));
            }
        }
    }
}

TEST_CASE("prediction ignores training row order") {
    // Continuous coordinates: a distance tie at the k-th place would make the
    // neighbour set depend on row index.
    auto ds = random_standardized(200, 4);
    const auto m = make_knn(ds, 7);
    std::mt19937_64 rng(9);
    std::shuffle(ds.rows.begin(), ds.rows.end(), rng);
    const auto shuffled = make_knn(ds, 7);
    std::normal_distribution<double> g;
    for (int q = 0; q < 500; ++q) {
        FeaturePoint x{g(rng), g(rng), g(rng)};
        CHECK(predict(m, x) == predict(shuffled, x));
    }
}

TEST_CASE("model construction errors") {
    const auto ds = random_standardized(5, 1);
    CHECK_THROWS_AS(make_knn(ds, 6), ConfigError);
    CHECK_THROWS_AS(make_knn(ds, 0), ConfigError);
    LabeledDataset raw = ds;
    raw.standardization.reset();
    CHECK_THROWS_AS(make_knn(raw, 1), DataError);
}

} // TEST_SUITE
