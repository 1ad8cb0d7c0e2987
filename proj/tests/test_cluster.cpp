#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "flat/cluster.hpp"
#include "flat/error.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace flat;

namespace {

// Two blobs of `each` points around (0,0) and (10,10), spread `spread`.
Eigen::MatrixXd two_blobs(Index each, double spread, std::uint64_t seed) {
    Eigen::MatrixXd pts = testing::uniform(2 * each, 2, seed, -spread, spread);
    pts.bottomRows(each).array() += 10.0;
    return pts;
}

std::vector<int> random_labels(std::size_t n, int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(1, k);
    std::vector<int> out(n);
    for (auto& l : out) l = u(rng);
    return out;
}

}  // namespace

TEST_CASE("dbscan separates two blobs") {
    const auto pts = two_blobs(15, 0.1, 1);
    const auto r = dbscan(pts, 1.0, 3);
    CHECK(r.k == 2);
    CHECK(r.noise_fraction() == 0.0);
    for (Index i = 0; i < 15; ++i) CHECK(r.labels[i] == 1);
    for (Index i = 15; i < 30; ++i) CHECK(r.labels[i] == 2);
    CHECK(r.labels == oracle::dbscan_closure(pts, 1.0, 3));
}

TEST_CASE("dbscan on identical rows and an outlier") {
    Eigen::MatrixXd same = Eigen::MatrixXd::Constant(6, 2, 1.5);
    const auto r = dbscan(same, 0.1, 6);
    CHECK(r.k == 1);
    CHECK(std::all_of(r.labels.begin(), r.labels.end(), [](int l) { return l == 1; }));

    Eigen::MatrixXd pts(7, 2);
    pts.topRows(6) = same;
    pts.row(6) << 1.5 + 10.0, 1.5;
    const auto s = dbscan(pts, 0.1, 2);
    CHECK(s.labels[6] == kNoise);
    CHECK(s.k == 1);
}

TEST_CASE("dbscan counts the point itself") {
    Eigen::MatrixXd pts(2, 1);
    pts << 0.0, 0.5;
    CHECK(dbscan(pts, 1.0, 2).k == 1);
    CHECK(dbscan(pts, 1.0, 3).k == 0);
    CHECK(dbscan(pts, 0.1, 1).k == 2);
}

TEST_CASE("dbscan matches the closure oracle on small instances") {
    for (std::uint64_t seed = 1; seed <= 300; ++seed) {
        const Index n = 2 + seed % 6;
        const auto pts = testing::uniform(n, 2, seed);
        const double eps = 0.1 + 0.05 * static_cast<double>(seed % 7);
        const int m = 1 + static_cast<int>(seed % 4);
        CHECK(dbscan(pts, eps, m).labels == oracle::dbscan_closure(pts, eps, m));
    }
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto pts = testing::uniform(25, 2, seed + 1000);
        CHECK(dbscan(pts, 0.15, 3).labels == oracle::dbscan_closure(pts, 0.15, 3));
    }
}

TEST_CASE("dbscan is invariant to point order up to renaming") {
    const auto pts = testing::uniform(40, 2, 7);
    std::vector<Index> perm(40);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(8));
    Eigen::MatrixXd shuffled(40, 2);
    for (Index i = 0; i < 40; ++i) shuffled.row(i) = pts.row(perm[i]);
    // Border points may attach differently under another order, so compare
    // core-point co-membership only.
    const auto a = dbscan(pts, 0.2, 4);
    const auto b = dbscan(shuffled, 0.2, 4);
    CHECK(a.k == b.k);
    std::vector<int> core(40, 0);
    for (Index i = 0; i < 40; ++i) {
        int m = 0;
        for (Index j = 0; j < 40; ++j) m += (pts.row(i) - pts.row(j)).norm() <= 0.2;
        core[i] = m >= 4;
    }
    for (Index i = 0; i < 40; ++i)
        for (Index j = 0; j < 40; ++j)
            if (core[perm[i]] && core[perm[j]])
                CHECK((b.labels[i] == b.labels[j]) == (a.labels[perm[i]] == a.labels[perm[j]]));
    CHECK(dbscan(pts, 0.2, 4).labels == a.labels);
}

TEST_CASE("dbscan arguments") {
    const auto pts = testing::uniform(5, 2, 9);
    CHECK_THROWS_AS(dbscan(pts, 0.0, 3), ConfigError);
    CHECK_THROWS_AS(dbscan(pts, 0.1, 0), ConfigError);
}

TEST_CASE("label helpers") {
    const std::vector<int> raw = {7, 7, -1, 3, 7, 3, -1};
    CHECK(canonical_labels(raw) == std::vector<int>{1, 1, -1, 2, 1, 2, -1});
    const auto s = noise_as_singletons(raw);
    CHECK(s[2] != s[6]);
    CHECK(s[2] != 7);
    CHECK(s[2] != 3);
}

TEST_CASE("rand index examples") {
    const std::vector<int> a = {1, 1, 2, 2}, b = {1, 2, 1, 2};
    CHECK(rand_index(a, a) == 1.0);
    CHECK(rand_index(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(rand_index(std::vector<int>{1, 2}, std::vector<int>{1, 1}) == 0.0);
    CHECK_THROWS_AS(rand_index(a, std::vector<int>{1, 2}), DimensionError);
}

TEST_CASE("adjusted rand index examples") {
    const std::vector<int> a = {1, 1, 2, 2}, b = {1, 2, 1, 2};
    CHECK(adjusted_rand_index(a, a) == 1.0);
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(-0.5));
    const std::vector<int> one(5, 1);
    CHECK(adjusted_rand_index(one, one) == 1.0);
}

TEST_CASE("rand indices match the pair-count oracle") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const std::size_t n = 5 + seed % 30;
        const auto a = random_labels(n, 1 + seed % 4, seed);
        const auto b = random_labels(n, 1 + seed % 5, seed + 100);
        CHECK(rand_index(a, b) == doctest::Approx(oracle::rand_index(a, b)).epsilon(1e-12));
        CHECK(adjusted_rand_index(a, b) ==
              doctest::Approx(oracle::adjusted_rand_index(a, b)).epsilon(1e-12));
        CHECK(rand_index(a, b) == rand_index(b, a));
        CHECK(adjusted_rand_index(a, b) == doctest::Approx(adjusted_rand_index(b, a)));

        std::vector<int> renamed(b);
        for (auto& l : renamed) l = 100 - 3 * l;
        CHECK(adjusted_rand_index(a, renamed) == doctest::Approx(adjusted_rand_index(a, b)));
        CHECK(rand_index(a, renamed) == doctest::Approx(rand_index(a, b)));
    }
}

TEST_CASE("adjusted rand index averages to zero under permutation") {
    const auto truth = random_labels(60, 3, 11);
    std::vector<int> pred = random_labels(60, 4, 12);
    std::mt19937_64 rng(13);
    double sum = 0;
    for (int t = 0; t < 1000; ++t) {
        std::shuffle(pred.begin(), pred.end(), rng);
        sum += adjusted_rand_index(truth, pred);
    }
    CHECK(std::abs(sum / 1000) <= 0.02);
}

TEST_CASE("silhouette") {
    const auto pts = two_blobs(10, 0.1, 14);
    std::vector<int> labels(20, 1);
    std::fill(labels.begin() + 10, labels.end(), 2);
    CHECK(silhouette(pts, labels) > 0.9);
    CHECK(silhouette(pts, labels) == doctest::Approx(oracle::silhouette(pts, labels)).epsilon(1e-12));

    // a = b: the middle point sits 1 from its partner and 1 from the other cluster.
    Eigen::MatrixXd line(3, 1);
    line << 0.0, 1.0, 2.0;
    const auto s = silhouette_samples(line, std::vector<int>{1, 1, 2});
    CHECK(s[1] == doctest::Approx(0.0));
    CHECK(s[2] == 0.0);  // singleton cluster

    // Point 1 is closer to the other cluster than to its own.
    Eigen::MatrixXd bad(4, 1);
    bad << 0.0, 5.0, 5.5, 6.0;
    CHECK(silhouette_samples(bad, std::vector<int>{1, 1, 2, 2})[1] < 0.0);

    CHECK_THROWS_AS(silhouette(pts, std::vector<int>(20, 1)), UndefinedMetricError);
}

TEST_CASE("silhouette and CHI match direct oracles with noise present") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto pts = testing::uniform(30, 3, seed);
        auto labels = random_labels(30, 2 + seed % 3, seed + 5);
        labels[3] = labels[17] = kNoise;
        CHECK(silhouette(pts, labels) ==
              doctest::Approx(oracle::silhouette(pts, labels)).epsilon(1e-12));
        CHECK(calinski_harabasz(pts, labels) ==
              doctest::Approx(oracle::calinski_harabasz(pts, labels)).epsilon(1e-12));
    }
}

TEST_CASE("calinski-harabasz") {
    const auto pts = two_blobs(20, 0.05, 15);
    std::vector<int> labels(40, 1);
    std::fill(labels.begin() + 20, labels.end(), 2);
    const double chi = calinski_harabasz(pts, labels);
    CHECK(chi > 1e4);
    CHECK(calinski_harabasz(2.0 * pts, labels) == doctest::Approx(chi));

    const auto blob = testing::uniform(200, 2, 16);
    double total = 0;
    for (std::uint64_t t = 0; t < 20; ++t) total += calinski_harabasz(blob, random_labels(200, 3, 17 + t));
    CHECK(total / 20 < 5.0);

    Eigen::MatrixXd tight(4, 1);
    tight << 0, 0, 1, 1;
    bool degenerate = false;
    CHECK(std::isinf(calinski_harabasz(tight, std::vector<int>{1, 1, 2, 2}, &degenerate)));
    CHECK(degenerate);
    CHECK_THROWS_AS(calinski_harabasz(tight, std::vector<int>{1, 1, 1, 1}), UndefinedMetricError);
}

TEST_CASE("selection on a two-blob field") {
    const auto pts = two_blobs(20, 0.1, 18);
    const auto sel = select_clustering(pts, default_epsilon_grid(pts), default_minpts_grid());
    CHECK(sel.result.k == 2);
    CHECK(sel.table.size() == 18);

    const auto single = select_clustering(pts, {1.0}, {3});
    CHECK(single.result.epsilon == 1.0);
    CHECK(single.result.min_pts == 3);
    CHECK(single.table.front().key() == "eps=1,minpts=3");
}

TEST_CASE("selection ties prefer smaller epsilon, then smaller minPts") {
    const auto pts = two_blobs(10, 0.1, 19);
    const auto sel = select_clustering(pts, {2.0, 1.0, 3.0}, {5, 3});
    CHECK(sel.result.epsilon == 1.0);
    CHECK(sel.result.min_pts == 3);
}

TEST_CASE("selection rejects inadmissible grids") {
    const auto pts = testing::uniform(30, 2, 20);
    CHECK_THROWS_AS(select_clustering(pts, {10.0}, {3}), UndefinedMetricError);
    CHECK_THROWS_AS(select_clustering(pts, {}, {3}), ConfigError);

    // Half the points are noise at this radius.
    Eigen::MatrixXd mixed(12, 1);
    mixed << 0, 0, 0, 10, 10, 10, 20, 30, 40, 50, 60, 70;
    SelectionRules rules;
    CHECK_THROWS_AS(select_clustering(mixed, {0.5}, {2}, rules), UndefinedMetricError);
    rules.max_noise_fraction = 0.6;
    CHECK(select_clustering(mixed, {0.5}, {2}, rules).result.k == 2);
    rules.k_max = 1;
    CHECK_THROWS_AS(select_clustering(mixed, {0.5}, {2}, rules), UndefinedMetricError);
}

TEST_CASE("default grids scale with the bounding box") {
    Eigen::MatrixXd pts(2, 2);
    pts << 0, 0, 3, 4;
    const auto g = default_epsilon_grid(pts);
    REQUIRE(g.size() == 6);
    CHECK(g.front() == doctest::Approx(0.025));
    CHECK(g.back() == doctest::Approx(1.0));
    CHECK(default_minpts_grid() == std::vector<int>{3, 5, 10});
}
