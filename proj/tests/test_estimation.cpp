#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "tbg/estimation.hpp"
#include "tbg/rng.hpp"

using namespace tbg;

namespace {

// brute force: evaluate |F_a - F_b| at every sample point
double ks_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    std::set<double> points(a.begin(), a.end());
    points.insert(b.begin(), b.end());
    double d = 0.0;
    for (double x : points) {
        double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; })) /
                    static_cast<double>(a.size());
        double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; })) /
                    static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

VariabilityDistribution make_dist(std::vector<double> values, MetricKind kind = MetricKind::exact_match_fraction) {
    VariabilityDistribution d;
    d.metric = kind;
    d.values = std::move(values);
    for (size_t i = 0; i < d.values.size(); ++i) d.prompt_ids.push_back("p" + std::to_string(i));
    return d;
}

}  // namespace

TEST_CASE("ks_statistic endpoints") {
    CHECK(ks_statistic({0.1, 0.2, 0.5}, {0.1, 0.2, 0.5}) == 0.0);
    CHECK(ks_statistic({0.1, 0.2}, {0.3, 0.4}) == 1.0);
    CHECK(ks_statistic({1, 2, 3}, {2, 3, 4}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("ks_statistic matches the CDF-merge oracle exactly") {
    SeededRng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t na = 1 + rng.next_u64() % 200;
        size_t nb = 1 + rng.next_u64() % 200;
        std::vector<double> a, b;
        for (size_t i = 0; i < na; ++i) a.push_back(std::round(rng.next_unit() * 20.0) / 20.0);
        for (size_t i = 0; i < nb; ++i) b.push_back(std::round(rng.next_unit() * 20.0) / 20.0);
        CHECK(ks_statistic(a, b) == ks_oracle(a, b));
    }
}

TEST_CASE("ks properties: symmetry, range, monotone-transform invariance") {
    SeededRng rng(19);
    for (int trial = 0; trial < 200; ++trial) {
        size_t na = 2 + rng.next_u64() % 50;
        size_t nb = 2 + rng.next_u64() % 50;
        std::vector<double> a, b;
        for (size_t i = 0; i < na; ++i) a.push_back(rng.next_unit());
        for (size_t i = 0; i < nb; ++i) b.push_back(rng.next_unit());
        double d = ks_statistic(a, b);
        CHECK(d == ks_statistic(b, a));
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        // strictly increasing transform applied to both samples
        auto transform = [](double x) { return std::exp(3.0 * x) - 1.0; };
        std::vector<double> ta = a, tb = b;
        for (double& x : ta) x = transform(x);
        for (double& x : tb) x = transform(x);
        CHECK(ks_statistic(ta, tb) == doctest::Approx(d).epsilon(1e-12));
    }
}

TEST_CASE("ks_distance rejects metric mismatch") {
    auto f = make_dist({0.1, 0.2});
    auto g = make_dist({0.1, 0.2}, MetricKind::edit_distance_mean);
    CHECK_THROWS(ks_distance(f, g));
    g.metric = MetricKind::exact_match_fraction;
    CHECK(ks_distance(f, g) == 0.0);
}

TEST_CASE("select_t_hat on the published curve shape") {
    EquivalentTemperatureEstimate est;
    est.grid = {0.0, 0.04, 0.05, 0.06, 1.0};
    est.distances = {0.870, 0.160, 0.120, 0.205, 1.000};
    select_t_hat(est);
    CHECK(est.t_hat == 0.05);
    CHECK(est.minimizing_set == std::vector<double>{0.05});
    // quadratic refinement exists and stays near the grid minimum
    REQUIRE(est.t_hat_interpolated.has_value());
    CHECK(std::abs(*est.t_hat_interpolated - 0.05) < 0.01);
}

TEST_CASE("select_t_hat averages ties") {
    EquivalentTemperatureEstimate est;
    est.grid = {0.0, 0.01, 0.02, 0.03, 0.04};
    est.distances = {0.9, 0.167, 0.167, 0.167, 0.4};
    select_t_hat(est);
    CHECK(est.minimizing_set == std::vector<double>{0.01, 0.02, 0.03});
    CHECK(est.t_hat == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(!est.t_hat_interpolated.has_value());
}

TEST_CASE("fit self-match returns the source temperature with distance 0") {
    SeededRng rng(23);
    std::map<double, VariabilityDistribution> curves;
    for (double t : {0.0, 0.05, 0.1, 0.2}) {
        std::vector<double> values;
        for (int i = 0; i < 50; ++i) values.push_back(rng.next_unit() * (1.0 + t));
        for (double& v : values) v = std::min(v, 1.0);
        curves.emplace(t, make_dist(values));
    }
    DistanceSpec d;
    auto est = fit_equivalent_temperature(curves, curves.at(0.05), d, "ref");
    CHECK(est.t_hat == 0.05);
    CHECK(*std::min_element(est.distances.begin(), est.distances.end()) == 0.0);
}

TEST_CASE("aggregate_background means") {
    EquivalentTemperatureEstimate smoll, llama;
    smoll.reference_id = "smoll";
    smoll.t_hat = 0.05;
    smoll.grid = {0.0};
    smoll.distances = {0.0};
    llama.reference_id = "llama";
    llama.t_hat = 0.10;
    llama.grid = {0.0};
    llama.distances = {0.0};
    auto report = aggregate_background({smoll, llama});
    CHECK(report.overall == doctest::Approx(0.075).epsilon(1e-15));
    CHECK(report.per_reference.at("smoll") == 0.05);
    CHECK(report.per_reference.at("llama") == 0.10);

    smoll.t_hat = 0.01;
    llama.t_hat = 0.02;
    CHECK(aggregate_background({smoll, llama}).overall == doctest::Approx(0.015).epsilon(1e-15));

    EquivalentTemperatureEstimate zero = smoll;
    zero.t_hat = 0.0;
    auto single = aggregate_background({zero});
    CHECK(single.overall == 0.0);
    CHECK(single.t_hat_stddev == 0.0);

    // overall equals the mean of per-reference values exactly
    auto multi = aggregate_background({smoll, smoll, llama});
    double mean = 0.0;
    for (const auto& [ref, t] : multi.per_reference) mean += t;
    mean /= static_cast<double>(multi.per_reference.size());
    CHECK(multi.overall == mean);
}

TEST_CASE("cross_reference_heatmap diagonal and range") {
    SeededRng rng(29);
    std::map<double, VariabilityDistribution> curves;
    for (double t : {0.0, 0.1, 0.5, 1.0}) {
        std::vector<double> values;
        for (int i = 0; i < 40; ++i) values.push_back(std::min(1.0, rng.next_unit() + t * 0.3));
        curves.emplace(t, make_dist(values));
    }
    DistanceSpec d;
    auto m = cross_reference_heatmap(curves, curves, d);
    REQUIRE(m.values.size() == 4);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(m.values[i][i] == 0.0);
        for (size_t j = 0; j < 4; ++j) {
            CHECK(m.values[i][j] >= 0.0);
            CHECK(m.values[i][j] <= 1.0);
        }
    }
}

TEST_CASE("binned distances behave at identity and separation") {
    auto f = make_dist({0.1, 0.1, 0.2, 0.3});
    DistanceSpec js;
    js.kind = DistanceKind::jensen_shannon_binned;
    CHECK(sample_distance(f, f, js) == doctest::Approx(0.0).epsilon(1e-12));
    auto far = make_dist({0.9, 0.95, 1.0, 0.85});
    CHECK(sample_distance(f, far, js) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    DistanceSpec kl;
    kl.kind = DistanceKind::symmetrized_kl_binned;
    CHECK(sample_distance(f, f, kl) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(sample_distance(f, far, kl) > sample_distance(f, f, kl));

    DistanceSpec bad;
    bad.kind = DistanceKind::jensen_shannon_binned;
    bad.bins = 1;
    CHECK_THROWS(sample_distance(f, far, bad));
}
