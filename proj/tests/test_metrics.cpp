#include <algorithm>
#include <cmath>
#include <map>

#include <doctest.h>

#include "tbg/metrics.hpp"
#include "tbg/rng.hpp"

using namespace tbg;

namespace {

// ---- independent brute-force oracles ----

double exact_match_oracle(const std::vector<std::string>& responses) {
    size_t best = 0;
    for (const auto& r : responses) {
        size_t count = 0;
        for (const auto& other : responses)
            if (other == r) ++count;
        best = std::max(best, count);
    }
    return static_cast<double>(best) / static_cast<double>(responses.size());
}

// full-matrix recursive Levenshtein, memoized; deliberately different from
// the two-row implementation in the library
size_t lev_oracle_impl(const std::string& a, const std::string& b, size_t i, size_t j,
                       std::map<std::pair<size_t, size_t>, size_t>& memo) {
    if (i == 0) return j;
    if (j == 0) return i;
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    size_t del = lev_oracle_impl(a, b, i - 1, j, memo) + 1;
    size_t ins = lev_oracle_impl(a, b, i, j - 1, memo) + 1;
    size_t sub = lev_oracle_impl(a, b, i - 1, j - 1, memo) + (a[i - 1] == b[j - 1] ? 0 : 1);
    size_t best = std::min({del, ins, sub});
    memo[key] = best;
    return best;
}

size_t lev_oracle(const std::string& a, const std::string& b) {
    std::map<std::pair<size_t, size_t>, size_t> memo;
    return lev_oracle_impl(a, b, a.size(), b.size(), memo);
}

std::pair<double, double> edit_stats_oracle(const std::vector<std::string>& responses) {
    std::vector<double> d;
    for (size_t i = 0; i < responses.size(); ++i)
        for (size_t j = i + 1; j < responses.size(); ++j)
            d.push_back(static_cast<double>(lev_oracle(responses[i], responses[j])));
    double mean = 0.0;
    for (double x : d) mean += x;
    mean /= static_cast<double>(d.size());
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(d.size()))};
}

double first_div_oracle(const std::vector<std::vector<int>>& seqs) {
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < seqs.size(); ++i)
        for (size_t j = i + 1; j < seqs.size(); ++j) {
            size_t k = 0;
            while (k < seqs[i].size() && k < seqs[j].size() && seqs[i][k] == seqs[j][k]) ++k;
            sum += static_cast<double>(k);
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

double entropy_oracle(const std::vector<double>& p) {
    long double h = 0.0L;
    for (double x : p)
        if (x > 0.0) h -= static_cast<long double>(x) * logl(static_cast<long double>(x));
    return static_cast<double>(h);
}

double js_oracle(const std::vector<double>& p, const std::vector<double>& q) {
    long double js = 0.0L;
    for (size_t i = 0; i < p.size(); ++i) {
        long double m = 0.5L * (p[i] + q[i]);
        if (p[i] > 0.0) js += 0.5L * p[i] * logl(p[i] / m);
        if (q[i] > 0.0) js += 0.5L * q[i] * logl(q[i] / m);
    }
    return static_cast<double>(js);
}

std::string random_string(SeededRng& rng, size_t max_len) {
    size_t len = rng.next_u64() % (max_len + 1);
    std::string s;
    for (size_t i = 0; i < len; ++i) s += static_cast<char>('a' + rng.next_u64() % 3);
    return s;
}

}  // namespace

TEST_CASE("exact_match_fraction examples") {
    CHECK(exact_match_fraction({"", {"a", "a", "a"}}) == 1.0);
    CHECK(exact_match_fraction({"", {"a", "a", "b", "c"}}) == 0.5);
    std::vector<std::string> hundred(100, "same answer");
    CHECK(exact_match_fraction({"", hundred}) == 1.0);
}

TEST_CASE("exact_match_fraction randomized against oracle") {
    SeededRng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 2 + rng.next_u64() % 9;
        std::vector<std::string> responses;
        for (size_t i = 0; i < n; ++i) responses.push_back(random_string(rng, 12));
        double got = exact_match_fraction({"", responses});
        CHECK(got == exact_match_oracle(responses));
        CHECK(got >= 1.0 / static_cast<double>(n));
        CHECK(got <= 1.0);
    }
}

TEST_CASE("first_divergence_index examples") {
    ResponseBundle b;
    b.responses = {"x", "y"};
    b.token_ids = {{1, 2, 3}, {1, 2, 4}};
    CHECK(first_divergence_index(b) == 2.0);

    b.token_ids = {{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}};
    CHECK(first_divergence_index(b) == 5.0);

    // pairwise divergences 0, 0, 3 -> mean 1
    b.responses = {"x", "y", "z"};
    b.token_ids = {{1, 2, 3}, {2, 2, 3}, {2, 2, 3, 4}};
    CHECK(first_divergence_index(b) == 1.0);
}

TEST_CASE("first_divergence_index uses words when token ids are absent") {
    ResponseBundle b;
    b.responses = {"the cat sat", "the cat ran"};
    CHECK(first_divergence_index(b) == 2.0);
    b.responses = {"the cat", "the cat sat"};  // strict prefix diverges at shorter length
    CHECK(first_divergence_index(b) == 2.0);
}

TEST_CASE("edit_distance_stats examples") {
    auto [m0, s0] = edit_distance_stats({"", {"abc", "abc"}});
    CHECK(m0 == 0.0);
    CHECK(s0 == 0.0);
    auto [m1, s1] = edit_distance_stats({"", {"kitten", "sitting"}});
    CHECK(m1 == 3.0);
    CHECK(s1 == 0.0);
    auto [m2, s2] = edit_distance_stats({"", {"a", "b", "a"}});
    CHECK(m2 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(s2 == doctest::Approx(std::sqrt(2.0) / 3.0).epsilon(1e-12));
}

TEST_CASE("edit_distance_stats randomized against oracle") {
    SeededRng rng(47);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 2 + rng.next_u64() % 5;
        std::vector<std::string> responses;
        for (size_t i = 0; i < n; ++i) responses.push_back(random_string(rng, 12));
        auto [mean, sd] = edit_distance_stats({"", responses});
        auto [omean, osd] = edit_stats_oracle(responses);
        CHECK(mean == doctest::Approx(omean).epsilon(1e-12));
        CHECK(sd == doctest::Approx(osd).epsilon(1e-12));
        // mean edit distance 0 iff all responses identical
        CHECK((mean == 0.0) == (exact_match_fraction({"", responses}) == 1.0));
    }
}

TEST_CASE("first_divergence_index randomized against oracle") {
    SeededRng rng(53);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 2 + rng.next_u64() % 6;
        ResponseBundle b;
        for (size_t i = 0; i < n; ++i) {
            size_t len = rng.next_u64() % 8;
            std::vector<int> seq;
            for (size_t k = 0; k < len; ++k) seq.push_back(static_cast<int>(rng.next_u64() % 3));
            b.token_ids.push_back(seq);
            b.responses.push_back("r" + std::to_string(i));
        }
        CHECK(first_divergence_index(b) == doctest::Approx(first_div_oracle(b.token_ids)).epsilon(1e-12));
    }
}

TEST_CASE("js_divergence closed forms") {
    CHECK(js_divergence({0.3, 0.7}, {0.3, 0.7}) == 0.0);
    // disjoint one-hots reach the ln 2 maximum
    CHECK(js_divergence({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    double v = js_divergence({0.5, 0.5}, {1.0, 0.0});
    CHECK(v == doctest::Approx(js_oracle({0.5, 0.5}, {1.0, 0.0})).epsilon(1e-12));
    // closed form: 0.25 ln(2/3) + 0.25 ln 2 + 0.5 ln(4/3)
    CHECK(v == doctest::Approx(0.2157615543388171).epsilon(1e-12));
}

TEST_CASE("js_divergence randomized properties") {
    SeededRng rng(61);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 2 + rng.next_u64() % 5;
        std::vector<double> p(n), q(n);
        double sp = 0.0, sq = 0.0;
        for (size_t i = 0; i < n; ++i) {
            p[i] = rng.next_unit();
            q[i] = rng.next_unit();
            sp += p[i];
            sq += q[i];
        }
        for (size_t i = 0; i < n; ++i) {
            p[i] /= sp;
            q[i] /= sq;
        }
        double pq = js_divergence(p, q);
        CHECK(pq == doctest::Approx(js_oracle(p, q)).epsilon(1e-12));
        CHECK(pq == doctest::Approx(js_divergence(q, p)).epsilon(1e-15));  // symmetric
        CHECK(pq >= 0.0);
        CHECK(pq <= std::log(2.0) + 1e-12);
    }
}

TEST_CASE("js_divergence_next_token on traced bundles") {
    ResponseBundle b;
    b.responses = {"x", "y"};
    b.logprob_tops = {
        {{{"a", std::log(0.5)}, {"b", std::log(0.5)}}},
        {{{"a", std::log(0.5)}, {"b", std::log(0.5)}}},
    };
    CHECK(js_divergence_next_token(b).value() == doctest::Approx(0.0).epsilon(1e-12));

    b.logprob_tops = {
        {{{"a", 0.0}}},
        {{{"b", 0.0}}},
    };
    CHECK(js_divergence_next_token(b).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    ResponseBundle no_data;
    no_data.responses = {"x", "y"};
    CHECK(!js_divergence_next_token(no_data).has_value());
}

TEST_CASE("mean_entropy on traced bundles") {
    ResponseBundle b;
    b.responses = {"x"};
    b.logprob_tops = {{{{"a", 0.0}}, {{"a", std::log(0.5)}, {"b", std::log(0.5)}}}};
    // positions: one-hot (H=0) and uniform-2 (H=ln 2) -> mean ln2/2
    CHECK(mean_entropy(b).value() == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-12));
    CHECK(entropy_oracle({0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("metrics are permutation invariant") {
    SeededRng rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        size_t n = 3 + rng.next_u64() % 4;
        ResponseBundle b;
        for (size_t i = 0; i < n; ++i) {
            b.responses.push_back(random_string(rng, 10));
            std::vector<int> seq;
            for (size_t k = 0; k < 4; ++k) seq.push_back(static_cast<int>(rng.next_u64() % 3));
            b.token_ids.push_back(seq);
        }
        ResponseBundle shuffled = b;
        // deterministic shuffle
        for (size_t i = n - 1; i > 0; --i) {
            size_t j = rng.next_u64() % (i + 1);
            std::swap(shuffled.responses[i], shuffled.responses[j]);
            std::swap(shuffled.token_ids[i], shuffled.token_ids[j]);
        }
        CHECK(exact_match_fraction(b) == exact_match_fraction(shuffled));
        CHECK(first_divergence_index(b) == doctest::Approx(first_divergence_index(shuffled)).epsilon(1e-12));
        auto [m1, s1] = edit_distance_stats(b);
        auto [m2, s2] = edit_distance_stats(shuffled);
        CHECK(m1 == doctest::Approx(m2).epsilon(1e-12));
        CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
    }
}

TEST_CASE("metric name round trip") {
    for (MetricKind kind :
         {MetricKind::exact_match_fraction, MetricKind::first_divergence_index, MetricKind::edit_distance_mean,
          MetricKind::edit_distance_std, MetricKind::js_divergence_next_token, MetricKind::mean_entropy})
        CHECK(metric_from_name(metric_name(kind)) == kind);
    CHECK_THROWS(metric_from_name("nope"));
}
