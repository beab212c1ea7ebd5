#include <cmath>
#include <set>

#include <doctest.h>

#include "tbg/synthetic.hpp"

using namespace tbg;

TEST_CASE("synth_logits determinism") {
    SyntheticLM model = SyntheticLM::make(32, 7);
    std::vector<int> prompt = {3, 5, 9};
    std::vector<int> prefix = {1, 2};
    auto a = synth_logits(model, prompt, prefix);
    auto b = synth_logits(model, prompt, prefix);
    CHECK(a.values == b.values);

    auto c = synth_logits(model, prompt, {});
    CHECK(a.values != c.values);
}

TEST_CASE("synth_logits context overflow") {
    SyntheticLM model = SyntheticLM::make(16, 1, {}, 4);
    std::vector<int> prefix = {1, 2, 3, 4};
    CHECK_THROWS(synth_logits(model, {}, prefix));
}

TEST_CASE("gap profile margin zero makes top-2 equal") {
    GapProfile gap;
    gap.margin_min = 0.0;
    gap.margin_max = 0.0;
    SyntheticLM model = SyntheticLM::make(32, 3, gap);
    auto z = synth_logits(model, {{1}}, {});
    std::vector<double> sorted = z.values;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted[sorted.size() - 1] == doctest::Approx(sorted[sorted.size() - 2]).epsilon(1e-15));
}

TEST_CASE("large margin makes greedy generation unique across seeds") {
    GapProfile gap;
    gap.margin_min = 5.0;
    gap.margin_max = 10.0;
    SyntheticLM model = SyntheticLM::make(32, 4, gap);
    std::vector<int> prompt = {2, 4};
    PerturbationModel none;
    std::set<std::string> outputs;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SeededRng rng(seed);
        outputs.insert(generate(model, prompt, Temperature{0.0}, none, 8, rng).text);
    }
    CHECK(outputs.size() == 1);
}

TEST_CASE("perturb identity cases") {
    LogitVector z{{1.0, -0.5, 2.0}};
    SeededRng rng(1);
    PerturbationModel none;
    CHECK(perturb(z, none, rng).values == z.values);

    PerturbationModel gauss0;
    gauss0.kind = PerturbationKind::gaussian_logit_noise;
    gauss0.sigma = 0.0;
    CHECK(perturb(z, gauss0, rng).values == z.values);
}

TEST_CASE("quantization rounds to the grid") {
    PerturbationModel quant;
    quant.kind = PerturbationKind::quantization;
    quant.quant_step = 0.5;
    SeededRng rng(1);
    auto out = perturb({{0.6, 1.24, -0.3}}, quant, rng);
    CHECK(out.values[0] == doctest::Approx(0.5));
    CHECK(out.values[1] == doctest::Approx(1.0));
    CHECK(out.values[2] == doctest::Approx(-0.5));
}

// P(z0 + n0 < z1 + n1) = Phi((z1 - z0) / (sigma * sqrt(2))) for iid gaussians
TEST_CASE("gaussian noise argmax flip frequency matches closed form") {
    PerturbationModel gauss;
    gauss.kind = PerturbationKind::gaussian_logit_noise;
    gauss.sigma = 10.0;
    LogitVector z{{1.0, 0.0}};
    SeededRng rng(77);
    const int draws = 10000;
    int flips = 0;
    for (int i = 0; i < draws; ++i) {
        auto out = perturb(z, gauss, rng);
        if (out.values[1] > out.values[0]) ++flips;
    }
    double expected = 0.5 * std::erfc((1.0 / (10.0 * std::sqrt(2.0))) / std::sqrt(2.0));
    CHECK(expected == doctest::Approx(0.4719).epsilon(1e-3));
    CHECK(static_cast<double>(flips) / draws == doctest::Approx(expected).epsilon(0.035));
}

TEST_CASE("batch shape noise is keyed by batch size") {
    PerturbationModel batch;
    batch.kind = PerturbationKind::batch_shape_noise;
    batch.batch_size_distribution = {{1, 0.5}, {8, 0.5}};
    batch.batch_offset_seed = 5;
    LogitVector z{{0.0, 0.0, 0.0, 0.0}};
    SeededRng rng(3);
    std::set<std::vector<double>> outcomes;
    for (int i = 0; i < 200; ++i) outcomes.insert(perturb(z, batch, rng).values);
    CHECK(outcomes.size() == 2);  // one fixed offset vector per batch size
}

TEST_CASE("generate is pure at T=0 with no perturbation") {
    SyntheticLM model = SyntheticLM::make(32, 9);
    PerturbationModel none;
    std::vector<int> prompt = {7};
    std::string first;
    for (int i = 0; i < 10; ++i) {
        SeededRng rng(static_cast<uint64_t>(i));
        auto out = generate(model, prompt, Temperature{0.0}, none, 12, rng);
        if (i == 0) first = out.text;
        CHECK(out.text == first);
    }
}

TEST_CASE("generate reproduces exactly with the same seed at T>0") {
    SyntheticLM model = SyntheticLM::make(32, 9);
    PerturbationModel none;
    std::vector<int> prompt = {7};
    SeededRng a(42), b(42);
    auto ra = generate(model, prompt, Temperature{0.8}, none, 12, a);
    auto rb = generate(model, prompt, Temperature{0.8}, none, 12, b);
    CHECK(ra.token_ids == rb.token_ids);
    CHECK(ra.text == rb.text);
}

TEST_CASE("large noise on a near-tie model produces divergent outputs at T=0") {
    GapProfile gap;
    gap.margin_max = 0.3;
    SyntheticLM model = SyntheticLM::make(32, 5, gap);
    PerturbationModel gauss;
    gauss.kind = PerturbationKind::gaussian_logit_noise;
    gauss.sigma = 2.0;
    std::vector<int> prompt = {1, 3};
    std::set<std::string> outputs;
    for (int run = 0; run < 32; ++run) {
        SeededRng rng(static_cast<uint64_t>(run) + 100);
        outputs.insert(generate(model, prompt, Temperature{0.0}, gauss, 12, rng).text);
    }
    CHECK(outputs.size() >= 2);
}

TEST_CASE("sampling at T=1 is more variable than greedy") {
    GapProfile gap;
    gap.margin_max = 0.5;
    SyntheticLM model = SyntheticLM::make(32, 6, gap);
    PerturbationModel none;
    std::vector<int> prompt = {2};
    std::set<std::string> greedy_outputs, sampled_outputs;
    for (int run = 0; run < 32; ++run) {
        SeededRng g(static_cast<uint64_t>(run)), s(static_cast<uint64_t>(run) + 500);
        greedy_outputs.insert(generate(model, prompt, Temperature{0.0}, none, 12, g).text);
        sampled_outputs.insert(generate(model, prompt, Temperature{1.0}, none, 12, s).text);
    }
    CHECK(greedy_outputs.size() == 1);
    CHECK(sampled_outputs.size() > greedy_outputs.size());
}

TEST_CASE("trace records top-k logprobs of the sampling distribution") {
    SyntheticLM model = SyntheticLM::make(32, 8);
    PerturbationModel none;
    SeededRng rng(1);
    auto out = generate(model, {{4}}, Temperature{1.0}, none, 6, rng, 5);
    REQUIRE(!out.trace.empty());
    for (const auto& step : out.trace) {
        CHECK(step.top_logprobs.size() <= 5);
        double prev = 1.0;
        for (const auto& [tok, lp] : step.top_logprobs) {
            double p = std::exp(lp);
            CHECK(p <= prev + 1e-12);  // sorted descending
            prev = p;
        }
    }
}
