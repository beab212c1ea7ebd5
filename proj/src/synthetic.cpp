#include "tbg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tbg {

SyntheticLM SyntheticLM::make(int vocab_size, uint64_t seed, GapProfile gap, int context_window) {
    SyntheticLM m;
    m.vocab = Vocabulary::symbolic(vocab_size);
    m.logit_fn_seed = seed;
    m.context_window = context_window;
    m.gap_profile = gap;
    return m;
}

void PerturbationModel::validate() const {
    if (sigma < 0.0) throw std::invalid_argument("PerturbationModel: sigma must be >= 0");
    if (kind == PerturbationKind::quantization && quant_step <= 0.0)
        throw std::invalid_argument("PerturbationModel: quant_step must be > 0");
    if (kind == PerturbationKind::batch_shape_noise) {
        if (batch_size_distribution.empty())
            throw std::invalid_argument("PerturbationModel: empty batch size distribution");
        double total = 0.0;
        for (const auto& [size, prob] : batch_size_distribution) {
            if (size < 1 || prob < 0.0) throw std::invalid_argument("PerturbationModel: bad batch size entry");
            total += prob;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("PerturbationModel: batch size probabilities must sum to 1");
    }
}

static double hash_to_unit(uint64_t h) { return (h >> 11) * 0x1.0p-53; }

LogitVector synth_logits(const SyntheticLM& model, std::span<const int> prompt, std::span<const int> prefix) {
    const int v = model.vocab.size();
    if (static_cast<int>(prefix.size()) >= model.context_window)
        throw std::runtime_error("synth_logits: context window exceeded");

    // absorb prompt and prefix into a single state
    uint64_t state = splitmix64(model.logit_fn_seed ^ 0x6a09e667f3bcc909ULL);
    for (int t : prompt) state = splitmix64(state ^ (static_cast<uint64_t>(t) + 0x9e3779b97f4a7c15ULL));
    state = splitmix64(state ^ 0xbb67ae8584caa73bULL);
    for (int t : prefix) state = splitmix64(state ^ (static_cast<uint64_t>(t) + 0x9e3779b97f4a7c15ULL));

    const GapProfile& gp = model.gap_profile;
    LogitVector z;
    z.values.resize(static_cast<size_t>(v));
    for (int t = 0; t < v; ++t)
        z.values[static_cast<size_t>(t)] = gp.spread * hash_to_unit(splitmix64(state + static_cast<uint64_t>(t) + 1));

    uint64_t ha = splitmix64(state ^ 0x510e527fade682d1ULL);
    uint64_t hb = splitmix64(state ^ 0x9b05688c2b3e6c1fULL);
    uint64_t hc = splitmix64(state ^ 0x1f83d9abfb41bd6bULL);
    int top = static_cast<int>(ha % static_cast<uint64_t>(v));
    int runner = static_cast<int>(hb % static_cast<uint64_t>(v - 1));
    if (runner >= top) ++runner;
    double u = hash_to_unit(hc);
    double margin = gp.margin_min + (gp.margin_max - gp.margin_min) * std::pow(u, gp.shape);
    z.values[static_cast<size_t>(runner)] = gp.spread;
    z.values[static_cast<size_t>(top)] = gp.spread + margin;
    return z;
}

LogitVector perturb(const LogitVector& z, const PerturbationModel& eps, SeededRng& rng) {
    eps.validate();
    switch (eps.kind) {
        case PerturbationKind::none:
            return z;
        case PerturbationKind::gaussian_logit_noise: {
            if (eps.sigma == 0.0) return z;
            LogitVector out = z;
            for (double& v : out.values) v += eps.sigma * rng.next_gaussian();
            return out;
        }
        case PerturbationKind::quantization: {
            LogitVector out = z;
            for (double& v : out.values) v = std::round(v / eps.quant_step) * eps.quant_step;
            return out;
        }
        case PerturbationKind::batch_shape_noise: {
            // draw a batch size, then apply that size's fixed offset vector
            double u = rng.next_unit();
            int batch = eps.batch_size_distribution.back().first;
            double acc = 0.0;
            for (const auto& [size, prob] : eps.batch_size_distribution) {
                acc += prob;
                if (u < acc) {
                    batch = size;
                    break;
                }
            }
            uint64_t key = splitmix64(eps.batch_offset_seed ^ (static_cast<uint64_t>(batch) * 0x2545f4914f6cdd1dULL));
            LogitVector out = z;
            for (size_t i = 0; i < out.values.size(); ++i) {
                double off = 2.0 * hash_to_unit(splitmix64(key + i + 1)) - 1.0;
                out.values[i] += eps.batch_offset_scale * off;
            }
            return out;
        }
    }
    throw std::logic_error("perturb: unknown kind");
}

GenerationResult generate(const SyntheticLM& model, std::span<const int> prompt, Temperature t,
                          const PerturbationModel& eps, int max_tokens, SeededRng& rng, int top_k) {
    if (max_tokens < 1) throw std::invalid_argument("generate: max_tokens must be >= 1");
    GenerationResult result;
    std::vector<int> prefix;
    for (int step = 0; step < max_tokens; ++step) {
        LogitVector z = synth_logits(model, prompt, prefix);
        LogitVector zp = perturb(z, eps, rng);
        ProbabilityVector p = apply_temperature(zp, t);
        int token = t.is_greedy() ? greedy_argmax(p) : sample_token(p, rng);

        if (top_k > 0) {
            std::vector<int> order(p.probs.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return p.probs[static_cast<size_t>(a)] > p.probs[static_cast<size_t>(b)]; });
            StepTrace st;
            for (int i = 0; i < top_k && i < static_cast<int>(order.size()); ++i) {
                double pi = p.probs[static_cast<size_t>(order[static_cast<size_t>(i)])];
                if (pi <= 0.0) break;
                st.top_logprobs.emplace_back(model.vocab.tokens[static_cast<size_t>(order[static_cast<size_t>(i)])],
                                             std::log(pi));
            }
            result.trace.push_back(std::move(st));
        }

        if (token == 0) break;  // EOS
        result.token_ids.push_back(token);
        prefix.push_back(token);
    }
    for (size_t i = 0; i < result.token_ids.size(); ++i) {
        if (i > 0) result.text += ' ';
        result.text += model.vocab.tokens[static_cast<size_t>(result.token_ids[i])];
    }
    return result;
}

std::vector<int> encode_prompt(const SyntheticLM& model, const std::string& text) {
    const int v = model.vocab.size();
    uint64_t h = fnv1a64(text);
    std::vector<int> out;
    out.reserve(4);
    for (int i = 0; i < 4; ++i) {
        h = splitmix64(h + static_cast<uint64_t>(i));
        out.push_back(1 + static_cast<int>(h % static_cast<uint64_t>(v - 1)));
    }
    return out;
}

}  // namespace tbg
