#include "tbg/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tbg {

Vocabulary Vocabulary::symbolic(int size) {
    if (size < 2) throw std::invalid_argument("Vocabulary: size must be >= 2");
    Vocabulary v;
    v.tokens.reserve(static_cast<size_t>(size));
    v.tokens.push_back("</s>");
    for (int i = 1; i < size; ++i) v.tokens.push_back("w" + std::to_string(i));
    return v;
}

void Vocabulary::validate() const {
    if (size() < 2) throw std::invalid_argument("Vocabulary: size must be >= 2");
}

void ProbabilityVector::validate() const {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("ProbabilityVector: entry out of [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("ProbabilityVector: does not sum to 1");
}

ProbabilityVector softmax(const LogitVector& z) {
    if (z.values.empty()) throw std::invalid_argument("softmax: empty logits");
    double zmax = z.values[0];
    for (double v : z.values) {
        if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite logit");
        zmax = std::max(zmax, v);
    }
    ProbabilityVector out;
    out.probs.resize(z.values.size());
    double sum = 0.0;
    for (size_t i = 0; i < z.values.size(); ++i) {
        double e = std::exp(z.values[i] - zmax);
        out.probs[i] = e;
        sum += e;
    }
    for (double& p : out.probs) p /= sum;
    return out;
}

ProbabilityVector apply_temperature(const LogitVector& z, Temperature t) {
    if (t.value < 0.0) throw std::invalid_argument("apply_temperature: negative temperature");
    if (t.is_greedy()) {
        ProbabilityVector p = softmax(z);
        int best = greedy_argmax(p);
        std::fill(p.probs.begin(), p.probs.end(), 0.0);
        p.probs[static_cast<size_t>(best)] = 1.0;
        return p;
    }
    if (t.value == 1.0) return softmax(z);
    LogitVector scaled;
    scaled.values.resize(z.values.size());
    for (size_t i = 0; i < z.values.size(); ++i) scaled.values[i] = z.values[i] / t.value;
    return softmax(scaled);
}

int greedy_argmax(const ProbabilityVector& p) {
    if (p.probs.empty()) throw std::invalid_argument("greedy_argmax: empty distribution");
    int best = 0;
    for (int i = 1; i < static_cast<int>(p.probs.size()); ++i) {
        if (p.probs[static_cast<size_t>(i)] > p.probs[static_cast<size_t>(best)]) best = i;
    }
    return best;
}

int sample_token(const ProbabilityVector& p, SeededRng& rng) {
    if (p.probs.empty()) throw std::invalid_argument("sample_token: empty distribution");
    double u = rng.next_unit();
    double acc = 0.0;
    int last_positive = 0;
    for (int i = 0; i < static_cast<int>(p.probs.size()); ++i) {
        double pi = p.probs[static_cast<size_t>(i)];
        if (pi > 0.0) last_positive = i;
        acc += pi;
        if (u < acc) return i;
    }
    // u landed past the accumulated mass due to rounding
    return last_positive;
}

double entropy(const ProbabilityVector& p) {
    double h = 0.0;
    for (double pi : p.probs) {
        if (pi > 0.0) h -= pi * std::log(pi);
    }
    return h < 0.0 ? 0.0 : h;
}

}  // namespace tbg
