#pragma once

#include <string>
#include <vector>

#include "tbg/rng.hpp"

namespace tbg {

// Ordered token list; index == token id. Id 0 is reserved for end-of-sequence.
struct Vocabulary {
    std::vector<std::string> tokens;

    int size() const { return static_cast<int>(tokens.size()); }

    // "</s>", "w1", "w2", ... for a vocabulary of the given size
    static Vocabulary symbolic(int size);

    void validate() const;  // throws std::invalid_argument
};

struct LogitVector {
    std::vector<double> values;
};

struct ProbabilityVector {
    std::vector<double> probs;

    void validate() const;  // sums to 1 within 1e-9, entries in [0,1]
};

struct Temperature {
    double value = 0.0;

    bool is_greedy() const { return value == 0.0; }
};

ProbabilityVector softmax(const LogitVector& z);
ProbabilityVector apply_temperature(const LogitVector& z, Temperature t);

// Smallest token id attaining the maximum probability.
int greedy_argmax(const ProbabilityVector& p);

// Inverse-CDF draw over the fixed token order.
int sample_token(const ProbabilityVector& p, SeededRng& rng);

// Shannon entropy in nats, 0*log(0) := 0.
double entropy(const ProbabilityVector& p);

}  // namespace tbg
