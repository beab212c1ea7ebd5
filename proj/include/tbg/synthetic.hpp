#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tbg/sampling.hpp"

namespace tbg {

// Controls the logit margin between the top-1 and top-2 token at each step.
// The margin is drawn (deterministically, per step) as
//   margin_min + (margin_max - margin_min) * u^shape,  u ~ U[0,1),
// so shape > 1 concentrates mass toward small margins (more near-ties).
// Remaining tokens get logits uniform in [0, spread), the top-2 sit at
// spread and spread + margin.
struct GapProfile {
    double margin_min = 0.0;
    double margin_max = 3.0;
    double shape = 2.0;
    double spread = 2.0;
};

// Deterministic toy autoregressive LM: logits are a pure seeded hash of
// (prompt, prefix). No weights, no inference stack, fully reproducible.
struct SyntheticLM {
    Vocabulary vocab;
    uint64_t logit_fn_seed = 0;
    int context_window = 64;
    GapProfile gap_profile;

    static SyntheticLM make(int vocab_size, uint64_t seed, GapProfile gap = {}, int context_window = 64);
};

enum class PerturbationKind { none, gaussian_logit_noise, quantization, batch_shape_noise };

struct PerturbationModel {
    PerturbationKind kind = PerturbationKind::none;
    double sigma = 0.0;       // gaussian_logit_noise
    double quant_step = 0.0;  // quantization
    // batch_shape_noise: batch size drawn from this distribution, then a
    // batch-size-keyed fixed logit offset is added
    std::vector<std::pair<int, double>> batch_size_distribution;
    double batch_offset_scale = 0.1;
    uint64_t batch_offset_seed = 0;

    void validate() const;
};

struct EnvironmentDescriptor {
    std::string id;
    std::string backend_kind;  // "synthetic" or "remote"
    std::optional<PerturbationModel> perturbation;
    std::map<std::string, std::string> metadata;
    bool observed = true;
};

LogitVector synth_logits(const SyntheticLM& model, std::span<const int> prompt, std::span<const int> prefix);

// Applies the perturbation to logits; kind == none is the exact identity.
LogitVector perturb(const LogitVector& z, const PerturbationModel& eps, SeededRng& rng);

// Per-position record of the sampling-time next-token distribution.
struct StepTrace {
    std::vector<std::pair<std::string, double>> top_logprobs;  // (token, ln p), p > 0 only
};

struct GenerationResult {
    std::vector<int> token_ids;  // EOS (id 0) terminates and is not included
    std::string text;            // vocab tokens joined by single spaces
    std::vector<StepTrace> trace;
};

// Autoregressive loop: logits -> perturb -> temperature -> (sample | argmax),
// stopping at max_tokens or on the EOS token. top_k > 0 records per-step
// top-k log-probabilities of the sampling distribution.
GenerationResult generate(const SyntheticLM& model, std::span<const int> prompt, Temperature t,
                          const PerturbationModel& eps, int max_tokens, SeededRng& rng, int top_k = 0);

// Deterministic token encoding of a prompt string for the synthetic model.
std::vector<int> encode_prompt(const SyntheticLM& model, const std::string& text);

}  // namespace tbg
