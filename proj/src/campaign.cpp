#include "tbg/campaign.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

using nlohmann::json;

namespace tbg {

static const char* kSyntheticTimestamp = "1970-01-01T00:00:00Z";

SyntheticLM SyntheticBackendSpec::model() const {
    return SyntheticLM::make(vocab_size, model_seed, gap_profile, context_window);
}

void CampaignConfig::validate() const {
    if (runs_reference < 2) throw std::invalid_argument("CampaignConfig: runs_reference (K) must be >= 2");
    if (runs_sut < 2) throw std::invalid_argument("CampaignConfig: runs_sut (M) must be >= 2");
    if (max_tokens < 1) throw std::invalid_argument("CampaignConfig: max_tokens must be >= 1");
    grid.validate();
    if (references.empty()) throw std::invalid_argument("CampaignConfig: at least one reference required");
    if (sut.id().empty()) throw std::invalid_argument("CampaignConfig: SUT id required");
    for (const auto& ref : references)
        if (ref.id().empty()) throw std::invalid_argument("CampaignConfig: reference id required");
    if (metrics.empty()) throw std::invalid_argument("CampaignConfig: at least one metric required");
    double wsum = 0.0;
    for (const auto& [kind, weight] : metrics) {
        if (weight < 0.0) throw std::invalid_argument("CampaignConfig: negative metric weight");
        wsum += weight;
    }
    if (wsum <= 0.0) throw std::invalid_argument("CampaignConfig: metric weights sum to zero");
    distance.validate();
}

static PerturbationModel perturbation_from_json(const json& j) {
    PerturbationModel eps;
    std::string kind = j.value("kind", "none");
    if (kind == "none") eps.kind = PerturbationKind::none;
    else if (kind == "gaussian_logit_noise") eps.kind = PerturbationKind::gaussian_logit_noise;
    else if (kind == "quantization") eps.kind = PerturbationKind::quantization;
    else if (kind == "batch_shape_noise") eps.kind = PerturbationKind::batch_shape_noise;
    else throw std::invalid_argument("unknown perturbation kind: " + kind);
    eps.sigma = j.value("sigma", 0.0);
    eps.quant_step = j.value("quant_step", 0.0);
    if (j.contains("batch_sizes"))
        for (const auto& entry : j.at("batch_sizes"))
            eps.batch_size_distribution.emplace_back(entry.at(0).get<int>(), entry.at(1).get<double>());
    eps.batch_offset_scale = j.value("offset_scale", 0.1);
    eps.batch_offset_seed = j.value("offset_seed", static_cast<uint64_t>(0));
    return eps;
}

static json perturbation_to_json(const PerturbationModel& eps) {
    json j;
    switch (eps.kind) {
        case PerturbationKind::none: j["kind"] = "none"; break;
        case PerturbationKind::gaussian_logit_noise: j["kind"] = "gaussian_logit_noise"; break;
        case PerturbationKind::quantization: j["kind"] = "quantization"; break;
        case PerturbationKind::batch_shape_noise: j["kind"] = "batch_shape_noise"; break;
    }
    j["sigma"] = eps.sigma;
    j["quant_step"] = eps.quant_step;
    if (!eps.batch_size_distribution.empty()) {
        json sizes = json::array();
        for (const auto& [size, prob] : eps.batch_size_distribution) sizes.push_back(json::array({size, prob}));
        j["batch_sizes"] = std::move(sizes);
        j["offset_scale"] = eps.batch_offset_scale;
        j["offset_seed"] = eps.batch_offset_seed;
    }
    return j;
}

static BackendSpec backend_from_json(const json& j) {
    BackendSpec spec;
    std::string kind = j.value("kind", "synthetic");
    if (kind == "synthetic") {
        spec.kind = BackendSpec::Kind::synthetic;
        auto& s = spec.synthetic;
        s.id = j.at("id").get<std::string>();
        s.vocab_size = j.value("vocab_size", 32);
        s.model_seed = j.value("model_seed", static_cast<uint64_t>(1));
        s.context_window = j.value("context_window", 64);
        s.true_temperature = j.value("true_temperature", 0.0);
        s.top_k_logprobs = j.value("top_k_logprobs", 0);
        if (j.contains("gap_profile")) {
            const auto& g = j.at("gap_profile");
            s.gap_profile.margin_min = g.value("margin_min", 0.0);
            s.gap_profile.margin_max = g.value("margin_max", 3.0);
            s.gap_profile.shape = g.value("shape", 2.0);
            s.gap_profile.spread = g.value("spread", 2.0);
        }
        if (j.contains("perturbation")) s.perturbation = perturbation_from_json(j.at("perturbation"));
    } else if (kind == "remote") {
        spec.kind = BackendSpec::Kind::remote;
        auto& r = spec.remote;
        r.backend_id = j.at("id").get<std::string>();
        r.base_url = j.at("base_url").get<std::string>();
        r.model_name = j.value("model_name", "");
        r.api_key_env = j.value("api_key_env", "");
        r.request_timeout_s = j.value("request_timeout_s", 60.0);
        r.max_retries = j.value("max_retries", 3);
        r.max_concurrency = j.value("max_concurrency", 4);
        r.logprobs_requested = j.value("logprobs", false);
        r.top_logprobs = j.value("top_logprobs", 5);
        r.backoff_base_s = j.value("backoff_base_s", 1.0);
        r.backoff_cap_s = j.value("backoff_cap_s", 60.0);
        r.environment_id = j.value("environment_id", "");
    } else {
        throw std::invalid_argument("unknown backend kind: " + kind);
    }
    return spec;
}

static json backend_to_json(const BackendSpec& spec) {
    json j;
    if (spec.kind == BackendSpec::Kind::synthetic) {
        const auto& s = spec.synthetic;
        j["kind"] = "synthetic";
        j["id"] = s.id;
        j["vocab_size"] = s.vocab_size;
        j["model_seed"] = s.model_seed;
        j["context_window"] = s.context_window;
        j["true_temperature"] = s.true_temperature;
        j["top_k_logprobs"] = s.top_k_logprobs;
        j["gap_profile"] = {{"margin_min", s.gap_profile.margin_min},
                            {"margin_max", s.gap_profile.margin_max},
                            {"shape", s.gap_profile.shape},
                            {"spread", s.gap_profile.spread}};
        j["perturbation"] = perturbation_to_json(s.perturbation);
    } else {
        const auto& r = spec.remote;
        j["kind"] = "remote";
        j["id"] = r.backend_id;
        j["base_url"] = r.base_url;
        j["model_name"] = r.model_name;
        j["api_key_env"] = r.api_key_env;
        j["request_timeout_s"] = r.request_timeout_s;
        j["max_retries"] = r.max_retries;
        j["max_concurrency"] = r.max_concurrency;
        j["logprobs"] = r.logprobs_requested;
        j["top_logprobs"] = r.top_logprobs;
        j["backoff_base_s"] = r.backoff_base_s;
        j["backoff_cap_s"] = r.backoff_cap_s;
        j["environment_id"] = r.environment_id;
    }
    return j;
}

CampaignConfig config_from_json(const json& j) {
    CampaignConfig cfg;
    if (j.contains("prompts")) {
        const auto& p = j.at("prompts");
        cfg.prompt_path = p.value("path", "");
        std::string fmt = p.value("format", "jsonl");
        if (fmt == "jsonl") cfg.prompt_format = PromptFormat::jsonl;
        else if (fmt == "csv") cfg.prompt_format = PromptFormat::csv;
        else throw std::invalid_argument("unknown prompt format: " + fmt);
        if (p.contains("only_prompts") && !p.at("only_prompts").is_null())
            cfg.only_prompts = p.at("only_prompts").get<size_t>();
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.contains("temperatures")) {
            cfg.grid.temperatures = g.at("temperatures").get<std::vector<double>>();
        } else {
            std::string preset = g.value("preset", "standard");
            if (preset == "standard") cfg.grid = TemperatureGrid::standard();
            else if (preset == "extended") cfg.grid = TemperatureGrid::extended();
            else throw std::invalid_argument("unknown grid preset: " + preset);
        }
    }
    cfg.runs_reference = j.value("runs_reference", 32);
    cfg.runs_sut = j.value("runs_sut", 100);
    cfg.max_tokens = j.value("max_tokens", 32);
    if (j.contains("references"))
        for (const auto& r : j.at("references")) cfg.references.push_back(backend_from_json(r));
    if (j.contains("sut")) cfg.sut = backend_from_json(j.at("sut"));
    if (j.contains("metrics")) {
        cfg.metrics.clear();
        for (const auto& m : j.at("metrics"))
            cfg.metrics.emplace_back(metric_from_name(m.at("kind").get<std::string>()), m.value("weight", 1.0));
    }
    if (j.contains("distance")) {
        cfg.distance.kind = distance_from_name(j.at("distance").value("kind", "kolmogorov_smirnov"));
        cfg.distance.bins = j.at("distance").value("bins", 20);
    }
    cfg.store_root = j.value("store_root", "store");
    cfg.seed = j.value("seed", static_cast<uint64_t>(0));
    cfg.normalize_trailing_whitespace = j.value("normalize_trailing_whitespace", false);
    cfg.validate();
    return cfg;
}

CampaignConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path.string());
    json j;
    in >> j;
    return config_from_json(j);
}

json config_to_json(const CampaignConfig& cfg) {
    json j;
    j["prompts"] = {{"path", cfg.prompt_path},
                    {"format", cfg.prompt_format == PromptFormat::jsonl ? "jsonl" : "csv"}};
    if (cfg.only_prompts) j["prompts"]["only_prompts"] = *cfg.only_prompts;
    j["grid"] = {{"temperatures", cfg.grid.temperatures}};
    j["runs_reference"] = cfg.runs_reference;
    j["runs_sut"] = cfg.runs_sut;
    j["max_tokens"] = cfg.max_tokens;
    json refs = json::array();
    for (const auto& r : cfg.references) refs.push_back(backend_to_json(r));
    j["references"] = std::move(refs);
    j["sut"] = backend_to_json(cfg.sut);
    json metrics = json::array();
    for (const auto& [kind, weight] : cfg.metrics)
        metrics.push_back({{"kind", metric_name(kind)}, {"weight", weight}});
    j["metrics"] = std::move(metrics);
    j["distance"] = {{"kind", distance_name(cfg.distance.kind)}, {"bins", cfg.distance.bins}};
    j["store_root"] = cfg.store_root;
    j["seed"] = cfg.seed;
    j["normalize_trailing_whitespace"] = cfg.normalize_trailing_whitespace;
    return j;
}

PromptSet synthetic_prompt_set(size_t n) {
    PromptSet set;
    set.id = "synthetic";
    char buf[32];
    for (size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "p%03zu", i);
        Prompt p;
        p.id = buf;
        p.text = std::string("synthetic prompt ") + std::to_string(i);
        p.category = "synthetic";
        set.prompts.push_back(std::move(p));
    }
    return set;
}

PromptSet campaign_prompts(const CampaignConfig& cfg) {
    PromptSet set = cfg.prompt_path.empty() ? synthetic_prompt_set(cfg.only_prompts.value_or(100))
                                            : load_prompts(cfg.prompt_path, cfg.prompt_format);
    if (cfg.only_prompts) set = truncate_prompts(set, *cfg.only_prompts);
    return set;
}

uint64_t run_stream_seed(uint64_t campaign_seed, const std::string& backend_id, double nominal_temperature,
                         const std::string& prompt_id, int run_index) {
    uint64_t s = splitmix64(campaign_seed ^ 0x243f6a8885a308d3ULL);
    s = splitmix64(s ^ fnv1a64(backend_id));
    s = splitmix64(s ^ fnv1a64(temperature_key(nominal_temperature)));
    s = splitmix64(s ^ fnv1a64(prompt_id));
    s = splitmix64(s ^ static_cast<uint64_t>(run_index));
    return s;
}

static bool metrics_need_logprobs(const CampaignConfig& cfg) {
    for (const auto& [kind, weight] : cfg.metrics)
        if (kind == MetricKind::js_divergence_next_token || kind == MetricKind::mean_entropy) return true;
    return false;
}

// Shared synthetic driver: generates any missing (prompt, run) pair for the
// slice keyed by nominal_temperature, sampling at actual_temperature.
static RunSummary run_synthetic_slice(const CampaignConfig& cfg, const SyntheticBackendSpec& spec,
                                      const PromptSet& prompts, double nominal_temperature,
                                      double actual_temperature, int runs, RunStore& store, bool record_logprobs) {
    RunSummary summary;
    SyntheticLM model = spec.model();
    int top_k = record_logprobs ? std::max(spec.top_k_logprobs, 5) : 0;
    for (const auto& prompt : prompts.prompts) {
        std::vector<int> prompt_tokens = encode_prompt(model, prompt.text);
        for (int run = 0; run < runs; ++run) {
            if (store.contains(spec.id, nominal_temperature, prompt.id, run)) {
                ++summary.skipped_existing;
                continue;
            }
            SeededRng rng(run_stream_seed(cfg.seed, spec.id, nominal_temperature, prompt.id, run));
            GenerationResult gen = generate(model, prompt_tokens, Temperature{actual_temperature}, spec.perturbation,
                                            cfg.max_tokens, rng, top_k);
            GenerationRecord rec;
            rec.prompt_id = prompt.id;
            rec.run_index = run;
            rec.backend_id = spec.id;
            rec.temperature = nominal_temperature;
            rec.text = gen.text;
            rec.token_ids = gen.token_ids;
            if (top_k > 0) {
                std::vector<std::vector<std::pair<std::string, double>>> tops;
                for (auto& st : gen.trace) tops.push_back(std::move(st.top_logprobs));
                rec.token_logprob_tops = std::move(tops);
            }
            rec.timestamp = kSyntheticTimestamp;
            rec.environment_id = spec.id + ":synthetic";
            store.append(rec);
            ++summary.new_records;
        }
    }
    return summary;
}

static void merge(RunSummary& total, const SliceSummary& s) {
    total.new_records += s.new_records;
    total.skipped_existing += s.skipped_existing;
    total.failures.insert(total.failures.end(), s.failures.begin(), s.failures.end());
}

static void merge(RunSummary& total, const RunSummary& s) {
    total.new_records += s.new_records;
    total.skipped_existing += s.skipped_existing;
    total.failures.insert(total.failures.end(), s.failures.begin(), s.failures.end());
}

RunSummary run_reference(const CampaignConfig& cfg, RunStore& store) {
    cfg.validate();
    PromptSet prompts = campaign_prompts(cfg);
    bool logprobs = metrics_need_logprobs(cfg);
    RunSummary total;
    for (const auto& ref : cfg.references) {
        for (double t : cfg.grid.temperatures) {
            if (ref.kind == BackendSpec::Kind::synthetic) {
                merge(total, run_synthetic_slice(cfg, ref.synthetic, prompts, t, t, cfg.runs_reference, store,
                                                 logprobs || ref.synthetic.top_k_logprobs > 0));
            } else {
                BackendConfig c = ref.remote;
                c.temperature = t;
                c.max_tokens = cfg.max_tokens;
                c.logprobs_requested = c.logprobs_requested || logprobs;
                merge(total, run_campaign_slice(c, prompts, cfg.runs_reference, store));
            }
        }
    }
    return total;
}

RunSummary run_sut(const CampaignConfig& cfg, RunStore& store) {
    cfg.validate();
    PromptSet prompts = campaign_prompts(cfg);
    bool logprobs = metrics_need_logprobs(cfg);
    RunSummary total;
    if (cfg.sut.kind == BackendSpec::Kind::synthetic) {
        const auto& s = cfg.sut.synthetic;
        merge(total, run_synthetic_slice(cfg, s, prompts, 0.0, s.true_temperature, cfg.runs_sut, store,
                                         logprobs || s.top_k_logprobs > 0));
    } else {
        BackendConfig c = cfg.sut.remote;
        c.temperature = 0.0;
        c.max_tokens = cfg.max_tokens;
        c.logprobs_requested = c.logprobs_requested || logprobs;
        merge(total, run_campaign_slice(c, prompts, cfg.runs_sut, store));
    }
    return total;
}

std::map<double, VariabilityDistribution> reference_curves(const CampaignConfig& cfg, const RunStore& store,
                                                           const BackendSpec& ref, MetricKind metric,
                                                           const PromptSet& prompts) {
    DistributionOptions opts;
    opts.normalize_trailing_whitespace = cfg.normalize_trailing_whitespace;
    std::map<double, VariabilityDistribution> curves;
    for (double t : cfg.grid.temperatures)
        curves.emplace(t, build_distribution(metric, prompts, store, ref.id(), t, opts));
    return curves;
}

VariabilityDistribution synth_distribution(const SyntheticLM& model, const PromptSet& prompts, Temperature actual,
                                           const PerturbationModel& eps, int runs, int max_tokens, MetricKind metric,
                                           uint64_t campaign_seed, const std::string& backend_id,
                                           double nominal_temperature) {
    bool need_logprobs = metric == MetricKind::js_divergence_next_token || metric == MetricKind::mean_entropy;
    VariabilityDistribution dist;
    dist.metric = metric;
    dist.backend_id = backend_id;
    dist.temperature = nominal_temperature;
    dist.environment_id = backend_id + ":synthetic";
    for (const auto& prompt : prompts.prompts) {
        std::vector<int> prompt_tokens = encode_prompt(model, prompt.text);
        ResponseBundle bundle;
        bundle.prompt_id = prompt.id;
        for (int run = 0; run < runs; ++run) {
            SeededRng rng(run_stream_seed(campaign_seed, backend_id, nominal_temperature, prompt.id, run));
            GenerationResult gen =
                generate(model, prompt_tokens, actual, eps, max_tokens, rng, need_logprobs ? 5 : 0);
            bundle.responses.push_back(std::move(gen.text));
            bundle.token_ids.push_back(std::move(gen.token_ids));
            if (need_logprobs) {
                std::vector<std::vector<std::pair<std::string, double>>> tops;
                for (auto& st : gen.trace) tops.push_back(std::move(st.top_logprobs));
                bundle.logprob_tops.push_back(std::move(tops));
            }
        }
        std::optional<double> value;
        switch (metric) {
            case MetricKind::exact_match_fraction: value = exact_match_fraction(bundle); break;
            case MetricKind::first_divergence_index: value = first_divergence_index(bundle); break;
            case MetricKind::edit_distance_mean: value = edit_distance_stats(bundle).first; break;
            case MetricKind::edit_distance_std: value = edit_distance_stats(bundle).second; break;
            case MetricKind::js_divergence_next_token: value = js_divergence_next_token(bundle); break;
            case MetricKind::mean_entropy: value = mean_entropy(bundle); break;
        }
        if (!value) {
            dist.omitted_prompts.push_back(prompt.id);
            continue;
        }
        dist.prompt_ids.push_back(prompt.id);
        dist.values.push_back(*value);
    }
    if (dist.values.empty()) throw std::runtime_error("synth_distribution: no prompt yielded a value");
    return dist;
}

}  // namespace tbg
