#include "tbg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tbg {

std::string metric_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::exact_match_fraction: return "exact_match_fraction";
        case MetricKind::first_divergence_index: return "first_divergence_index";
        case MetricKind::edit_distance_mean: return "edit_distance_mean";
        case MetricKind::edit_distance_std: return "edit_distance_std";
        case MetricKind::js_divergence_next_token: return "js_divergence_next_token";
        case MetricKind::mean_entropy: return "mean_entropy";
    }
    throw std::logic_error("metric_name: unknown kind");
}

MetricKind metric_from_name(const std::string& name) {
    if (name == "exact_match_fraction") return MetricKind::exact_match_fraction;
    if (name == "first_divergence_index") return MetricKind::first_divergence_index;
    if (name == "edit_distance_mean") return MetricKind::edit_distance_mean;
    if (name == "edit_distance_std") return MetricKind::edit_distance_std;
    if (name == "js_divergence_next_token") return MetricKind::js_divergence_next_token;
    if (name == "mean_entropy") return MetricKind::mean_entropy;
    throw std::invalid_argument("unknown metric kind: " + name);
}

ResponseBundle ResponseBundle::from_records(const std::vector<GenerationRecord>& records) {
    ResponseBundle b;
    if (records.empty()) return b;
    b.prompt_id = records.front().prompt_id;
    bool all_token_ids = true, all_logprobs = true;
    for (const auto& rec : records) {
        b.responses.push_back(rec.text);
        all_token_ids = all_token_ids && rec.token_ids.has_value();
        all_logprobs = all_logprobs && rec.token_logprob_tops.has_value();
    }
    if (all_token_ids)
        for (const auto& rec : records) b.token_ids.push_back(*rec.token_ids);
    if (all_logprobs)
        for (const auto& rec : records) b.logprob_tops.push_back(*rec.token_logprob_tops);
    return b;
}

double exact_match_fraction(const ResponseBundle& b) {
    if (b.responses.empty()) throw std::invalid_argument("exact_match_fraction: empty bundle");
    std::map<std::string, int> classes;
    for (const auto& r : b.responses) classes[r]++;
    int largest = 0;
    for (const auto& [text, count] : classes) largest = std::max(largest, count);
    return static_cast<double>(largest) / static_cast<double>(b.responses.size());
}

static std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

template <typename Seq>
static double pair_divergence_index(const Seq& a, const Seq& b) {
    size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) {
        if (a[i] != b[i]) return static_cast<double>(i);
    }
    // strict prefix diverges at the shorter length; identical pairs
    // contribute the common length
    return static_cast<double>(n);
}

double first_divergence_index(const ResponseBundle& b) {
    size_t n = b.responses.size();
    if (n < 2) throw std::invalid_argument("first_divergence_index: needs >= 2 responses");
    double sum = 0.0;
    size_t pairs = 0;
    if (!b.token_ids.empty()) {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) {
                sum += pair_divergence_index(b.token_ids[i], b.token_ids[j]);
                ++pairs;
            }
    } else {
        std::vector<std::vector<std::string>> words;
        words.reserve(n);
        for (const auto& r : b.responses) words.push_back(split_words(r));
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) {
                sum += pair_divergence_index(words[i], words[j]);
                ++pairs;
            }
    }
    return sum / static_cast<double>(pairs);
}

static size_t levenshtein(const std::string& a, const std::string& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<size_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

std::pair<double, double> edit_distance_stats(const ResponseBundle& b) {
    size_t n = b.responses.size();
    if (n < 2) throw std::invalid_argument("edit_distance_stats: needs >= 2 responses");
    std::vector<double> dists;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            dists.push_back(static_cast<double>(levenshtein(b.responses[i], b.responses[j])));
    double mean = 0.0;
    for (double d : dists) mean += d;
    mean /= static_cast<double>(dists.size());
    double var = 0.0;
    for (double d : dists) var += (d - mean) * (d - mean);
    var /= static_cast<double>(dists.size());
    return {mean, std::sqrt(var)};
}

double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("js_divergence: size mismatch");
    double js = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
    }
    return js < 0.0 ? 0.0 : js;
}

// top-k entries renormalized over their own support
static std::map<std::string, double> renormalized_topk(
    const std::vector<std::pair<std::string, double>>& top_logprobs, int top_k) {
    std::map<std::string, double> dist;
    double total = 0.0;
    int used = 0;
    for (const auto& [tok, lp] : top_logprobs) {
        if (used >= top_k) break;
        double p = std::exp(lp);
        dist[tok] += p;
        total += p;
        ++used;
    }
    if (total > 0.0)
        for (auto& [tok, p] : dist) p /= total;
    return dist;
}

static double pair_position_js(const std::vector<std::vector<std::pair<std::string, double>>>& a,
                               const std::vector<std::vector<std::pair<std::string, double>>>& b, int top_k) {
    size_t positions = std::min(a.size(), b.size());
    if (positions == 0) return 0.0;
    double sum = 0.0;
    for (size_t pos = 0; pos < positions; ++pos) {
        auto pa = renormalized_topk(a[pos], top_k);
        auto pb = renormalized_topk(b[pos], top_k);
        std::set<std::string> support;
        for (const auto& [tok, _] : pa) support.insert(tok);
        for (const auto& [tok, _] : pb) support.insert(tok);
        std::vector<double> pv, qv;
        for (const auto& tok : support) {
            auto ia = pa.find(tok);
            auto ib = pb.find(tok);
            pv.push_back(ia == pa.end() ? 0.0 : ia->second);
            qv.push_back(ib == pb.end() ? 0.0 : ib->second);
        }
        sum += js_divergence(pv, qv);
    }
    return sum / static_cast<double>(positions);
}

std::optional<double> js_divergence_next_token(const ResponseBundle& b, int top_k) {
    if (b.logprob_tops.size() < 2) return std::nullopt;
    size_t n = b.logprob_tops.size();
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            sum += pair_position_js(b.logprob_tops[i], b.logprob_tops[j], top_k);
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

std::optional<double> mean_entropy(const ResponseBundle& b, int top_k) {
    if (b.logprob_tops.empty()) return std::nullopt;
    double run_sum = 0.0;
    size_t runs = 0;
    for (const auto& run : b.logprob_tops) {
        if (run.empty()) continue;
        double pos_sum = 0.0;
        for (const auto& pos : run) {
            auto dist = renormalized_topk(pos, top_k);
            double h = 0.0;
            for (const auto& [tok, p] : dist)
                if (p > 0.0) h -= p * std::log(p);
            pos_sum += h;
        }
        run_sum += pos_sum / static_cast<double>(run.size());
        ++runs;
    }
    if (runs == 0) return std::nullopt;
    return run_sum / static_cast<double>(runs);
}

static std::string strip_trailing_ws(const std::string& s) {
    size_t end = s.size();
    while (end > 0 && (s[end - 1] == ' ' || s[end - 1] == '\t' || s[end - 1] == '\n' || s[end - 1] == '\r')) --end;
    return s.substr(0, end);
}

VariabilityDistribution build_distribution(MetricKind metric, const PromptSet& prompts, const RunStore& store,
                                           const std::string& backend_id, double temperature,
                                           const DistributionOptions& opts) {
    VariabilityDistribution dist;
    dist.metric = metric;
    dist.backend_id = backend_id;
    dist.temperature = temperature;

    auto slice = store.query(backend_id, temperature);
    if (slice.empty())
        throw std::runtime_error("build_distribution: no records for backend '" + backend_id + "' at T=" +
                                 temperature_key(temperature));
    dist.environment_id = slice.front().environment_id;

    std::map<std::string, std::vector<GenerationRecord>> by_prompt;
    for (auto& rec : slice) by_prompt[rec.prompt_id].push_back(std::move(rec));

    const bool pairwise =
        metric != MetricKind::mean_entropy && metric != MetricKind::exact_match_fraction;
    for (const auto& prompt : prompts.prompts) {
        auto it = by_prompt.find(prompt.id);
        size_t runs = it == by_prompt.end() ? 0 : it->second.size();
        if (runs < (pairwise ? 2u : 1u)) {
            dist.omitted_prompts.push_back(prompt.id);
            continue;
        }
        ResponseBundle bundle = ResponseBundle::from_records(it->second);
        if (opts.normalize_trailing_whitespace)
            for (auto& r : bundle.responses) r = strip_trailing_ws(r);

        std::optional<double> value;
        switch (metric) {
            case MetricKind::exact_match_fraction: value = exact_match_fraction(bundle); break;
            case MetricKind::first_divergence_index: value = first_divergence_index(bundle); break;
            case MetricKind::edit_distance_mean: value = edit_distance_stats(bundle).first; break;
            case MetricKind::edit_distance_std: value = edit_distance_stats(bundle).second; break;
            case MetricKind::js_divergence_next_token: value = js_divergence_next_token(bundle, opts.top_k); break;
            case MetricKind::mean_entropy: value = mean_entropy(bundle, opts.top_k); break;
        }
        if (!value) {
            dist.omitted_prompts.push_back(prompt.id);
            continue;
        }
        dist.prompt_ids.push_back(prompt.id);
        dist.values.push_back(*value);
    }
    if (dist.values.empty())
        throw std::runtime_error("build_distribution: metric '" + metric_name(metric) +
                                 "' unavailable for backend '" + backend_id + "' (no prompt yielded a value)");
    return dist;
}

void write_distribution_csv(const VariabilityDistribution& dist, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_distribution_csv: cannot open " + path.string());
    out << "prompt_id,value\n";
    char buf[64];
    for (size_t i = 0; i < dist.values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", dist.values[i]);
        out << dist.prompt_ids[i] << ',' << buf << '\n';
    }
}

std::string distribution_to_json(const VariabilityDistribution& dist) {
    nlohmann::json j;
    j["metric"] = metric_name(dist.metric);
    j["backend_id"] = dist.backend_id;
    j["temperature"] = dist.temperature;
    j["environment"] = dist.environment_id;
    j["prompt_ids"] = dist.prompt_ids;
    j["values"] = dist.values;
    j["omitted_prompts"] = dist.omitted_prompts;
    return j.dump(2);
}

std::optional<std::pair<double, double>> metric_range(MetricKind kind) {
    switch (kind) {
        case MetricKind::exact_match_fraction: return {{0.0, 1.0}};
        case MetricKind::js_divergence_next_token: return {{0.0, std::log(2.0)}};
        default: return std::nullopt;
    }
}

}  // namespace tbg
