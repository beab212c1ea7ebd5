#include "tbg/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace tbg {

static std::vector<std::string> parse_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

PromptSet load_prompts(const std::filesystem::path& path, PromptFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_prompts: cannot open " + path.string());

    PromptSet set;
    set.id = path.stem().string();
    std::set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    bool csv_header_done = false;
    int csv_id_col = -1, csv_text_col = -1, csv_cat_col = -1;

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Prompt p;
        if (format == PromptFormat::jsonl) {
            json j;
            try {
                j = json::parse(line);
                p.id = j.at("prompt_id").get<std::string>();
                p.text = j.at("text").get<std::string>();
                if (j.contains("category")) p.category = j.at("category").get<std::string>();
            } catch (const std::exception& e) {
                throw std::runtime_error("load_prompts: malformed row at line " + std::to_string(lineno) + ": " +
                                         e.what());
            }
        } else {
            auto fields = parse_csv_row(line);
            if (!csv_header_done) {
                for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
                    if (fields[static_cast<size_t>(i)] == "prompt_id") csv_id_col = i;
                    if (fields[static_cast<size_t>(i)] == "text") csv_text_col = i;
                    if (fields[static_cast<size_t>(i)] == "category") csv_cat_col = i;
                }
                if (csv_id_col < 0 || csv_text_col < 0)
                    throw std::runtime_error("load_prompts: malformed row at line 1: missing prompt_id/text header");
                csv_header_done = true;
                continue;
            }
            if (static_cast<int>(fields.size()) <= std::max(csv_id_col, csv_text_col))
                throw std::runtime_error("load_prompts: malformed row at line " + std::to_string(lineno));
            p.id = fields[static_cast<size_t>(csv_id_col)];
            p.text = fields[static_cast<size_t>(csv_text_col)];
            if (csv_cat_col >= 0 && csv_cat_col < static_cast<int>(fields.size()) &&
                !fields[static_cast<size_t>(csv_cat_col)].empty())
                p.category = fields[static_cast<size_t>(csv_cat_col)];
        }
        if (!seen.insert(p.id).second)
            throw std::runtime_error("load_prompts: duplicate prompt_id '" + p.id + "' at line " +
                                     std::to_string(lineno));
        set.prompts.push_back(std::move(p));
    }
    return set;
}

PromptSet truncate_prompts(const PromptSet& set, size_t n) {
    PromptSet out;
    out.id = set.id;
    size_t keep = std::min(n, set.prompts.size());
    out.prompts.assign(set.prompts.begin(), set.prompts.begin() + static_cast<long>(keep));
    return out;
}

void TemperatureGrid::validate() const {
    if (temperatures.empty()) throw std::invalid_argument("TemperatureGrid: empty");
    for (size_t i = 0; i < temperatures.size(); ++i) {
        if (temperatures[i] < 0.0) throw std::invalid_argument("TemperatureGrid: negative temperature");
        if (i > 0 && temperatures[i] <= temperatures[i - 1])
            throw std::invalid_argument("TemperatureGrid: not strictly increasing");
    }
}

TemperatureGrid TemperatureGrid::standard() {
    TemperatureGrid g;
    for (int i = 0; i <= 20; ++i) g.temperatures.push_back(i * 0.01);
    for (int i = 5; i <= 10; ++i) g.temperatures.push_back(i * 0.05);
    for (int i = 6; i <= 10; ++i) g.temperatures.push_back(i * 0.10);
    return g;
}

TemperatureGrid TemperatureGrid::extended() {
    TemperatureGrid g = standard();
    for (int i = 21; i <= 30; ++i) g.temperatures.push_back(i * 0.05);
    return g;
}

std::string temperature_key(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", t);
    return buf;
}

std::string record_to_json_line(const GenerationRecord& rec) {
    json j;
    j["prompt_id"] = rec.prompt_id;
    j["run_index"] = rec.run_index;
    j["backend_id"] = rec.backend_id;
    j["temperature"] = rec.temperature;
    j["text"] = rec.text;
    if (rec.token_ids) j["token_ids"] = *rec.token_ids;
    if (rec.token_logprob_tops) {
        json tops = json::array();
        for (const auto& pos : *rec.token_logprob_tops) {
            json pj = json::array();
            for (const auto& [tok, lp] : pos) pj.push_back(json::array({tok, lp}));
            tops.push_back(std::move(pj));
        }
        j["token_logprob_tops"] = std::move(tops);
    }
    j["timestamp"] = rec.timestamp;
    j["environment"] = rec.environment_id;
    return j.dump();
}

GenerationRecord record_from_json_line(const std::string& line) {
    json j = json::parse(line);
    GenerationRecord rec;
    rec.prompt_id = j.at("prompt_id").get<std::string>();
    rec.run_index = j.at("run_index").get<int>();
    rec.backend_id = j.at("backend_id").get<std::string>();
    rec.temperature = j.at("temperature").get<double>();
    rec.text = j.at("text").get<std::string>();
    if (j.contains("token_ids")) rec.token_ids = j.at("token_ids").get<std::vector<int>>();
    if (j.contains("token_logprob_tops")) {
        std::vector<std::vector<std::pair<std::string, double>>> tops;
        for (const auto& pos : j.at("token_logprob_tops")) {
            std::vector<std::pair<std::string, double>> pv;
            for (const auto& pair : pos) pv.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<double>());
            tops.push_back(std::move(pv));
        }
        rec.token_logprob_tops = std::move(tops);
    }
    rec.timestamp = j.at("timestamp").get<std::string>();
    rec.environment_id = j.at("environment").get<std::string>();
    return rec;
}

static std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '.' ||
                  c == '_';
        out += ok ? c : '_';
    }
    return out;
}

RunStore::RunStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    // rebuild the index from the logs
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            GenerationRecord rec = record_from_json_line(line);
            auto key = std::make_tuple(rec.backend_id, temperature_key(rec.temperature), rec.prompt_id, rec.run_index);
            if (index_.count(key))
                throw std::runtime_error("RunStore: duplicate record in log for prompt '" + rec.prompt_id + "'");
            index_[key] = records_.size();
            records_.push_back(std::move(rec));
        }
    }
}

std::filesystem::path RunStore::slice_path(const std::string& backend_id, double temperature) const {
    return root_ / (sanitize(backend_id) + "_T" + temperature_key(temperature) + ".jsonl");
}

void RunStore::append(const GenerationRecord& rec) {
    std::lock_guard<std::mutex> lock(write_mutex_);
    auto key = std::make_tuple(rec.backend_id, temperature_key(rec.temperature), rec.prompt_id, rec.run_index);
    if (index_.count(key))
        throw std::runtime_error("RunStore: key collision (" + rec.backend_id + ", " + rec.prompt_id + ", run " +
                                 std::to_string(rec.run_index) + ")");
    std::ofstream out(slice_path(rec.backend_id, rec.temperature), std::ios::app);
    if (!out) throw std::runtime_error("RunStore: cannot open log for append");
    out << record_to_json_line(rec) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("RunStore: write failed");
    index_[key] = records_.size();
    records_.push_back(rec);
}

bool RunStore::contains(const std::string& backend_id, double temperature, const std::string& prompt_id,
                        int run_index) const {
    std::lock_guard<std::mutex> lock(write_mutex_);
    return index_.count(std::make_tuple(backend_id, temperature_key(temperature), prompt_id, run_index)) > 0;
}

std::vector<GenerationRecord> RunStore::query(const std::string& backend_id, double temperature,
                                              const std::optional<std::string>& prompt_id) const {
    std::lock_guard<std::mutex> lock(write_mutex_);
    std::vector<GenerationRecord> out;
    std::string tkey = temperature_key(temperature);
    for (const auto& rec : records_) {
        if (rec.backend_id != backend_id) continue;
        if (temperature_key(rec.temperature) != tkey) continue;
        if (prompt_id && rec.prompt_id != *prompt_id) continue;
        out.push_back(rec);
    }
    std::sort(out.begin(), out.end(), [](const GenerationRecord& a, const GenerationRecord& b) {
        return std::tie(a.prompt_id, a.run_index) < std::tie(b.prompt_id, b.run_index);
    });
    return out;
}

}  // namespace tbg
