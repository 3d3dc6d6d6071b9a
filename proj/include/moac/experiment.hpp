#pragma once

#include <moac/environments.hpp>
#include <moac/errors.hpp>
#include <moac/metrics_io.hpp>
#include <moac/moac.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace moac {

/// Malformed or invalid experiment config; `what()` carries the line and field.
class ConfigError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

struct EnvironmentSpec {
    std::string name = "fishwood";  // fishwood | resource_gathering | two_state | random
    double fish_probability = 0.1;
    double wood_probability = 0.9;
    std::vector<double> discounts;  // empty: the environment's defaults
    int states = 4;                 // random only
    int actions = 2;
    int objectives = 2;
    std::uint64_t env_seed = 1;

    bool operator==(const EnvironmentSpec&) const = default;
};

struct ExperimentConfig {
    EnvironmentSpec environment;
    MoacConfig moac;
    std::vector<MomentumSchedule> schedules{MomentumSchedule::power(1.0)};  // one arm per schedule
    std::string features = "reduced_one_hot";                               // or full_one_hot
    int seeds = 1;
    std::string output_dir = "runs";
    bool jsonl = false;

    bool operator==(const ExperimentConfig&) const = default;
};

// --- config text format ------------------------------------------------------
//
//   # comment            (also after a value)
//   [section]
//   key = value
//
// Sections: environment, actor, critic, run. Keys are listed in
// serialize_config; anything else is rejected with its line number.

namespace detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

inline std::string shortest(double v) {
    char buf[40];
    for (int digits = 1; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

struct ConfigEntry {
    std::string value;
    int line;
};

class ConfigReader {
public:
    ConfigReader(std::map<std::string, ConfigEntry> entries) : entries_(std::move(entries)) {}

    std::optional<ConfigEntry> take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        ConfigEntry e = it->second;
        entries_.erase(it);
        return e;
    }

    static ConfigError error(const std::string& key, const ConfigEntry& e, const std::string& why) {
        return ConfigError("line " + std::to_string(e.line) + ", field " + key + ": " + why);
    }

    template <class T>
    void number(const std::string& key, T& out) {
        auto e = take(key);
        if (!e) return;
        try {
            std::size_t used = 0;
            if constexpr (std::is_same_v<T, double>) {
                out = std::stod(e->value, &used);
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (!e->value.empty() && e->value[0] == '-') throw std::invalid_argument("negative");
                out = std::stoull(e->value, &used);
            } else {
                out = std::stoi(e->value, &used);
            }
            if (used != e->value.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw error(key, *e, "expected a number, got '" + e->value + "'");
        }
    }

    void boolean(const std::string& key, bool& out) {
        auto e = take(key);
        if (!e) return;
        if (e->value == "true") out = true;
        else if (e->value == "false") out = false;
        else throw error(key, *e, "expected true or false, got '" + e->value + "'");
    }

    /// A positive number, or the word `theory`.
    void step(const std::string& key, double& value, bool& theory) {
        auto e = take(key);
        if (!e) return;
        if (e->value == "theory") {
            theory = true;
            return;
        }
        theory = false;
        entries_[key] = *e;
        number(key, value);
    }

    const std::map<std::string, ConfigEntry>& rest() const { return entries_; }

private:
    std::map<std::string, ConfigEntry> entries_;
};

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
    std::map<std::string, detail::ConfigEntry> entries;  // "section.key"
    std::string section;
    std::string line;
    int line_no = 0;
    static const std::vector<std::string> kSections{"environment", "actor", "critic", "run"};
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (std::find(kSections.begin(), kSections.end(), section) == kSections.end())
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
        const std::string key = section + "." + detail::trim(line.substr(0, eq));
        if (entries.count(key)) throw ConfigError("line " + std::to_string(line_no) + ", field " + key + ": duplicate key");
        entries[key] = {detail::trim(line.substr(eq + 1)), line_no};
    }

    ExperimentConfig cfg;
    detail::ConfigReader r(std::move(entries));
    using Reader = detail::ConfigReader;

    if (auto e = r.take("environment.name")) cfg.environment.name = e->value;
    r.number("environment.fish_probability", cfg.environment.fish_probability);
    r.number("environment.wood_probability", cfg.environment.wood_probability);
    if (auto e = r.take("environment.discounts")) {
        cfg.environment.discounts.clear();
        for (const auto& item : detail::split_list(e->value)) {
            try {
                std::size_t used = 0;
                cfg.environment.discounts.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw Reader::error("environment.discounts", *e, "bad number '" + item + "'");
            }
        }
    }
    r.number("environment.states", cfg.environment.states);
    r.number("environment.actions", cfg.environment.actions);
    r.number("environment.objectives", cfg.environment.objectives);
    r.number("environment.seed", cfg.environment.env_seed);

    auto& m = cfg.moac;
    r.number("actor.iterations", m.actor_iterations);
    r.number("actor.batch_size", m.actor_batch_size);
    r.step("actor.step_size", m.actor_step_size, m.theory_actor_step);
    r.number("actor.lipschitz", m.lipschitz_estimate);
    if (auto e = r.take("actor.momentum")) {
        cfg.schedules.clear();
        try {
            for (const auto& item : detail::split_list(e->value)) cfg.schedules.push_back(MomentumSchedule::parse(item));
        } catch (const ParameterError& err) {
            throw Reader::error("actor.momentum", *e, err.what());
        }
        if (cfg.schedules.empty()) throw Reader::error("actor.momentum", *e, "empty schedule list");
    }
    m.momentum = cfg.schedules.front();

    r.step("critic.step_size", m.critic_step_size, m.theory_critic_step);
    r.number("critic.batch_size", m.critic_batch_size);
    r.number("critic.iterations", m.critic_iterations);
    if (auto e = r.take("critic.features")) cfg.features = e->value;

    if (auto e = r.take("run.setting")) {
        try {
            m.setting = parse_setting(e->value);
        } catch (const ParameterError& err) {
            throw Reader::error("run.setting", *e, err.what());
        }
    }
    r.number("run.seed", m.seed);
    r.number("run.seeds", cfg.seeds);
    if (auto e = r.take("run.output")) cfg.output_dir = e->value;
    r.boolean("run.oracle", m.oracle_diagnostics);
    r.number("run.oracle_every", m.oracle_every);
    r.boolean("run.jsonl", cfg.jsonl);

    if (!r.rest().empty()) {
        const auto& [key, e] = *r.rest().begin();
        throw Reader::error(key, e, "unknown key");
    }
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    return parse_config(in);
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    const auto& e = cfg.environment;
    const auto& m = cfg.moac;
    std::ostringstream out;
    out << "[environment]\n"
        << "name = " << e.name << "\n"
        << "fish_probability = " << detail::shortest(e.fish_probability) << "\n"
        << "wood_probability = " << detail::shortest(e.wood_probability) << "\n";
    if (!e.discounts.empty()) {
        out << "discounts = ";
        for (std::size_t k = 0; k < e.discounts.size(); ++k) out << (k ? ", " : "") << detail::shortest(e.discounts[k]);
        out << "\n";
    }
    out << "states = " << e.states << "\n"
        << "actions = " << e.actions << "\n"
        << "objectives = " << e.objectives << "\n"
        << "seed = " << e.env_seed << "\n\n";

    out << "[actor]\n"
        << "iterations = " << m.actor_iterations << "\n"
        << "batch_size = " << m.actor_batch_size << "\n"
        << "step_size = " << (m.theory_actor_step ? "theory" : detail::shortest(m.actor_step_size)) << "\n";
    out << "lipschitz = " << detail::shortest(m.lipschitz_estimate) << "\n"
        << "momentum = ";
    for (std::size_t k = 0; k < cfg.schedules.size(); ++k) out << (k ? ", " : "") << cfg.schedules[k].to_string();
    out << "\n\n";

    out << "[critic]\n"
        << "step_size = " << (m.theory_critic_step ? "theory" : detail::shortest(m.critic_step_size)) << "\n"
        << "batch_size = " << m.critic_batch_size << "\n"
        << "iterations = " << m.critic_iterations << "\n"
        << "features = " << cfg.features << "\n\n";

    out << "[run]\n"
        << "setting = " << to_string(m.setting) << "\n"
        << "seed = " << m.seed << "\n"
        << "seeds = " << cfg.seeds << "\n"
        << "output = " << cfg.output_dir << "\n"
        << "oracle = " << (m.oracle_diagnostics ? "true" : "false") << "\n"
        << "oracle_every = " << m.oracle_every << "\n"
        << "jsonl = " << (cfg.jsonl ? "true" : "false") << "\n";
    return out.str();
}

inline TabularMomdp make_environment(const EnvironmentSpec& spec) {
    if (spec.name == "fishwood") {
        std::array<double, 2> discounts{0.95, 0.9};
        if (!spec.discounts.empty()) {
            if (spec.discounts.size() != 2) throw ConfigError("field environment.discounts: fishwood needs 2 discounts");
            discounts = {spec.discounts[0], spec.discounts[1]};
        }
        return build_fishwood(spec.fish_probability, spec.wood_probability, discounts);
    }
    if (spec.name == "resource_gathering") {
        if (spec.discounts.size() > 1)
            throw ConfigError("field environment.discounts: resource_gathering takes a single discount");
        return build_resource_gathering(spec.discounts.empty() ? 0.95 : spec.discounts[0]);
    }
    if (spec.name == "two_state") return build_two_state_fixture();
    if (spec.name == "random") {
        if (spec.states < 2 || spec.actions < 1 || spec.objectives < 1)
            throw ConfigError("field environment.states/actions/objectives: sizes out of range");
        return build_random_momdp(spec.states, spec.actions, spec.objectives, spec.env_seed);
    }
    throw ConfigError("field environment.name: unknown environment '" + spec.name + "'");
}

inline FeatureMap make_features(const ExperimentConfig& cfg, const TabularMomdp& env) {
    FeatureMap features;
    if (cfg.features == "reduced_one_hot") features = FeatureMap::reduced_one_hot(env.n_states);
    else if (cfg.features == "full_one_hot") features = FeatureMap::full_one_hot(env.n_states);
    else throw ConfigError("field critic.features: unknown feature map '" + cfg.features + "'");
    features.validate(cfg.moac.setting, cfg.features == "full_one_hot");
    return features;
}

/// Checks everything that can be checked before any run starts.
inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.seeds < 1) throw ConfigError("field run.seeds: must be at least 1");
    if (cfg.schedules.empty()) throw ConfigError("field actor.momentum: no schedule");
    try {
        cfg.moac.validate();
        const auto env = make_environment(cfg.environment);
        make_features(cfg, env);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

// --- running -----------------------------------------------------------------

inline std::string arm_name(const MomentumSchedule& schedule) {
    std::string name = schedule.to_string();
    std::replace(name.begin(), name.end(), ':', '-');
    return name;
}

inline int worker_count(std::size_t jobs) {
    int workers = int(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("MOAC_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) workers = int(v);
    }
    return int(std::min<std::size_t>(std::size_t(workers), std::max<std::size_t>(jobs, 1)));
}

struct ExperimentOutcome {
    int exit_code = 0;
    std::string message;
    std::filesystem::path directory;
};

namespace detail {

struct RunJob {
    std::size_t arm;
    int seed_index;  // 1-based
};

struct RunFailure {
    std::size_t arm;
    int seed_index;
    std::string message;
    bool divergence;
};

}  // namespace detail

inline nlohmann::json summarize_directory(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr);

/**
 * Runs every (schedule, seed) pair on a bounded worker pool (MOAC_WORKERS),
 * writing `<arm>_seed<k>.csv`, `<arm>_seed<k>.policy.json` and a
 * `<arm>_seed<k>.DONE` sentinel per run, then `summary.json`.
 * Seed k uses moac.seed + k - 1.
 */
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
    ExperimentOutcome outcome;
    outcome.directory = cfg.output_dir;
    try {
        validate_config(cfg);
    } catch (const ConfigError& e) {
        return {2, e.what(), outcome.directory};
    }
    const TabularMomdp env = make_environment(cfg.environment);
    const FeatureMap features = make_features(cfg, env);
    std::filesystem::create_directories(outcome.directory);
    {
        std::ofstream(outcome.directory / "config.ini") << serialize_config(cfg);
    }

    std::vector<detail::RunJob> jobs;
    for (std::size_t arm = 0; arm < cfg.schedules.size(); ++arm)
        for (int k = 1; k <= cfg.seeds; ++k) jobs.push_back({arm, k});

    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::vector<detail::RunFailure> failures;

    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            const auto job = jobs[j];
            MoacConfig run_cfg = cfg.moac;
            run_cfg.momentum = cfg.schedules[job.arm];
            run_cfg.seed = cfg.moac.seed + std::uint64_t(job.seed_index - 1);
            const std::string stem = arm_name(cfg.schedules[job.arm]) + "_seed" + std::to_string(job.seed_index);
            const auto base = outcome.directory / stem;
            std::filesystem::remove(base.string() + ".DONE");
            try {
                std::ofstream csv(base.string() + ".csv", std::ios::trunc);
                std::ofstream jsonl;
                if (cfg.jsonl) jsonl.open(base.string() + ".jsonl", std::ios::trunc);
                CsvMetricsWriter writer(csv, env.n_objectives, run_cfg.oracle_diagnostics);
                auto result = run_moac(env, features, run_cfg, [&](const MetricsRecord& rec) {
                    writer.write(rec);
                    if (cfg.jsonl) write_metrics_jsonl(jsonl, rec);
                });
                csv.close();
                nlohmann::json policy_doc{{"final", to_json(result.final_policy)},
                                          {"sampled", to_json(result.sampled_policy)},
                                          {"sampled_index", result.sampled_index}};
                std::ofstream(base.string() + ".policy.json") << policy_doc.dump(2) << '\n';
                std::ofstream(base.string() + ".DONE") << "ok\n";
            } catch (const DivergenceError& e) {
                std::lock_guard lock(failure_mutex);
                failures.push_back({job.arm, job.seed_index,
                                    "seed " + std::to_string(job.seed_index) + " (" + stem + ") diverged at iteration " +
                                        std::to_string(e.iteration()) + ": " + e.what(),
                                    true});
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                failures.push_back({job.arm, job.seed_index, "seed " + std::to_string(job.seed_index) + " (" + stem +
                                                                 ") failed: " + e.what(),
                                    false});
            }
        }
    };

    const int n_workers = worker_count(jobs.size());
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    if (!failures.empty()) {
        std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) {
            return std::tie(a.arm, a.seed_index) < std::tie(b.arm, b.seed_index);
        });
        const auto& first = failures.front();
        return {first.divergence ? 3 : 1, first.message, outcome.directory};
    }

    const auto summary = summarize_directory(outcome.directory);
    std::ofstream(outcome.directory / "summary.json") << summary.dump(2) << '\n';
    return outcome;
}

// --- summary -----------------------------------------------------------------

/// Linear-interpolation quantile of an unsorted sample.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * double(values.size() - 1);
    const auto lo = std::size_t(pos);
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

namespace detail {

struct RunFile {
    std::string arm;
    int seed_index;
    std::filesystem::path csv;
};

inline nlohmann::json nullable(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

/// Centered moving average; the window shrinks at the ends.
inline std::vector<double> smooth(const std::vector<double>& v, int width) {
    std::vector<double> out(v.size());
    const int half = width / 2;
    for (int k = 0; k < int(v.size()); ++k) {
        const int lo = std::max(0, k - half), hi = std::min(int(v.size()) - 1, k + half);
        double total = 0.0;
        for (int j = lo; j <= hi; ++j) total += v[std::size_t(j)];
        out[std::size_t(k)] = total / double(hi - lo + 1);
    }
    return out;
}

/// First t at which the smoothed curve is at most half its first value.
inline std::optional<int> half_initial_crossing(const std::vector<double>& t, const std::vector<double>& curve) {
    if (curve.empty()) return std::nullopt;
    const auto smoothed = smooth(curve, 5);
    for (std::size_t k = 0; k < smoothed.size(); ++k)
        if (smoothed[k] <= 0.5 * smoothed.front()) return int(t[k]);
    return std::nullopt;
}

inline std::vector<double> column_values(const MetricsTable& table, int col) {
    std::vector<double> out;
    for (const auto& row : table.rows)
        if (row[std::size_t(col)]) out.push_back(*row[std::size_t(col)]);
    return out;
}

inline std::optional<double> column_mean(const MetricsTable& table, int col) {
    double total = 0.0;
    int count = 0;
    for (const auto& row : table.rows)
        if (row[std::size_t(col)]) {
            total += *row[std::size_t(col)];
            ++count;
        }
    if (count == 0) return std::nullopt;
    return total / count;
}

}  // namespace detail

/**
 * Recomputes the summary document from the per-seed CSVs in `dir`.
 * Seeds without a DONE sentinel are skipped (reported through `warnings`).
 * Output depends only on file contents, not on directory order.
 */
inline nlohmann::json summarize_directory(const std::filesystem::path& dir, std::vector<std::string>* warnings) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");
    static const std::regex kName(R"((.+)_seed([0-9]+)\.csv)");
    std::vector<detail::RunFile> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch match;
        const std::string name = entry.path().filename().string();
        if (!entry.is_regular_file() || !std::regex_match(name, match, kName)) continue;
        const std::string stem = match[1].str() + "_seed" + match[2].str();
        if (!fs::exists(dir / (stem + ".DONE"))) {
            if (warnings) warnings->push_back("skipping incomplete run " + stem + " (no DONE sentinel)");
            continue;
        }
        files.push_back({match[1].str(), std::stoi(match[2].str()), entry.path()});
    }
    if (files.empty()) throw DataError("no completed run CSVs in '" + dir.string() + "'");
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return std::tie(a.arm, a.seed_index) < std::tie(b.arm, b.seed_index); });

    std::map<std::string, std::vector<std::pair<int, MetricsTable>>> arms;
    std::vector<std::string> header;
    for (const auto& f : files) {
        std::ifstream in(f.csv);
        auto table = read_metrics_csv(in);
        if (header.empty()) header = table.header;
        else if (table.header != header) throw DataError("schema mismatch: " + f.csv.filename().string());
        arms[f.arm].emplace_back(f.seed_index, std::move(table));
    }

    nlohmann::json doc;
    doc["columns"] = header;
    doc["arms"] = nlohmann::json::object();
    for (const auto& [arm, runs] : arms) {
        const std::size_t n_rows = runs.front().second.rows.size();
        for (const auto& [seed, table] : runs) {
            if (table.rows.size() != n_rows)
                throw DataError("schema mismatch: " + arm + " seed " + std::to_string(seed) + " has a different length");
            for (std::size_t k = 0; k < n_rows; ++k)
                if (table.rows[k][0] != runs.front().second.rows[k][0])
                    throw DataError("schema mismatch: " + arm + " seed " + std::to_string(seed) + " has different t");
        }
        nlohmann::json arm_doc;
        std::vector<int> seeds;
        for (const auto& run : runs) seeds.push_back(run.first);
        arm_doc["seeds"] = seeds;

        std::vector<double> t_values;
        for (const auto& row : runs.front().second.rows) t_values.push_back(row[0].value_or(0.0));
        nlohmann::json per_t = nlohmann::json::object();
        per_t["t"] = t_values;
        for (std::size_t c = 1; c < header.size(); ++c) {
            nlohmann::json mean = nlohmann::json::array(), med = nlohmann::json::array(), q25 = nlohmann::json::array(),
                           q75 = nlohmann::json::array(), iqr = nlohmann::json::array();
            bool any = false;
            for (std::size_t k = 0; k < n_rows; ++k) {
                std::vector<double> sample;
                for (const auto& run : runs)
                    if (run.second.rows[k][c]) sample.push_back(*run.second.rows[k][c]);
                if (sample.empty()) {
                    for (auto* a : {&mean, &med, &q25, &q75, &iqr}) a->push_back(nullptr);
                    continue;
                }
                any = true;
                double total = 0.0;
                for (double v : sample) total += v;
                const double lo = quantile(sample, 0.25), hi = quantile(sample, 0.75), mid = median(sample);
                mean.push_back(total / double(sample.size()));
                med.push_back(mid);
                q25.push_back(lo);
                q75.push_back(hi);
                iqr.push_back(hi - lo);
            }
            if (!any) continue;
            per_t[header[c]] = {{"mean", mean}, {"median", med}, {"q25", q25}, {"q75", q75}, {"iqr", iqr}};
        }
        arm_doc["per_t"] = per_t;

        // trend statistics, per seed then median across seeds
        nlohmann::json trend;
        const int g_col = runs.front().second.column("grad_norm_sq");
        std::vector<double> crossings, ratios;
        for (const auto& run : runs) {
            const auto g = detail::column_values(run.second, g_col);
            const auto c = detail::half_initial_crossing(t_values, g);
            crossings.push_back(c ? double(*c) : std::numeric_limits<double>::infinity());
            const std::size_t decile = std::max<std::size_t>(1, g.size() / 10);
            double first = 0.0, last = 0.0;
            for (std::size_t k = 0; k < decile; ++k) {
                first += g[k];
                last += g[g.size() - 1 - k];
            }
            if (first > 0.0) ratios.push_back(last / first);
        }
        const double crossing = median(crossings);
        trend["half_initial_gradient_crossing"] = std::isfinite(crossing) ? nlohmann::json(crossing) : nlohmann::json();
        trend["grad_norm_sq_last_over_first_decile"] = ratios.empty() ? nlohmann::json() : nlohmann::json(median(ratios));
        nlohmann::json final_values = nlohmann::json::object();
        for (std::size_t c = 1; c < header.size(); ++c) {
            std::vector<double> sample;
            for (const auto& run : runs)
                if (run.second.rows.back()[c]) sample.push_back(*run.second.rows.back()[c]);
            if (!sample.empty()) final_values[header[c]] = {{"median", median(sample)}, {"min", *std::min_element(sample.begin(), sample.end())}, {"max", *std::max_element(sample.begin(), sample.end())}};
        }
        trend["final"] = final_values;
        const int gap_col = runs.front().second.column("pareto_gap");
        if (gap_col >= 0) {
            std::vector<double> per_run;
            for (const auto& run : runs)
                if (auto m = detail::column_mean(run.second, gap_col)) per_run.push_back(*m);
            trend["pareto_gap_time_mean_median"] = per_run.empty() ? nlohmann::json() : nlohmann::json(median(per_run));
        }
        arm_doc["trend"] = trend;
        doc["arms"][arm] = arm_doc;
    }
    return doc;
}

}  // namespace moac
