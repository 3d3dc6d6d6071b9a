#pragma once

#include <moac/momdp.hpp>
#include <moac/policy.hpp>
#include <moac/sampler.hpp>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace moac {

struct LoggedRecord {
    int state = 0;
    int action = 0;
    Eigen::VectorXd rewards;
    double behavior_prob = 1.0;  // π_β(a|s) of the logged action
};

struct LoggedDataset {
    std::vector<LoggedRecord> records;
    std::optional<PolicyParams> behavior;  // present when the log was generated in-process

    int n_objectives() const { return records.empty() ? 0 : int(records.front().rewards.size()); }

    void validate() const {
        for (std::size_t k = 0; k < records.size(); ++k) {
            const auto& rec = records[k];
            if (!(rec.behavior_prob > 0.0) || rec.behavior_prob > 1.0)
                throw DataError("record " + std::to_string(k) + " has behavior probability outside (0,1]");
            if (rec.rewards.size() != n_objectives())
                throw DataError("record " + std::to_string(k) + " has a different reward dimension");
        }
    }
};

/// Σ r / n for one objective, summed in record order.
inline double plain_reward_mean(const LoggedDataset& data, int objective) {
    if (data.records.empty()) throw DataError("empty dataset");
    double total = 0.0;
    for (const auto& rec : data.records) total += rec.rewards[objective];
    return total / double(data.records.size());
}

/**
 * Normalized capped importance sampling:
 * Σ w r / Σ w with w = min{C, π(a|s) / π_β(a|s)}.
 */
inline double ncis_score(const LoggedDataset& data, const PolicyParams& candidate, double cap, int objective) {
    if (!(cap > 0.0)) throw ParameterError("NCIS cap must be positive");
    if (data.records.empty()) throw DataError("empty dataset");
    if (objective < 0 || objective >= data.n_objectives()) throw ParameterError("objective index out of range");
    double weighted = 0.0;
    double total_weight = 0.0;
    for (std::size_t k = 0; k < data.records.size(); ++k) {
        const auto& rec = data.records[k];
        if (!(rec.behavior_prob > 0.0))
            throw DataError("record " + std::to_string(k) + " has zero behavior probability");
        const double pi = action_probabilities(candidate, rec.state)[rec.action];
        const double w = std::min(cap, pi / rec.behavior_prob);
        weighted += w * rec.rewards[objective];
        total_weight += w;
    }
    if (!(total_weight > 0.0)) throw DataError("all importance weights are zero");
    return weighted / total_weight;
}

inline Eigen::VectorXd ncis_scores(const LoggedDataset& data, const PolicyParams& candidate, double cap) {
    Eigen::VectorXd scores(data.n_objectives());
    for (int i = 0; i < data.n_objectives(); ++i) scores[i] = ncis_score(data, candidate, cap, i);
    return scores;
}

/// Rolls the chain n steps under `behavior` from a draw of the initial distribution.
inline LoggedDataset generate_logged_data(const TabularMomdp& env, const PolicyParams& behavior, int n,
                                          std::uint64_t seed) {
    if (n < 1) throw ParameterError("logged dataset needs at least one record");
    LoggedDataset data;
    data.behavior = behavior;
    data.records.reserve(std::size_t(n));
    MarkovSampler sampler(env, seed);
    Eigen::VectorXd probs;
    for (int k = 0; k < n; ++k) {
        const int s = sampler.current_state();
        const int a = sampler.draw_action(behavior, probs);
        data.records.push_back({s, a, env.reward.col(env.row(s, a)), probs[a]});
        sampler.advance(a);
    }
    return data;
}

// --- JSON-lines --------------------------------------------------------------

inline void write_jsonl(std::ostream& out, const LoggedDataset& data) {
    for (const auto& rec : data.records) {
        nlohmann::json line{{"s", rec.state},
                            {"a", rec.action},
                            {"r", std::vector<double>(rec.rewards.data(), rec.rewards.data() + rec.rewards.size())},
                            {"pb", rec.behavior_prob}};
        out << line.dump() << '\n';
    }
}

/// One `{s, a, r:[...], pb}` object per line; blank lines are skipped.
inline LoggedDataset read_jsonl(std::istream& in) {
    LoggedDataset data;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto doc = nlohmann::json::parse(line);
            LoggedRecord rec;
            rec.state = doc.at("s").get<int>();
            rec.action = doc.at("a").get<int>();
            auto r = doc.at("r").get<std::vector<double>>();
            rec.rewards = Eigen::Map<Eigen::VectorXd>(r.data(), Eigen::Index(r.size()));
            rec.behavior_prob = doc.at("pb").get<double>();
            if (rec.state < 0 || rec.action < 0) throw DataError("negative index");
            data.records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    data.validate();
    return data;
}

}  // namespace moac
