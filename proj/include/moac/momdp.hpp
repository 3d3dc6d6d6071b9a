#pragma once

#include <moac/errors.hpp>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

namespace moac {

enum class Setting { Average, Discounted };

inline std::string to_string(Setting setting) {
    return setting == Setting::Average ? "average" : "discounted";
}

inline Setting parse_setting(const std::string& text) {
    if (text == "average") return Setting::Average;
    if (text == "discounted") return Setting::Discounted;
    throw ParameterError("unknown reward setting '" + text + "' (expected average|discounted)");
}

/**
 * Tabular multi-objective MDP.
 *
 * Transition rows are stored densely, one row per (state, action) pair at
 * index `s * n_actions + a`. Rewards are deterministic in (s, a); objective i
 * occupies row i of `reward`.
 */
struct TabularMomdp {
    int n_states = 0;
    int n_actions = 0;
    int n_objectives = 0;
    Eigen::MatrixXd transition;       // (S*A) x S
    Eigen::MatrixXd reward;           // M x (S*A)
    Eigen::VectorXd discounts;        // M, each in (0,1)
    Eigen::VectorXd initial_distribution;
    double r_max = 1.0;
    std::string name;
    std::map<std::string, std::string> metadata;

    Eigen::Index row(int s, int a) const { return Eigen::Index(s) * n_actions + a; }
    double r(int objective, int s, int a) const { return reward(objective, row(s, a)); }
    double p(int s, int a, int next) const { return transition(row(s, a), next); }

    /// Throws ModelError if any structural invariant fails.
    void validate() const;
};

inline void TabularMomdp::validate() const {
    if (n_states < 1 || n_actions < 1 || n_objectives < 1)
        throw ModelError("MOMDP dimensions must be positive");
    const Eigen::Index sa = Eigen::Index(n_states) * n_actions;
    if (transition.rows() != sa || transition.cols() != n_states)
        throw ModelError("transition tensor has wrong shape");
    if (reward.rows() != n_objectives || reward.cols() != sa)
        throw ModelError("reward tensor has wrong shape");
    if (discounts.size() != n_objectives)
        throw ModelError("discount vector must have one entry per objective");
    if (initial_distribution.size() != n_states)
        throw ModelError("initial distribution has wrong length");
    if (!(r_max > 0.0) || !std::isfinite(r_max)) throw ModelError("r_max must be positive");

    for (Eigen::Index k = 0; k < sa; ++k) {
        if ((transition.row(k).array() < 0.0).any() || !transition.row(k).allFinite())
            throw ModelError("transition row " + std::to_string(k) + " has a negative entry");
        if (std::abs(transition.row(k).sum() - 1.0) > 1e-12)
            throw ModelError("transition row " + std::to_string(k) + " does not sum to 1");
    }
    if (!reward.allFinite() || (reward.array() < 0.0).any() || (reward.array() > r_max).any())
        throw ModelError("rewards must lie in [0, r_max]");
    for (Eigen::Index i = 0; i < discounts.size(); ++i)
        if (!(discounts[i] > 0.0 && discounts[i] < 1.0))
            throw ModelError("discount factors must lie in (0,1)");
    if ((initial_distribution.array() < 0.0).any() ||
        std::abs(initial_distribution.sum() - 1.0) > 1e-12)
        throw ModelError("initial distribution must be a probability vector");
}

/// State-to-state matrix obtained by averaging action rows with `action_probs(s, a)`.
inline Eigen::MatrixXd induced_chain(const TabularMomdp& env, const Eigen::MatrixXd& action_probs) {
    Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(env.n_states, env.n_states);
    for (int s = 0; s < env.n_states; ++s)
        for (int a = 0; a < env.n_actions; ++a)
            chain.row(s) += action_probs(s, a) * env.transition.row(env.row(s, a));
    return chain;
}

namespace detail {

/// BFS levels from state 0 along positive entries; -1 marks unreached states.
inline std::vector<int> bfs_levels(const Eigen::MatrixXd& chain, bool reverse) {
    const int n = int(chain.rows());
    std::vector<int> level(n, -1);
    std::queue<int> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        int u = frontier.front();
        frontier.pop();
        for (int v = 0; v < n; ++v) {
            double weight = reverse ? chain(v, u) : chain(u, v);
            if (weight > 0.0 && level[v] < 0) {
                level[v] = level[u] + 1;
                frontier.push(v);
            }
        }
    }
    return level;
}

}  // namespace detail

/// Every state reaches every other state along positive entries of `chain`.
inline bool is_irreducible(const Eigen::MatrixXd& chain) {
    if (chain.rows() == 0) return false;
    for (int level : detail::bfs_levels(chain, false))
        if (level < 0) return false;
    for (int level : detail::bfs_levels(chain, true))
        if (level < 0) return false;
    return true;
}

/// Period of an irreducible chain: gcd over edges (u, v) of level(u) + 1 - level(v).
inline int chain_period(const Eigen::MatrixXd& chain) {
    const auto level = detail::bfs_levels(chain, false);
    const int n = int(chain.rows());
    int period = 0;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            if (chain(u, v) > 0.0) period = std::gcd(period, std::abs(level[u] + 1 - level[v]));
    return period;
}

inline bool is_irreducible_aperiodic(const Eigen::MatrixXd& chain) {
    return is_irreducible(chain) && chain_period(chain) == 1;
}

/// Chain under the uniform random policy.
inline Eigen::MatrixXd uniform_policy_chain(const TabularMomdp& env) {
    return induced_chain(env, Eigen::MatrixXd::Constant(env.n_states, env.n_actions,
                                                        1.0 / env.n_actions));
}

// --- JSON --------------------------------------------------------------------

inline nlohmann::json to_json(const TabularMomdp& env) {
    using nlohmann::json;
    json transition = json::array();
    json reward = json::array();
    for (int s = 0; s < env.n_states; ++s) {
        json per_action = json::array();
        for (int a = 0; a < env.n_actions; ++a) {
            std::vector<double> row(env.n_states);
            for (int n = 0; n < env.n_states; ++n) row[n] = env.p(s, a, n);
            per_action.push_back(row);
        }
        transition.push_back(per_action);
    }
    for (int i = 0; i < env.n_objectives; ++i) {
        json per_state = json::array();
        for (int s = 0; s < env.n_states; ++s) {
            std::vector<double> row(env.n_actions);
            for (int a = 0; a < env.n_actions; ++a) row[a] = env.r(i, s, a);
            per_state.push_back(row);
        }
        reward.push_back(per_state);
    }
    return json{
        {"name", env.name},
        {"n_states", env.n_states},
        {"n_actions", env.n_actions},
        {"n_objectives", env.n_objectives},
        {"r_max", env.r_max},
        {"discounts", std::vector<double>(env.discounts.data(), env.discounts.data() + env.discounts.size())},
        {"initial_distribution",
         std::vector<double>(env.initial_distribution.data(),
                             env.initial_distribution.data() + env.initial_distribution.size())},
        {"transition", transition},
        {"reward", reward},
        {"metadata", env.metadata},
    };
}

/// Parses and validates; any schema or invariant failure surfaces as ModelError.
inline TabularMomdp momdp_from_json(const nlohmann::json& doc) {
    TabularMomdp env;
    try {
        env.name = doc.value("name", std::string{});
        env.n_states = doc.at("n_states").get<int>();
        env.n_actions = doc.at("n_actions").get<int>();
        env.n_objectives = doc.at("n_objectives").get<int>();
        env.r_max = doc.at("r_max").get<double>();
        if (env.n_states < 1 || env.n_actions < 1 || env.n_objectives < 1)
            throw ModelError("MOMDP dimensions must be positive");
        auto discounts = doc.at("discounts").get<std::vector<double>>();
        env.discounts = Eigen::Map<Eigen::VectorXd>(discounts.data(), Eigen::Index(discounts.size()));
        auto initial = doc.at("initial_distribution").get<std::vector<double>>();
        env.initial_distribution = Eigen::Map<Eigen::VectorXd>(initial.data(), Eigen::Index(initial.size()));

        const auto& transition = doc.at("transition");
        const auto& reward = doc.at("reward");
        if (transition.size() != std::size_t(env.n_states) || reward.size() != std::size_t(env.n_objectives))
            throw ModelError("tensor dimensions disagree with header");
        env.transition.resize(Eigen::Index(env.n_states) * env.n_actions, env.n_states);
        env.reward.resize(env.n_objectives, Eigen::Index(env.n_states) * env.n_actions);
        for (int s = 0; s < env.n_states; ++s) {
            if (transition[s].size() != std::size_t(env.n_actions))
                throw ModelError("transition tensor has wrong action count");
            for (int a = 0; a < env.n_actions; ++a) {
                auto row = transition[s][a].get<std::vector<double>>();
                if (row.size() != std::size_t(env.n_states))
                    throw ModelError("transition row has wrong length");
                for (int n = 0; n < env.n_states; ++n) env.transition(env.row(s, a), n) = row[n];
            }
        }
        for (int i = 0; i < env.n_objectives; ++i) {
            if (reward[i].size() != std::size_t(env.n_states))
                throw ModelError("reward tensor has wrong state count");
            for (int s = 0; s < env.n_states; ++s) {
                auto row = reward[i][s].get<std::vector<double>>();
                if (row.size() != std::size_t(env.n_actions))
                    throw ModelError("reward row has wrong length");
                for (int a = 0; a < env.n_actions; ++a) env.reward(i, env.row(s, a)) = row[a];
            }
        }
        if (doc.contains("metadata"))
            env.metadata = doc.at("metadata").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed MOMDP document: ") + e.what());
    }
    env.validate();
    return env;
}

}  // namespace moac
