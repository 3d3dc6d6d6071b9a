#pragma once

#include <moac/momdp.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <sstream>
#include <tuple>

namespace moac {

namespace detail {

inline void require_ergodic_under_uniform(const TabularMomdp& env) {
    if (!is_irreducible_aperiodic(uniform_policy_chain(env)))
        throw ModelError(env.name + ": chain under the uniform policy is not irreducible and aperiodic");
}

}  // namespace detail

// --- resource gathering ------------------------------------------------------

/// Cell layout and state encoding of the resource-gathering grid. Positions are
/// (row, col) with row 0 at the top; the home cell is at the bottom.
struct ResourceGatheringLayout {
    static constexpr int kSize = 5;
    static constexpr std::array<int, 2> kHome{4, 2};
    static constexpr std::array<int, 2> kGold{0, 2};
    static constexpr std::array<int, 2> kDiamond{1, 4};
    static constexpr std::array<std::array<int, 2>, 2> kEnemies{{{1, 2}, {0, 3}}};
    static constexpr double kAttackProbability = 0.1;

    struct Cell {
        int row, col;
        bool gold, diamond;
        bool dead;
    };
    std::vector<Cell> states;  // dead state is last

    ResourceGatheringLayout() {
        for (int row = 0; row < kSize; ++row)
            for (int col = 0; col < kSize; ++col)
                for (int g = 0; g < 2; ++g)
                    for (int d = 0; d < 2; ++d) {
                        std::array<int, 2> pos{row, col};
                        // flags are cleared on arrival home and set on arrival at a resource
                        if (pos == kHome && (g || d)) continue;
                        if (pos == kGold && !g) continue;
                        if (pos == kDiamond && !d) continue;
                        states.push_back({row, col, g == 1, d == 1, false});
                    }
        states.push_back({-1, -1, false, false, true});
    }

    int index(int row, int col, bool gold, bool diamond) const {
        for (std::size_t k = 0; k < states.size(); ++k) {
            const auto& c = states[k];
            if (!c.dead && c.row == row && c.col == col && c.gold == gold && c.diamond == diamond)
                return int(k);
        }
        throw ModelError("unreachable resource-gathering cell requested");
    }
    int home() const { return index(kHome[0], kHome[1], false, false); }
    int dead() const { return int(states.size()) - 1; }

    static bool is_enemy(int row, int col) {
        for (const auto& e : kEnemies)
            if (e[0] == row && e[1] == col) return true;
        return false;
    }
};

/**
 * Resource-gathering grid as a continuing chain.
 *
 * Objectives: 0 enemy (1 per step alive, 0 in the step after an attack),
 * 1 gold delivered home, 2 diamond delivered home. An attack moves the agent
 * to a dedicated "dead" state whose every action resets to home; arriving
 * home with resources pays out and clears the flags.
 */
inline TabularMomdp build_resource_gathering(double discount = 0.95) {
    using L = ResourceGatheringLayout;
    if (!(discount > 0.0 && discount < 1.0)) throw ParameterError("discount must lie in (0,1)");
    const L layout;
    constexpr int kMoves[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};  // up, down, left, right

    TabularMomdp env;
    env.name = "resource-gathering";
    env.n_states = int(layout.states.size());
    env.n_actions = 4;
    env.n_objectives = 3;
    env.r_max = 1.0;
    env.transition = Eigen::MatrixXd::Zero(Eigen::Index(env.n_states) * env.n_actions, env.n_states);
    env.reward = Eigen::MatrixXd::Zero(env.n_objectives, Eigen::Index(env.n_states) * env.n_actions);
    env.discounts = Eigen::VectorXd::Constant(env.n_objectives, discount);
    env.initial_distribution = Eigen::VectorXd::Zero(env.n_states);
    env.initial_distribution[layout.home()] = 1.0;

    const int home = layout.home();
    const int dead = layout.dead();
    for (int s = 0; s < env.n_states; ++s) {
        const auto& cell = layout.states[s];
        for (int a = 0; a < env.n_actions; ++a) {
            const auto k = env.row(s, a);
            if (cell.dead) {
                env.transition(k, home) = 1.0;
                continue;
            }
            env.reward(0, k) = 1.0;
            int row = std::clamp(cell.row + kMoves[a][0], 0, L::kSize - 1);
            int col = std::clamp(cell.col + kMoves[a][1], 0, L::kSize - 1);
            std::array<int, 2> pos{row, col};
            if (pos == L::kHome) {
                env.transition(k, home) = 1.0;
                env.reward(1, k) = cell.gold ? 1.0 : 0.0;
                env.reward(2, k) = cell.diamond ? 1.0 : 0.0;
                continue;
            }
            bool gold = cell.gold || pos == L::kGold;
            bool diamond = cell.diamond || pos == L::kDiamond;
            int next = layout.index(row, col, gold, diamond);
            if (L::is_enemy(row, col)) {
                env.transition(k, dead) += L::kAttackProbability;
                env.transition(k, next) += 1.0 - L::kAttackProbability;
            } else {
                env.transition(k, next) = 1.0;
            }
        }
    }

    env.metadata = {
        {"grid", "5x5; home (4,2); gold (0,2); diamond (1,4); enemies (1,2),(0,3)"},
        {"actions", "0 up, 1 down, 2 left, 3 right"},
        {"objectives", "enemy, gold, diamond"},
        {"enemy_attack_probability", "0.1"},
        {"reward_shift", "objective 0 shifted by +1: alive step = 1, step after an attack = 0"},
        {"termination", "attack -> dead state -> home; arrival home clears flags"},
        {"state_encoding", "reachable (row, col, gold, diamond) cells, dead state last"},
    };
    env.validate();
    detail::require_ergodic_under_uniform(env);
    return env;
}

// --- fishwood ----------------------------------------------------------------

/// State index for fishwood: location 0 fishing / 1 woods, `caught` is this step's draw.
/// Rewarding states come first so the reduced feature map zeroes a reward-free state.
constexpr int fishwood_state(int location, bool caught) { return caught ? location : 2 + location; }

/**
 * Fishwood with per-step Bernoulli rewards folded into the state, so the reward
 * is deterministic in (s, a). Objective 0 is wood, objective 1 is fish; action 0
 * goes fishing and action 1 goes to the woods.
 */
inline TabularMomdp build_fishwood(double fish_proba, double wood_proba,
                                   std::array<double, 2> discounts = {0.95, 0.9}) {
    if (!(fish_proba > 0.0 && fish_proba < 1.0) || !(wood_proba > 0.0 && wood_proba < 1.0))
        throw ParameterError("fishwood probabilities must lie in (0,1)");
    constexpr int kFishing = 0, kWoods = 1;
    const double success[2] = {fish_proba, wood_proba};

    TabularMomdp env;
    env.name = "fishwood";
    env.n_states = 4;
    env.n_actions = 2;
    env.n_objectives = 2;
    env.r_max = 1.0;
    env.transition = Eigen::MatrixXd::Zero(8, 4);
    env.reward = Eigen::MatrixXd::Zero(2, 8);
    env.discounts = Eigen::Vector2d(discounts[0], discounts[1]);
    env.initial_distribution = Eigen::VectorXd::Zero(4);
    env.initial_distribution[fishwood_state(kWoods, true)] = wood_proba;
    env.initial_distribution[fishwood_state(kWoods, false)] = 1.0 - wood_proba;

    for (int location = 0; location < 2; ++location)
        for (int caught = 0; caught < 2; ++caught) {
            int s = fishwood_state(location, caught);
            for (int a = 0; a < 2; ++a) {
                const auto k = env.row(s, a);
                env.transition(k, fishwood_state(a, true)) = success[a];
                env.transition(k, fishwood_state(a, false)) = 1.0 - success[a];
                env.reward(0, k) = (location == kWoods && caught) ? 1.0 : 0.0;
                env.reward(1, k) = (location == kFishing && caught) ? 1.0 : 0.0;
            }
        }

    std::ostringstream params;
    params.precision(17);
    params << "fish_proba=" << fish_proba << ", wood_proba=" << wood_proba;
    env.metadata = {
        {"parameters", params.str()},
        {"objectives", "wood, fish"},
        {"actions", "0 go fishing, 1 go collect wood"},
        {"state_encoding", "location + 2*(1 - caught); location 0 fishing, 1 woods"},
        {"horizon", "continuing chain (no MAX_TS)"},
    };
    env.validate();
    detail::require_ergodic_under_uniform(env);
    return env;
}

// --- small fixtures ----------------------------------------------------------

/// Two states, two actions, two objectives; the workhorse fixture for critic tests.
inline TabularMomdp build_two_state_fixture() {
    TabularMomdp env;
    env.name = "two-state";
    env.n_states = 2;
    env.n_actions = 2;
    env.n_objectives = 2;
    env.r_max = 1.0;
    env.transition.resize(4, 2);
    env.transition << 0.8, 0.2,   // s0, a0
                      0.3, 0.7,   // s0, a1
                      0.4, 0.6,   // s1, a0
                      0.9, 0.1;   // s1, a1
    env.reward.resize(2, 4);
    env.reward << 1.0, 0.6, 0.2, 0.0,
                  0.0, 0.3, 0.5, 1.0;
    env.discounts = Eigen::Vector2d(0.9, 0.8);
    env.initial_distribution = Eigen::Vector2d(0.5, 0.5);
    env.validate();
    return env;
}

/// Dense random MOMDP with strictly positive transitions (hence ergodic).
inline TabularMomdp build_random_momdp(int n_states, int n_actions, int n_objectives,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    TabularMomdp env;
    env.name = "random";
    env.n_states = n_states;
    env.n_actions = n_actions;
    env.n_objectives = n_objectives;
    env.r_max = 1.0;
    const Eigen::Index sa = Eigen::Index(n_states) * n_actions;
    env.transition.resize(sa, n_states);
    for (Eigen::Index k = 0; k < sa; ++k) {
        for (int n = 0; n < n_states; ++n) env.transition(k, n) = 0.05 + unit(rng);
        env.transition.row(k) /= env.transition.row(k).sum();
    }
    env.reward.resize(n_objectives, sa);
    for (Eigen::Index k = 0; k < env.reward.size(); ++k) env.reward.data()[k] = unit(rng);
    env.discounts.resize(n_objectives);
    for (int i = 0; i < n_objectives; ++i) env.discounts[i] = 0.5 + 0.45 * unit(rng);
    env.initial_distribution.resize(n_states);
    for (int s = 0; s < n_states; ++s) env.initial_distribution[s] = 0.1 + unit(rng);
    env.initial_distribution /= env.initial_distribution.sum();
    env.metadata = {{"seed", std::to_string(seed)}};
    env.validate();
    return env;
}

}  // namespace moac
