#pragma once

#include <moac/momdp.hpp>
#include <moac/policy.hpp>

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace moac {

/// One sampled step: (s, a, r(s, a), s').
struct Transition {
    int state = 0;
    int action = 0;
    Eigen::VectorXd rewards;
    int next_state = 0;
};

/**
 * A single unbroken Markov chain over an environment.
 *
 * The sampler owns its RNG; every draw (actions included) goes through it so
 * equal seeds and equal call sequences give identical trajectories. Critic and
 * actor phases share one sampler, which is how the chain is handed over.
 */
class MarkovSampler {
public:
    /// Starts from a draw of the initial distribution.
    MarkovSampler(const TabularMomdp& env, std::uint64_t seed) : env_(&env), rng_(seed), seed_(seed) {
        build_tables();
        state_ = sample_index(env.initial_distribution, rng_);
    }

    MarkovSampler(const TabularMomdp& env, std::uint64_t seed, int start_state)
        : env_(&env), rng_(seed), seed_(seed) {
        build_tables();
        reset(start_state);
    }

    const TabularMomdp& env() const { return *env_; }
    int current_state() const { return state_; }
    std::uint64_t seed() const { return seed_; }
    std::mt19937_64& rng() { return rng_; }

    void reset(int state) {
        if (state < 0 || state >= env_->n_states) throw ParameterError("state index out of range");
        state_ = state;
    }

    /// Draws s' ~ P(·|s, action) and advances; returns s'.
    int advance(int action) {
        const auto& row = successors_[std::size_t(env_->row(state_, action))];
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
        int next = row.back().first;
        for (const auto& [candidate, cumulative] : row)
            if (u < cumulative) {
                next = candidate;
                break;
            }
        state_ = next;
        return next;
    }

    /// a ~ π_θ(·|current state); `probs` receives π_θ(·|s) for reuse by the caller.
    int draw_action(const PolicyParams& policy, Eigen::VectorXd& probs) {
        probs = action_probabilities(policy, state_);
        return sample_index(probs, rng_);
    }

private:
    void build_tables() {
        const Eigen::Index rows = env_->transition.rows();
        successors_.assign(std::size_t(rows), {});
        for (Eigen::Index k = 0; k < rows; ++k) {
            double cumulative = 0.0;
            for (int n = 0; n < env_->n_states; ++n) {
                double p = env_->transition(k, n);
                if (p <= 0.0) continue;
                cumulative += p;
                successors_[std::size_t(k)].emplace_back(n, cumulative);
            }
        }
    }

    const TabularMomdp* env_;
    std::mt19937_64 rng_;
    std::uint64_t seed_;
    int state_ = 0;
    std::vector<std::vector<std::pair<int, double>>> successors_;
};

inline Transition sample_step(MarkovSampler& sampler, int action) {
    const auto& env = sampler.env();
    if (action < 0 || action >= env.n_actions) throw ParameterError("action index out of range");
    Transition t;
    t.state = sampler.current_state();
    t.action = action;
    t.rewards = env.reward.col(env.row(t.state, action));
    t.next_state = sampler.advance(action);
    return t;
}

/// Draws the action from the policy, then steps.
inline Transition sample_step(MarkovSampler& sampler, const PolicyParams& policy) {
    Eigen::VectorXd probs;
    int action = sampler.draw_action(policy, probs);
    return sample_step(sampler, action);
}

}  // namespace moac
