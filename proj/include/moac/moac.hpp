#pragma once

#include <moac/critic.hpp>
#include <moac/exact.hpp>
#include <moac/mgda.hpp>
#include <moac/momdp.hpp>
#include <moac/policy.hpp>
#include <moac/sampler.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace moac {

struct MoacConfig {
    int actor_iterations = 100;      // T
    int actor_batch_size = 64;       // B
    double actor_step_size = 0.1;    // α, ignored when theory_actor_step is set
    bool theory_actor_step = false;  // α = 1/(3 L̂_J)
    double lipschitz_estimate = 10.0;
    MomentumSchedule momentum = MomentumSchedule::power(1.0);

    double critic_step_size = 0.1;   // β, ignored when theory_critic_step is set
    bool theory_critic_step = false; // β = min{λ_A/(8C_A²), 4/λ_A} from the oracle at θ_t
    int critic_batch_size = 50;      // D
    int critic_iterations = 10;      // N

    Setting setting = Setting::Discounted;
    std::uint64_t seed = 1;
    bool oracle_diagnostics = false;
    int oracle_every = 1;            // oracle fields on t = 1 and every multiple of this

    double effective_actor_step() const { return theory_actor_step ? 1.0 / (3.0 * lipschitz_estimate) : actor_step_size; }

    void validate() const {
        if (actor_iterations < 1 || actor_batch_size < 1) throw ParameterError("T and B must be at least 1");
        if (critic_iterations < 1 || critic_batch_size < 1) throw ParameterError("N and D must be at least 1");
        if (!(effective_actor_step() > 0.0) || !std::isfinite(effective_actor_step()))
            throw ParameterError("actor step size must be positive");
        if (!theory_critic_step && !(critic_step_size > 0.0)) throw ParameterError("critic step size must be positive");
        if (theory_actor_step && !(lipschitz_estimate > 0.0)) throw ParameterError("Lipschitz estimate must be positive");
        if (oracle_every < 1) throw ParameterError("oracle_every must be at least 1");
    }

    bool operator==(const MoacConfig&) const = default;
};

/// Per-objective actor-batch gradients g^i and, once combined, g_t = Σ λ^i g^i.
struct GradientEstimate {
    std::vector<Eigen::VectorXd> per_objective;
    Eigen::VectorXd combined;
    SimplexWeights weights;
    Eigen::VectorXd reward_mean;  // per-objective mean reward over the batch
};

/**
 * Actor batch: B chained samples under π_θ, TD errors from the critic weights
 * (average setting: μ^i from 0 with step `actor_step` as in the actor
 * recursion), g^i = (1/B) Σ_l δ^i_l ψ_l. The sampler is left at the last state.
 */
inline GradientEstimate estimate_objective_gradients(MarkovSampler& sampler, const PolicyParams& policy,
                                                     const FeatureMap& features,
                                                     const std::vector<Eigen::VectorXd>& critic_weights,
                                                     int batch_size, Setting setting, double actor_step) {
    const auto& env = sampler.env();
    const int n_obj = env.n_objectives;
    if (critic_weights.size() != std::size_t(n_obj)) throw ParameterError("need critic weights for every objective");
    if (batch_size < 1) throw ParameterError("actor batch size must be at least 1");

    GradientEstimate est;
    est.per_objective.assign(std::size_t(n_obj), Eigen::VectorXd::Zero(policy.dim()));
    est.reward_mean = Eigen::VectorXd::Zero(n_obj);
    const Eigen::MatrixXd probs = action_probability_table(policy);
    Eigen::MatrixXd values(env.n_states, n_obj);
    for (int i = 0; i < n_obj; ++i) values.col(i) = features.phi * critic_weights[std::size_t(i)];
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(n_obj);
    Eigen::VectorXd state_probs(env.n_actions);

    for (int l = 0; l < batch_size; ++l) {
        const int s = sampler.current_state();
        state_probs = probs.row(s).transpose();
        const int a = sample_index(state_probs, sampler.rng());
        const int next = sampler.advance(a);
        const auto k = env.row(s, a);
        for (int i = 0; i < n_obj; ++i) {
            const double r = env.reward(i, k);
            est.reward_mean[i] += r;
            double delta;
            if (setting == Setting::Average) {
                mu[i] = (1.0 - actor_step) * mu[i] + actor_step * r;
                delta = r - mu[i] + values(next, i) - values(s, i);
            } else {
                delta = r + env.discounts[i] * values(next, i) - values(s, i);
            }
            add_scaled_score(policy, s, a, delta / batch_size, state_probs, est.per_objective[std::size_t(i)]);
        }
    }
    est.reward_mean /= double(batch_size);
    return est;
}

/// Fills in g_t = Σ λ^i g^i.
inline void combine_gradients(GradientEstimate& est, const SimplexWeights& weights) {
    if (weights.size() != int(est.per_objective.size())) throw ParameterError("one weight per objective gradient");
    est.weights = weights;
    est.combined = Eigen::VectorXd::Zero(est.per_objective.front().size());
    for (int i = 0; i < weights.size(); ++i) est.combined += weights.lambda[i] * est.per_objective[std::size_t(i)];
}

/// min over the simplex of ‖Σ λ_i ∇J^i(θ)‖², from exact gradients.
inline double pareto_stationarity_gap(const TabularMomdp& env, const PolicyParams& policy, Setting setting) {
    return solve_min_norm(exact_policy_gradients(env, policy, setting)).min_norm_sq;
}

/// One row of the per-iteration metrics stream.
struct MetricsRecord {
    int t = 0;
    Eigen::VectorXd reward_mean;
    double grad_norm_sq = 0.0;
    Eigen::VectorXd lambda;
    double eta = 0.0;
    std::optional<Eigen::VectorXd> critic_err;  // ‖w^i_t - w^{i,*}_t‖² per objective
    std::optional<Eigen::VectorXd> J_exact;
    std::optional<double> pareto_gap;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

struct MoacResult {
    PolicyParams final_policy;    // θ after the T-th update
    PolicyParams sampled_policy;  // θ_T̂ with T̂ uniform on {1..T}
    int sampled_index = 1;
    std::vector<MetricsRecord> records;
    double lambda_movement_violation = 0.0;  // max_t (|λ_t - λ_{t-1}|₁ - 2η_t), ≤ 0 when the bound holds
};

/**
 * Multi-objective actor-critic loop.
 *
 * Per t: critic from the handed-over state (warm-started weights), actor batch,
 * min-norm QP on the batch gradients, momentum on λ, θ ← θ + α Σ λ^i g^i.
 * Critic or θ blow-ups surface as DivergenceError carrying the actor iteration.
 */
inline MoacResult run_moac(const TabularMomdp& env, const FeatureMap& features, const MoacConfig& config,
                           const MetricsSink& sink = {}, std::optional<PolicyParams> initial_policy = std::nullopt) {
    config.validate();
    if (features.n_states() != env.n_states) throw ParameterError("feature map has wrong number of states");
    const int n_obj = env.n_objectives;
    const double alpha = config.effective_actor_step();

    PolicyParams policy = initial_policy ? *initial_policy : PolicyParams::tabular(env.n_states, env.n_actions);
    MarkovSampler sampler(env, config.seed);
    std::mt19937_64 index_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    const int sampled_index = std::uniform_int_distribution<int>(1, config.actor_iterations)(index_rng);

    CriticState critic = CriticState::zeros(n_obj, features.dim(), config.critic_step_size, config.critic_batch_size,
                                            config.critic_iterations);
    SimplexWeights lambda = SimplexWeights::uniform(n_obj);

    MoacResult result;
    result.lambda_movement_violation = -std::numeric_limits<double>::infinity();
    for (int t = 1; t <= config.actor_iterations; ++t) {
        if (t == sampled_index) result.sampled_policy = policy;

        std::optional<TdFixedPoint> fixed_point;
        const bool oracle_now = config.oracle_diagnostics && (t == 1 || t % config.oracle_every == 0);
        if (config.theory_critic_step || oracle_now) fixed_point = compute_td_fixed_point(env, policy, features, config.setting);
        if (config.theory_critic_step) critic.step_size = theory_critic_step_size(*fixed_point);

        try {
            run_critic(sampler, policy, features, critic, config.setting);
        } catch (const DivergenceError& e) {
            throw DivergenceError("critic diverged at actor iteration " + std::to_string(t) + " (" + e.what() + ")",
                                  std::size_t(t));
        }

        GradientEstimate est = estimate_objective_gradients(sampler, policy, features, critic.weights,
                                                            config.actor_batch_size, config.setting, alpha);
        const MinNormResult qp = solve_min_norm(est.per_objective);
        const double eta = config.momentum.eta(t);
        const SimplexWeights next_lambda = momentum_update(lambda, qp.weights, eta);
        result.lambda_movement_violation =
            std::max(result.lambda_movement_violation, (next_lambda.lambda - lambda.lambda).lpNorm<1>() - 2.0 * eta);
        lambda = next_lambda;
        combine_gradients(est, lambda);

        MetricsRecord rec;
        rec.t = t;
        rec.reward_mean = est.reward_mean;
        rec.grad_norm_sq = est.combined.squaredNorm();
        rec.lambda = lambda.lambda;
        rec.eta = eta;
        if (oracle_now) {
            Eigen::VectorXd err(n_obj);
            for (int i = 0; i < n_obj; ++i)
                err[i] = (critic.weights[std::size_t(i)] - fixed_point->w_star[std::size_t(i)]).squaredNorm();
            rec.critic_err = err;
            rec.J_exact = compute_exact_objective(env, policy, config.setting);
            rec.pareto_gap = pareto_stationarity_gap(env, policy, config.setting);
        }
        if (sink) sink(rec);
        result.records.push_back(std::move(rec));

        policy.theta += alpha * est.combined;
        if (!policy.theta.allFinite())
            throw DivergenceError("policy parameters became non-finite at actor iteration " + std::to_string(t),
                                  std::size_t(t));
    }
    result.final_policy = policy;
    result.sampled_index = sampled_index;
    return result;
}

}  // namespace moac
