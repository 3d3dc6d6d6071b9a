#pragma once

#include <moac/momdp.hpp>
#include <moac/policy.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace moac {

/// P_θ(s'|s) = Σ_a π_θ(a|s) P(s'|s,a).
inline Eigen::MatrixXd policy_chain(const TabularMomdp& env, const PolicyParams& policy) {
    return induced_chain(env, action_probability_table(policy));
}

/// r^i_θ(s) = Σ_a π_θ(a|s) r^i(s,a), as an M x S matrix.
inline Eigen::MatrixXd policy_rewards(const TabularMomdp& env, const Eigen::MatrixXd& probs) {
    Eigen::MatrixXd rewards = Eigen::MatrixXd::Zero(env.n_objectives, env.n_states);
    for (int s = 0; s < env.n_states; ++s)
        for (int a = 0; a < env.n_actions; ++a)
            rewards.col(s) += probs(s, a) * env.reward.col(env.row(s, a));
    return rewards;
}

/**
 * Stationary distribution of a row-stochastic matrix.
 *
 * Direct solve of (Pᵀ - I) d = 0 with one balance equation replaced by Σd = 1;
 * power iteration (tolerance 1e-12, at most 10^6 steps) takes over if the
 * direct residual exceeds 1e-10. Reducible chains are rejected.
 */
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& chain) {
    const Eigen::Index n = chain.rows();
    if (!is_irreducible(chain)) throw ModelError("induced chain is reducible; no unique stationary distribution");

    Eigen::MatrixXd system = chain.transpose() - Eigen::MatrixXd::Identity(n, n);
    system.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[n - 1] = 1.0;
    Eigen::VectorXd d = system.fullPivLu().solve(rhs);
    d = d.cwiseMax(0.0);
    d /= d.sum();

    auto residual = [&](const Eigen::VectorXd& v) {
        return (chain.transpose() * v - v).lpNorm<Eigen::Infinity>();
    };
    if (d.allFinite() && residual(d) <= 1e-10) return d;

    d = Eigen::VectorXd::Constant(n, 1.0 / double(n));
    // lazy chain has the same stationary distribution and cannot oscillate
    const Eigen::MatrixXd lazy_t = 0.5 * (chain.transpose() + Eigen::MatrixXd::Identity(n, n));
    for (int it = 0; it < 1'000'000; ++it) {
        Eigen::VectorXd next = lazy_t * d;
        next /= next.sum();
        double change = (next - d).lpNorm<Eigen::Infinity>();
        d = std::move(next);
        if (change < 1e-12) break;
    }
    if (residual(d) > 1e-10)
        throw ModelError("stationary distribution residual " + std::to_string(residual(d)) + " above 1e-10");
    return d;
}

inline Eigen::VectorXd compute_stationary_distribution(const TabularMomdp& env, const PolicyParams& policy) {
    return stationary_distribution(policy_chain(env, policy));
}

/// Exact value quantities of every objective under one policy.
struct ExactValues {
    Setting setting = Setting::Discounted;
    Eigen::MatrixXd probs;       // S x A
    Eigen::MatrixXd chain;       // S x S
    Eigen::VectorXd stationary;  // d_θ
    Eigen::VectorXd J;           // M
    Eigen::MatrixXd V;           // M x S; differential values with d_θᵀV^i = 0 in the average setting
    Eigen::MatrixXd Q;           // M x (S*A)

    double advantage(const TabularMomdp& env, int i, int s, int a) const { return Q(i, env.row(s, a)) - V(i, s); }
};

/**
 * Solves the Bellman system (discounted) or the Poisson equation (average) for
 * every objective.
 *
 * Average setting: h solves (I - P + 1dᵀ) h = r_θ - J·1, which pins dᵀh = 0.
 */
inline ExactValues compute_exact_values(const TabularMomdp& env, const PolicyParams& policy, Setting setting) {
    ExactValues out;
    out.setting = setting;
    out.probs = action_probability_table(policy);
    out.chain = induced_chain(env, out.probs);
    out.stationary = stationary_distribution(out.chain);
    const Eigen::MatrixXd r_theta = policy_rewards(env, out.probs);
    const Eigen::Index n = env.n_states;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

    out.J.resize(env.n_objectives);
    out.V.resize(env.n_objectives, n);
    out.Q.resize(env.n_objectives, env.transition.rows());
    if (setting == Setting::Average) {
        Eigen::MatrixXd fundamental = eye - out.chain + Eigen::VectorXd::Ones(n) * out.stationary.transpose();
        auto lu = fundamental.fullPivLu();
        for (int i = 0; i < env.n_objectives; ++i) {
            out.J[i] = out.stationary.dot(r_theta.row(i));
            Eigen::VectorXd h = lu.solve(r_theta.row(i).transpose() - out.J[i] * Eigen::VectorXd::Ones(n));
            out.V.row(i) = h.transpose();
            out.Q.row(i) = (env.reward.row(i).transpose().array() - out.J[i]).matrix() + env.transition * h;
        }
    } else {
        for (int i = 0; i < env.n_objectives; ++i) {
            const double gamma = env.discounts[i];
            Eigen::VectorXd v = (eye - gamma * out.chain).fullPivLu().solve(r_theta.row(i).transpose());
            out.V.row(i) = v.transpose();
            out.Q.row(i) = env.reward.row(i).transpose() + gamma * env.transition * v;
            out.J[i] = env.initial_distribution.dot(v);
        }
    }
    return out;
}

/// J(θ): stationary average reward, or Σ_s ρ0(s) V^i(s) in the discounted setting.
inline Eigen::VectorXd compute_exact_objective(const TabularMomdp& env, const PolicyParams& policy, Setting setting) {
    return compute_exact_values(env, policy, setting).J;
}

/// Σ_s weight(s) Σ_a π(a|s) Adv^i(s,a) ψ(s,a).
inline Eigen::VectorXd weighted_advantage_score(const TabularMomdp& env, const PolicyParams& policy,
                                                const ExactValues& values, int objective,
                                                const Eigen::VectorXd& state_weight) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.dim());
    for (int s = 0; s < env.n_states; ++s) {
        const Eigen::VectorXd probs = values.probs.row(s).transpose();
        for (int a = 0; a < env.n_actions; ++a) {
            double scale = state_weight[s] * probs[a] * values.advantage(env, objective, s, a);
            add_scaled_score(policy, s, a, scale, probs, grad);
        }
    }
    return grad;
}

/// State weighting under which Σ w(s) π Adv ψ is the exact gradient of J^i.
inline Eigen::VectorXd gradient_state_weights(const TabularMomdp& env, const ExactValues& values, int objective) {
    if (values.setting == Setting::Average) return values.stationary;
    const Eigen::Index n = env.n_states;
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - env.discounts[objective] * values.chain;
    // ν = ρ0ᵀ (I - γP_θ)^{-1}
    return system.transpose().fullPivLu().solve(env.initial_distribution);
}

/// ∇_θ J^i(θ) by exact enumeration.
inline Eigen::VectorXd exact_policy_gradient(const TabularMomdp& env, const PolicyParams& policy, int objective,
                                             Setting setting) {
    const auto values = compute_exact_values(env, policy, setting);
    return weighted_advantage_score(env, policy, values, objective, gradient_state_weights(env, values, objective));
}

inline std::vector<Eigen::VectorXd> exact_policy_gradients(const TabularMomdp& env, const PolicyParams& policy,
                                                           Setting setting) {
    const auto values = compute_exact_values(env, policy, setting);
    std::vector<Eigen::VectorXd> grads;
    for (int i = 0; i < env.n_objectives; ++i)
        grads.push_back(weighted_advantage_score(env, policy, values, i, gradient_state_weights(env, values, i)));
    return grads;
}

/// E_{s~d_θ, a~π_θ}[ψ Adv^i]: the quantity the actor's TD-weighted scores average
/// to on the stationary chain. Equals exact_policy_gradient in the average setting.
inline Eigen::VectorXd stationary_advantage_gradient(const TabularMomdp& env, const PolicyParams& policy,
                                                     int objective, Setting setting) {
    const auto values = compute_exact_values(env, policy, setting);
    return weighted_advantage_score(env, policy, values, objective, values.stationary);
}

/**
 * Finite-difference probe of the gradient Lipschitz constant: the largest
 * ‖∇J^i(θ_a) - ∇J^i(θ_b)‖ / ‖θ_a - θ_b‖ over random segments of length
 * `segment` whose start lies within `radius` of the supplied policy's θ.
 */
inline double estimate_gradient_lipschitz(const TabularMomdp& env, const PolicyParams& policy, Setting setting,
                                          int segments, double radius, double segment, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> gauss;
    double worst = 0.0;
    for (int k = 0; k < segments; ++k) {
        PolicyParams start = policy;
        PolicyParams end = policy;
        Eigen::VectorXd direction(policy.dim());
        for (Eigen::Index j = 0; j < policy.dim(); ++j) {
            start.theta[j] += radius * unit(rng);
            direction[j] = gauss(rng);
        }
        direction.normalize();
        end.theta = start.theta + segment * direction;
        const auto ga = exact_policy_gradients(env, start, setting);
        const auto gb = exact_policy_gradients(env, end, setting);
        for (int i = 0; i < env.n_objectives; ++i) worst = std::max(worst, (ga[i] - gb[i]).norm() / segment);
    }
    return worst;
}

}  // namespace moac
