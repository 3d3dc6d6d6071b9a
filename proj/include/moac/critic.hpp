#pragma once

#include <moac/exact.hpp>
#include <moac/momdp.hpp>
#include <moac/policy.hpp>
#include <moac/sampler.hpp>

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace moac {

/// Per-objective linear critic weights plus the Algorithm-1 hyper-parameters.
struct CriticState {
    std::vector<Eigen::VectorXd> weights;  // M vectors of feature dimension
    Eigen::VectorXd avg_reward;            // μ^i, average setting only
    double step_size = 0.1;                // β
    int batch_size = 1;                    // D
    int iterations = 1;                    // N

    static CriticState zeros(int n_objectives, int feature_dim, double step_size, int batch_size, int iterations) {
        CriticState state;
        state.weights.assign(std::size_t(n_objectives), Eigen::VectorXd::Zero(feature_dim));
        state.avg_reward = Eigen::VectorXd::Zero(n_objectives);
        state.step_size = step_size;
        state.batch_size = batch_size;
        state.iterations = iterations;
        return state;
    }
};

struct AverageTdError {
    double mu;     // tracker after this sample
    double delta;
};

/// μ ← (1-β)μ + βr first, then δ = r - μ + φ(s')ᵀw - φ(s)ᵀw.
inline AverageTdError td_error_average(const Eigen::VectorXd& w, double mu_prev, double beta,
                                       const FeatureMap& features, const Transition& t, int objective) {
    const double r = t.rewards[objective];
    const double mu = (1.0 - beta) * mu_prev + beta * r;
    return {mu, r - mu + features.row(t.next_state).dot(w) - features.row(t.state).dot(w)};
}

/// δ = r + γ φ(s')ᵀw - φ(s)ᵀw.
inline double td_error_discounted(const Eigen::VectorXd& w, double gamma, const FeatureMap& features,
                                  const Transition& t, int objective) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("discount must lie in (0,1)");
    return t.rewards[objective] + gamma * features.row(t.next_state).dot(w) - features.row(t.state).dot(w);
}

namespace detail {

inline constexpr double kDivergenceThreshold = 1e12;

struct SampleRecord {
    int state;
    int action;
    int next_state;
};

inline void check_weights(const std::vector<Eigen::VectorXd>& weights, std::size_t iteration, const char* phase) {
    for (const auto& w : weights)
        if (!w.allFinite() || w.lpNorm<Eigen::Infinity>() > kDivergenceThreshold)
            throw DivergenceError(std::string(phase) + " weights diverged at iteration " + std::to_string(iteration),
                                  iteration);
}

}  // namespace detail

/// Called after every outer critic iteration k = 1..N.
using CriticObserver = std::function<void(int iteration, const CriticState&)>;

/**
 * Mini-batch TD(0) critic.
 *
 * N outer iterations; each draws D chained samples under π_θ from `sampler`
 * (which is left at the last visited state), evaluates all M TD errors on the
 * same batch with the current weights, then applies
 * w^i ← w^i + (β/D) Σ_τ δ^i_τ φ(s_τ). μ^i starts at 0 on every call.
 */
inline void run_critic(MarkovSampler& sampler, const PolicyParams& policy, const FeatureMap& features,
                       CriticState& critic, Setting setting, const CriticObserver& observer = {}) {
    const auto& env = sampler.env();
    const int n_obj = env.n_objectives;
    const double beta = critic.step_size;
    const int batch = critic.batch_size;
    if (critic.weights.size() != std::size_t(n_obj)) throw ParameterError("critic has wrong objective count");
    if (batch < 1 || critic.iterations < 1 || !(beta > 0.0)) throw ParameterError("invalid critic configuration");
    critic.avg_reward = Eigen::VectorXd::Zero(n_obj);

    const Eigen::MatrixXd probs = action_probability_table(policy);
    std::vector<detail::SampleRecord> samples(std::size_t(batch), detail::SampleRecord{});
    Eigen::VectorXd values(env.n_states);
    Eigen::VectorXd per_state(env.n_states);

    for (int k = 1; k <= critic.iterations; ++k) {
        for (auto& rec : samples) {
            rec.state = sampler.current_state();
            rec.action = sample_index(probs.row(rec.state), sampler.rng());
            rec.next_state = sampler.advance(rec.action);
        }
        for (int i = 0; i < n_obj; ++i) {
            values.noalias() = features.phi * critic.weights[std::size_t(i)];
            per_state.setZero();
            if (setting == Setting::Average) {
                double mu = critic.avg_reward[i];
                for (const auto& rec : samples) {
                    const double r = env.reward(i, env.row(rec.state, rec.action));
                    mu = (1.0 - beta) * mu + beta * r;
                    per_state[rec.state] += r - mu + values[rec.next_state] - values[rec.state];
                }
                critic.avg_reward[i] = mu;
            } else {
                const double gamma = env.discounts[i];
                for (const auto& rec : samples) {
                    const double r = env.reward(i, env.row(rec.state, rec.action));
                    per_state[rec.state] += r + gamma * values[rec.next_state] - values[rec.state];
                }
            }
            critic.weights[std::size_t(i)].noalias() += (beta / batch) * (features.phi.transpose() * per_state);
        }
        detail::check_weights(critic.weights, std::size_t(k), "critic");
        if (observer) observer(k, critic);
    }
}

// --- TD fixed point oracle ---------------------------------------------------

/// Exact TD quantities for one (env, policy, features, setting).
struct TdFixedPoint {
    Setting setting = Setting::Discounted;
    std::vector<Eigen::MatrixXd> A;       // per objective (identical in the average setting)
    std::vector<Eigen::VectorXd> b;       // b^i (average) or b'^i (discounted)
    std::vector<Eigen::VectorXd> w_star;  // -A^{-1} b
    Eigen::VectorXd stationary;
    Eigen::VectorXd J;                    // exact average reward (used by b in the average setting)
    double lambda_A = 0.0;                // min over objectives of -λ_max(A + Aᵀ)
    double C_A = 0.0;                     // max over objectives of ‖A‖_F + 1e-6
    double R_w = 0.0;                     // 4 r_max/λ_A (average) or 2 r_max/λ_A (discounted)
};

/**
 * A = E[φ(s)(γφ(s') - φ(s))ᵀ] (γ = 1 in the average setting), b^i = E[(r^i - J^i)φ(s)]
 * or b'^i = E[r^i φ(s)], expectations under d_θ(s)π_θ(a|s)P(s'|s,a).
 */
inline TdFixedPoint compute_td_fixed_point(const TabularMomdp& env, const PolicyParams& policy,
                                           const FeatureMap& features, Setting setting) {
    if (features.n_states() != env.n_states) throw ParameterError("feature map has wrong number of states");
    TdFixedPoint fp;
    fp.setting = setting;
    const Eigen::MatrixXd probs = action_probability_table(policy);
    const Eigen::MatrixXd chain = induced_chain(env, probs);
    fp.stationary = stationary_distribution(chain);
    const Eigen::MatrixXd r_theta = policy_rewards(env, probs);
    fp.J = r_theta * fp.stationary;

    const Eigen::MatrixXd& phi = features.phi;
    const Eigen::MatrixXd weighted_phi = fp.stationary.asDiagonal() * phi;  // D Φ
    const Eigen::MatrixXd self = phi.transpose() * weighted_phi;            // E[φ φᵀ]
    const Eigen::MatrixXd cross = weighted_phi.transpose() * chain * phi;   // E[φ(s) φ(s')ᵀ]

    fp.lambda_A = std::numeric_limits<double>::infinity();
    for (int i = 0; i < env.n_objectives; ++i) {
        const double gamma = setting == Setting::Average ? 1.0 : env.discounts[i];
        Eigen::MatrixXd A = gamma * cross - self;
        Eigen::VectorXd centered = r_theta.row(i).transpose();
        if (setting == Setting::Average) centered.array() -= fp.J[i];
        Eigen::VectorXd b = weighted_phi.transpose() * centered;

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A + A.transpose(), Eigen::EigenvaluesOnly);
        const double lambda = -eig.eigenvalues().maxCoeff();
        if (!(lambda > 1e-10))
            throw AssumptionError("λ_A = " + std::to_string(lambda) + " is not positive for objective " +
                                  std::to_string(i));
        fp.lambda_A = std::min(fp.lambda_A, lambda);
        fp.C_A = std::max(fp.C_A, A.norm() + 1e-6);
        fp.w_star.push_back(-A.partialPivLu().solve(b));
        fp.A.push_back(std::move(A));
        fp.b.push_back(std::move(b));
    }
    fp.R_w = (setting == Setting::Average ? 4.0 : 2.0) * env.r_max / fp.lambda_A;
    return fp;
}

/// β = min{λ_A / (8 C_A²), 4 / λ_A}.
inline double theory_critic_step_size(const TdFixedPoint& fp) {
    return std::min(fp.lambda_A / (8.0 * fp.C_A * fp.C_A), 4.0 / fp.lambda_A);
}

/// Σ_i ‖w^i - w^{i,*}‖².
inline double critic_error(const CriticState& critic, const TdFixedPoint& fp) {
    double total = 0.0;
    for (std::size_t i = 0; i < fp.w_star.size(); ++i) total += (critic.weights[i] - fp.w_star[i]).squaredNorm();
    return total;
}

/// max_i E_{s~d_θ}[(V^i(s) - φ(s)ᵀw^{i,*})²].
inline double compute_zeta_approx(const TabularMomdp& env, const PolicyParams& policy, const FeatureMap& features,
                                  const TdFixedPoint& fp) {
    const auto values = compute_exact_values(env, policy, fp.setting);
    double worst = 0.0;
    for (int i = 0; i < env.n_objectives; ++i) {
        Eigen::VectorXd gap = values.V.row(i).transpose() - features.phi * fp.w_star[std::size_t(i)];
        worst = std::max(worst, values.stationary.dot(gap.cwiseAbs2()));
    }
    return worst;
}

}  // namespace moac
