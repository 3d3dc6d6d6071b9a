#include "oracles.hpp"

#include <moac/environments.hpp>
#include <moac/exact.hpp>
#include <moac/momdp.hpp>
#include <moac/sampler.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace moac;

namespace {

TabularMomdp chain_env(const Eigen::MatrixXd& P) {
    TabularMomdp env;
    env.n_states = int(P.rows());
    env.n_actions = 1;
    env.n_objectives = 1;
    env.transition = P;
    env.reward = Eigen::MatrixXd::Zero(1, P.rows());
    env.discounts = Eigen::VectorXd::Constant(1, 0.9);
    env.initial_distribution = Eigen::VectorXd::Constant(P.rows(), 1.0 / double(P.rows()));
    env.validate();
    return env;
}

std::vector<TabularMomdp> all_envs() {
    return {build_resource_gathering(), build_fishwood(0.1, 0.9), build_fishwood(0.5, 0.5), build_two_state_fixture(),
            build_random_momdp(4, 2, 2, 7), build_random_momdp(6, 3, 3, 11)};
}

}  // namespace

TEST(ResourceGathering, Shape) {
    const auto env = build_resource_gathering();
    EXPECT_EQ(env.n_objectives, 3);
    EXPECT_EQ(env.n_actions, 4);
    EXPECT_LE(env.n_states, 100);
    EXPECT_TRUE(env.metadata.count("reward_shift"));
    EXPECT_TRUE(env.metadata.count("enemy_attack_probability"));
}

TEST(ResourceGathering, RowsSumToOne) {
    const auto env = build_resource_gathering();
    for (Eigen::Index k = 0; k < env.transition.rows(); ++k)
        EXPECT_NEAR(env.transition.row(k).sum(), 1.0, 1e-12);
}

TEST(ResourceGathering, ReturningHomeClearsFlagsAndPays) {
    const auto env = build_resource_gathering();
    const ResourceGatheringLayout layout;
    const int above_home = layout.index(3, 2, true, true);
    constexpr int kDown = 1;
    EXPECT_DOUBLE_EQ(env.p(above_home, kDown, layout.home()), 1.0);
    EXPECT_DOUBLE_EQ(env.r(1, above_home, kDown), 1.0);
    EXPECT_DOUBLE_EQ(env.r(2, above_home, kDown), 1.0);
    const auto& home = layout.states[std::size_t(layout.home())];
    EXPECT_FALSE(home.gold);
    EXPECT_FALSE(home.diamond);
}

TEST(ResourceGathering, EveryActionEventuallyReachesClearedHome) {
    // From the both-flags state next to home, every action leads to home with positive probability
    // within a few steps (the chain is irreducible, so it is reached eventually).
    const auto env = build_resource_gathering();
    const ResourceGatheringLayout layout;
    const Eigen::MatrixXd P = uniform_policy_chain(env);
    Eigen::RowVectorXd mass = Eigen::RowVectorXd::Zero(env.n_states);
    mass[layout.index(3, 2, true, true)] = 1.0;
    double reached = 0.0;
    for (int step = 0; step < 50; ++step) {
        mass = mass * P;
        reached = std::max(reached, mass[layout.home()]);
    }
    EXPECT_GT(reached, 0.0);
    EXPECT_TRUE(is_irreducible_aperiodic(P));
}

TEST(ResourceGathering, AttackGoesToDeadStateThenHome) {
    const auto env = build_resource_gathering();
    const ResourceGatheringLayout layout;
    const int below_enemy = layout.index(2, 2, false, false);
    constexpr int kUp = 0;
    EXPECT_DOUBLE_EQ(env.p(below_enemy, kUp, layout.dead()), ResourceGatheringLayout::kAttackProbability);
    for (int a = 0; a < 4; ++a) {
        EXPECT_DOUBLE_EQ(env.p(layout.dead(), a, layout.home()), 1.0);
        EXPECT_DOUBLE_EQ(env.r(0, layout.dead(), a), 0.0);
    }
    EXPECT_DOUBLE_EQ(env.r(0, below_enemy, kUp), 1.0);
}

TEST(Fishwood, ShapeMatchesEncoding) {
    const auto env = build_fishwood(0.5, 0.5);
    EXPECT_EQ(env.n_objectives, 2);
    EXPECT_EQ(env.n_states, 4);
    EXPECT_EQ(env.n_actions, 2);
    EXPECT_TRUE(env.metadata.count("state_encoding"));
}

TEST(Fishwood, RejectsOutOfRangeProbabilities) {
    EXPECT_THROW(build_fishwood(0.0, 0.5), ParameterError);
    EXPECT_THROW(build_fishwood(0.5, 1.0), ParameterError);
    EXPECT_THROW(build_fishwood(-0.1, 0.5), ParameterError);
}

TEST(Fishwood, SymmetricUnderRelabelingWhenProbabilitiesAgree) {
    const double p = 0.37;
    const auto env = build_fishwood(p, p, {0.9, 0.9});
    auto swap_state = [](int s) { return fishwood_state(1 - s % 2, s < 2); };
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 2; ++a) {
            for (int n = 0; n < 4; ++n) EXPECT_DOUBLE_EQ(env.p(s, a, n), env.p(swap_state(s), 1 - a, swap_state(n)));
            EXPECT_DOUBLE_EQ(env.r(0, s, a), env.r(1, swap_state(s), 1 - a));
        }
}

TEST(Fishwood, AlwaysFishEarnsFishProbability) {
    const double fish = 0.23, wood = 0.61;
    const auto env = build_fishwood(fish, wood);
    auto policy = PolicyParams::tabular(env.n_states, env.n_actions);
    for (int s = 0; s < env.n_states; ++s) policy.theta[s * 2 + 0] = 40.0;  // always action 0 (fish)
    // a deterministic policy makes the woods states transient; compute from the fishing block directly
    const Eigen::MatrixXd probs = action_probability_table(policy);
    const Eigen::MatrixXd P = induced_chain(env, probs);
    const Eigen::VectorXd d = oracle::power_stationary(P);
    const Eigen::VectorXd J = policy_rewards(env, probs) * d;
    EXPECT_NEAR(J[1], fish, 1e-9);
    EXPECT_NEAR(J[0], 0.0, 1e-9);
    const auto exact = compute_exact_objective(env, policy, Setting::Average);
    EXPECT_NEAR(exact[1], fish, 1e-9);
    EXPECT_NEAR(exact[0], 0.0, 1e-9);
}

TEST(Sampler, DeterministicRow) {
    Eigen::MatrixXd P(3, 3);
    P << 0, 1, 0, 0, 0, 1, 1, 0, 0;
    const auto env = chain_env(P);
    MarkovSampler sampler(env, 5, 0);
    for (int k = 0; k < 30; ++k) {
        const int s = sampler.current_state();
        EXPECT_EQ(sample_step(sampler, 0).next_state, (s + 1) % 3);
    }
}

TEST(Sampler, RowFrequenciesWithinBinomialBounds) {
    Eigen::MatrixXd P(2, 2);
    P << 0.3, 0.7, 0.5, 0.5;
    const auto env = chain_env(P);
    MarkovSampler sampler(env, 99, 0);
    const int n = 100000;
    int ones = 0;
    for (int k = 0; k < n; ++k) {
        sampler.reset(0);
        ones += sample_step(sampler, 0).next_state;
    }
    const double sigma = std::sqrt(n * 0.7 * 0.3);
    EXPECT_LE(std::abs(ones - 0.7 * n), 3.0 * sigma);
}

TEST(Sampler, EqualSeedsGiveEqualTrajectories) {
    const auto env = build_random_momdp(5, 3, 2, 3);
    MarkovSampler a(env, 1234), b(env, 1234);
    for (int k = 0; k < 500; ++k) {
        const int action = k % 3;
        const auto ta = sample_step(a, action), tb = sample_step(b, action);
        ASSERT_EQ(ta.state, tb.state);
        ASSERT_EQ(ta.next_state, tb.next_state);
        ASSERT_EQ(ta.rewards, tb.rewards);
    }
}

TEST(Sampler, RewardsWithinBoundsAndChainUnbroken) {
    for (const auto& env : all_envs()) {
        MarkovSampler sampler(env, 8);
        const auto policy = oracle::random_tabular(env.n_states, env.n_actions, 4);
        int prev_next = sampler.current_state();
        for (int k = 0; k < 2000; ++k) {
            const auto t = sample_step(sampler, policy);
            ASSERT_EQ(t.state, prev_next);
            ASSERT_TRUE((t.rewards.array() >= 0.0).all() && (t.rewards.array() <= env.r_max).all());
            prev_next = t.next_state;
        }
    }
}

TEST(Sampler, RejectsBadAction) {
    const auto env = build_two_state_fixture();
    MarkovSampler sampler(env, 1);
    EXPECT_THROW(sample_step(sampler, 2), ParameterError);
}

TEST(Stationary, DoublyStochasticIsUniform) {
    Eigen::MatrixXd P(2, 2);
    P << 0.3, 0.7, 0.7, 0.3;
    const auto d = stationary_distribution(P);
    EXPECT_NEAR(d[0], 0.5, 1e-14);
    EXPECT_NEAR(d[1], 0.5, 1e-14);
}

TEST(Stationary, TwoStateBalance) {
    Eigen::MatrixXd P(2, 2);
    P << 0.9, 0.1, 0.5, 0.5;
    // balance: d0 * 0.1 = d1 * 0.5
    const auto d = stationary_distribution(P);
    EXPECT_NEAR(d[0], 5.0 / 6.0, 1e-14);
    EXPECT_NEAR(d[1], 1.0 / 6.0, 1e-14);
}

TEST(Stationary, ResidualOnAllEnvsAndRandomPolicies) {
    for (const auto& env : all_envs())
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const auto policy = oracle::random_tabular(env.n_states, env.n_actions, seed, 2.0);
            const Eigen::MatrixXd P = policy_chain(env, policy);
            const auto d = compute_stationary_distribution(env, policy);
            EXPECT_LE((P.transpose() * d - d).lpNorm<Eigen::Infinity>(), 1e-10) << env.name << " seed " << seed;
            EXPECT_NEAR(d.sum(), 1.0, 1e-12);
        }
}

TEST(Stationary, MatchesPowerIteration) {
    const auto env = build_random_momdp(7, 2, 1, 21);
    const auto policy = oracle::random_tabular(7, 2, 3);
    const Eigen::MatrixXd P = policy_chain(env, policy);
    EXPECT_LE((stationary_distribution(P) - oracle::power_stationary(P)).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Stationary, ReducibleChainRejected) {
    Eigen::MatrixXd P(3, 3);
    P << 1, 0, 0, 0, 0.5, 0.5, 0, 0.5, 0.5;
    EXPECT_THROW(stationary_distribution(P), ModelError);
}

TEST(ExactObjective, ConstantReward) {
    auto env = build_random_momdp(5, 3, 2, 9);
    const double c = 0.42;
    env.reward.row(1).setConstant(c);
    const auto policy = oracle::random_tabular(5, 3, 2);
    EXPECT_NEAR(compute_exact_objective(env, policy, Setting::Average)[1], c, 1e-12);
    EXPECT_NEAR(compute_exact_objective(env, policy, Setting::Discounted)[1], c / (1.0 - env.discounts[1]), 1e-10);
}

TEST(ExactObjective, InvariantUnderStateRelabeling) {
    const auto env = build_random_momdp(5, 2, 2, 31);
    const auto policy = oracle::random_tabular(5, 2, 8);
    const std::vector<int> perm{3, 0, 4, 1, 2};  // new index of old state s
    TabularMomdp relabeled = env;
    auto moved = policy;
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 2; ++a) {
            for (int n = 0; n < 5; ++n) relabeled.transition(relabeled.row(perm[s], a), perm[n]) = env.p(s, a, n);
            relabeled.reward.col(relabeled.row(perm[s], a)) = env.reward.col(env.row(s, a));
            moved.theta[perm[s] * 2 + a] = policy.theta[s * 2 + a];
        }
    for (int s = 0; s < 5; ++s) relabeled.initial_distribution[perm[s]] = env.initial_distribution[s];
    relabeled.validate();
    for (auto setting : {Setting::Average, Setting::Discounted}) {
        const auto a = compute_exact_objective(env, policy, setting);
        const auto b = compute_exact_objective(relabeled, moved, setting);
        EXPECT_LE((a - b).lpNorm<Eigen::Infinity>(), 1e-12);
    }
}

TEST(ExactObjective, DiscountedMatchesRollingSum) {
    const auto env = build_two_state_fixture();
    const auto policy = oracle::random_tabular(2, 2, 5);
    const Eigen::MatrixXd probs = action_probability_table(policy);
    const Eigen::MatrixXd P = induced_chain(env, probs);
    const Eigen::MatrixXd r = policy_rewards(env, probs);
    Eigen::RowVectorXd mass = env.initial_distribution.transpose();
    Eigen::VectorXd total = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd discount = Eigen::VectorXd::Ones(2);
    for (int k = 0; k < 2000; ++k) {
        for (int i = 0; i < 2; ++i) total[i] += discount[i] * mass.dot(r.row(i));
        discount = discount.cwiseProduct(env.discounts);
        mass = mass * P;
    }
    EXPECT_LE((total - compute_exact_objective(env, policy, Setting::Discounted)).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Momdp, ValidationRejectsBrokenModels) {
    auto env = build_two_state_fixture();
    auto bad = env;
    bad.transition(0, 0) = 0.7;
    EXPECT_THROW(bad.validate(), ModelError);
    bad = env;
    bad.reward(0, 0) = -0.1;
    EXPECT_THROW(bad.validate(), ModelError);
    bad = env;
    bad.reward(0, 0) = 2.0;
    EXPECT_THROW(bad.validate(), ModelError);
    bad = env;
    bad.discounts[0] = 1.0;
    EXPECT_THROW(bad.validate(), ModelError);
    bad = env;
    bad.initial_distribution << 0.5, 0.6;
    EXPECT_THROW(bad.validate(), ModelError);
}

TEST(Momdp, SettingNames) {
    EXPECT_EQ(parse_setting(to_string(Setting::Average)), Setting::Average);
    EXPECT_EQ(parse_setting(to_string(Setting::Discounted)), Setting::Discounted);
    EXPECT_THROW(parse_setting("episodic"), ParameterError);
}

TEST(Momdp, PeriodicChainDetected) {
    Eigen::MatrixXd P(2, 2);
    P << 0, 1, 1, 0;
    EXPECT_TRUE(is_irreducible(P));
    EXPECT_EQ(chain_period(P), 2);
    EXPECT_FALSE(is_irreducible_aperiodic(P));
}

TEST(MomdpJson, RoundTrip) {
    for (const auto& env : all_envs()) {
        const auto back = momdp_from_json(nlohmann::json::parse(to_json(env).dump()));
        EXPECT_EQ(back.transition, env.transition);
        EXPECT_EQ(back.reward, env.reward);
        EXPECT_EQ(back.discounts, env.discounts);
        EXPECT_EQ(back.initial_distribution, env.initial_distribution);
        EXPECT_EQ(back.metadata, env.metadata);
    }
}

TEST(MomdpJson, LoaderValidates) {
    auto doc = to_json(build_two_state_fixture());
    doc["transition"][0][0] = {0.5, 0.6};
    EXPECT_THROW(momdp_from_json(doc), ModelError);
    auto doc2 = to_json(build_two_state_fixture());
    doc2.erase("reward");
    EXPECT_THROW(momdp_from_json(doc2), ModelError);
}
