#pragma once

#include <moac/momdp.hpp>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>
#include <string>

namespace moac {

// --- critic features ---------------------------------------------------------

/// State features for the linear critic, one row per state.
struct FeatureMap {
    Eigen::MatrixXd phi;  // n_states x dim

    int n_states() const { return int(phi.rows()); }
    int dim() const { return int(phi.cols()); }
    auto row(int s) const { return phi.row(s); }

    /// One-hot over states with the last state's row zeroed: dim = n_states - 1.
    static FeatureMap reduced_one_hot(int n_states) {
        if (n_states < 2) throw ParameterError("reduced one-hot features need at least 2 states");
        FeatureMap map;
        map.phi = Eigen::MatrixXd::Zero(n_states, n_states - 1);
        map.phi.topRows(n_states - 1).setIdentity();
        return map;
    }

    /// Full one-hot features (value function exactly representable). Violates
    /// dim < n_states, so only meaningful for discounted-setting oracle checks.
    static FeatureMap full_one_hot(int n_states) {
        FeatureMap map;
        map.phi = Eigen::MatrixXd::Identity(n_states, n_states);
        return map;
    }

    /**
     * Checks normalized rows, full column rank and, for the average setting,
     * that the all-ones vector is not in the column span. `allow_full_dim`
     * waives dim < n_states for test-only exact-representation maps.
     */
    void validate(Setting setting, bool allow_full_dim = false) const {
        if (phi.rows() < 1 || phi.cols() < 1) throw ParameterError("empty feature map");
        if (!phi.allFinite()) throw ParameterError("feature map has non-finite entries");
        if (!allow_full_dim && phi.cols() >= phi.rows())
            throw ParameterError("feature dimension must be smaller than the number of states");
        for (Eigen::Index s = 0; s < phi.rows(); ++s)
            if (phi.row(s).norm() > 1.0 + 1e-12)
                throw ParameterError("feature row " + std::to_string(s) + " has norm above 1");
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi);
        if (svd.singularValues().minCoeff() < 1e-8)
            throw ParameterError("feature matrix is not of full column rank");
        if (setting == Setting::Average) {
            Eigen::VectorXd ones = Eigen::VectorXd::Ones(phi.rows());
            Eigen::VectorXd fit = phi * phi.colPivHouseholderQr().solve(ones);
            if ((fit - ones).norm() < 1e-8)
                throw ParameterError("constant function is representable by the features");
        }
    }
};

// --- policy ------------------------------------------------------------------

enum class Parameterization { Tabular, LinearSoftmax };

/**
 * Softmax policy parameters.
 *
 * Tabular: one logit per (s, a) at theta[s * n_actions + a].
 * LinearSoftmax: logit(s, a) = features.row(s) . theta[a * f, (a + 1) * f).
 */
struct PolicyParams {
    Parameterization kind = Parameterization::Tabular;
    int n_states = 0;
    int n_actions = 0;
    Eigen::VectorXd theta;
    Eigen::MatrixXd features;  // LinearSoftmax only: n_states x f

    static PolicyParams tabular(int n_states, int n_actions) {
        PolicyParams policy;
        policy.kind = Parameterization::Tabular;
        policy.n_states = n_states;
        policy.n_actions = n_actions;
        policy.theta = Eigen::VectorXd::Zero(Eigen::Index(n_states) * n_actions);
        return policy;
    }

    static PolicyParams linear(Eigen::MatrixXd features, int n_actions) {
        PolicyParams policy;
        policy.kind = Parameterization::LinearSoftmax;
        policy.n_states = int(features.rows());
        policy.n_actions = n_actions;
        policy.theta = Eigen::VectorXd::Zero(features.cols() * n_actions);
        policy.features = std::move(features);
        return policy;
    }

    Eigen::Index dim() const { return theta.size(); }

    double logit(int s, int a) const {
        if (kind == Parameterization::Tabular) return theta[Eigen::Index(s) * n_actions + a];
        const Eigen::Index f = features.cols();
        return features.row(s).dot(theta.segment(a * f, f));
    }
};

inline void check_state(const PolicyParams& policy, int s) {
    if (s < 0 || s >= policy.n_states) throw ParameterError("state index out of range");
}

/// π_θ(·|s), computed with max-subtraction.
inline Eigen::VectorXd action_probabilities(const PolicyParams& policy, int s) {
    check_state(policy, s);
    if (!policy.theta.allFinite()) throw ParameterError("policy parameters are not finite");
    Eigen::VectorXd logits(policy.n_actions);
    for (int a = 0; a < policy.n_actions; ++a) logits[a] = policy.logit(s, a);
    const double top = logits.maxCoeff();
    // std::exp underflows to exactly 0 where Eigen's vectorized exp stops at denormals
    Eigen::VectorXd probs = logits.unaryExpr([top](double x) { return std::exp(x - top); });
    return probs / probs.sum();
}

/// π_θ(a|s) for all states, n_states x n_actions.
inline Eigen::MatrixXd action_probability_table(const PolicyParams& policy) {
    Eigen::MatrixXd table(policy.n_states, policy.n_actions);
    for (int s = 0; s < policy.n_states; ++s) table.row(s) = action_probabilities(policy, s).transpose();
    return table;
}

/// out += scale * ψ_θ(s, a), touching only the coordinates ψ can be non-zero on.
inline void add_scaled_score(const PolicyParams& policy, int s, int a, double scale,
                             const Eigen::VectorXd& probs, Eigen::VectorXd& out) {
    if (policy.kind == Parameterization::Tabular) {
        auto block = out.segment(Eigen::Index(s) * policy.n_actions, policy.n_actions);
        block -= scale * probs;
        block[a] += scale;
        return;
    }
    const Eigen::Index f = policy.features.cols();
    for (int b = 0; b < policy.n_actions; ++b) {
        double coeff = scale * ((b == a ? 1.0 : 0.0) - probs[b]);
        out.segment(b * f, f) += coeff * policy.features.row(s).transpose();
    }
}

/// ψ_θ(s, a) = ∇_θ log π_θ(a|s).
inline Eigen::VectorXd score_function(const PolicyParams& policy, int s, int a) {
    if (a < 0 || a >= policy.n_actions) throw ParameterError("action index out of range");
    Eigen::VectorXd score = Eigen::VectorXd::Zero(policy.dim());
    add_scaled_score(policy, s, a, 1.0, action_probabilities(policy, s), score);
    return score;
}

/// Inverse-CDF draw from a probability vector.
template <class Derived, class Rng>
int sample_index(const Eigen::DenseBase<Derived>& probs, Rng& rng) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0.0;
    for (Eigen::Index k = 0; k + 1 < probs.size(); ++k) {
        cumulative += probs.derived().coeff(k);
        if (u < cumulative) return int(k);
    }
    return int(probs.size()) - 1;
}

// --- serialization -----------------------------------------------------------

inline nlohmann::json to_json(const PolicyParams& policy) {
    nlohmann::json doc{
        {"parameterization", policy.kind == Parameterization::Tabular ? "tabular" : "linear"},
        {"n_states", policy.n_states},
        {"n_actions", policy.n_actions},
        {"theta", std::vector<double>(policy.theta.data(), policy.theta.data() + policy.theta.size())},
    };
    if (policy.kind == Parameterization::LinearSoftmax) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index s = 0; s < policy.features.rows(); ++s) {
            Eigen::VectorXd row = policy.features.row(s).transpose();
            rows.push_back(std::vector<double>(row.data(), row.data() + row.size()));
        }
        doc["features"] = rows;
    }
    return doc;
}

inline PolicyParams policy_from_json(const nlohmann::json& doc) {
    try {
        const auto kind = doc.at("parameterization").get<std::string>();
        const int n_states = doc.at("n_states").get<int>();
        const int n_actions = doc.at("n_actions").get<int>();
        if (n_states < 1 || n_actions < 1) throw ParameterError("policy dimensions must be positive");
        PolicyParams policy;
        if (kind == "tabular") {
            policy = PolicyParams::tabular(n_states, n_actions);
        } else if (kind == "linear") {
            const auto& rows = doc.at("features");
            if (rows.size() != std::size_t(n_states)) throw ParameterError("feature rows != n_states");
            const auto width = rows.at(0).size();
            Eigen::MatrixXd features(n_states, Eigen::Index(width));
            for (int s = 0; s < n_states; ++s) {
                auto row = rows[s].get<std::vector<double>>();
                if (row.size() != width) throw ParameterError("ragged policy feature matrix");
                for (std::size_t j = 0; j < width; ++j) features(s, Eigen::Index(j)) = row[j];
            }
            policy = PolicyParams::linear(std::move(features), n_actions);
        } else {
            throw ParameterError("unknown parameterization '" + kind + "'");
        }
        auto theta = doc.at("theta").get<std::vector<double>>();
        if (Eigen::Index(theta.size()) != policy.dim()) throw ParameterError("theta has wrong dimension");
        policy.theta = Eigen::Map<Eigen::VectorXd>(theta.data(), policy.dim());
        if (!policy.theta.allFinite()) throw ParameterError("policy parameters are not finite");
        return policy;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed policy document: ") + e.what());
    }
}

}  // namespace moac
