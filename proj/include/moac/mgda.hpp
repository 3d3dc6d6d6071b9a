#pragma once

#include <moac/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

namespace moac {

/// λ on the probability simplex.
struct SimplexWeights {
    Eigen::VectorXd lambda;

    static SimplexWeights uniform(int n) { return {Eigen::VectorXd::Constant(n, 1.0 / n)}; }
    static SimplexWeights vertex(int n, int i) {
        SimplexWeights w{Eigen::VectorXd::Zero(n)};
        w.lambda[i] = 1.0;
        return w;
    }

    int size() const { return int(lambda.size()); }
    bool on_simplex(double tol = 1e-10) const {
        return lambda.size() > 0 && lambda.allFinite() && (lambda.array() >= -tol).all() &&
               std::abs(lambda.sum() - 1.0) <= tol;
    }
};

/// η_t schedule: constant c, power t^{-p} (η_1 = 1), or identically zero.
struct MomentumSchedule {
    enum class Kind { Constant, Power, Zero };
    Kind kind = Kind::Power;
    double value = 1.0;

    static MomentumSchedule constant(double c) {
        if (!(c >= 0.0 && c <= 1.0)) throw ParameterError("constant momentum must lie in [0,1]");
        return {Kind::Constant, c};
    }
    static MomentumSchedule power(double p) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError("momentum power must be non-negative");
        return {Kind::Power, p};
    }
    static MomentumSchedule zero() { return {Kind::Zero, 0.0}; }

    double eta(int t) const {
        if (t < 1) throw ParameterError("momentum schedule is indexed from t = 1");
        switch (kind) {
            case Kind::Constant: return value;
            case Kind::Power: return std::pow(double(t), -value);
            case Kind::Zero: return 0.0;
        }
        return 0.0;
    }

    /// Power schedules have η_1 = 1, so λ_1 is the first QP solution and λ_0 is irrelevant.
    bool initialized_by_first_batch() const { return kind == Kind::Power; }

    std::string to_string() const {
        auto number = [](double v) {
            char buf[40];
            for (int digits = 1; digits <= 17; ++digits) {
                std::snprintf(buf, sizeof buf, "%.*g", digits, v);
                if (std::strtod(buf, nullptr) == v) break;
            }
            return std::string(buf);
        };
        switch (kind) {
            case Kind::Constant: return "constant:" + number(value);
            case Kind::Power: return "power:" + number(value);
            case Kind::Zero: return "zero";
        }
        return "zero";
    }

    /// "constant:<c>", "power:<p>" or "zero".
    static MomentumSchedule parse(const std::string& text) {
        if (text == "zero") return zero();
        auto colon = text.find(':');
        if (colon == std::string::npos) throw ParameterError("bad momentum schedule '" + text + "'");
        const std::string kind = text.substr(0, colon);
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(text.substr(colon + 1), &used);
            if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParameterError("bad momentum value in '" + text + "'");
        }
        if (kind == "constant") return constant(v);
        if (kind == "power") return power(v);
        throw ParameterError("bad momentum schedule '" + text + "'");
    }

    bool operator==(const MomentumSchedule&) const = default;
};

struct MinNormResult {
    SimplexWeights weights;
    double min_norm_sq = 0.0;  // ‖Σ λ_i g_i‖²
    double gap = 0.0;          // max_i (⟨ḡ,ḡ⟩ - ⟨ḡ,g_i⟩)
    int iterations = 0;
};

namespace detail {

inline double certificate_gap(const Eigen::MatrixXd& gram, const Eigen::VectorXd& lambda) {
    Eigen::VectorXd g_lambda = gram * lambda;
    return lambda.dot(g_lambda) - g_lambda.minCoeff();
}

inline int argmin_first(const Eigen::VectorXd& v) {
    int best = 0;
    for (int i = 1; i < int(v.size()); ++i)
        if (v[i] < v[best]) best = i;
    return best;
}

/// Exact minimizer of λᵀGλ on the face spanned by `support`, if it lies in that face.
inline bool polish_on_face(const Eigen::MatrixXd& gram, Eigen::VectorXd& lambda) {
    std::vector<int> support;
    for (int i = 0; i < int(lambda.size()); ++i)
        if (lambda[i] > 0.0) support.push_back(i);
    const int k = int(support.size());
    if (k < 2) return false;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) kkt(a, b) = 2.0 * gram(support[a], support[b]);
        kkt(a, k) = -1.0;
        kkt(k, a) = 1.0;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    rhs[k] = 1.0;
    Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite() || (kkt * sol - rhs).norm() > 1e-12 * (1.0 + kkt.norm())) return false;
    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(lambda.size());
    for (int a = 0; a < k; ++a) {
        if (sol[a] < 0.0) return false;
        candidate[support[a]] = sol[a];
    }
    candidate /= candidate.sum();
    if (candidate.dot(gram * candidate) > lambda.dot(gram * lambda)) return false;
    lambda = candidate;
    return true;
}

}  // namespace detail

/**
 * Min-norm element of the convex hull of `gradients`: argmin over the simplex
 * of ‖Σ λ_i g_i‖².
 *
 * M = 2 projects the unconstrained line minimizer onto [0,1]. M ≥ 3 runs
 * Frank-Wolfe with away steps and exact line search on the symmetrized Gram
 * matrix, with a KKT solve on the current face once the support settles.
 * Ties go to the smallest index.
 */
inline MinNormResult solve_min_norm(std::span<const Eigen::VectorXd> gradients, int max_iterations = 100'000) {
    const int m = int(gradients.size());
    if (m < 1) throw ParameterError("min-norm solver needs at least one gradient");
    const Eigen::Index dim = gradients[0].size();
    for (const auto& g : gradients) {
        if (g.size() != dim) throw ParameterError("gradients must share one dimension");
        if (!g.allFinite()) throw ParameterError("gradient has non-finite entries");
    }

    Eigen::MatrixXd gram(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) gram(i, j) = gradients[std::size_t(i)].dot(gradients[std::size_t(j)]);
    gram = 0.5 * (gram + gram.transpose()).eval();

    MinNormResult result;
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);

    auto tolerance = [&](const Eigen::VectorXd& l) { return 1e-10 * (1.0 + l.dot(gram * l)); };

    if (m == 1) {
        lambda[0] = 1.0;
    } else if (m == 2) {
        const double denom = gram(0, 0) - 2.0 * gram(0, 1) + gram(1, 1);
        double first = 1.0;
        if (denom > 0.0) first = std::clamp((gram(1, 1) - gram(0, 1)) / denom, 0.0, 1.0);
        else if (gram(1, 1) < gram(0, 0)) first = 0.0;
        lambda << first, 1.0 - first;
    } else {
        lambda[detail::argmin_first(gram.diagonal())] = 1.0;
        int it = 0;
        int last_support = -1;
        for (; it < max_iterations; ++it) {
            if (detail::certificate_gap(gram, lambda) <= tolerance(lambda)) break;
            const Eigen::VectorXd g_lambda = gram * lambda;
            const double f = lambda.dot(g_lambda);

            const int fw = detail::argmin_first(g_lambda);
            int away = -1;
            for (int j = 0; j < m; ++j)
                if (lambda[j] > 0.0 && (away < 0 || g_lambda[j] > g_lambda[away])) away = j;

            Eigen::VectorXd direction;
            double max_step;
            bool away_step = lambda[away] < 1.0 && (g_lambda[away] - f) > (f - g_lambda[fw]);
            if (!away_step) {
                direction = -lambda;
                direction[fw] += 1.0;
                max_step = 1.0;
            } else {
                direction = lambda;
                direction[away] -= 1.0;
                max_step = lambda[away] / (1.0 - lambda[away]);
            }
            const double curvature = direction.dot(gram * direction);
            const double slope = direction.dot(g_lambda);
            double step = curvature > 0.0 ? std::clamp(-slope / curvature, 0.0, max_step) : max_step;
            lambda += step * direction;
            if (away_step && step == max_step) lambda[away] = 0.0;
            lambda = lambda.cwiseMax(0.0);
            lambda /= lambda.sum();

            const int support = int((lambda.array() > 0.0).count());
            if (support == last_support) {
                Eigen::VectorXd polished = lambda;
                if (detail::polish_on_face(gram, polished)) lambda = polished;
            }
            last_support = support;
        }
        result.iterations = it;
        const double gap = detail::certificate_gap(gram, lambda);
        if (gap > tolerance(lambda))
            throw ConvergenceError("min-norm solver stopped without certificate; gap " + std::to_string(gap), gap);
    }

    result.weights.lambda = lambda;
    Eigen::VectorXd combined = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < m; ++i) combined += lambda[i] * gradients[std::size_t(i)];
    result.min_norm_sq = combined.squaredNorm();
    result.gap = detail::certificate_gap(gram, lambda);
    return result;
}

inline MinNormResult solve_min_norm(const std::vector<Eigen::VectorXd>& gradients) {
    return solve_min_norm(std::span<const Eigen::VectorXd>(gradients.data(), gradients.size()));
}

/// λ_t = (1 - η) λ_{t-1} + η λ̂*, clamped onto the simplex.
inline SimplexWeights momentum_update(const SimplexWeights& prev, const SimplexWeights& qp_solution, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("momentum coefficient must lie in [0,1]");
    if (prev.size() != qp_solution.size()) throw ParameterError("weight vectors differ in length");
    if (!prev.on_simplex() || !qp_solution.on_simplex()) throw ParameterError("momentum inputs must lie on the simplex");
    SimplexWeights out{(1.0 - eta) * prev.lambda + eta * qp_solution.lambda};
    out.lambda = out.lambda.cwiseMax(0.0);
    out.lambda /= out.lambda.sum();
    return out;
}

}  // namespace moac
