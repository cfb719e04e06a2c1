#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <vector>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/random/sobol.hpp>
#include <Eigen/Eigenvalues>

#include "scamp/errors.hpp"
#include "scamp/types.hpp"

namespace scamp {

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) * boost::math::constants::one_div_root_two_pi<double>();
}

/// P[G <= x] for standard normal G, accurate in both tails.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Nodes and weights for E[f(G)], G ~ N(0, 1).
struct QuadratureRule {
    Vector nodes;
    Vector weights;
};

/// Gauss-Hermite rule for the standard normal weight (Golub-Welsch).
inline QuadratureRule gauss_hermite_rule(int n) {
    if (n < 1) throw ConfigError("quadrature order must be positive");
    Matrix J = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(J);
    QuadratureRule rule;
    rule.nodes = eig.eigenvalues();
    rule.weights = eig.eigenvectors().row(0).transpose().array().square();
    rule.weights /= rule.weights.sum();
    return rule;
}

/// Cached rule, shared across threads.
inline const QuadratureRule& cached_gauss_hermite(int n) {
    static std::mutex mu;
    static std::map<int, QuadratureRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_hermite_rule(n)).first;
    return it->second;
}

/// Half-width of the integration window for standard normal expectations.
/// The density mass outside it is below 1e-32.
constexpr double kNormalWindow = 12.0;

namespace detail {

// 21-point Kronrod rule with its embedded 10-point Gauss rule; the
// difference of the two drives bisection.
template <class F>
double kronrod_adaptive(F& f, double a, double b, double abs_tol, int depth) {
    using boost::math::quadrature::gauss_kronrod;
    static const auto& xk = gauss_kronrod<double, 21>::abscissa();
    static const auto& wk = gauss_kronrod<double, 21>::weights();
    static const auto& wg = boost::math::quadrature::gauss<double, 10>::weights();

    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double kron = 0.0;
    double gauss = 0.0;
    // Node 0 is the centre; odd-indexed nodes are the Gauss nodes.
    const double fc = f(mid);
    kron = wk[0] * fc;
    for (std::size_t i = 1; i < xk.size(); ++i) {
        const double dx = half * xk[i];
        const double sum = f(mid - dx) + f(mid + dx);
        kron += wk[i] * sum;
        if (i % 2 == 1) gauss += wg[i / 2] * sum;
    }
    kron *= half;
    gauss *= half;
    const double err = std::abs(kron - gauss);
    const double floor = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(kron);
    if (err <= std::max(abs_tol, floor) || depth <= 0) return kron;
    return kronrod_adaptive(f, a, mid, 0.5 * abs_tol, depth - 1) +
           kronrod_adaptive(f, mid, b, 0.5 * abs_tol, depth - 1);
}

} // namespace detail

namespace detail {

template <class G>
double integrate_window(G&& integrand, std::vector<double> breaks, double abs_tol) {
    breaks.push_back(-kNormalWindow);
    breaks.push_back(kNormalWindow);
    for (auto& b : breaks) b = std::clamp(b, -kNormalWindow, kNormalWindow);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    double total = 0.0;
    const double piece_tol = abs_tol / static_cast<double>(breaks.size());
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        total += kronrod_adaptive(integrand, breaks[i], breaks[i + 1], piece_tol, 30);
    }
    if (!std::isfinite(total)) throw NumericalError("gaussian expectation is not finite");
    return total;
}

} // namespace detail

/// Adaptive Gauss-Kronrod evaluation of E[f(G)], G ~ N(0, 1), to absolute
/// accuracy about abs_tol * sup|f|. `breaks` marks points where f changes
/// rapidly; the window is split there.
template <class F>
double gaussian_expectation(F&& f, std::vector<double> breaks = {}, double abs_tol = 1e-15) {
    auto integrand = [&](double x) { return f(x) * normal_pdf(x); };
    return detail::integrate_window(integrand, std::move(breaks), abs_tol);
}

/// As gaussian_expectation, for a positive integrand given by its
/// logarithm. Terms below exp(-700) are dropped instead of being carried as
/// subnormals.
template <class F>
double gaussian_expectation_log(F&& log_f, std::vector<double> breaks = {},
                                double abs_tol = 1e-15) {
    const double log_norm = -0.5 * std::log(2.0 * boost::math::constants::pi<double>());
    auto integrand = [&](double x) {
        const double e = log_f(x) - 0.5 * x * x + log_norm;
        return e < -700.0 ? 0.0 : std::exp(e);
    };
    return detail::integrate_window(integrand, std::move(breaks), abs_tol);
}

/// Tensor-product Gauss-Hermite points for E[f(G)], G ~ N(0, I_d).
/// Returns nodes as a d x N matrix and N weights.
struct TensorRule {
    Matrix nodes;
    Vector weights;
};

inline TensorRule tensor_gauss_hermite(int d, int n) {
    const QuadratureRule& base = cached_gauss_hermite(n);
    Index N = 1;
    for (int k = 0; k < d; ++k) N *= n;
    TensorRule rule;
    rule.nodes.resize(d, N);
    rule.weights.resize(N);
    for (Index idx = 0; idx < N; ++idx) {
        Index rem = idx;
        double w = 1.0;
        for (int k = 0; k < d; ++k) {
            const Index m = rem % n;
            rem /= n;
            rule.nodes(k, idx) = base.nodes[m];
            w *= base.weights[m];
        }
        rule.weights[idx] = w;
    }
    return rule;
}

/// N quasi-Monte-Carlo standard normal points in d dimensions (Sobol
/// sequence pushed through the normal quantile). Returns d x N.
inline Matrix sobol_normal_points(int d, Index N) {
    boost::random::sobol gen(static_cast<std::size_t>(d));
    const double scale = 1.0 / (static_cast<double>(gen.max()) + 1.0);
    Matrix pts(d, N);
    for (Index i = 0; i < N; ++i) {
        for (int k = 0; k < d; ++k) {
            const double u = (static_cast<double>(gen()) + 0.5) * scale;
            pts(k, i) = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
        }
    }
    return pts;
}

} // namespace scamp
