#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "scamp/denoise.hpp"
#include "scamp/errors.hpp"
#include "scamp/quadrature.hpp"
#include "scamp/state_evolution.hpp"

namespace scamp {

/// Noise level used in place of sigma = 0.
constexpr double kNoiselessSigma = 1e-30;

inline double binary_entropy(double pi) {
    if (pi <= 0.0 || pi >= 1.0) return 0.0;
    return -pi * std::log(pi) - (1.0 - pi) * std::log1p(-pi);
}

inline double softplus(double x) { return -log_sigmoid(-x); }

/// I(beta; sqrt(s) beta + G) in nats for beta ~ Bernoulli(pi).
inline double mutual_info_bernoulli(double s, double pi) {
    if (!(s >= 0.0)) throw ConfigError("snr must be nonnegative");
    if (!(pi > 0.0 && pi < 1.0)) return 0.0;
    if (s == 0.0) return 0.0;
    const double h = binary_entropy(pi);
    if (std::isinf(s)) return h;
    const double l = logit(pi);
    const double rs = std::sqrt(s);
    const double g0 = (0.5 * s - l) / rs;
    const double g1 = (-0.5 * s - l) / rs;
    const double w = 4.0 / rs;
    const double a = gaussian_expectation(
        [&](double g) { return softplus(l + rs * g - 0.5 * s); }, {g0 - w, g0, g0 + w});
    const double b = gaussian_expectation(
        [&](double g) { return softplus(-l - rs * g - 0.5 * s); }, {g1 - w, g1, g1 + w});
    const double v = h - (1.0 - pi) * a - pi * b;
    if (!std::isfinite(v)) throw NumericalError("mutual information quadrature failed");
    return std::clamp(v, 0.0, h);
}

/// Effective snr 1 / (b / delta + sigma2) at potential argument b.
inline double potential_snr(double b, double delta, double sigma2) {
    return 1.0 / (b / delta + sigma2);
}

/// U(b; delta) = -b / (b/delta + sigma2) + delta log(1 + b / (delta sigma2))
///               + 2 I(beta; sqrt(s) beta + G),  s = 1 / (b/delta + sigma2).
inline double potential_value(double b, double delta, double pi, double sigma2) {
    const double var = pi * (1.0 - pi);
    if (!(b >= 0.0 && b <= var * (1.0 + 1e-12))) throw ConfigError("b outside [0, Var(beta)]");
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive; use kNoiselessSigma");
    const double s = potential_snr(b, delta, sigma2);
    return -b * s + delta * std::log1p(b / (delta * sigma2)) + 2.0 * mutual_info_bernoulli(s, pi);
}

/// dU/db by central differences, h = min(1e-6 Var, b / 2); forward at b = 0
/// and backward at b = Var.
inline double potential_derivative(double b, double delta, double pi, double sigma2) {
    const double var = pi * (1.0 - pi);
    double h = 1e-6 * var;
    if (b <= 0.0) {
        return (potential_value(h, delta, pi, sigma2) - potential_value(0.0, delta, pi, sigma2)) / h;
    }
    if (b >= var) {
        return (potential_value(var, delta, pi, sigma2) -
                potential_value(var - h, delta, pi, sigma2)) / h;
    }
    h = std::min({h, 0.5 * b, 0.5 * (var - b)});
    return (potential_value(b + h, delta, pi, sigma2) - potential_value(b - h, delta, pi, sigma2)) /
           (2.0 * h);
}

struct PotentialCurve {
    double delta = 0.0;
    double pi = 0.0;
    double sigma2 = 0.0;
    std::vector<double> grid;
    std::vector<double> values;
    double argmin_b = 0.0;
    double argmin_value = 0.0;
    std::vector<double> stationary_points;  // ascending
    double largest_stationary_b = 0.0;
};

namespace detail {

template <class F>
double golden_section_min(F&& f, double lo, double hi, double tol) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace detail

/// Grid tie tolerance for the largest-minimiser rule.
constexpr double kPotentialTie = 1e-12;

inline PotentialCurve find_argmin_and_stationary(double delta, double pi, double sigma2,
                                                 int grid_size = 500) {
    if (grid_size < 100) throw ConfigError("potential grid needs at least 100 points");
    const double var = pi * (1.0 - pi);
    auto U = [&](double b) { return potential_value(b, delta, pi, sigma2); };
    auto dU = [&](double b) { return potential_derivative(b, delta, pi, sigma2); };

    PotentialCurve curve;
    curve.delta = delta;
    curve.pi = pi;
    curve.sigma2 = sigma2;
    curve.grid.resize(static_cast<std::size_t>(grid_size));
    curve.values.resize(static_cast<std::size_t>(grid_size));
    for (int i = 0; i < grid_size; ++i) {
        const double b = i == grid_size - 1 ? var : var * i / (grid_size - 1);
        curve.grid[static_cast<std::size_t>(i)] = b;
        curve.values[static_cast<std::size_t>(i)] = U(b);
    }

    const double vmin = *std::min_element(curve.values.begin(), curve.values.end());
    std::size_t best = 0;
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
        if (curve.values[i] <= vmin + kPotentialTie) best = i;
    }
    const double lo = curve.grid[best > 0 ? best - 1 : 0];
    const double hi = curve.grid[std::min(best + 1, curve.grid.size() - 1)];
    double cand = detail::golden_section_min(U, lo, hi, 1e-10);
    double cand_val = U(cand);
    double grid_b = curve.grid[best];
    double grid_val = curve.values[best];
    if (cand_val < grid_val - kPotentialTie || (cand_val <= grid_val + kPotentialTie && cand > grid_b)) {
        curve.argmin_b = cand;
        curve.argmin_value = cand_val;
    } else {
        curve.argmin_b = grid_b;
        curve.argmin_value = grid_val;
    }

    std::vector<double> d(curve.grid.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = dU(curve.grid[i]);
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
        if (d[i] == 0.0) {
            curve.stationary_points.push_back(curve.grid[i]);
            continue;
        }
        if ((d[i] < 0.0) != (d[i + 1] < 0.0) && d[i + 1] != 0.0) {
            double a = curve.grid[i];
            double b = curve.grid[i + 1];
            double fa = d[i];
            for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
                const double m = 0.5 * (a + b);
                const double fm = dU(m);
                if ((fm < 0.0) == (fa < 0.0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            curve.stationary_points.push_back(0.5 * (a + b));
        }
    }
    if (d.back() == 0.0) curve.stationary_points.push_back(curve.grid.back());
    curve.largest_stationary_b =
        curve.stationary_points.empty() ? 0.0 : curve.stationary_points.back();
    return curve;
}

struct LemmaRow {
    double sigma = 0.0;
    double argmin_b = 0.0;
    double bound = 0.0;
    bool holds = false;
};

struct LemmaRateTable {
    double delta = 0.0;
    double Delta = 0.0;
    double pi = 0.0;
    std::vector<LemmaRow> rows;  // sigma descending
    /// Largest grid sigma below which (inclusive) the bound holds on every
    /// grid point; 0 when it fails at the smallest sigma.
    double sigma0 = 0.0;
};

/// 3.5 delta sigma^{2 - 2 Delta / delta}.
inline double lemma_bound(double delta, double Delta, double sigma) {
    return 3.5 * delta * std::pow(sigma, 2.0 - 2.0 * Delta / delta);
}

inline LemmaRateTable lemma_rate_check(double delta, double Delta, double pi,
                                       std::vector<double> sigmas, int grid_size = 500) {
    if (!(Delta > 0.0 && Delta < delta)) throw ConfigError("Delta must lie in (0, delta)");
    std::sort(sigmas.begin(), sigmas.end(), std::greater<>());
    LemmaRateTable table;
    table.delta = delta;
    table.Delta = Delta;
    table.pi = pi;
    for (double sigma : sigmas) {
        LemmaRow row;
        row.sigma = sigma;
        row.argmin_b = find_argmin_and_stationary(delta, pi, sigma * sigma, grid_size).argmin_b;
        row.bound = lemma_bound(delta, Delta, sigma);
        row.holds = row.argmin_b < row.bound;
        table.rows.push_back(row);
    }
    for (auto it = table.rows.rbegin(); it != table.rows.rend(); ++it) {
        if (!it->holds) break;
        table.sigma0 = it->sigma;
    }
    return table;
}

} // namespace scamp
