#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pact {

// Finite probability grid for the noise term B. Atoms are strictly
// increasing, probabilities are positive and sum to one.
struct ShockGrid {
    std::vector<double> atoms;
    std::vector<double> probs;
    std::string label;

    std::size_t size() const { return atoms.size(); }

    // Moments use Neumaier-compensated summation: high odd moments of
    // symmetric grids cancel huge terms and lose ~1e-9 under naive order.
    double mean() const { return raw_moment(1); }

    double raw_moment(int k) const {
        double s = 0.0, comp = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const double term = probs[i] * std::pow(atoms[i], k);
            const double t = s + term;
            comp += std::abs(s) >= std::abs(term) ? (s - t) + term : (term - t) + s;
            s = t;
        }
        return s + comp;
    }

    double max_abs_atom() const {
        return std::max(std::abs(atoms.front()), std::abs(atoms.back()));
    }

    void validate() const {
        if (atoms.empty()) throw std::invalid_argument("shock: empty grid");
        if (atoms.size() != probs.size())
            throw std::invalid_argument("shock: atoms/probs size mismatch");
        double sum = 0.0;
        for (double p : probs) {
            if (!(p > 0.0)) throw std::invalid_argument("shock: probs must be positive");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("shock: probs must sum to 1");
        for (std::size_t i = 1; i < atoms.size(); ++i)
            if (!(atoms[i] > atoms[i - 1]))
                throw std::invalid_argument("shock: atoms must be strictly increasing");
    }
};

namespace detail {

// Eigenvalues of a symmetric tridiagonal matrix by the implicit-shift QL
// iteration. d holds the diagonal on entry and the (unsorted) eigenvalues on
// exit; e holds the subdiagonal in e[0..n-2].
inline void tridiag_eigenvalues(std::vector<double>& d, std::vector<double>& e) {
    const int n = static_cast<int>(d.size());
    if (n == 1) return;
    e.push_back(0.0);
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-16 * dd) break;
            }
            if (m != l) {
                if (iter++ == 60)
                    throw std::runtime_error("gauss_hermite: QL iteration did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                int i = m - 1;
                for (; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

// Orthonormal physicists' Hermite value and scaled derivative at z.
inline std::pair<double, double> hermite_ortho(int n, double z) {
    constexpr double pim4 = 0.7511255444649425;  // pi^{-1/4}
    double p1 = pim4, p2 = 0.0;
    for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 -
             std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
    }
    return {p1, std::sqrt(2.0 * n) * p2};
}

// Nodes and weights of the n-point physicists' Gauss-Hermite rule (weight
// exp(-x^2)): Golub-Welsch eigenvalues of the Jacobi matrix seed a short
// Newton polish; weights come from the derivative of the orthonormal
// recurrence. Stable through n = 256, unlike extrapolated Newton seeding.
inline void gauss_hermite_rule(int n, std::vector<double>& x, std::vector<double>& w) {
    std::vector<double> d(n, 0.0), e(n - 1);
    for (int j = 1; j < n; ++j) e[j - 1] = std::sqrt(0.5 * j);
    tridiag_eigenvalues(d, e);
    std::sort(d.begin(), d.end());

    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = d[n - 1 - i];  // largest positive roots first
        if (2 * i + 1 == n) z = 0.0;
        double pp = 0.0;
        for (int polish = 0; polish < 3; ++polish) {
            const auto [p1, dp] = hermite_ortho(n, z);
            pp = dp;
            const double step = p1 / dp;
            z -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        pp = hermite_ortho(n, z).second;
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
}

}  // namespace detail

// n-point Gauss-Hermite rule rescaled to N(0,1): atoms sqrt(2)*x_i,
// probs w_i/sqrt(pi). Exact for polynomial moments up to degree 2n-1.
inline ShockGrid gauss_hermite(int n) {
    if (n < 1 || n > 256)
        throw std::invalid_argument("gauss_hermite: n must be in [1, 256]");
    std::vector<double> x, w;
    detail::gauss_hermite_rule(n, x, w);
    ShockGrid g;
    g.atoms.resize(n);
    g.probs.resize(n);
    const double sqrt2 = std::numbers::sqrt2;
    const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
    // rule produces descending nodes; store ascending
    for (int i = 0; i < n; ++i) {
        g.atoms[i] = sqrt2 * x[n - 1 - i];
        g.probs[i] = w[n - 1 - i] * inv_sqrt_pi;
    }
    // weights of high-order rules drift from sqrt(pi) by ~1e-11; renormalize
    double sum = 0.0;
    for (double p : g.probs) sum += p;
    for (double& p : g.probs) p /= sum;
    g.label = "gaussian(n=" + std::to_string(n) + ")";
    g.validate();
    return g;
}

// Midpoint rule on [lo, hi]: n equal-probability atoms at cell centers.
inline ShockGrid uniform(double lo, double hi, int n) {
    if (!(lo < hi)) throw std::invalid_argument("uniform: degenerate interval");
    if (n < 2) throw std::invalid_argument("uniform: n must be >= 2");
    ShockGrid g;
    const double h = (hi - lo) / n;
    g.atoms.resize(n);
    g.probs.assign(n, 1.0 / n);
    for (int i = 0; i < n; ++i) g.atoms[i] = lo + (i + 0.5) * h;
    g.label = "uniform[" + std::to_string(lo) + "," + std::to_string(hi) + "](n=" +
              std::to_string(n) + ")";
    g.validate();
    return g;
}

// User-supplied atoms. Sorted ascending, duplicate atoms merged by summing
// their probabilities, then renormalized to sum exactly to one.
inline ShockGrid custom(std::vector<double> atoms, std::vector<double> probs) {
    if (atoms.empty()) throw std::invalid_argument("custom: empty grid");
    if (atoms.size() != probs.size())
        throw std::invalid_argument("custom: atoms/probs size mismatch");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p > 0.0)) throw std::invalid_argument("custom: probs must be positive");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("custom: probs must sum to 1 (within 1e-9)");

    std::vector<std::size_t> order(atoms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });

    ShockGrid g;
    for (std::size_t idx : order) {
        if (!g.atoms.empty() && atoms[idx] == g.atoms.back()) {
            g.probs.back() += probs[idx];
        } else {
            g.atoms.push_back(atoms[idx]);
            g.probs.push_back(probs[idx]);
        }
    }
    for (double& p : g.probs) p /= sum;
    g.label = "custom(n=" + std::to_string(g.atoms.size()) + ")";
    g.validate();
    return g;
}

}  // namespace pact
