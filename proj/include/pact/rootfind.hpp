#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

namespace pact {

struct RootResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Bisection for continuous f with a sign change on [lo, hi]. The bracket is
// halved until it is exhausted at floating-point resolution (or max_iter),
// so for monotone f the returned root is accurate to ~ulp. converged
// reports whether the final residual is within f_tol.
template <class F>
RootResult bisect(F&& f, double lo, double hi, double f_tol = 1e-12, int max_iter = 200) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return {lo, 0.0, 0, true};
    if (fhi == 0.0) return {hi, 0.0, 0, true};
    if ((flo < 0.0) == (fhi < 0.0))
        throw std::invalid_argument("bisect: root not bracketed");

    RootResult r;
    r.x = std::abs(flo) < std::abs(fhi) ? lo : hi;
    r.fx = std::abs(flo) < std::abs(fhi) ? flo : fhi;
    for (int k = 0; k < max_iter; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // bracket exhausted
        const double fmid = f(mid);
        r.iterations = k + 1;
        if (std::abs(fmid) <= std::abs(r.fx)) {
            r.x = mid;
            r.fx = fmid;
        }
        if (fmid == 0.0) break;
        if ((fmid < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
    }
    r.converged = std::abs(r.fx) <= f_tol;
    return r;
}

// Golden-section search for the maximum of a unimodal f on [lo, hi].
// Returns the midpoint of the final bracket and its value.
template <class F>
std::pair<double, double> golden_section_max(F&& f, double lo, double hi,
                                             double x_tol = 1e-9, int max_iter = 200) {
    if (!(lo < hi)) throw std::invalid_argument("golden_section_max: empty interval");
    const double invphi = 0.6180339887498948482;
    double x1 = hi - invphi * (hi - lo);
    double x2 = lo + invphi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int k = 0; k < max_iter && (hi - lo) > x_tol; ++k) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1);
        }
    }
    const double xm = 0.5 * (lo + hi);
    return {xm, f(xm)};
}

}  // namespace pact
