#pragma once

#include <cmath>
#include <limits>

#include "cresta/error.hpp"

namespace cresta::stats {

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_cont_frac(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0))
        throw Error(Errc::invalid_argument, "incomplete beta requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_cont_frac(a, b, x) / a;
    return 1.0 - front * detail::beta_cont_frac(b, a, 1.0 - x) / b;
}

// P(T <= t) for Student's t with df degrees of freedom.
inline double students_t_cdf(double t, double df) {
    if (!(df > 0)) throw Error(Errc::invalid_argument, "t CDF requires df > 0");
    const double x = df / (df + t * t);
    const double ib = regularized_incomplete_beta(0.5 * df, 0.5, x);
    return t >= 0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

// Two-sided p-value for an observed t statistic: P(|T| >= |t|).
inline double students_t_two_sided_p(double t, double df) {
    if (!(df > 0)) throw Error(Errc::invalid_argument, "p-value requires df > 0");
    const double x = df / (df + t * t);
    return regularized_incomplete_beta(0.5 * df, 0.5, x);
}

inline double students_t_pdf(double t, double df) {
    const double ln =
        std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * M_PI) -
        0.5 * (df + 1.0) * std::log1p(t * t / df);
    return std::exp(ln);
}

// Quantile of Student's t: smallest x with CDF(x) >= p. Bisection bracket
// plus Newton polish; accurate to ~1e-12 over the df range used here.
inline double students_t_ppf(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw Error(Errc::invalid_argument, "t quantile requires 0 < p < 1");
    if (p == 0.5) return 0.0;
    double lo = -1.0, hi = 1.0;
    while (students_t_cdf(lo, df) > p) lo *= 2.0;
    while (students_t_cdf(hi, df) < p) hi *= 2.0;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = students_t_cdf(x, df) - p;
        if (f > 0)
            hi = x;
        else
            lo = x;
        const double deriv = students_t_pdf(x, df);
        double next = (deriv > 0) ? x - f / deriv : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-14 * (1.0 + std::abs(x))) return next;
        x = next;
    }
    return x;
}

// Standard normal CDF via erfc (double precision accurate).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse standard normal CDF: Acklam's rational approximation followed by
// one Halley refinement against erfc, giving near machine precision.
inline double normal_ppf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw Error(Errc::invalid_argument, "normal quantile requires 0 < p < 1");

    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;

    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley step: e = CDF(x) - p, u = e / pdf(x).
    const double e = normal_cdf(x) - p;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double u = e / pdf;
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace cresta::stats
