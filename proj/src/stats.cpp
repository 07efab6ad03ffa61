#include "duwak/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "duwak/core.hpp"

namespace duwak {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double chi2_sf_4(double x) {
    if (!(x >= 0.0)) throw Error(Errc::invalid_argument, "chi-square argument must be >= 0");
    return std::exp(-0.5 * x) * (1.0 + 0.5 * x);
}

double chi2_cdf_4(double x) {
    if (!(x >= 0.0)) throw Error(Errc::invalid_argument, "chi-square argument must be >= 0");
    // 1 - e^{-y}(1+y) loses digits near 0; -expm1(-y) - y e^{-y} keeps them.
    const double y = 0.5 * x;
    return -std::expm1(-y) - y * std::exp(-y);
}

double fisher_combine(double p1, double p2) {
    if (std::isnan(p1) || std::isnan(p2)) throw Error(Errc::invalid_argument, "p-value is NaN");
    p1 = std::clamp(p1, kMinP, 1.0);
    p2 = std::clamp(p2, kMinP, 1.0);
    const double x = -2.0 * (std::log(p1) + std::log(p2));
    return std::min(1.0, chi2_sf_4(x));
}

namespace {

// Series for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x, double log_prefix) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 100000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
    }
    return sum * std::exp(log_prefix);
}

// Modified Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_fraction(double a, double x, double log_prefix) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double f = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(log_prefix) * f;
}

}  // namespace

double gamma_q(double a, double x) {
    if (!(a > 0.0)) throw Error(Errc::invalid_argument, "gamma shape must be > 0");
    if (std::isnan(x)) throw Error(Errc::invalid_argument, "gamma argument is NaN");
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x, log_prefix), 0.0, 1.0);
    return std::clamp(gamma_q_fraction(a, x, log_prefix), 0.0, 1.0);
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    if (n % 2 == 1) return values[n / 2];
    const double lo = values[n / 2 - 1];
    const double hi = values[n / 2];
    if (std::isinf(hi)) return hi;
    return 0.5 * (lo + hi);
}

}  // namespace duwak
