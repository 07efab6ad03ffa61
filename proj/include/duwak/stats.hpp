#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace duwak {

double normal_cdf(double x);
// Upper tail 1 - Phi(x), computed directly so it stays accurate far into the tail.
double normal_sf(double x);

// Chi-square with four degrees of freedom: F(x) = 1 - e^{-x/2}(1 + x/2).
double chi2_cdf_4(double x);
double chi2_sf_4(double x);

// Smallest p-value accepted by fisher_combine; smaller inputs are clamped to it.
inline constexpr double kMinP = 0x1.0p-53;

// P = 1 - F_chi2_4(-2(ln p1 + ln p2)). Inputs are clamped to [kMinP, 1].
double fisher_combine(double p1, double p2);

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double gamma_q(double a, double x);

double median(std::vector<double> values);

}  // namespace duwak
