#pragma once

#include <cmath>

namespace gpda {

/// Digamma function psi(x) = d/dx log Gamma(x) for x > 0.
/// Recurrence shift into the asymptotic regime, then the standard
/// Bernoulli-number series. Absolute accuracy better than 1e-12 for x >= 0.5.
double digamma(double x);

/// Logistic function 1 / (1 + exp(-x)), evaluated without overflow.
inline double expit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

/// Entropy of a Bernoulli(w) variable in nats; 0 at w in {0, 1}.
inline double bernoulli_entropy(double w) {
  double h = 0.0;
  if (w > 0.0) h -= w * std::log(w);
  if (w < 1.0) h -= (1.0 - w) * std::log(1.0 - w);
  return h;
}

/// log density of InvGamma(shape, rate) at x > 0.
inline double invgamma_logpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - rate / x;
}

/// log density of LogNormal(mu, sigma^2) at x > 0.
inline double lognormal_logpdf(double x, double mu, double sigma) {
  const double lx = std::log(x);
  const double z = (lx - mu) / sigma;
  return -lx - std::log(sigma) - 0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
}

/// log density of Normal(mu, sigma^2) at x.
inline double normal_logpdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -std::log(sigma) - 0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
}

}  // namespace gpda
