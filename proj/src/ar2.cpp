#include "arspec/ar2.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "arspec/error.hpp"

namespace arspec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct KernelConstants {
  double a;      // 2 cos(2 pi phase) exp(-L)
  double b;      // exp(-2L)
  double numer;  // 2 (1 - b) ((1 + b)^2 - a^2) / (1 + b)
};

KernelConstants kernel_constants(const AR2Component& c) {
  const double r = std::exp(-c.log_modulus);
  const double a = 2.0 * std::cos(kTwoPi * c.phase) * r;
  const double b = r * r;
  const double one_minus_b = -std::expm1(-2.0 * c.log_modulus);
  const double numer = 2.0 * one_minus_b * ((1.0 + b) * (1.0 + b) - a * a) / (1.0 + b);
  return {a, b, numer};
}

// |1 - a z + b z^2|^2 at z = exp(-i theta), expanded in cos(theta), cos(2 theta).
inline double transfer_denominator(const KernelConstants& k, double cos1, double cos2) {
  return 1.0 + k.a * k.a + k.b * k.b - 2.0 * k.a * (1.0 + k.b) * cos1 + 2.0 * k.b * cos2;
}

}  // namespace

void validate(const AR2Component& c) {
  if (!(c.phase > 0.0 && c.phase < 0.5) || !std::isfinite(c.phase)) {
    throw Error(ErrorCode::InvalidComponent, "phase must lie in (0, 0.5), got " + std::to_string(c.phase));
  }
  if (!(c.log_modulus > 0.0) || !std::isfinite(c.log_modulus)) {
    throw Error(ErrorCode::InvalidComponent, "log-modulus must be positive, got " + std::to_string(c.log_modulus));
  }
}

void validate(const MixtureSpec& m) {
  if (m.components.empty() || m.components.size() != m.weights.size()) {
    throw Error(ErrorCode::InvalidMixture, "components and weights must be non-empty and of equal length");
  }
  double total = 0.0;
  for (double w : m.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidMixture, "negative or non-finite weight");
    total += w;
  }
  if (std::abs(total - 1.0) >= 1e-12) {
    throw Error(ErrorCode::InvalidMixture, "weights sum to " + std::to_string(total) + ", expected 1");
  }
  for (const auto& c : m.components) validate(c);
}

double ar2_kernel(const AR2Component& c, double omega) {
  validate(c);
  const auto k = kernel_constants(c);
  return k.numer / transfer_denominator(k, std::cos(kTwoPi * omega), std::cos(2.0 * kTwoPi * omega));
}

SpectralCurve ar2_kernel(const AR2Component& c, std::span<const double> grid) {
  validate(c);
  validate_grid(grid);
  SpectralCurve out{{grid.begin(), grid.end()}, std::vector<double>(grid.size())};
  KernelTable(grid).evaluate(c, out.values);
  return out;
}

KernelTable::KernelTable(std::span<const double> grid) : cos1_(grid.size()), cos2_(grid.size()) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    cos1_[k] = std::cos(kTwoPi * grid[k]);
    cos2_[k] = std::cos(2.0 * kTwoPi * grid[k]);
  }
}

void KernelTable::evaluate(const AR2Component& c, std::span<double> out) const {
  const auto k = kernel_constants(c);
  for (std::size_t i = 0; i < cos1_.size(); ++i) out[i] = k.numer / transfer_denominator(k, cos1_[i], cos2_[i]);
}

AR2Coefficients component_to_coeffs(const AR2Component& c, double innovation_variance) {
  validate(c);
  if (!(innovation_variance > 0.0)) {
    throw Error(ErrorCode::InvalidComponent, "innovation variance must be positive");
  }
  return {2.0 * std::cos(kTwoPi * c.phase) * std::exp(-c.log_modulus), -std::exp(-2.0 * c.log_modulus),
          innovation_variance};
}

AR2Component coeffs_to_component(const AR2Coefficients& co) {
  if (!(co.lag2 > -1.0 && co.lag2 < 0.0)) {
    throw Error(ErrorCode::NonCausal, "lag-2 coefficient must lie in (-1, 0), got " + std::to_string(co.lag2));
  }
  if (co.lag1 * co.lag1 + 4.0 * co.lag2 >= 0.0) {
    throw Error(ErrorCode::RealRoots, "characteristic roots are real");
  }
  const double log_modulus = -0.5 * std::log(-co.lag2);
  const double cosine = std::clamp(co.lag1 * std::exp(log_modulus) / 2.0, -1.0, 1.0);
  return {std::acos(cosine) / kTwoPi, log_modulus};
}

double ar2_variance_normalizer(const AR2Coefficients& co) {
  const double p1 = co.lag1;
  const double p2 = co.lag2;
  // Stationarity triangle: |p2| < 1, p2 + p1 < 1, p2 - p1 < 1.
  if (!(p2 > -1.0 && p2 < 1.0 && p1 + p2 < 1.0 && p2 - p1 < 1.0)) {
    throw Error(ErrorCode::NonCausal, "coefficients outside the stationarity region");
  }
  return (1.0 - p2) * co.innovation_variance / (2.0 * (1.0 + p2) * ((1.0 - p2) * (1.0 - p2) - p1 * p1));
}

SpectralCurve mixture_sdf(const MixtureSpec& m, std::span<const double> grid) {
  validate(m);
  validate_grid(grid);
  SpectralCurve out{{grid.begin(), grid.end()}, std::vector<double>(grid.size(), 0.0)};
  const KernelTable table(grid);
  std::vector<double> buffer(grid.size());
  for (std::size_t c = 0; c < m.components.size(); ++c) {
    table.evaluate(m.components[c], buffer);
    for (std::size_t k = 0; k < grid.size(); ++k) out.values[k] += m.weights[c] * buffer[k];
  }
  return out;
}

TimeSeriesEpoch simulate_ar2(const AR2Component& c, double sigma, std::size_t length, Rng& rng, double fs) {
  validate(c);
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidComponent, "innovation standard deviation must be positive");
  if (length < TimeSeriesEpoch::kMinLength) throw Error(ErrorCode::TooShortSignal, "simulate_ar2");
  const auto co = component_to_coeffs(c, sigma * sigma);
  const auto by_modulus = static_cast<std::size_t>(10.0 * std::ceil(std::exp(2.0 * c.log_modulus)) + 100.0);
  const auto by_memory = static_cast<std::size_t>(10.0 * std::ceil(1.0 / c.log_modulus) + 100.0);
  const std::size_t warmup = std::max(by_modulus, by_memory);

  std::normal_distribution<double> noise(0.0, sigma);
  double z1 = 0.0;
  double z2 = 0.0;
  std::vector<double> out(length);
  for (std::size_t t = 0; t < warmup + length; ++t) {
    const double z = co.lag1 * z1 + co.lag2 * z2 + noise(rng);
    z2 = z1;
    z1 = z;
    if (t >= warmup) out[t - warmup] = z;
  }
  return TimeSeriesEpoch(std::move(out), fs);
}

TimeSeriesEpoch simulate_mixture(const MixtureSpec& m, std::size_t length, Rng& rng, double fs) {
  validate(m);
  std::vector<double> total(length, 0.0);
  for (std::size_t c = 0; c < m.components.size(); ++c) {
    const auto path = simulate_ar2(m.components[c], 1.0, length, rng, fs);
    const double variance = 2.0 * ar2_variance_normalizer(component_to_coeffs(m.components[c]));
    const double scale = std::sqrt(m.weights[c] / variance);
    for (std::size_t t = 0; t < length; ++t) total[t] += scale * path.samples()[t];
  }
  return TimeSeriesEpoch(std::move(total), fs);
}

}  // namespace arspec
