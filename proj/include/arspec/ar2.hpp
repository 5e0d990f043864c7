#pragma once

#include <span>
#include <vector>

#include "arspec/random.hpp"
#include "arspec/signal.hpp"

namespace arspec {

// Polar parametrization of a causal AR(2) with complex-conjugate roots
// M exp(+-i 2 pi phase), M = exp(log_modulus) > 1. The phase (cycles/sample)
// locates the spectral peak; the log-modulus sets its width.
struct AR2Component {
  double phase = 0.25;
  double log_modulus = 1.0;

  friend bool operator==(const AR2Component&, const AR2Component&) = default;
};

// Z_t = lag1 Z_{t-1} + lag2 Z_{t-2} + W_t, Var(W_t) = innovation_variance.
struct AR2Coefficients {
  double lag1 = 0.0;
  double lag2 = 0.0;
  double innovation_variance = 1.0;
};

// Convex combination of standardized AR(2) kernels.
struct MixtureSpec {
  std::vector<AR2Component> components;
  std::vector<double> weights;
};

// Throws InvalidComponent unless phase in (0, 0.5) and log_modulus > 0.
void validate(const AR2Component& c);
// Throws InvalidMixture / InvalidComponent.
void validate(const MixtureSpec& m);

// Standardized AR(2) spectral density g(w; phase, log_modulus); integrates
// to 1 over (0, 0.5).
double ar2_kernel(const AR2Component& c, double omega);
SpectralCurve ar2_kernel(const AR2Component& c, std::span<const double> grid);

// Evaluates kernels repeatedly on one fixed grid. cos(2 pi w) and cos(4 pi w)
// are tabulated once so each kernel costs a handful of flops per point.
class KernelTable {
 public:
  explicit KernelTable(std::span<const double> grid);

  std::size_t size() const noexcept { return cos1_.size(); }
  // out[k] = g(grid[k]; c). The component is assumed valid.
  void evaluate(const AR2Component& c, std::span<double> out) const;

 private:
  std::vector<double> cos1_;
  std::vector<double> cos2_;
};

AR2Coefficients component_to_coeffs(const AR2Component& c, double innovation_variance = 1.0);
// Throws RealRoots if lag1^2 + 4 lag2 >= 0, NonCausal if lag2 outside (-1, 0).
AR2Component coeffs_to_component(const AR2Coefficients& co);

// Integral of the raw AR(2) spectral density over (0, 1/2), i.e. Var(Z_t)/2.
// Throws NonCausal outside the stationarity triangle.
double ar2_variance_normalizer(const AR2Coefficients& co);

SpectralCurve mixture_sdf(const MixtureSpec& m, std::span<const double> grid);

// Gaussian AR(2) path of length T, started from zero and run through a
// warm-up of max(10 ceil(exp(2L)), 10 ceil(1/L)) + 100 samples first.
TimeSeriesEpoch simulate_ar2(const AR2Component& c, double sigma, std::size_t length, Rng& rng,
                             double fs = 1.0);

// Sum of independent AR(2) paths, each scaled to unit theoretical variance and
// then by sqrt(weight). The theoretical standardized SDF is mixture_sdf(m).
TimeSeriesEpoch simulate_mixture(const MixtureSpec& m, std::size_t length, Rng& rng, double fs = 1.0);

}  // namespace arspec
