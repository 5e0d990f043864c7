#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "arspec/sampler.hpp"

namespace arspec {

// Type-7 (linear interpolation) empirical quantile; sorts `values` in place.
double empirical_quantile(std::vector<double>& values, double prob);

// Pointwise quantile across curves that share `grid`. Throws InvalidInput if
// `curves` is empty and GridMismatch on a length mismatch.
SpectralCurve pointwise_quantile(std::span<const std::vector<double>* const> curves, std::span<const double> grid,
                                 double prob);

// Pointwise median across every stored draw of every chain. Chains must share
// their output grid (GridMismatch otherwise).
SpectralCurve median_curve(std::span<const ChainOutput> chains);

// Pointwise gamma/2 and 1 - gamma/2 quantiles, i.e. a (1 - gamma) band.
std::pair<SpectralCurve, SpectralCurve> quantile_band(std::span<const ChainOutput> chains, double gamma);

// Most frequent C across stored states; ties go to the smaller C.
std::size_t modal_component_count(std::span<const ChainOutput> chains);

struct Peak {
  std::size_t index = 0;
  double phase = 0.0;
  double log_modulus = 0.0;
  double weight = 0.0;
};

// Component with the largest weight; ties go to the smaller phase.
Peak dominant_peak(const MixtureState& s);

struct ComponentSummary {
  std::size_t draws = 0;
  double psi_hz_mean = 0.0;
  double psi_hz_sd = 0.0;
  double log_modulus_mean = 0.0;
  double log_modulus_sd = 0.0;
  double weight_mean = 0.0;
  double weight_sd = 0.0;
};

struct ComponentTable {
  std::size_t components = 0;  // the C the table is restricted to
  std::size_t matched_states = 0;
  bool no_match = false;       // no stored state had C == components
  double fs = 1.0;
  std::vector<ComponentSummary> blocks;  // in phase order
};

// Per-block summaries over stored states with C == true_components (modal C
// if absent). Standard deviations use the n - 1 denominator; 0 for one draw.
ComponentTable parameter_summary(std::span<const ChainOutput> chains,
                                 std::optional<std::size_t> true_components = std::nullopt);

// Largest mean weight in the table; ties go to the smaller phase. The table
// must not be empty.
Peak dominant_peak(const ComponentTable& table);

struct PosteriorSummary {
  SpectralCurve median;
  SpectralCurve lower;
  SpectralCurve upper;
  double gamma = 0.05;
  std::size_t modal_components = 0;
  ComponentTable table;
};

PosteriorSummary summarize(std::span<const ChainOutput> chains, double gamma = 0.05,
                           std::optional<std::size_t> true_components = std::nullopt);

}  // namespace arspec
