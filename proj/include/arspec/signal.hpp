#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace arspec {

// A finite real-valued segment assumed weakly stationary. Construction
// validates: all samples finite, at least kMinLength samples, fs > 0.
class TimeSeriesEpoch {
 public:
  static constexpr std::size_t kMinLength = 8;

  TimeSeriesEpoch(std::vector<double> samples, double fs);

  const std::vector<double>& samples() const noexcept { return samples_; }
  double fs() const noexcept { return fs_; }
  std::size_t size() const noexcept { return samples_.size(); }

 private:
  std::vector<double> samples_;
  double fs_;
};

// Ordinates on the fundamental frequencies k/T, k = 1..floor((T-1)/2).
// Frequencies are in cycles/sample.
struct Periodogram {
  std::vector<double> freqs;
  std::vector<double> ordinates;
  std::size_t length = 0;  // source series length T
  double fs = 1.0;

  std::size_t size() const noexcept { return freqs.size(); }
};

// A non-negative function sampled on a strictly increasing grid inside (0, 0.5).
struct SpectralCurve {
  std::vector<double> grid;
  std::vector<double> values;

  std::size_t size() const noexcept { return grid.size(); }
};

// Throws InvalidInput unless the grid is strictly increasing inside (0, 0.5).
void validate_grid(std::span<const double> grid);
// Grid check plus finite, non-negative values of matching length.
void validate_curve(const SpectralCurve& curve);

// k/T for k = 1..floor((T-1)/2).
std::vector<double> fourier_grid(std::size_t length);
// k/(factor*T) for k = 1..floor((factor*T-1)/2).
std::vector<double> refined_fourier_grid(std::size_t length, std::size_t factor);
// Cell midpoints (i + 1/2)/(2n), i = 0..n-1, of an n-cell partition of (0, 0.5).
std::vector<double> midpoint_grid(std::size_t cells);

// Trapezoid rule over (0, 0.5): interior panels between grid points plus
// constant extension of the first/last value out to the endpoints. On a
// midpoint grid this is exactly the midpoint rule.
double integrate(std::span<const double> grid, std::span<const double> values);
double integrate(const SpectralCurve& curve);

// Zero mean, unit variance (denominator T). Throws ZeroVarianceSignal.
TimeSeriesEpoch standardize(const TimeSeriesEpoch& ts);

// I(w_k) = |sum_t X_t exp(-i 2 pi w_k t)|^2 / T on fourier_grid(T). The input
// is used as given (callers standardize first).
Periodogram periodogram(const TimeSeriesEpoch& ts);

// All T ordinates k = 0..T-1 of the two-sided periodogram.
std::vector<double> full_periodogram(std::span<const double> samples);

// Whittle quasi log-likelihood sum_k [-log f(w_k) - I(w_k)/f(w_k)].
// Throws GridMismatch / NonPositiveModel.
double whittle_loglik(const Periodogram& pdgm, const SpectralCurve& model);
// Same sum with the model given as raw values aligned with pdgm.freqs; no
// validation beyond positivity. This is the sampler's hot path.
double whittle_loglik(std::span<const double> ordinates, std::span<const double> model);

}  // namespace arspec
