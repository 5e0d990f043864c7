#include "arspec/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "arspec/error.hpp"

namespace arspec {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVarianceSignal: return "ZeroVarianceSignal";
    case ErrorCode::TooShortSignal: return "TooShortSignal";
    case ErrorCode::InvalidSignal: return "InvalidSignal";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NonPositiveModel: return "NonPositiveModel";
    case ErrorCode::InvalidComponent: return "InvalidComponent";
    case ErrorCode::RealRoots: return "RealRoots";
    case ErrorCode::NonCausal: return "NonCausal";
    case ErrorCode::InvalidMixture: return "InvalidMixture";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

TimeSeriesEpoch::TimeSeriesEpoch(std::vector<double> samples, double fs)
    : samples_(std::move(samples)), fs_(fs) {
  if (!(fs_ > 0.0) || !std::isfinite(fs_)) {
    throw Error(ErrorCode::InvalidSignal, "sampling rate must be positive, got " + std::to_string(fs_));
  }
  if (samples_.size() < kMinLength) {
    throw Error(ErrorCode::TooShortSignal,
                "need at least " + std::to_string(kMinLength) + " samples, got " +
                    std::to_string(samples_.size()));
  }
  for (std::size_t t = 0; t < samples_.size(); ++t) {
    if (!std::isfinite(samples_[t])) {
      throw Error(ErrorCode::InvalidSignal, "non-finite sample at index " + std::to_string(t));
    }
  }
}

void validate_grid(std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidInput, "empty frequency grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] < 0.5)) {
      throw Error(ErrorCode::InvalidInput, "grid point outside (0, 0.5) at index " + std::to_string(i));
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw Error(ErrorCode::InvalidInput, "grid not strictly increasing at index " + std::to_string(i));
    }
  }
}

void validate_curve(const SpectralCurve& curve) {
  validate_grid(curve.grid);
  if (curve.values.size() != curve.grid.size()) {
    throw Error(ErrorCode::InvalidInput, "curve values and grid differ in length");
  }
  for (double v : curve.values) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::InvalidInput, "curve value not finite/non-negative");
  }
}

std::vector<double> fourier_grid(std::size_t length) { return refined_fourier_grid(length, 1); }

std::vector<double> refined_fourier_grid(std::size_t length, std::size_t factor) {
  const std::size_t n = length * factor;
  std::vector<double> grid;
  if (n < 3) return grid;
  const std::size_t kmax = (n - 1) / 2;
  grid.reserve(kmax);
  for (std::size_t k = 1; k <= kmax; ++k) grid.push_back(static_cast<double>(k) / static_cast<double>(n));
  return grid;
}

std::vector<double> midpoint_grid(std::size_t cells) {
  std::vector<double> grid(cells);
  const double h = 0.5 / static_cast<double>(cells);
  for (std::size_t i = 0; i < cells; ++i) grid[i] = (static_cast<double>(i) + 0.5) * h;
  return grid;
}

double integrate(std::span<const double> grid, std::span<const double> values) {
  if (grid.size() != values.size() || grid.empty()) {
    throw Error(ErrorCode::GridMismatch, "integrate: grid/value length mismatch");
  }
  const std::size_t n = grid.size();
  double total = values.front() * grid.front() + values.back() * (0.5 - grid.back());
  for (std::size_t i = 1; i < n; ++i) {
    total += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
  }
  return total;
}

double integrate(const SpectralCurve& curve) { return integrate(curve.grid, curve.values); }

TimeSeriesEpoch standardize(const TimeSeriesEpoch& ts) {
  const auto& x = ts.samples();
  const double n = static_cast<double>(x.size());
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) {
    throw Error(ErrorCode::ZeroVarianceSignal, "all samples are equal");
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) throw Error(ErrorCode::ZeroVarianceSignal, "sample variance is zero");

  std::vector<double> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) out[t] = (x[t] - mean) / sd;
  return TimeSeriesEpoch(std::move(out), ts.fs());
}

namespace {

// Ordinate k of the two-sided periodogram using an exact twiddle table
// indexed by (k*t) mod T, which keeps the O(T^2) sum accurate to ~1e-13.
struct Dft {
  explicit Dft(std::size_t n) : cos_(n), sin_(n) {
    for (std::size_t j = 0; j < n; ++j) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
      cos_[j] = std::cos(angle);
      sin_[j] = std::sin(angle);
    }
  }

  double ordinate(std::span<const double> x, std::size_t k) const {
    const std::size_t n = x.size();
    double re = 0.0;
    double im = 0.0;
    std::size_t idx = k % n;  // (k * t) mod n for t = 1
    for (std::size_t t = 0; t < n; ++t) {
      // Sample t carries time index t+1.
      re += x[t] * cos_[idx];
      im -= x[t] * sin_[idx];
      idx += k;
      if (idx >= n) idx %= n;
    }
    return (re * re + im * im) / static_cast<double>(n);
  }

  std::vector<double> cos_;
  std::vector<double> sin_;
};

}  // namespace

Periodogram periodogram(const TimeSeriesEpoch& ts) {
  const auto& x = ts.samples();
  const std::size_t n = x.size();
  Periodogram out;
  out.length = n;
  out.fs = ts.fs();
  out.freqs = fourier_grid(n);
  out.ordinates.resize(out.freqs.size());
  const Dft dft(n);
  for (std::size_t i = 0; i < out.freqs.size(); ++i) out.ordinates[i] = dft.ordinate(x, i + 1);
  return out;
}

std::vector<double> full_periodogram(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < TimeSeriesEpoch::kMinLength) throw Error(ErrorCode::TooShortSignal, "full_periodogram");
  const Dft dft(n);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = dft.ordinate(samples, k);
  return out;
}

double whittle_loglik(std::span<const double> ordinates, std::span<const double> model) {
  double total = 0.0;
  for (std::size_t k = 0; k < ordinates.size(); ++k) {
    const double f = model[k];
    if (!(f > 0.0)) return -std::numeric_limits<double>::infinity();
    total -= std::log(f) + ordinates[k] / f;
  }
  return total;
}

double whittle_loglik(const Periodogram& pdgm, const SpectralCurve& model) {
  if (model.grid.size() != pdgm.freqs.size() || model.values.size() != pdgm.freqs.size()) {
    throw Error(ErrorCode::GridMismatch, "model grid has " + std::to_string(model.grid.size()) +
                                             " points, periodogram has " + std::to_string(pdgm.freqs.size()));
  }
  for (std::size_t k = 0; k < pdgm.freqs.size(); ++k) {
    if (std::abs(model.grid[k] - pdgm.freqs[k]) > 1e-12) {
      throw Error(ErrorCode::GridMismatch, "model grid differs from periodogram frequencies at index " +
                                               std::to_string(k));
    }
    if (!(model.values[k] > 0.0)) {
      throw Error(ErrorCode::NonPositiveModel, "model value not positive at index " + std::to_string(k));
    }
  }
  return whittle_loglik(pdgm.ordinates, model.values);
}

}  // namespace arspec
