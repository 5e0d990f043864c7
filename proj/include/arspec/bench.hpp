#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "arspec/posterior.hpp"
#include "arspec/sampler.hpp"

namespace arspec {

enum class Family { Ar2Mix, Ar12, Ma4 };

std::string_view to_string(Family f);
// Throws InvalidInput on an unknown name.
Family parse_family(std::string_view name);

struct SimSpec {
  Family family = Family::Ar2Mix;
  std::size_t length = 500;
  double fs = 1000.0;
  std::size_t replicates = 1;
  std::uint64_t seed = 1;
};

// Throws InvalidInput (length below the family minimum, no replicates, fs <= 0).
void validate(const SimSpec& spec);

struct Simulated {
  TimeSeriesEpoch signal;
  SpectralCurve truth;  // standardized SDF on the Fourier grid of the signal
};

// Three AR(2) peaks at 8, 30 and 60 Hz, L = 0.03, weights (0.1, 0.6, 0.3).
MixtureSpec ar2_mixture_truth(double fs);
Simulated gen_ar2_mixture(std::size_t length, double fs, Rng& rng);

// X_t = 0.9 X_{t-4} + 0.7 X_{t-8} - 0.63 X_{t-12} + e_t.
Simulated gen_ar12(std::size_t length, Rng& rng, double fs = 1000.0);

// X_t = e_t + 0.6 e_{t-1} - 0.3 e_{t-2} - 0.6 e_{t-3} - 0.3 e_{t-4}.
Simulated gen_ma4(std::size_t length, Rng& rng, double fs = 1000.0);

Simulated generate(Family f, std::size_t length, double fs, Rng& rng);

// Standardized truth of a family on an arbitrary grid.
SpectralCurve truth_sdf(Family f, std::span<const double> grid, double fs = 1000.0);

// Integral of |est - truth| over (0, 0.5) with flat extension to the ends.
double global_iae(const SpectralCurve& est, const SpectralCurve& truth);

struct LocalIae {
  double value = 0.0;
  double lo = 0.0;  // band endpoints on the grid
  double hi = 0.0;
  bool band_not_found = false;  // a side ran off the grid; the band was clipped
};

// Band: scan outward from the grid point nearest omega_max until truth first
// drops to <= 0.9 * truth(omega_max) on each side. Trapezoid of |est - truth|
// over the band.
LocalIae local_iae(const SpectralCurve& est, const SpectralCurve& truth, double omega_max);

// Hill-climbs from the grid point nearest `omega` to a local maximum of `curve`.
double nearest_local_max(const SpectralCurve& curve, double omega);

// |argmax est - argmax truth| over grid points inside [lo, hi], cycles/sample.
// Ties go to the lower frequency. Throws InvalidInput if the band holds no
// grid point.
double phase_disparity(const SpectralCurve& est, const SpectralCurve& truth, std::pair<double, double> band);

// Gaussian-kernel Nadaraya-Watson regression of ordinates on frequency,
// evaluated on `grid` (the periodogram frequencies if empty).
SpectralCurve nw_smoother(const Periodogram& pdgm, double bandwidth, std::span<const double> grid = {});
// Mean squared leave-one-out prediction error at the periodogram frequencies.
double loocv_score(const Periodogram& pdgm, double bandwidth);
// Candidate with the lowest score; ties go to the earlier candidate.
double loocv_bandwidth(const Periodogram& pdgm, std::span<const double> candidates);

// Reference peaks (cycles/sample) and disparity bands per family.
std::vector<double> family_peaks(Family f, double fs);
std::vector<std::pair<double, double>> family_bands(Family f, double fs);

struct MetricReport {
  double global_iae = 0.0;
  std::vector<LocalIae> local;          // one per family peak
  std::vector<double> disparity_hz;     // one per family band
};

MetricReport evaluate(const SpectralCurve& est, const SpectralCurve& truth, Family f, double fs);

struct BenchConfig {
  SimSpec sim;
  SamplerConfig sampler;
  std::size_t chains = 2;
  std::size_t threads = 1;
  std::vector<double> nw_candidates;  // empty: a log-spaced default set
  bool oracle = false;                // score the truth itself instead of fitting
};

struct ReplicateResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  MetricReport bmard;
  MetricReport nw;
  double nw_bandwidth = 0.0;
  std::size_t modal_components = 0;
  ComponentTable table;
  // |psi - psi_hat| in Hz, |L - L_hat|, |p - p_hat| per true component; filled
  // only for the AR(2) mixture when the modal C matches the truth.
  std::vector<double> psi_error_hz;
  std::vector<double> log_modulus_error;
  std::vector<double> weight_error;
  SpectralCurve median;
  std::vector<std::vector<double>> loglik_traces;  // one per chain
};

struct BenchResult {
  BenchConfig config;
  std::vector<ReplicateResult> replicates;
};

// Replicate r draws its signal from make_stream(sim.seed, r) and runs its
// chains with sampler seed derive_seed(sim.seed, r).
BenchResult run_bench(const BenchConfig& cfg);

struct AggregateRow {
  std::string label;
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
};

// Mean (sd) rows over replicates:
// |psi - psi_hat|, |L - L_hat|, |p - p_hat| per component (replicates with the
// true C only), then disparities, local and global IAE for both methods.
std::vector<AggregateRow> aggregate(const BenchResult& result);

}  // namespace arspec
