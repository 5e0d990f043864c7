#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "arspec/posterior.hpp"
#include "arspec/sampler.hpp"

namespace arspec {

enum class Condition { InSeq, OutSeq };
// PreOdor is period A, Odor is period B.
enum class Period { PreOdor, Odor };

std::string_view to_string(Condition c);
std::string_view to_string(Period p);
Condition parse_condition(std::string_view s);
Period parse_period(std::string_view s);

struct Cell {
  Condition condition = Condition::InSeq;
  Period period = Period::PreOdor;

  friend bool operator==(const Cell&, const Cell&) = default;
};

std::string to_string(const Cell& cell);
inline constexpr std::array<Cell, 4> kCells{{{Condition::InSeq, Period::PreOdor},
                                              {Condition::InSeq, Period::Odor},
                                              {Condition::OutSeq, Period::PreOdor},
                                              {Condition::OutSeq, Period::Odor}}};

struct Trial {
  TimeSeriesEpoch epoch;
  Cell cell;
  std::string subject;
  std::string odor;
  std::string file;  // source path, informational
};

struct TrialSet {
  std::vector<Trial> trials;
};

// Throws InvalidInput on an empty set, a missing label or mixed sampling rates.
void validate(const TrialSet& ts);

struct TrialFit {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // set when !ok
  std::vector<ChainOutput> chains;
  SpectralCurve median;
};

// Trial i's seed is derive_seed(cfg.seed, k) where k is i's position among
// the trials of its cell, so two cells holding the same epochs in the same
// order get identical fits. Per-trial failures are recorded, not thrown.
std::uint64_t trial_seed(const TrialSet& ts, std::size_t trial, std::uint64_t base);
std::vector<TrialFit> fit_trials(const TrialSet& ts, const SamplerConfig& cfg, std::size_t chains = 1,
                                 std::size_t threads = 1);

// Pointwise median across the cell's successful trial median curves. Throws
// EmptyCell naming the cell.
SpectralCurve combine_trials(const TrialSet& ts, const std::vector<TrialFit>& fits, Cell cell);

// Every stored posterior draw of the cell's successful trials.
std::vector<std::vector<double>> cell_draws(const TrialSet& ts, const std::vector<TrialFit>& fits, Cell cell);

struct SignedCell {
  const std::vector<std::vector<double>>* draws = nullptr;
  double sign = 1.0;
};

// Each resample picks one draw per cell uniformly with replacement and forms
// sum(sign * draw); the band is the pointwise gamma/2, 1 - gamma/2 quantile
// over resamples. Draws are put in canonical (lexicographic) order first so
// the result does not depend on their input order. Requires n_resamples >= 1000.
std::pair<SpectralCurve, SpectralCurve> resample_bands(std::span<const SignedCell> cells, std::span<const double> grid,
                                                       std::size_t n_resamples, double gamma, Rng& rng);

struct ContrastOptions {
  double gamma = 0.05;
  std::size_t resamples = 2000;
  std::uint64_t seed = 1;
  bool stratify_by_odor = false;  // KS tests per odor instead of pooled
};

struct KsResult {
  double statistic = 0.0;
  double pvalue = 1.0;
};

// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value with
// effective size nm / (n + m).
KsResult ks_test(std::span<const double> x, std::span<const double> y);
// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

struct KsRow {
  std::string odor;  // "all" when pooled
  Cell first;
  Cell second;
  std::size_t n_first = 0;
  std::size_t n_second = 0;
  KsResult result;
};

struct ConditionContrast {
  std::vector<double> grid;
  SpectralCurve delta_in;   // InSeq: PreOdor - Odor
  SpectralCurve delta_out;  // OutSeq: PreOdor - Odor
  SpectralCurve delta_io;   // delta_in - delta_out
  std::array<std::pair<SpectralCurve, SpectralCurve>, 3> bands;  // in, out, io
  std::vector<bool> flagged;  // io band excludes 0
  std::array<std::vector<double>, 4> peaks_hz;  // per kCells entry
  std::vector<KsRow> ks;
};

// Dominant-peak frequency (Hz) per successful trial of the cell, taken from
// the modal-C restricted per-block means of that trial's draws.
std::vector<double> peak_distribution(const TrialSet& ts, const std::vector<TrialFit>& fits, Cell cell);

ConditionContrast contrast(const TrialSet& ts, const std::vector<TrialFit>& fits, const ContrastOptions& opt);
ConditionContrast contrast(const TrialSet& ts, const SamplerConfig& cfg, const ContrastOptions& opt,
                           std::size_t threads = 1);

// Synthetic trials in the shape of the odor-sequence experiment: every trial
// is an AR(2) mixture; cells listed in `inject` get an extra peak.
struct FixtureSpec {
  std::array<std::size_t, 4> trials_per_cell{5, 5, 5, 5};  // kCells order
  std::size_t length = 500;
  double fs = 1000.0;
  MixtureSpec base{{{0.12, 0.15}, {0.25, 0.15}}, {0.5, 0.5}};  // 120 and 250 Hz at fs 1000
  double inject_hz = 30.0;
  double inject_log_modulus = 0.1;
  double inject_weight = 0.5;
  std::vector<Cell> inject;
  bool identical_cells = false;  // all cells reuse the first cell's epochs
  std::vector<std::string> odors{"B"};
  std::string subject = "s1";
};

TrialSet make_fixture(const FixtureSpec& spec, std::uint64_t seed);

}  // namespace arspec
