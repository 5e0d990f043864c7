#include "arspec/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "arspec/error.hpp"
#include "arspec/parallel.hpp"

namespace arspec {

namespace {

std::size_t cell_index(Cell c) {
  for (std::size_t i = 0; i < kCells.size(); ++i) {
    if (kCells[i] == c) return i;
  }
  return 0;
}

std::vector<std::size_t> cell_trials(const TrialSet& ts, const std::vector<TrialFit>& fits, Cell cell) {
  if (fits.size() != ts.trials.size()) throw Error(ErrorCode::InvalidInput, "fits do not match the trial set");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ts.trials.size(); ++i) {
    if (ts.trials[i].cell == cell && fits[i].ok) out.push_back(i);
  }
  if (out.empty()) throw Error(ErrorCode::EmptyCell, "no successful trial in cell " + to_string(cell));
  return out;
}

SpectralCurve difference(const SpectralCurve& a, const SpectralCurve& b) {
  SpectralCurve out{a.grid, std::vector<double>(a.size())};
  for (std::size_t k = 0; k < a.size(); ++k) out.values[k] = a.values[k] - b.values[k];
  return out;
}

}  // namespace

std::string_view to_string(Condition c) { return c == Condition::InSeq ? "InSeq" : "OutSeq"; }
std::string_view to_string(Period p) { return p == Period::PreOdor ? "PreOdor" : "Odor"; }

Condition parse_condition(std::string_view s) {
  if (s == "InSeq") return Condition::InSeq;
  if (s == "OutSeq") return Condition::OutSeq;
  throw Error(ErrorCode::InvalidInput, "unknown condition '" + std::string(s) + "'");
}

Period parse_period(std::string_view s) {
  if (s == "PreOdor") return Period::PreOdor;
  if (s == "Odor") return Period::Odor;
  throw Error(ErrorCode::InvalidInput, "unknown phase '" + std::string(s) + "'");
}

std::string to_string(const Cell& cell) {
  return std::string(to_string(cell.condition)) + "/" + std::string(to_string(cell.period));
}

void validate(const TrialSet& ts) {
  if (ts.trials.empty()) throw Error(ErrorCode::InvalidInput, "empty trial set");
  const double fs = ts.trials.front().epoch.fs();
  for (std::size_t i = 0; i < ts.trials.size(); ++i) {
    const auto& t = ts.trials[i];
    if (t.subject.empty() || t.odor.empty()) {
      throw Error(ErrorCode::InvalidInput, "trial " + std::to_string(i) + " is missing a label");
    }
    if (t.epoch.fs() != fs) throw Error(ErrorCode::InvalidInput, "trials use different sampling rates");
  }
}

std::uint64_t trial_seed(const TrialSet& ts, std::size_t trial, std::uint64_t base) {
  std::size_t ordinal = 0;
  for (std::size_t i = 0; i < trial; ++i) {
    if (ts.trials[i].cell == ts.trials[trial].cell) ++ordinal;
  }
  return derive_seed(base, ordinal);
}

std::vector<TrialFit> fit_trials(const TrialSet& ts, const SamplerConfig& cfg, std::size_t chains,
                                 std::size_t threads) {
  validate(ts);
  validate(cfg);
  std::vector<TrialFit> fits(ts.trials.size());
  parallel_for(ts.trials.size(), threads, [&](std::size_t i) {
    TrialFit& f = fits[i];
    f.trial = i;
    f.seed = trial_seed(ts, i, cfg.seed);
    try {
      SamplerConfig local = cfg;
      local.seed = f.seed;
      f.chains = estimate(ts.trials[i].epoch, local, chains, 1);
      f.median = median_curve(f.chains);
      f.ok = true;
    } catch (const Error& e) {
      f.error = e.what();
      f.chains.clear();
    }
  });
  return fits;
}

SpectralCurve combine_trials(const TrialSet& ts, const std::vector<TrialFit>& fits, Cell cell) {
  const auto idx = cell_trials(ts, fits, cell);
  std::vector<const std::vector<double>*> curves;
  for (std::size_t i : idx) curves.push_back(&fits[i].median.values);
  return pointwise_quantile(curves, fits[idx.front()].median.grid, 0.5);
}

std::vector<std::vector<double>> cell_draws(const TrialSet& ts, const std::vector<TrialFit>& fits, Cell cell) {
  std::vector<std::vector<double>> out;
  for (std::size_t i : cell_trials(ts, fits, cell)) {
    for (const auto& c : fits[i].chains) out.insert(out.end(), c.curves.begin(), c.curves.end());
  }
  return out;
}

std::pair<SpectralCurve, SpectralCurve> resample_bands(std::span<const SignedCell> cells, std::span<const double> grid,
                                                       std::size_t n_resamples, double gamma, Rng& rng) {
  if (n_resamples < 1000) throw Error(ErrorCode::InvalidInput, "resample_bands needs at least 1000 resamples");
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::InvalidInput, "gamma must lie in (0, 1)");
  std::vector<std::vector<const std::vector<double>*>> sorted;
  for (const auto& c : cells) {
    if (c.draws == nullptr || c.draws->empty()) throw Error(ErrorCode::EmptyCell, "resample_bands: a cell has no draws");
    std::vector<const std::vector<double>*> ptrs;
    for (const auto& d : *c.draws) {
      if (d.size() != grid.size()) throw Error(ErrorCode::GridMismatch, "draw length differs from grid");
      ptrs.push_back(&d);
    }
    std::sort(ptrs.begin(), ptrs.end(), [](const auto* a, const auto* b) { return *a < *b; });
    sorted.push_back(std::move(ptrs));
  }

  std::vector<std::vector<double>> deltas(n_resamples, std::vector<double>(grid.size(), 0.0));
  for (auto& delta : deltas) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::uniform_int_distribution<std::size_t> pick(0, sorted[c].size() - 1);
      const auto& d = *sorted[c][pick(rng)];
      for (std::size_t k = 0; k < grid.size(); ++k) delta[k] += cells[c].sign * d[k];
    }
  }
  std::vector<const std::vector<double>*> ptrs;
  for (const auto& d : deltas) ptrs.push_back(&d);
  return {pointwise_quantile(ptrs, grid, gamma / 2.0), pointwise_quantile(ptrs, grid, 1.0 - gamma / 2.0)};
}

double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-transformed series; converges fast for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double s = 0.0;
    for (int k = 1; k <= 40; ++k) {
      const double m = 2.0 * k - 1.0;
      s += std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::InvalidInput, "ks_test needs non-empty samples");
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> b(y.begin(), y.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  const double ne = n * m / (n + m);
  return {d, kolmogorov_q(std::sqrt(ne) * d)};
}

std::vector<double> peak_distribution(const TrialSet& ts, const std::vector<TrialFit>& fits, Cell cell) {
  std::vector<double> out;
  for (std::size_t i : cell_trials(ts, fits, cell)) {
    const auto table = parameter_summary(fits[i].chains);
    out.push_back(dominant_peak(table).phase * ts.trials[i].epoch.fs());
  }
  return out;
}

ConditionContrast contrast(const TrialSet& ts, const std::vector<TrialFit>& fits, const ContrastOptions& opt) {
  validate(ts);
  // Check every cell up front so the error names the first missing one.
  for (const auto& c : kCells) cell_trials(ts, fits, c);

  ConditionContrast out;
  const auto in_a = combine_trials(ts, fits, kCells[0]);
  const auto in_b = combine_trials(ts, fits, kCells[1]);
  const auto out_a = combine_trials(ts, fits, kCells[2]);
  const auto out_b = combine_trials(ts, fits, kCells[3]);
  out.grid = in_a.grid;
  out.delta_in = difference(in_a, in_b);
  out.delta_out = difference(out_a, out_b);
  out.delta_io = difference(out.delta_in, out.delta_out);

  std::array<std::vector<std::vector<double>>, 4> draws;
  for (std::size_t c = 0; c < 4; ++c) draws[c] = cell_draws(ts, fits, kCells[c]);
  Rng rng = make_stream(opt.seed, 0);
  const std::vector<SignedCell> din{{&draws[0], 1.0}, {&draws[1], -1.0}};
  const std::vector<SignedCell> dout{{&draws[2], 1.0}, {&draws[3], -1.0}};
  const std::vector<SignedCell> dio{{&draws[0], 1.0}, {&draws[1], -1.0}, {&draws[2], -1.0}, {&draws[3], 1.0}};
  out.bands[0] = resample_bands(din, out.grid, opt.resamples, opt.gamma, rng);
  out.bands[1] = resample_bands(dout, out.grid, opt.resamples, opt.gamma, rng);
  out.bands[2] = resample_bands(dio, out.grid, opt.resamples, opt.gamma, rng);
  out.flagged.resize(out.grid.size());
  for (std::size_t k = 0; k < out.grid.size(); ++k) {
    out.flagged[k] = out.bands[2].first.values[k] > 0.0 || out.bands[2].second.values[k] < 0.0;
  }

  for (std::size_t c = 0; c < 4; ++c) out.peaks_hz[c] = peak_distribution(ts, fits, kCells[c]);

  // Peak comparisons: conditions within each period, periods within each condition.
  const std::array<std::pair<std::size_t, std::size_t>, 4> pairs{{{0, 2}, {1, 3}, {0, 1}, {2, 3}}};
  std::vector<std::string> strata{"all"};
  if (opt.stratify_by_odor) {
    std::set<std::string> odors;
    for (const auto& t : ts.trials) odors.insert(t.odor);
    strata.assign(odors.begin(), odors.end());
  }
  for (const auto& odor : strata) {
    std::array<std::vector<double>, 4> peaks;
    if (odor == "all" && !opt.stratify_by_odor) {
      peaks = out.peaks_hz;
    } else {
      for (std::size_t i = 0; i < ts.trials.size(); ++i) {
        if (!fits[i].ok || ts.trials[i].odor != odor) continue;
        const auto table = parameter_summary(fits[i].chains);
        peaks[cell_index(ts.trials[i].cell)].push_back(dominant_peak(table).phase * ts.trials[i].epoch.fs());
      }
    }
    for (const auto& [a, b] : pairs) {
      KsRow row{odor, kCells[a], kCells[b], peaks[a].size(), peaks[b].size(), {}};
      if (!peaks[a].empty() && !peaks[b].empty()) row.result = ks_test(peaks[a], peaks[b]);
      out.ks.push_back(row);
    }
  }
  return out;
}

ConditionContrast contrast(const TrialSet& ts, const SamplerConfig& cfg, const ContrastOptions& opt,
                           std::size_t threads) {
  return contrast(ts, fit_trials(ts, cfg, 1, threads), opt);
}

TrialSet make_fixture(const FixtureSpec& spec, std::uint64_t seed) {
  validate(spec.base);
  if (spec.odors.empty()) throw Error(ErrorCode::InvalidInput, "fixture needs at least one odor");
  MixtureSpec injected = spec.base;
  for (auto& w : injected.weights) w *= 1.0 - spec.inject_weight;
  injected.components.push_back({spec.inject_hz / spec.fs, spec.inject_log_modulus});
  injected.weights.push_back(spec.inject_weight);
  // Keep components phase-ordered; simulation does not care but it reads better.
  std::vector<std::size_t> order(injected.components.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return injected.components[a].phase < injected.components[b].phase; });
  MixtureSpec sorted;
  for (std::size_t i : order) {
    sorted.components.push_back(injected.components[i]);
    sorted.weights.push_back(injected.weights[i]);
  }
  validate(sorted);

  TrialSet ts;
  for (std::size_t c = 0; c < 4; ++c) {
    const Cell cell = kCells[c];
    const bool inject = std::find(spec.inject.begin(), spec.inject.end(), cell) != spec.inject.end();
    const std::size_t n = spec.identical_cells ? spec.trials_per_cell[0] : spec.trials_per_cell[c];
    for (std::size_t k = 0; k < n; ++k) {
      Rng rng = make_stream(seed, spec.identical_cells ? k : c * 1000003 + k);
      const auto& m = inject && !spec.identical_cells ? sorted : spec.base;
      Trial t{simulate_mixture(m, spec.length, rng, spec.fs), cell, spec.subject, spec.odors[k % spec.odors.size()], ""};
      t.file = std::string(to_string(cell.condition)) + "_" + std::string(to_string(cell.period)) + "_" +
               std::to_string(k) + ".csv";
      ts.trials.push_back(std::move(t));
    }
  }
  return ts;
}

}  // namespace arspec
