#include "arspec/bench.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "arspec/error.hpp"
#include "arspec/parallel.hpp"

namespace arspec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// |1 - sum_j phi_j z^j|^2 style polynomial magnitude at z = exp(-i 2 pi omega).
double poly_power(std::span<const std::pair<int, double>> terms, double omega) {
  std::complex<double> acc = 0.0;
  for (const auto& [lag, coef] : terms) acc += coef * std::polar(1.0, -kTwoPi * omega * lag);
  return std::norm(acc);
}

constexpr std::pair<int, double> kAr12Poly[] = {{0, 1.0}, {4, -0.9}, {8, -0.7}, {12, 0.63}};
constexpr std::pair<int, double> kMa4Poly[] = {{0, 1.0}, {1, 0.6}, {2, -0.3}, {3, -0.6}, {4, -0.3}};

double ar12_raw(double omega) { return 1.0 / poly_power(kAr12Poly, omega); }
double ma4_raw(double omega) { return poly_power(kMa4Poly, omega); }

// Midpoint rule on (0, 0.5). For an even, 1-periodic integrand this is the
// periodic trapezoid rule, which converges geometrically for analytic
// densities and is exact for trigonometric polynomials of low degree.
template <class F>
double half_period_integral(F f, std::size_t cells) {
  const double h = 0.5 / static_cast<double>(cells);
  double total = 0.0;
  for (std::size_t i = 0; i < cells; ++i) total += f((static_cast<double>(i) + 0.5) * h);
  return total * h;
}

double ar12_normalizer() {
  static const double z = half_period_integral(ar12_raw, 1u << 15);
  return z;
}

double ma4_normalizer() {
  static const double z = half_period_integral(ma4_raw, 1u << 10);
  return z;
}

std::size_t nearest_index(std::span<const double> grid, double omega) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), omega);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return grid.size() - 1;
  const auto i = static_cast<std::size_t>(it - grid.begin());
  return (omega - grid[i - 1] <= grid[i] - omega) ? i - 1 : i;
}

void require_shared(const SpectralCurve& a, const SpectralCurve& b) {
  if (a.grid != b.grid || a.values.size() != a.grid.size() || b.values.size() != b.grid.size()) {
    throw Error(ErrorCode::GridMismatch, "curves must share a grid");
  }
  if (a.grid.empty()) throw Error(ErrorCode::InvalidInput, "empty curve");
}

std::size_t band_argmax(const SpectralCurve& c, std::pair<double, double> band) {
  std::size_t best = c.size();
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c.grid[k] < band.first || c.grid[k] > band.second) continue;
    if (best == c.size() || c.values[k] > c.values[best]) best = k;
  }
  if (best == c.size()) throw Error(ErrorCode::InvalidInput, "band contains no grid point");
  return best;
}

// Nadaraya-Watson estimate at x from data points except `skip`. The kernel is
// rescaled by its largest value so distant evaluation points do not underflow.
double nw_at(double x, std::span<const double> freqs, std::span<const double> ords, std::size_t skip, double h) {
  double umin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    if (j == skip) continue;
    const double u = (x - freqs[j]) / h;
    umin = std::min(umin, u * u);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    if (j == skip) continue;
    const double u = (x - freqs[j]) / h;
    const double w = std::exp(-0.5 * (u * u - umin));
    num += w * ords[j];
    den += w;
  }
  return num / den;
}

SpectralCurve normalized(SpectralCurve c) {
  const double z = integrate(c);
  for (auto& v : c.values) v /= z;
  return c;
}

std::vector<double> default_candidates(std::size_t length) {
  // 1/T (one Fourier spacing) up to 0.1 cycles/sample, log-spaced.
  const double lo = std::log(1.0 / static_cast<double>(length));
  const double hi = std::log(0.1);
  const std::size_t n = 24;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
  return out;
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Ar2Mix:
      return "ar2mix";
    case Family::Ar12:
      return "ar12";
    case Family::Ma4:
      return "ma4";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::Ar2Mix, Family::Ar12, Family::Ma4}) {
    if (name == to_string(f)) return f;
  }
  throw Error(ErrorCode::InvalidInput, "unknown family '" + std::string(name) + "'");
}

void validate(const SimSpec& spec) {
  const std::size_t minimum = spec.family == Family::Ar12 ? 50 : (spec.family == Family::Ma4 ? 20 : 8);
  if (spec.length < minimum) {
    throw Error(ErrorCode::InvalidInput,
                std::string(to_string(spec.family)) + " needs at least " + std::to_string(minimum) + " samples");
  }
  if (spec.replicates == 0) throw Error(ErrorCode::InvalidInput, "replicates must be >= 1");
  if (!(spec.fs > 0.0) || !std::isfinite(spec.fs)) throw Error(ErrorCode::InvalidInput, "fs must be positive");
}

MixtureSpec ar2_mixture_truth(double fs) {
  return {{{8.0 / fs, 0.03}, {30.0 / fs, 0.03}, {60.0 / fs, 0.03}}, {0.1, 0.6, 0.3}};
}

Simulated gen_ar2_mixture(std::size_t length, double fs, Rng& rng) {
  const auto m = ar2_mixture_truth(fs);
  auto signal = simulate_mixture(m, length, rng, fs);
  return {std::move(signal), mixture_sdf(m, fourier_grid(length))};
}

Simulated gen_ar12(std::size_t length, Rng& rng, double fs) {
  validate(SimSpec{Family::Ar12, length, fs, 1, 0});
  // Roots sit at modulus 0.9^(-1/4) ~ 1.027, so 3000 samples of warm-up leave
  // the start-up transient below 1e-8 of its initial size.
  const std::size_t warmup = 3000;
  std::normal_distribution<double> z;
  std::vector<double> x(warmup + length, 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double v = z(rng);
    if (t >= 4) v += 0.9 * x[t - 4];
    if (t >= 8) v += 0.7 * x[t - 8];
    if (t >= 12) v -= 0.63 * x[t - 12];
    x[t] = v;
  }
  std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(warmup), x.end());
  return {TimeSeriesEpoch(std::move(out), fs), truth_sdf(Family::Ar12, fourier_grid(length), fs)};
}

Simulated gen_ma4(std::size_t length, Rng& rng, double fs) {
  validate(SimSpec{Family::Ma4, length, fs, 1, 0});
  std::normal_distribution<double> z;
  std::vector<double> eta(length + 4);
  for (auto& v : eta) v = z(rng);
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t s = t + 4;
    out[t] = eta[s] + 0.6 * eta[s - 1] - 0.3 * eta[s - 2] - 0.6 * eta[s - 3] - 0.3 * eta[s - 4];
  }
  return {TimeSeriesEpoch(std::move(out), fs), truth_sdf(Family::Ma4, fourier_grid(length), fs)};
}

Simulated generate(Family f, std::size_t length, double fs, Rng& rng) {
  switch (f) {
    case Family::Ar2Mix:
      return gen_ar2_mixture(length, fs, rng);
    case Family::Ar12:
      return gen_ar12(length, rng, fs);
    case Family::Ma4:
      return gen_ma4(length, rng, fs);
  }
  throw Error(ErrorCode::InvalidInput, "unknown family");
}

SpectralCurve truth_sdf(Family f, std::span<const double> grid, double fs) {
  if (f == Family::Ar2Mix) return mixture_sdf(ar2_mixture_truth(fs), grid);
  SpectralCurve out{{grid.begin(), grid.end()}, std::vector<double>(grid.size())};
  const double z = f == Family::Ar12 ? ar12_normalizer() : ma4_normalizer();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.values[k] = (f == Family::Ar12 ? ar12_raw(grid[k]) : ma4_raw(grid[k])) / z;
  }
  return out;
}

double global_iae(const SpectralCurve& est, const SpectralCurve& truth) {
  require_shared(est, truth);
  std::vector<double> diff(est.size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = std::abs(est.values[k] - truth.values[k]);
  return integrate(est.grid, diff);
}

LocalIae local_iae(const SpectralCurve& est, const SpectralCurve& truth, double omega_max) {
  require_shared(est, truth);
  const auto& g = truth.grid;
  const auto& f = truth.values;
  const std::size_t peak = nearest_index(g, omega_max);
  const double threshold = 0.9 * f[peak];

  LocalIae out;
  std::size_t lo = peak;
  while (lo > 0 && f[lo] > threshold) --lo;
  std::size_t hi = peak;
  while (hi + 1 < g.size() && f[hi] > threshold) ++hi;
  out.band_not_found = f[lo] > threshold || f[hi] > threshold;
  out.lo = g[lo];
  out.hi = g[hi];
  for (std::size_t k = lo; k < hi; ++k) {
    const double a = std::abs(est.values[k] - f[k]);
    const double b = std::abs(est.values[k + 1] - f[k + 1]);
    out.value += 0.5 * (a + b) * (g[k + 1] - g[k]);
  }
  return out;
}

double nearest_local_max(const SpectralCurve& curve, double omega) {
  if (curve.grid.empty()) throw Error(ErrorCode::InvalidInput, "empty curve");
  std::size_t i = nearest_index(curve.grid, omega);
  const auto& v = curve.values;
  for (;;) {
    if (i + 1 < v.size() && v[i + 1] > v[i] && (i == 0 || v[i + 1] >= v[i - 1])) {
      ++i;
    } else if (i > 0 && v[i - 1] > v[i]) {
      --i;
    } else {
      return curve.grid[i];
    }
  }
}

double phase_disparity(const SpectralCurve& est, const SpectralCurve& truth, std::pair<double, double> band) {
  require_shared(est, truth);
  if (!(band.first >= 0.0 && band.first < band.second && band.second <= 0.5)) {
    throw Error(ErrorCode::InvalidInput, "band must satisfy 0 <= lo < hi <= 0.5");
  }
  return std::abs(est.grid[band_argmax(est, band)] - truth.grid[band_argmax(truth, band)]);
}

SpectralCurve nw_smoother(const Periodogram& pdgm, double bandwidth, std::span<const double> grid) {
  if (!(bandwidth > 0.0)) throw Error(ErrorCode::InvalidInput, "bandwidth must be positive");
  if (pdgm.size() == 0) throw Error(ErrorCode::InvalidInput, "empty periodogram");
  if (grid.empty()) grid = pdgm.freqs;
  SpectralCurve out{{grid.begin(), grid.end()}, std::vector<double>(grid.size())};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.values[k] = nw_at(grid[k], pdgm.freqs, pdgm.ordinates, pdgm.size(), bandwidth);
  }
  return out;
}

double loocv_score(const Periodogram& pdgm, double bandwidth) {
  if (!(bandwidth > 0.0)) throw Error(ErrorCode::InvalidInput, "bandwidth must be positive");
  if (pdgm.size() < 2) throw Error(ErrorCode::InvalidInput, "leave-one-out needs two ordinates");
  double total = 0.0;
  for (std::size_t k = 0; k < pdgm.size(); ++k) {
    const double r = pdgm.ordinates[k] - nw_at(pdgm.freqs[k], pdgm.freqs, pdgm.ordinates, k, bandwidth);
    total += r * r;
  }
  return total / static_cast<double>(pdgm.size());
}

double loocv_bandwidth(const Periodogram& pdgm, std::span<const double> candidates) {
  if (candidates.size() < 2) throw Error(ErrorCode::InvalidInput, "need at least two bandwidth candidates");
  double best = candidates[0];
  double best_score = loocv_score(pdgm, best);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = loocv_score(pdgm, candidates[i]);
    if (s < best_score) {
      best_score = s;
      best = candidates[i];
    }
  }
  return best;
}

std::vector<double> family_peaks(Family f, double fs) {
  switch (f) {
    case Family::Ar2Mix:
      return {8.0 / fs, 30.0 / fs, 60.0 / fs};
    case Family::Ar12:
      return {0.0, 0.125, 0.25, 0.375, 0.5};
    case Family::Ma4:
      return {0.156};
  }
  return {};
}

std::vector<std::pair<double, double>> family_bands(Family f, double fs) {
  switch (f) {
    case Family::Ar2Mix:
      return {{0.0, 19.0 / fs}, {19.0 / fs, 45.0 / fs}, {45.0 / fs, 0.5}};
    case Family::Ar12:
      return {{0.0, 0.05}, {0.2, 0.3}, {0.45, 0.5}, {0.1, 0.15}, {0.35, 0.4}};
    case Family::Ma4:
      return {{0.05, 0.3}};
  }
  return {};
}

MetricReport evaluate(const SpectralCurve& est, const SpectralCurve& truth, Family f, double fs) {
  MetricReport r;
  r.global_iae = global_iae(est, truth);
  for (double peak : family_peaks(f, fs)) r.local.push_back(local_iae(est, truth, nearest_local_max(truth, peak)));
  for (const auto& band : family_bands(f, fs)) r.disparity_hz.push_back(phase_disparity(est, truth, band) * fs);
  return r;
}

BenchResult run_bench(const BenchConfig& cfg) {
  validate(cfg.sim);
  BenchResult result{cfg, std::vector<ReplicateResult>(cfg.sim.replicates)};
  const auto& sim = cfg.sim;
  const auto grid = cfg.sampler.grid.empty() ? refined_fourier_grid(sim.length, 4) : cfg.sampler.grid;
  const auto candidates = cfg.nw_candidates.empty() ? default_candidates(sim.length) : cfg.nw_candidates;
  const auto truth = truth_sdf(sim.family, grid, sim.fs);

  parallel_for(sim.replicates, cfg.threads, [&](std::size_t r) {
    ReplicateResult& out = result.replicates[r];
    out.index = r;
    out.seed = derive_seed(sim.seed, r);
    Rng rng = make_stream(sim.seed, r);
    const auto data = generate(sim.family, sim.length, sim.fs, rng);

    if (cfg.oracle) {
      out.median = truth;
      out.bmard = evaluate(truth, truth, sim.family, sim.fs);
      out.nw = out.bmard;
      return;
    }

    SamplerConfig sc = cfg.sampler;
    sc.grid = grid;
    sc.seed = out.seed;
    const auto chains = estimate(data.signal, sc, cfg.chains, 1);
    out.median = median_curve(chains);
    out.bmard = evaluate(out.median, truth, sim.family, sim.fs);
    out.modal_components = modal_component_count(chains);
    out.table = parameter_summary(chains);
    for (const auto& c : chains) out.loglik_traces.push_back(c.loglik_trace);

    if (sim.family == Family::Ar2Mix && out.modal_components == 3) {
      const auto m = ar2_mixture_truth(sim.fs);
      for (std::size_t c = 0; c < 3; ++c) {
        const auto& row = out.table.blocks[c];
        out.psi_error_hz.push_back(std::abs(row.psi_hz_mean - m.components[c].phase * sim.fs));
        out.log_modulus_error.push_back(std::abs(row.log_modulus_mean - m.components[c].log_modulus));
        out.weight_error.push_back(std::abs(row.weight_mean - m.weights[c]));
      }
    }

    const auto pdgm = periodogram(standardize(data.signal));
    out.nw_bandwidth = loocv_bandwidth(pdgm, candidates);
    out.nw = evaluate(normalized(nw_smoother(pdgm, out.nw_bandwidth, grid)), truth, sim.family, sim.fs);
  });
  return result;
}

std::vector<AggregateRow> aggregate(const BenchResult& result) {
  std::vector<AggregateRow> rows;
  const auto add = [&](std::string label, const std::vector<double>& xs) {
    AggregateRow row{std::move(label), xs.size(), 0.0, 0.0};
    if (!xs.empty()) {
      for (double x : xs) row.mean += x;
      row.mean /= static_cast<double>(xs.size());
      if (xs.size() > 1) {
        for (double x : xs) row.sd += (x - row.mean) * (x - row.mean);
        row.sd = std::sqrt(row.sd / static_cast<double>(xs.size() - 1));
      }
    }
    rows.push_back(std::move(row));
  };
  const auto& sim = result.config.sim;
  const auto& reps = result.replicates;
  const auto peaks = family_peaks(sim.family, sim.fs);
  const auto bands = family_bands(sim.family, sim.fs);
  const auto hz = [&](double w) { return std::to_string(static_cast<long long>(std::llround(w * sim.fs))) + " Hz"; };

  if (sim.family == Family::Ar2Mix) {
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> psi, lm, w;
      for (const auto& r : reps) {
        if (r.psi_error_hz.size() != 3) continue;
        psi.push_back(r.psi_error_hz[c]);
        lm.push_back(r.log_modulus_error[c]);
        w.push_back(r.weight_error[c]);
      }
      add("bmard " + hz(peaks[c]) + " |psi-psi_hat| (Hz)", psi);
      add("bmard " + hz(peaks[c]) + " |L-L_hat|", lm);
      add("bmard " + hz(peaks[c]) + " |p-p_hat|", w);
    }
  }
  for (const char* method : {"bmard", "nw"}) {
    const auto pick = [&](const ReplicateResult& r) -> const MetricReport& {
      return std::string_view(method) == "bmard" ? r.bmard : r.nw;
    };
    for (std::size_t b = 0; b < bands.size(); ++b) {
      std::vector<double> xs;
      for (const auto& r : reps) xs.push_back(pick(r).disparity_hz[b]);
      add(std::string(method) + " disparity " + hz(bands[b].first) + "-" + hz(bands[b].second) + " (Hz)", xs);
    }
    for (std::size_t p = 0; p < peaks.size(); ++p) {
      std::vector<double> xs;
      for (const auto& r : reps) xs.push_back(pick(r).local[p].value);
      add(std::string(method) + " local IAE " + hz(peaks[p]), xs);
    }
    std::vector<double> xs;
    for (const auto& r : reps) xs.push_back(pick(r).global_iae);
    add(std::string(method) + " global IAE", xs);
  }
  return rows;
}

}  // namespace arspec
