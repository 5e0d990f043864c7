#include "arspec/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "arspec/error.hpp"

namespace arspec {

namespace {

std::size_t stored_states(std::span<const ChainOutput> chains) {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.states.size();
  return n;
}

std::vector<const std::vector<double>*> all_draws(std::span<const ChainOutput> chains) {
  if (chains.empty()) throw Error(ErrorCode::InvalidInput, "no chains");
  std::vector<const std::vector<double>*> draws;
  for (const auto& c : chains) {
    if (c.grid != chains.front().grid) throw Error(ErrorCode::GridMismatch, "chains use different output grids");
    for (const auto& curve : c.curves) draws.push_back(&curve);
  }
  if (draws.empty()) throw Error(ErrorCode::InvalidInput, "no stored draws");
  return draws;
}

// Welford accumulator; exactly zero spread for identical inputs.
struct Moments {
  double mean_ = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;

  void add(double x) {
    ++n;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n);
    m2 += d * (x - mean_);
  }
  double mean() const { return mean_; }
  double sd() const { return n < 2 ? 0.0 : std::sqrt(std::max(0.0, m2 / static_cast<double>(n - 1))); }
};

}  // namespace

double empirical_quantile(std::vector<double>& values, double prob) {
  if (values.empty()) throw Error(ErrorCode::InvalidInput, "quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw Error(ErrorCode::InvalidInput, "quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  // Exact at the endpoints and for equal neighbours.
  if (frac == 0.0 || values[lo] == values[hi]) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

SpectralCurve pointwise_quantile(std::span<const std::vector<double>* const> curves, std::span<const double> grid,
                                 double prob) {
  if (curves.empty()) throw Error(ErrorCode::InvalidInput, "no curves");
  SpectralCurve out{{grid.begin(), grid.end()}, std::vector<double>(grid.size())};
  std::vector<double> column(curves.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (std::size_t i = 0; i < curves.size(); ++i) {
      if (curves[i]->size() != grid.size()) throw Error(ErrorCode::GridMismatch, "curve length differs from grid");
      column[i] = (*curves[i])[k];
    }
    out.values[k] = empirical_quantile(column, prob);
  }
  return out;
}

SpectralCurve median_curve(std::span<const ChainOutput> chains) {
  const auto draws = all_draws(chains);
  return pointwise_quantile(draws, chains.front().grid, 0.5);
}

std::pair<SpectralCurve, SpectralCurve> quantile_band(std::span<const ChainOutput> chains, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::InvalidInput, "gamma must lie in (0, 1)");
  const auto draws = all_draws(chains);
  return {pointwise_quantile(draws, chains.front().grid, gamma / 2.0),
          pointwise_quantile(draws, chains.front().grid, 1.0 - gamma / 2.0)};
}

std::size_t modal_component_count(std::span<const ChainOutput> chains) {
  std::map<std::size_t, std::size_t> counts;
  for (const auto& c : chains) {
    for (const auto& s : c.states) ++counts[s.size()];
  }
  if (counts.empty()) throw Error(ErrorCode::InvalidInput, "no stored states");
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

Peak dominant_peak(const MixtureState& s) {
  validate(s);
  std::size_t best = 0;
  for (std::size_t c = 1; c < s.size(); ++c) {
    // Components are phase-ordered, so strict > keeps the smaller phase on ties.
    if (s.weights[c] > s.weights[best]) best = c;
  }
  return {best, s.components[best].phase, s.components[best].log_modulus, s.weights[best]};
}

ComponentTable parameter_summary(std::span<const ChainOutput> chains, std::optional<std::size_t> true_components) {
  if (stored_states(chains) == 0) throw Error(ErrorCode::InvalidInput, "no stored states");
  ComponentTable table;
  table.components = true_components ? *true_components : modal_component_count(chains);
  table.fs = chains.front().fs;

  std::vector<Moments> psi(table.components);
  std::vector<Moments> lm(table.components);
  std::vector<Moments> w(table.components);
  for (const auto& chain : chains) {
    for (const auto& s : chain.states) {
      if (s.size() != table.components) continue;
      ++table.matched_states;
      for (std::size_t c = 0; c < s.size(); ++c) {
        psi[c].add(s.components[c].phase * chain.fs);
        lm[c].add(s.components[c].log_modulus);
        w[c].add(s.weights[c]);
      }
    }
  }
  if (table.matched_states == 0) {
    table.no_match = true;
    return table;
  }
  for (std::size_t c = 0; c < table.components; ++c) {
    table.blocks.push_back({psi[c].n, psi[c].mean(), psi[c].sd(), lm[c].mean(), lm[c].sd(), w[c].mean(), w[c].sd()});
  }
  return table;
}

Peak dominant_peak(const ComponentTable& table) {
  if (table.blocks.empty()) throw Error(ErrorCode::InvalidInput, "empty component table");
  std::size_t best = 0;
  for (std::size_t c = 1; c < table.blocks.size(); ++c) {
    const auto& a = table.blocks[c];
    const auto& b = table.blocks[best];
    if (a.weight_mean > b.weight_mean || (a.weight_mean == b.weight_mean && a.psi_hz_mean < b.psi_hz_mean)) best = c;
  }
  const auto& row = table.blocks[best];
  return {best, row.psi_hz_mean / table.fs, row.log_modulus_mean, row.weight_mean};
}

PosteriorSummary summarize(std::span<const ChainOutput> chains, double gamma,
                           std::optional<std::size_t> true_components) {
  PosteriorSummary out;
  out.median = median_curve(chains);
  std::tie(out.lower, out.upper) = quantile_band(chains, gamma);
  out.gamma = gamma;
  out.modal_components = modal_component_count(chains);
  out.table = parameter_summary(chains, true_components);
  return out;
}

}  // namespace arspec
