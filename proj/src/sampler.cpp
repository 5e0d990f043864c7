#include "arspec/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "arspec/error.hpp"
#include "arspec/parallel.hpp"

namespace arspec {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMinLogQ = -690.7755278982137;  // log(1e-300)
constexpr double kBreakEdge = 1e-12;

[[noreturn]] void bad_state(const std::string& what) { throw Error(ErrorCode::InvalidState, what); }
[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

bool accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(standard_uniform_open(rng)) < log_ratio;
}

// Maps x into the open interval (lo, hi) by wrapping around its length.
double wrap_into(double x, double lo, double hi) {
  const double width = hi - lo;
  double offset = std::fmod(x - lo, width);
  if (offset < 0.0) offset += width;
  return lo + offset;
}

double log_q_truncation(std::span<const double> breaks) {
  double log_q = std::log(breaks.back());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) log_q += std::log1p(-breaks[i]);
  return std::max(log_q, kMinLogQ);
}

double lognormal_logpdf(double x, double mu, double sigma2) {
  if (!(x > 0.0)) return kNegInf;
  const double z = std::log(x) - mu;
  return -std::log(x) - z * z / (2.0 * sigma2);
}

}  // namespace

std::vector<double> breaks_from_weights(std::span<const double> weights, std::span<const double> breaks) {
  const std::size_t n = weights.size();
  if (n == 0 || n > breaks.size()) bad_state("breaks_from_weights: bad active count");
  std::vector<double> out(breaks.begin(), breaks.end());
  // Unnormalized sticks are scale * p_c, with scale fixed by the retained last active break.
  const double last = weights[n - 1];
  const double v = breaks[n - 1];
  const double scale = v / (last + v * (1.0 - last));
  double used = 0.0;
  for (std::size_t c = 0; c + 1 < n; ++c) {
    out[c] = std::clamp(scale * weights[c] / (1.0 - scale * used), kBreakEdge, 1.0 - kBreakEdge);
    used += weights[c];
  }
  return out;
}

void validate(const MixtureState& s) {
  const std::size_t c = s.size();
  if (c == 0) bad_state("no components");
  if (s.cuts.size() != c + 1) bad_state("partition has " + std::to_string(s.cuts.size()) + " cuts for " +
                                        std::to_string(c) + " components");
  if (s.cuts.front() != 0.0 || s.cuts.back() != 0.5) bad_state("partition endpoints must be 0 and 0.5");
  for (std::size_t i = 0; i < c; ++i) {
    if (!(s.cuts[i] < s.cuts[i + 1])) bad_state("partition not strictly increasing");
    const auto& comp = s.components[i];
    if (!(comp.phase > s.cuts[i] && comp.phase < s.cuts[i + 1])) {
      bad_state("component " + std::to_string(i) + " outside its partition block");
    }
    if (!(comp.log_modulus > 0.0) || !std::isfinite(comp.log_modulus)) {
      bad_state("component " + std::to_string(i) + " has non-positive log-modulus");
    }
  }
  if (s.weights.size() != c) bad_state("weight vector length differs from component count");
  double total = 0.0;
  for (double w : s.weights) {
    if (!(w >= 0.0)) bad_state("negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) bad_state("weights not on the simplex");
  if (s.truncation() < c) bad_state("component count exceeds truncation level");
  for (double v : s.breaks) {
    if (!(v > 0.0 && v < 1.0)) bad_state("stick break outside (0, 1)");
  }
  if (!(s.alpha > 0.0) || !std::isfinite(s.alpha)) bad_state("concentration must be positive");
}

std::vector<double> stick_weights(std::span<const double> breaks, std::size_t active) {
  if (active == 0 || active > breaks.size()) bad_state("stick_weights: bad active count");
  std::vector<double> logw(active);
  double log_remaining = 0.0;
  for (std::size_t c = 0; c < active; ++c) {
    logw[c] = std::log(breaks[c]) + log_remaining;
    log_remaining += std::log1p(-breaks[c]);
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double& w : logw) {
    w = std::exp(w - top);
    total += w;
  }
  for (double& w : logw) w /= total;
  return logw;
}

void validate(const SamplerConfig& cfg) {
  if (!std::isfinite(cfg.delta) || !std::isfinite(cfg.lambda) || !std::isfinite(cfg.qexp)) {
    bad_config("prior constants must be finite");
  }
  if (!(cfg.step_phase > 0.0) || !(cfg.step_log_modulus > 0.0) || !(cfg.step_break > 0.0)) {
    bad_config("random-walk step sizes must be positive");
  }
  if (!(cfg.max_birth_log_modulus > 0.0)) bad_config("max_birth_log_modulus must be positive");
  if (!(cfg.log_modulus_ceiling > cfg.max_birth_log_modulus)) {
    bad_config("log_modulus_ceiling must exceed max_birth_log_modulus");
  }
  if (cfg.initial_components.lo < 1 || cfg.initial_components.lo > cfg.initial_components.hi) {
    bad_config("initial component range must satisfy 1 <= lo <= hi");
  }
  if (cfg.truncation.lo > cfg.truncation.hi || cfg.truncation.lo < cfg.initial_components.hi) {
    bad_config("truncation range must satisfy initial_components.hi <= lo <= hi");
  }
  if (cfg.truncation.lo < 2) bad_config("truncation level must be at least 2");
  if (!(cfg.burnin > 0 && cfg.burnin < cfg.iterations)) bad_config("require 0 < burnin < iterations");
  if (cfg.thin == 0) bad_config("thin must be positive");
  if (!(cfg.initial_alpha > 0.0)) bad_config("initial alpha must be positive");
  if (cfg.alpha_prior.kind == AlphaPrior::Kind::Gamma) {
    if (!(cfg.alpha_prior.first > 0.0 && cfg.alpha_prior.second > 0.0)) bad_config("gamma prior needs a, b > 0");
  } else if (!(cfg.alpha_prior.second > 0.0) || !std::isfinite(cfg.alpha_prior.first)) {
    bad_config("lognormal prior needs finite mu and sigma^2 > 0");
  }
  if (!cfg.grid.empty()) {
    try {
      validate_grid(cfg.grid);
    } catch (const Error& e) {
      bad_config(std::string("output grid: ") + e.what());
    }
  }
}

std::vector<double> output_grid(const SamplerConfig& cfg) {
  return cfg.grid.empty() ? midpoint_grid(SamplerConfig::kDefaultGridCells) : cfg.grid;
}

double bandwidth_prior_log_ratio(double current, double proposed, double delta) {
  return delta * std::log(current / proposed);
}

double count_prior_log_ratio(std::size_t from, std::size_t to, double lambda, double qexp) {
  return lambda * (std::pow(static_cast<double>(to), qexp) - std::pow(static_cast<double>(from), qexp));
}

double birth_proposal_ratio(double lo, double hi, double cut, double existing_phase) {
  // The reciprocal of a single indicator-selected reciprocal: the length of the
  // sub-block the new component was drawn from.
  return cut < existing_phase ? cut - lo : hi - cut;
}

double death_proposal_ratio(double lo, double cut, double hi, double merged_phase) {
  return (cut > merged_phase ? 1.0 / (cut - lo) : 0.0) + (cut < merged_phase ? 1.0 / (hi - cut) : 0.0);
}

double log_target(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg) {
  validate(s);
  const KernelTable table(pdgm.freqs);
  std::vector<double> fit(pdgm.size(), 0.0);
  std::vector<double> kernel(pdgm.size());
  double prior = cfg.lambda * std::pow(static_cast<double>(s.size()), cfg.qexp);
  for (std::size_t c = 0; c < s.size(); ++c) {
    table.evaluate(s.components[c], kernel);
    for (std::size_t k = 0; k < kernel.size(); ++k) fit[k] += 0.5 * s.weights[c] * kernel[k];
    prior -= cfg.delta * std::log(s.components[c].log_modulus);
  }
  return whittle_loglik(pdgm.ordinates, fit) + prior;
}

double alpha_count_loglik(double alpha, std::size_t components, std::size_t length) {
  if (!(alpha > 0.0)) return kNegInf;
  const double n = static_cast<double>(length);
  return (static_cast<double>(components) - 1.0) * std::log(alpha) + std::log(alpha + n) + std::lgamma(alpha + 1.0) +
         std::lgamma(n) - std::lgamma(alpha + 1.0 + n);
}

double slice_step(double current, const std::function<double(double)>& log_density, double width, Rng& rng) {
  constexpr int kMaxStepOut = 64;
  constexpr int kMaxShrink = 256;
  const double f0 = log_density(current);
  if (!std::isfinite(f0)) return current;
  const double level = f0 + std::log(standard_uniform_open(rng));

  double left = current - width * standard_uniform_open(rng);
  double right = left + width;
  if (left < 0.0) left = 0.0;
  for (int i = 0; i < kMaxStepOut && left > 0.0 && log_density(left) > level; ++i) {
    left = std::max(0.0, left - width);
  }
  for (int i = 0; i < kMaxStepOut && log_density(right) > level; ++i) right += width;

  for (int i = 0; i < kMaxShrink; ++i) {
    if (right - left <= 1e-14 * std::max(1.0, current)) return current;
    const double x = uniform_open(rng, left, right);
    if (x > 0.0 && log_density(x) > level) return x;
    if (x < current) {
      left = x;
    } else {
      right = x;
    }
  }
  return current;
}

// ---------------------------------------------------------------------------

Chain::Chain(const Periodogram& pdgm, const SamplerConfig& cfg, MixtureState state)
    : pdgm_(pdgm),
      cfg_(cfg),
      table_(pdgm.freqs),
      state_(std::move(state)),
      scratch_kernel_(pdgm.size()),
      scratch_fit_(pdgm.size()) {
  validate(cfg_);
  validate(state_);
  kernels_.assign(state_.size(), std::vector<double>(pdgm_.size()));
  for (std::size_t c = 0; c < state_.size(); ++c) table_.evaluate(state_.components[c], kernels_[c]);
  accumulate_fit(kernels_, state_.weights, fit_);
  loglik_ = whittle_loglik(pdgm_.ordinates, fit_);
}

double Chain::prior_of(const AR2Component& c) const { return -cfg_.delta * std::log(c.log_modulus); }

double Chain::log_target() const noexcept {
  double total = loglik_ + cfg_.lambda * std::pow(static_cast<double>(state_.size()), cfg_.qexp);
  for (const auto& c : state_.components) total += prior_of(c);
  return total;
}

void Chain::accumulate_fit(const std::vector<std::vector<double>>& kernels, std::span<const double> weights,
                           std::vector<double>& fit) const {
  fit.assign(pdgm_.size(), 0.0);
  for (std::size_t c = 0; c < kernels.size(); ++c) {
    const double w = 0.5 * weights[c];
    const auto& g = kernels[c];
    for (std::size_t k = 0; k < fit.size(); ++k) fit[k] += w * g[k];
  }
}

MoveOutcome Chain::birth(Rng& rng) {
  MoveOutcome out;
  const std::size_t count = state_.size();
  const std::size_t truncation = state_.truncation();
  if (count >= truncation) {
    out.status = MoveStatus::AtTruncationLimit;
    counter_.record(Move::Birth, false);
    return out;
  }
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  const std::size_t block = pick(rng);
  const double lo = state_.cuts[block];
  const double hi = state_.cuts[block + 1];
  const double cut = uniform_open(rng, lo, hi);
  const double existing = state_.components[block].phase;
  const bool new_is_left = cut < existing;
  AR2Component born;
  born.phase = new_is_left ? uniform_open(rng, lo, cut) : uniform_open(rng, cut, hi);
  born.log_modulus = uniform_open(rng, 0.0, cfg_.max_birth_log_modulus);
  if (cut == existing) {
    counter_.record(Move::Birth, false);
    return out;
  }
  const std::size_t slot = new_is_left ? block : block + 1;

  // Breaks are untouched; the active set simply grows by one stick.
  const auto weights = stick_weights(state_.breaks, count + 1);

  table_.evaluate(born, scratch_kernel_);
  scratch_fit_.assign(pdgm_.size(), 0.0);
  for (std::size_t c = 0, src = 0; c <= count; ++c) {
    const auto& g = (c == slot) ? scratch_kernel_ : kernels_[src++];
    const double w = 0.5 * weights[c];
    for (std::size_t k = 0; k < g.size(); ++k) scratch_fit_[k] += w * g[k];
  }
  const double candidate = whittle_loglik(pdgm_.ordinates, scratch_fit_);

  out.log_ratio = (candidate - loglik_) + prior_of(born) +
                  count_prior_log_ratio(count, count + 1, cfg_.lambda, cfg_.qexp) +
                  std::log(birth_proposal_ratio(lo, hi, cut, existing));
  out.accepted = accept(out.log_ratio, rng);
  counter_.record(Move::Birth, out.accepted);
  if (!out.accepted) return out;

  state_.cuts.insert(state_.cuts.begin() + static_cast<std::ptrdiff_t>(block + 1), cut);
  state_.components.insert(state_.components.begin() + static_cast<std::ptrdiff_t>(slot), born);
  state_.weights = weights;
  kernels_.insert(kernels_.begin() + static_cast<std::ptrdiff_t>(slot), scratch_kernel_);
  fit_.swap(scratch_fit_);
  loglik_ = candidate;
  return out;
}

MoveOutcome Chain::death(Rng& rng) {
  MoveOutcome out;
  const std::size_t count = state_.size();
  if (count < 2) {
    out.status = MoveStatus::SingleComponent;
    counter_.record(Move::Death, false);
    return out;
  }
  // Remove interior cut j, merging components j-1 and j.
  std::uniform_int_distribution<std::size_t> pick(1, count - 1);
  const std::size_t j = pick(rng);
  const double lo = state_.cuts[j - 1];
  const double cut = state_.cuts[j];
  const double hi = state_.cuts[j + 1];
  AR2Component merged;
  merged.phase = uniform_open(rng, lo, hi);
  merged.log_modulus = uniform_open(rng, 0.0, cfg_.max_birth_log_modulus);
  if (merged.phase == cut) {
    counter_.record(Move::Death, false);
    return out;
  }
  const auto weights = stick_weights(state_.breaks, count - 1);

  table_.evaluate(merged, scratch_kernel_);
  scratch_fit_.assign(pdgm_.size(), 0.0);
  for (std::size_t c = 0, src = 0; c + 1 < count; ++c) {
    const std::vector<double>* g = nullptr;
    if (c == j - 1) {
      g = &scratch_kernel_;
      src += 2;
    } else {
      g = &kernels_[src++];
    }
    const double w = 0.5 * weights[c];
    for (std::size_t k = 0; k < g->size(); ++k) scratch_fit_[k] += w * (*g)[k];
  }
  const double candidate = whittle_loglik(pdgm_.ordinates, scratch_fit_);

  out.log_ratio = (candidate - loglik_) + prior_of(merged) - prior_of(state_.components[j - 1]) -
                  prior_of(state_.components[j]) + count_prior_log_ratio(count, count - 1, cfg_.lambda, cfg_.qexp) +
                  std::log(death_proposal_ratio(lo, cut, hi, merged.phase));
  out.accepted = accept(out.log_ratio, rng);
  counter_.record(Move::Death, out.accepted);
  if (!out.accepted) return out;

  state_.cuts.erase(state_.cuts.begin() + static_cast<std::ptrdiff_t>(j));
  state_.components[j - 1] = merged;
  state_.components.erase(state_.components.begin() + static_cast<std::ptrdiff_t>(j));
  state_.weights = weights;
  kernels_[j - 1] = scratch_kernel_;
  kernels_.erase(kernels_.begin() + static_cast<std::ptrdiff_t>(j));
  fit_.swap(scratch_fit_);
  loglik_ = candidate;
  return out;
}

void Chain::update_phases(Rng& rng) {
  for (std::size_t c = 0; c < state_.size(); ++c) {
    const double lo = state_.cuts[c];
    const double hi = state_.cuts[c + 1];
    AR2Component proposal = state_.components[c];
    proposal.phase = wrap_into(proposal.phase + uniform_open(rng, -cfg_.step_phase, cfg_.step_phase), lo, hi);
    if (!(proposal.phase > lo && proposal.phase < hi)) {
      counter_.record(Move::Phase, false);
      continue;
    }
    table_.evaluate(proposal, scratch_kernel_);
    const double w = 0.5 * state_.weights[c];
    for (std::size_t k = 0; k < fit_.size(); ++k) {
      scratch_fit_[k] = fit_[k] + w * (scratch_kernel_[k] - kernels_[c][k]);
    }
    const double candidate = whittle_loglik(pdgm_.ordinates, scratch_fit_);
    const bool ok = accept(candidate - loglik_, rng);
    counter_.record(Move::Phase, ok);
    if (ok) {
      state_.components[c] = proposal;
      kernels_[c].swap(scratch_kernel_);
      fit_.swap(scratch_fit_);
      loglik_ = candidate;
    }
  }
}

void Chain::update_log_moduli(Rng& rng) {
  const double ceiling = cfg_.log_modulus_ceiling;
  for (std::size_t c = 0; c < state_.size(); ++c) {
    AR2Component proposal = state_.components[c];
    double value = proposal.log_modulus + uniform_open(rng, -cfg_.step_log_modulus, cfg_.step_log_modulus);
    if (value < 0.0) value = -value;
    if (value > ceiling) value = 2.0 * ceiling - value;
    if (!(value > 0.0 && value <= ceiling)) {
      counter_.record(Move::LogModulus, false);
      continue;
    }
    proposal.log_modulus = value;
    table_.evaluate(proposal, scratch_kernel_);
    const double w = 0.5 * state_.weights[c];
    for (std::size_t k = 0; k < fit_.size(); ++k) {
      scratch_fit_[k] = fit_[k] + w * (scratch_kernel_[k] - kernels_[c][k]);
    }
    const double candidate = whittle_loglik(pdgm_.ordinates, scratch_fit_);
    const double log_ratio =
        (candidate - loglik_) + bandwidth_prior_log_ratio(state_.components[c].log_modulus, value, cfg_.delta);
    const bool ok = accept(log_ratio, rng);
    counter_.record(Move::LogModulus, ok);
    if (ok) {
      state_.components[c] = proposal;
      kernels_[c].swap(scratch_kernel_);
      fit_.swap(scratch_fit_);
      loglik_ = candidate;
    }
  }
}

void Chain::update_breaks(Rng& rng) {
  const std::size_t count = state_.size();
  const std::size_t free_breaks = state_.truncation() - 1;
  const std::size_t active = std::min(count, free_breaks);
  std::normal_distribution<double> step(0.0, cfg_.step_break);
  std::vector<double> weights;
  for (std::size_t c = 0; c < active; ++c) {
    const double v = state_.breaks[c];
    const double logit = std::log(v) - std::log1p(-v);
    const double proposed = 1.0 / (1.0 + std::exp(-(logit + step(rng))));
    if (!(proposed > kBreakEdge && proposed < 1.0 - kBreakEdge)) {
      counter_.record(Move::Break, false);
      continue;
    }
    state_.breaks[c] = proposed;
    weights = stick_weights(state_.breaks, count);
    scratch_fit_.assign(fit_.size(), 0.0);
    for (std::size_t i = 0; i < count; ++i) {
      const double w = 0.5 * weights[i];
      const auto& g = kernels_[i];
      for (std::size_t k = 0; k < g.size(); ++k) scratch_fit_[k] += w * g[k];
    }
    const double candidate = whittle_loglik(pdgm_.ordinates, scratch_fit_);
    // Beta(1, alpha) prior and the logit-scale Jacobian V(1 - V).
    const double log_ratio = (candidate - loglik_) + (state_.alpha - 1.0) * (std::log1p(-proposed) - std::log1p(-v)) +
                             std::log(proposed) + std::log1p(-proposed) - std::log(v) - std::log1p(-v);
    const bool ok = accept(log_ratio, rng);
    counter_.record(Move::Break, ok);
    if (ok) {
      state_.weights = weights;
      fit_.swap(scratch_fit_);
      loglik_ = candidate;
    } else {
      state_.breaks[c] = v;
    }
  }
  // Inactive breaks see only their Beta(1, alpha) prior.
  for (std::size_t c = active; c < free_breaks; ++c) state_.breaks[c] = draw_beta(rng, 1.0, state_.alpha);
}

void Chain::update_alpha(Rng& rng) {
  if (cfg_.alpha_prior.kind == AlphaPrior::Kind::Gamma) {
    state_ = update_alpha_gamma(state_, cfg_, rng);
  } else {
    state_ = update_alpha_slice(state_, cfg_, pdgm_.length, rng);
  }
}

void Chain::sweep(Rng& rng) {
  if (standard_uniform_open(rng) < 0.5) {
    birth(rng);
  } else {
    death(rng);
  }
  update_phases(rng);
  update_log_moduli(rng);
  update_breaks(rng);
  update_alpha(rng);
}

// ---------------------------------------------------------------------------

MoveResult birth_move(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng) {
  Chain chain(pdgm, cfg, s);
  const auto outcome = chain.birth(rng);
  return {chain.state(), outcome};
}

MoveResult death_move(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng) {
  Chain chain(pdgm, cfg, s);
  const auto outcome = chain.death(rng);
  return {chain.state(), outcome};
}

MixtureState update_locations(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng) {
  Chain chain(pdgm, cfg, s);
  chain.update_phases(rng);
  return chain.state();
}

MixtureState update_bandwidths(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng) {
  Chain chain(pdgm, cfg, s);
  chain.update_log_moduli(rng);
  return chain.state();
}

MixtureState update_weights(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng) {
  Chain chain(pdgm, cfg, s);
  chain.update_breaks(rng);
  return chain.state();
}

MixtureState update_alpha_gamma(const MixtureState& s, const SamplerConfig& cfg, Rng& rng) {
  if (cfg.alpha_prior.kind != AlphaPrior::Kind::Gamma) bad_config("update_alpha_gamma needs a gamma prior");
  MixtureState out = s;
  const double m = static_cast<double>(s.truncation());
  const double shape = m + cfg.alpha_prior.first - 1.0;
  const double rate = cfg.alpha_prior.second - log_q_truncation(s.breaks);
  out.alpha = draw_gamma(rng, shape, rate);
  if (!(out.alpha > 0.0)) out.alpha = std::numeric_limits<double>::min();
  return out;
}

MixtureState update_alpha_slice(const MixtureState& s, const SamplerConfig& cfg, std::size_t length, Rng& rng) {
  if (cfg.alpha_prior.kind != AlphaPrior::Kind::LogNormal) bad_config("update_alpha_slice needs a lognormal prior");
  MixtureState out = s;
  const double mu = cfg.alpha_prior.first;
  const double sigma2 = cfg.alpha_prior.second;
  const std::size_t count = s.size();
  const auto density = [&](double a) { return lognormal_logpdf(a, mu, sigma2) + alpha_count_loglik(a, count, length); };
  out.alpha = slice_step(s.alpha, density, 1.0, rng);
  return out;
}

MixtureState initial_state(std::size_t components, std::size_t truncation, const SamplerConfig& cfg, Rng& rng) {
  if (components < 1 || components > truncation) bad_config("initial component count must be in [1, M]");
  MixtureState s;
  s.alpha = cfg.initial_alpha;
  s.cuts.resize(components + 1);
  for (std::size_t i = 0; i <= components; ++i) {
    s.cuts[i] = 0.5 * static_cast<double>(i) / static_cast<double>(components);
  }
  s.cuts.back() = 0.5;
  for (std::size_t c = 0; c < components; ++c) {
    s.components.push_back({0.5 * (s.cuts[c] + s.cuts[c + 1]), uniform_open(rng, 0.0, cfg.max_birth_log_modulus)});
  }
  s.breaks.resize(truncation);
  for (std::size_t i = 0; i + 1 < truncation; ++i) s.breaks[i] = draw_beta(rng, 1.0, s.alpha);
  s.breaks.back() = kClosureBreak;
  s.weights = stick_weights(s.breaks, components);
  return s;
}

ChainOutput run_chain(const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng) {
  validate(cfg);
  if (pdgm.size() == 0) throw Error(ErrorCode::InvalidInput, "empty periodogram");
  std::uniform_int_distribution<std::size_t> pick_m(cfg.truncation.lo, cfg.truncation.hi);
  std::uniform_int_distribution<std::size_t> pick_c(cfg.initial_components.lo, cfg.initial_components.hi);
  const std::size_t truncation = pick_m(rng);
  const std::size_t initial = pick_c(rng);

  ChainOutput out;
  out.grid = output_grid(cfg);
  out.truncation = truncation;
  out.initial_components = initial;
  out.length = pdgm.length;
  out.fs = pdgm.fs;
  out.loglik_trace.reserve(cfg.iterations);
  out.component_trace.reserve(cfg.iterations);

  const KernelTable output_table(out.grid);
  std::vector<double> kernel(out.grid.size());
  Chain chain(pdgm, cfg, initial_state(initial, truncation, cfg, rng));
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    chain.sweep(rng);
    out.loglik_trace.push_back(chain.loglik());
    out.component_trace.push_back(chain.state().size());
    if (it >= cfg.burnin && (it - cfg.burnin) % cfg.thin == 0) {
      const auto& s = chain.state();
      std::vector<double> curve(out.grid.size(), 0.0);
      for (std::size_t c = 0; c < s.size(); ++c) {
        output_table.evaluate(s.components[c], kernel);
        for (std::size_t k = 0; k < curve.size(); ++k) curve[k] += s.weights[c] * kernel[k];
      }
      out.curves.push_back(std::move(curve));
      out.states.push_back(s);
    }
  }
  out.acceptance = chain.acceptance();
  return out;
}

std::vector<ChainOutput> run_chains(const Periodogram& pdgm, const SamplerConfig& cfg, std::size_t chains,
                                    std::size_t threads) {
  if (chains == 0) bad_config("need at least one chain");
  validate(cfg);
  std::vector<ChainOutput> out(chains);
  parallel_for(chains, threads, [&](std::size_t i) {
    Rng rng = make_stream(cfg.seed, i);
    out[i] = run_chain(pdgm, cfg, rng);
  });
  return out;
}

std::vector<ChainOutput> estimate(const TimeSeriesEpoch& ts, const SamplerConfig& cfg, std::size_t chains,
                                  std::size_t threads) {
  return run_chains(periodogram(standardize(ts)), cfg, chains, threads);
}

}  // namespace arspec
