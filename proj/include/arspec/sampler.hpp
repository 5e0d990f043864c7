#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "arspec/ar2.hpp"
#include "arspec/random.hpp"
#include "arspec/signal.hpp"

namespace arspec {

// Full sampler state. Components are ordered by phase and component c lives
// in the partition block (cuts[c], cuts[c+1]); cuts[0] = 0, cuts.back() = 0.5.
// `breaks` always has the truncation length M; its last entry is the closure
// break (fixed just below 1). Active weights renormalize the first C sticks.
struct MixtureState {
  std::vector<double> cuts;
  std::vector<AR2Component> components;
  std::vector<double> breaks;
  std::vector<double> weights;
  double alpha = 1.0;

  std::size_t size() const noexcept { return components.size(); }
  std::size_t truncation() const noexcept { return breaks.size(); }

  friend bool operator==(const MixtureState&, const MixtureState&) = default;
};

inline constexpr double kClosureBreak = 1.0 - 1e-12;

// Throws InvalidState if any structural invariant fails (ordering, one phase
// per block, positive log-moduli, weights on the simplex, C <= M, alpha > 0).
void validate(const MixtureState& s);

// p_c proportional to V_c prod_{i<c}(1 - V_i), c < active, renormalized.
std::vector<double> stick_weights(std::span<const double> breaks, std::size_t active);
// Inverse of stick_weights for weights.size() active sticks: rewrites the
// leading breaks so they reproduce `weights`, keeping the last active break and
// everything after it.
std::vector<double> breaks_from_weights(std::span<const double> weights, std::span<const double> breaks);

struct AlphaPrior {
  enum class Kind { Gamma, LogNormal };
  Kind kind = Kind::Gamma;
  double first = 0.1;   // gamma shape a | lognormal mu
  double second = 0.1;  // gamma rate b  | lognormal sigma^2

  static AlphaPrior gamma(double shape, double rate) { return {Kind::Gamma, shape, rate}; }
  static AlphaPrior lognormal(double mu, double sigma2) { return {Kind::LogNormal, mu, sigma2}; }
};

struct IntRange {
  std::size_t lo = 1;
  std::size_t hi = 1;
};

struct SamplerConfig {
  double delta = -2.0;   // bandwidth prior exponent
  double lambda = -0.5;  // component-count prior exp(lambda c^q)
  double qexp = 2.0;
  double step_phase = 0.01;        // half-width, cycles/sample
  double step_log_modulus = 0.05;  // half-width
  double step_break = 0.5;         // sd of the logit-scale break walk
  double max_birth_log_modulus = 2.0;
  double log_modulus_ceiling = 10.0;
  IntRange truncation{20, 30};
  IntRange initial_components{1, 20};
  std::size_t iterations = 20000;
  std::size_t burnin = 15000;
  std::size_t thin = 10;
  AlphaPrior alpha_prior = AlphaPrior::gamma(0.1, 0.1);
  double initial_alpha = 1.0;
  std::uint64_t seed = 1;
  std::vector<double> grid;  // output grid; empty means midpoint_grid(kDefaultGridCells)

  static constexpr std::size_t kDefaultGridCells = 1000;
};

// Throws InvalidConfig.
void validate(const SamplerConfig& cfg);
std::vector<double> output_grid(const SamplerConfig& cfg);

// Prior terms enter the log-target as -delta * sum log L_c + lambda * C^q, so a
// bandwidth move L -> L* contributes delta * log(L / L*) and a move C -> C'
// contributes lambda * (C'^q - C^q); with lambda < 0 extra components cost.
double bandwidth_prior_log_ratio(double current, double proposed, double delta);
double count_prior_log_ratio(std::size_t from, std::size_t to, double lambda, double qexp);

// q(theta | theta*) / q(theta* | theta) for a birth that cuts block (lo, hi)
// at `cut` while the existing component sits at `existing_phase`.
double birth_proposal_ratio(double lo, double hi, double cut, double existing_phase);
// Same ratio for a death that removes `cut` between lo and hi and proposes
// the merged component at `merged_phase`.
double death_proposal_ratio(double lo, double cut, double hi, double merged_phase);

// Whittle log-likelihood of 0.5 * sum_c p_c g_c plus the prior terms above.
double log_target(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg);

// Unnormalized log pi(alpha | C) for the slice update, excluding the prior:
// (C-1) log alpha + log(alpha + T) + log B(alpha + 1, T).
double alpha_count_loglik(double alpha, std::size_t components, std::size_t length);

// One stepping-out / shrinkage slice step on (0, inf). Never returns a value
// <= 0; a collapsed bracket returns `current`.
double slice_step(double current, const std::function<double(double)>& log_density, double width, Rng& rng);

enum class MoveStatus { Proposed, AtTruncationLimit, SingleComponent };

struct MoveOutcome {
  bool accepted = false;
  MoveStatus status = MoveStatus::Proposed;
  double log_ratio = 0.0;
};

enum class Move : std::size_t { Birth, Death, Phase, LogModulus, Break, Count };

struct AcceptanceCounter {
  std::array<std::size_t, static_cast<std::size_t>(Move::Count)> attempts{};
  std::array<std::size_t, static_cast<std::size_t>(Move::Count)> accepts{};

  void record(Move m, bool accepted) {
    ++attempts[static_cast<std::size_t>(m)];
    if (accepted) ++accepts[static_cast<std::size_t>(m)];
  }
  double rate(Move m) const {
    const auto i = static_cast<std::size_t>(m);
    return attempts[i] == 0 ? 0.0 : static_cast<double>(accepts[i]) / static_cast<double>(attempts[i]);
  }
};

// A single MH-within-Gibbs chain. Per-component kernels on the periodogram
// frequencies are cached so a proposal touching one component re-evaluates
// only that kernel. Rejected proposals leave the state untouched.
class Chain {
 public:
  Chain(const Periodogram& pdgm, const SamplerConfig& cfg, MixtureState state);

  const MixtureState& state() const noexcept { return state_; }
  double loglik() const noexcept { return loglik_; }
  double log_target() const noexcept;
  const AcceptanceCounter& acceptance() const noexcept { return counter_; }

  MoveOutcome birth(Rng& rng);
  MoveOutcome death(Rng& rng);
  void update_phases(Rng& rng);
  void update_log_moduli(Rng& rng);
  void update_breaks(Rng& rng);
  void update_alpha(Rng& rng);

  // One full sweep in the fixed order birth-or-death, phases, log-moduli,
  // breaks, alpha.
  void sweep(Rng& rng);

 private:
  double prior_of(const AR2Component& c) const;
  void accumulate_fit(const std::vector<std::vector<double>>& kernels, std::span<const double> weights,
                      std::vector<double>& fit) const;

  const Periodogram& pdgm_;
  const SamplerConfig& cfg_;
  KernelTable table_;
  MixtureState state_;
  std::vector<std::vector<double>> kernels_;
  std::vector<double> fit_;
  double loglik_ = 0.0;
  AcceptanceCounter counter_;

  std::vector<double> scratch_kernel_;
  std::vector<double> scratch_fit_;
};

// Single-move wrappers over a fresh Chain; they return the post-move state.
struct MoveResult {
  MixtureState state;
  MoveOutcome outcome;
};

MoveResult birth_move(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng);
MoveResult death_move(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng);
MixtureState update_locations(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng);
MixtureState update_bandwidths(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng);
MixtureState update_weights(const MixtureState& s, const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng);
// alpha ~ gamma(M + a - 1, b - log q_M), q_M clamped below at 1e-300.
MixtureState update_alpha_gamma(const MixtureState& s, const SamplerConfig& cfg, Rng& rng);
MixtureState update_alpha_slice(const MixtureState& s, const SamplerConfig& cfg, std::size_t length, Rng& rng);

// Equal-width partition with phases at block midpoints; log-moduli drawn from
// U(0, max_birth_log_modulus) and breaks from Beta(1, alpha).
MixtureState initial_state(std::size_t components, std::size_t truncation, const SamplerConfig& cfg, Rng& rng);

// Thinned post-burn-in output of one chain. Curves are the normalized
// mixture sum_c p_c g_c on `grid`.
struct ChainOutput {
  std::vector<double> grid;
  std::vector<std::vector<double>> curves;
  std::vector<MixtureState> states;
  std::vector<double> loglik_trace;
  std::vector<std::size_t> component_trace;
  AcceptanceCounter acceptance;
  std::size_t truncation = 0;
  std::size_t initial_components = 0;
  std::size_t length = 0;
  double fs = 1.0;

  SpectralCurve curve(std::size_t i) const { return {grid, curves.at(i)}; }
};

ChainOutput run_chain(const Periodogram& pdgm, const SamplerConfig& cfg, Rng& rng);

// Chains use make_stream(cfg.seed, index); outputs are independent of `threads`.
std::vector<ChainOutput> run_chains(const Periodogram& pdgm, const SamplerConfig& cfg, std::size_t chains,
                                    std::size_t threads = 1);

// Standardize, take the periodogram, run the chains.
std::vector<ChainOutput> estimate(const TimeSeriesEpoch& ts, const SamplerConfig& cfg, std::size_t chains,
                                  std::size_t threads = 1);

}  // namespace arspec
