#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "arspec/error.hpp"
#include "arspec/sampler.hpp"
#include "doctest.h"

using namespace arspec;

namespace {

MixtureState make_state(std::vector<double> cuts, std::vector<AR2Component> comps, std::size_t truncation,
                        double alpha = 1.0, double fill = 0.5) {
  MixtureState s;
  s.cuts = std::move(cuts);
  s.components = std::move(comps);
  s.breaks.assign(truncation, fill);
  s.breaks.back() = kClosureBreak;
  s.weights = stick_weights(s.breaks, s.components.size());
  s.alpha = alpha;
  return s;
}

Periodogram flat_periodogram(std::size_t length) {
  Periodogram p;
  p.freqs = fourier_grid(length);
  p.ordinates.assign(p.freqs.size(), 1.0);
  p.length = length;
  return p;
}

Periodogram simulated_periodogram(std::uint64_t seed, std::size_t length = 256) {
  Rng rng = make_stream(seed, 0);
  const MixtureSpec m{{{0.05, 0.05}, {0.2, 0.1}}, {0.4, 0.6}};
  return periodogram(standardize(simulate_mixture(m, length, rng)));
}

SamplerConfig short_config(std::size_t iterations = 400, std::size_t burnin = 200) {
  SamplerConfig cfg;
  cfg.iterations = iterations;
  cfg.burnin = burnin;
  cfg.thin = 5;
  cfg.grid = midpoint_grid(200);
  return cfg;
}

double whittle_of(const MixtureState& s, const Periodogram& p) {
  std::vector<double> fit(p.size(), 0.0);
  for (std::size_t c = 0; c < s.size(); ++c) {
    const auto g = ar2_kernel(s.components[c], p.freqs);
    for (std::size_t k = 0; k < p.size(); ++k) fit[k] += 0.5 * s.weights[c] * g.values[k];
  }
  return whittle_loglik(p, {p.freqs, fit});
}

}  // namespace

TEST_CASE("proposal ratios") {
  CHECK(birth_proposal_ratio(0.0, 0.5, 0.2, 0.3) == 0.2);
  CHECK(birth_proposal_ratio(0.0, 0.5, 0.4, 0.3) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(death_proposal_ratio(0.0, 0.2, 0.5, 0.3) == 10.0 / 3.0);
  CHECK(death_proposal_ratio(0.0, 0.2, 0.5, 0.1) == 5.0);
}

TEST_CASE("prior log ratios") {
  CHECK(bandwidth_prior_log_ratio(0.1, 0.2, -2.0) == doctest::Approx(1.3862943611198906).epsilon(1e-15));
  CHECK(bandwidth_prior_log_ratio(0.3, 0.3 + 1e-12, -2.0) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(count_prior_log_ratio(2, 3, -0.5, 2.0) == -2.5);
  CHECK(count_prior_log_ratio(3, 2, -0.5, 2.0) == 2.5);
  CHECK(count_prior_log_ratio(2, 3, 0.5, 2.0) == 2.5);
}

TEST_CASE("stick weights") {
  const std::vector<double> breaks{0.5, 0.5, 0.5, 0.7, kClosureBreak};
  const auto w = stick_weights(breaks, 3);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(0.5 / 0.875));
  CHECK(w[1] == doctest::Approx(0.25 / 0.875));
  CHECK(w[2] == doctest::Approx(0.125 / 0.875));
  CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
  CHECK(stick_weights(breaks, 1) == std::vector<double>{1.0});

  SUBCASE("inverse") {
    const std::vector<double> target{0.1, 0.6, 0.3};
    const auto b = breaks_from_weights(target, breaks);
    const auto back = stick_weights(b, 3);
    for (std::size_t c = 0; c < 3; ++c) CHECK(back[c] == doctest::Approx(target[c]).epsilon(1e-12));
    CHECK(b[2] == breaks[2]);
    CHECK(b[3] == breaks[3]);
  }

  SUBCASE("tiny sticks") {
    std::vector<double> deep(30, 1.0 - 1e-12);
    const auto t = stick_weights(deep, 30);
    CHECK(std::abs(std::accumulate(t.begin(), t.end(), 0.0) - 1.0) < 1e-12);
    for (double v : t) CHECK(std::isfinite(v));
  }
}

TEST_CASE("state validation") {
  const auto ok = make_state({0.0, 0.2, 0.5}, {{0.1, 0.5}, {0.3, 0.5}}, 5);
  CHECK_NOTHROW(validate(ok));

  auto bad = ok;
  bad.components[1].log_modulus = 0.0;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = ok;
  bad.components[0].phase = 0.25;  // outside (0, 0.2)
  CHECK_THROWS_AS(validate(bad), Error);
  bad = ok;
  bad.cuts[1] = 0.6;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = ok;
  bad.weights[0] += 1e-9;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = ok;
  bad.breaks.resize(1);
  CHECK_THROWS_AS(validate(bad), Error);
  bad = ok;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("config validation") {
  SamplerConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  auto bad = cfg;
  bad.burnin = bad.iterations;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = cfg;
  bad.step_phase = 0.0;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = cfg;
  bad.max_birth_log_modulus = -1.0;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = cfg;
  bad.truncation = {10, 30};  // below initial_components.hi = 20
  CHECK_THROWS_AS(validate(bad), Error);
  bad = cfg;
  bad.grid = {0.3, 0.2};
  CHECK_THROWS_AS(validate(bad), Error);
  try {
    validate(bad);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
  CHECK(output_grid(cfg).size() == SamplerConfig::kDefaultGridCells);
}

TEST_CASE("log target") {
  const auto p = simulated_periodogram(1);
  SamplerConfig cfg;
  auto a = make_state({0.0, 0.12, 0.5}, {{0.05, 0.1}, {0.2, 0.3}}, 20);
  auto b = a;
  b.components[1].log_modulus = 0.6;

  const double la = log_target(a, p, cfg);
  const double lb = log_target(b, p, cfg);
  CHECK(la - whittle_of(a, p) == doctest::Approx(2.0 * std::log(0.1) + 2.0 * std::log(0.3) - 0.5 * 4.0));
  // Difference splits into likelihood plus delta * log(L / L*).
  CHECK((lb - la) - (whittle_of(b, p) - whittle_of(a, p)) ==
        doctest::Approx(bandwidth_prior_log_ratio(0.3, 0.6, cfg.delta)).epsilon(1e-10));

  b.components[0].log_modulus = -0.1;
  try {
    log_target(b, p, cfg);
    FAIL("expected InvalidState");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidState);
  }

  Chain chain(p, cfg, a);
  CHECK(chain.log_target() == doctest::Approx(la).epsilon(1e-13));
  CHECK(chain.loglik() == doctest::Approx(whittle_of(a, p)).epsilon(1e-13));
}

TEST_CASE("birth and death edge statuses") {
  const auto p = simulated_periodogram(2);
  SamplerConfig cfg;
  Rng rng = make_stream(1, 0);

  const auto single = make_state({0.0, 0.5}, {{0.2, 0.4}}, 4);
  const auto dead = death_move(single, p, cfg, rng);
  CHECK(dead.outcome.status == MoveStatus::SingleComponent);
  CHECK_FALSE(dead.outcome.accepted);
  CHECK(dead.state == single);

  const auto full = make_state({0.0, 0.1, 0.5}, {{0.05, 0.4}, {0.3, 0.4}}, 2);
  const auto born = birth_move(full, p, cfg, rng);
  CHECK(born.outcome.status == MoveStatus::AtTruncationLimit);
  CHECK(born.state == full);

  Chain chain(p, cfg, single);
  chain.death(rng);
  CHECK(chain.acceptance().attempts[static_cast<std::size_t>(Move::Death)] == 1);
  CHECK(chain.acceptance().accepts[static_cast<std::size_t>(Move::Death)] == 0);
}

TEST_CASE("birth and death ratios match log-target differences") {
  const auto p = simulated_periodogram(3);
  SamplerConfig cfg;
  int births = 0;
  int deaths = 0;
  for (std::uint64_t seed = 0; seed < 4000 && (births < 20 || deaths < 20); ++seed) {
    Rng rng = make_stream(77, seed);
    const auto s = initial_state(1 + seed % 5, 8, cfg, rng);
    const double before = log_target(s, p, cfg);

    const auto b = birth_move(s, p, cfg, rng);
    if (b.outcome.accepted) {
      ++births;
      REQUIRE(b.state.size() == s.size() + 1);
      // Locate the new cut and the block it split.
      std::size_t j = 0;
      while (j < s.size() && b.state.cuts[j + 1] == s.cuts[j + 1]) ++j;
      const double cut = b.state.cuts[j + 1];
      const double q = birth_proposal_ratio(s.cuts[j], s.cuts[j + 1], cut, s.components[j].phase);
      CHECK(b.outcome.log_ratio == doctest::Approx(log_target(b.state, p, cfg) - before + std::log(q)).epsilon(1e-9));
    } else {
      CHECK(b.state == s);
    }

    const auto d = death_move(s, p, cfg, rng);
    if (d.outcome.accepted) {
      ++deaths;
      REQUIRE(d.state.size() + 1 == s.size());
      std::size_t j = 1;
      while (d.state.cuts[j] == s.cuts[j]) ++j;
      const double q = death_proposal_ratio(s.cuts[j - 1], s.cuts[j], s.cuts[j + 1], d.state.components[j - 1].phase);
      CHECK(d.outcome.log_ratio == doctest::Approx(log_target(d.state, p, cfg) - before + std::log(q)).epsilon(1e-9));
    } else {
      CHECK(d.state == s);
    }
  }
  CHECK(births >= 20);
  CHECK(deaths >= 20);
}

TEST_CASE("moves preserve invariants and rejections are exact no-ops") {
  const auto p = simulated_periodogram(4);
  SamplerConfig cfg;
  Rng rng = make_stream(5, 0);
  Chain chain(p, cfg, initial_state(6, 12, cfg, rng));
  for (int it = 0; it < 600; ++it) {
    const auto before = chain.state();
    const auto out = (it % 2 == 0) ? chain.birth(rng) : chain.death(rng);
    if (!out.accepted) CHECK(chain.state() == before);
    CHECK_NOTHROW(validate(chain.state()));
    chain.update_phases(rng);
    CHECK_NOTHROW(validate(chain.state()));
    chain.update_log_moduli(rng);
    CHECK_NOTHROW(validate(chain.state()));
    chain.update_breaks(rng);
    CHECK_NOTHROW(validate(chain.state()));
    chain.update_alpha(rng);
    CHECK_NOTHROW(validate(chain.state()));
    for (const auto& c : chain.state().components) CHECK(c.log_modulus <= cfg.log_modulus_ceiling);
  }
  // Cached likelihood stays consistent with a fresh evaluation.
  CHECK(chain.loglik() == doctest::Approx(whittle_of(chain.state(), p)).epsilon(1e-9));
}

TEST_CASE("location updates") {
  const auto flat = flat_periodogram(128);
  SUBCASE("vanishing step is always accepted") {
    SamplerConfig cfg;
    cfg.step_phase = 1e-13;
    Rng rng = make_stream(6, 0);
    Chain chain(flat, cfg, make_state({0.0, 0.3, 0.5}, {{0.1, 0.2}, {0.4, 0.2}}, 5));
    for (int i = 0; i < 200; ++i) chain.update_phases(rng);
    CHECK(chain.acceptance().rate(Move::Phase) > 0.99);
  }
  SUBCASE("flat periodogram, one component") {
    SamplerConfig cfg;
    Rng rng = make_stream(6, 1);
    Chain chain(flat, cfg, make_state({0.0, 0.5}, {{0.2, 0.3}}, 5));
    for (int i = 0; i < 10000; ++i) chain.update_phases(rng);
    CHECK(chain.acceptance().rate(Move::Phase) > 0.0);
  }
  SUBCASE("wrapping keeps phases in their blocks") {
    SamplerConfig cfg;
    cfg.step_phase = 0.2;
    Rng rng = make_stream(6, 2);
    auto s = make_state({0.0, 0.02, 0.05, 0.5}, {{0.01, 0.5}, {0.03, 0.5}, {0.3, 0.5}}, 5);
    for (int i = 0; i < 500; ++i) {
      s = update_locations(s, flat, cfg, rng);
      CHECK_NOTHROW(validate(s));
    }
  }
}

TEST_CASE("bandwidth updates") {
  const auto flat = flat_periodogram(64);
  SamplerConfig cfg;
  cfg.step_log_modulus = 3.0;
  Rng rng = make_stream(7, 0);
  auto s = make_state({0.0, 0.5}, {{0.2, 0.01}}, 3);
  for (int i = 0; i < 2000; ++i) {
    s = update_bandwidths(s, flat, cfg, rng);
    CHECK(s.components[0].log_modulus > 0.0);
    CHECK(s.components[0].log_modulus <= cfg.log_modulus_ceiling);
  }
}

TEST_CASE("break updates follow the Beta(1, alpha) prior under a flat likelihood") {
  // With C = 1 the weight is 1 whatever the break, so break 0 samples its prior.
  const auto flat = flat_periodogram(32);
  SamplerConfig cfg;
  cfg.step_break = 1.0;
  double previous = 1.0;
  for (double alpha : {1.0, 10.0, 100.0}) {
    Rng rng = make_stream(8, static_cast<std::uint64_t>(alpha));
    Chain chain(flat, cfg, make_state({0.0, 0.5}, {{0.2, 0.3}}, 6, alpha));
    double sum = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      chain.update_breaks(rng);
      sum += chain.state().breaks[0];
      CHECK(chain.state().weights == std::vector<double>{1.0});
    }
    const double mean = sum / n;
    CHECK(mean == doctest::Approx(1.0 / (1.0 + alpha)).epsilon(0.06));
    CHECK(mean < previous);
    previous = mean;
  }
}

TEST_CASE("gamma alpha update") {
  SamplerConfig cfg;
  MixtureState s;
  s.breaks = {0.5, 0.5, kClosureBreak};
  const double shape = 3.0 + 0.1 - 1.0;
  const double rate = 0.1 - std::log(0.25 * kClosureBreak);
  CHECK(rate == doctest::Approx(1.4862943611198906).epsilon(1e-11));
  Rng rng = make_stream(9, 0);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double a = update_alpha_gamma(s, cfg, rng).alpha;
    CHECK(a > 0.0);
    sum += a;
    sq += a * a;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean / (shape / rate) - 1.0) < 0.01);
  CHECK((sq / n - mean * mean) == doctest::Approx(shape / (rate * rate)).epsilon(0.03));

  SUBCASE("underflowing stick product is clamped") {
    MixtureState deep;
    deep.breaks.assign(30, 1.0 - 1e-12);
    Rng r = make_stream(9, 1);
    for (int i = 0; i < 100; ++i) CHECK(update_alpha_gamma(deep, cfg, r).alpha > 0.0);
  }
  SUBCASE("wrong prior kind") {
    auto other = cfg;
    other.alpha_prior = AlphaPrior::lognormal(0.0, 1.0);
    CHECK_THROWS_AS(update_alpha_gamma(s, other, rng), Error);
  }
}

TEST_CASE("slice alpha update") {
  // alpha = 1, C = 3, T = 500: 1 * 501 * B(2, 500) = 501 / (500 * 501) = 0.002.
  CHECK(std::exp(alpha_count_loglik(1.0, 3, 500)) == doctest::Approx(0.002).epsilon(1e-12));
  CHECK(alpha_count_loglik(0.0, 3, 500) == -std::numeric_limits<double>::infinity());

  Rng rng = make_stream(10, 0);
  const auto spike = [](double a) { return std::abs(a - 1.0) < 1e-300 ? 0.0 : -std::numeric_limits<double>::infinity(); };
  CHECK(slice_step(1.0, spike, 1.0, rng) == 1.0);
  const auto never = [](double) { return -std::numeric_limits<double>::infinity(); };
  CHECK(slice_step(2.0, never, 1.0, rng) == 2.0);

  SUBCASE("histogram matches the normalized target") {
    const double upper = 5.0;
    const auto target = [&](double a) { return a > upper ? -std::numeric_limits<double>::infinity() : alpha_count_loglik(a, 3, 500); };
    const int bins = 10;
    std::vector<double> expected(bins, 0.0);
    const int fine = 20000;
    double total = 0.0;
    for (int i = 0; i < fine; ++i) {
      const double a = (i + 0.5) * upper / fine;
      const double d = std::exp(target(a));
      expected[static_cast<std::size_t>(i * bins / fine)] += d;
      total += d;
    }
    for (auto& e : expected) e /= total;

    std::vector<double> counts(bins, 0.0);
    double a = 1.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 5; ++k) a = slice_step(a, target, 1.0, rng);
      REQUIRE(a > 0.0);
      REQUIRE(a <= upper);
      counts[std::min<std::size_t>(bins - 1, static_cast<std::size_t>(a / upper * bins))] += 1.0;
    }
    for (int b = 0; b < bins; ++b) {
      const double sigma = std::sqrt(n * expected[b] * (1.0 - expected[b]));
      CHECK(std::abs(counts[b] - n * expected[b]) <= 3.0 * sigma + 1.0);
    }
  }

  SUBCASE("lognormal prior update stays positive") {
    SamplerConfig cfg;
    cfg.alpha_prior = AlphaPrior::lognormal(0.0, 1.0);
    auto s = make_state({0.0, 0.2, 0.5}, {{0.1, 0.3}, {0.3, 0.3}}, 4);
    for (int i = 0; i < 500; ++i) {
      s = update_alpha_slice(s, cfg, 500, rng);
      CHECK(s.alpha > 0.0);
    }
  }
}

TEST_CASE("initial state") {
  SamplerConfig cfg;
  Rng rng = make_stream(11, 0);
  const auto s = initial_state(4, 25, cfg, rng);
  CHECK_NOTHROW(validate(s));
  REQUIRE(s.size() == 4);
  for (std::size_t c = 0; c <= 4; ++c) CHECK(s.cuts[c] == doctest::Approx(0.125 * c));
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(s.components[c].phase == doctest::Approx(0.125 * c + 0.0625));
    CHECK(s.components[c].log_modulus < cfg.max_birth_log_modulus);
  }
  CHECK(s.truncation() == 25);
  CHECK(s.breaks.back() == kClosureBreak);
  CHECK(s.alpha == cfg.initial_alpha);
  CHECK_THROWS_AS(initial_state(26, 25, cfg, rng), Error);
}

TEST_CASE("run_chain output") {
  const auto p = simulated_periodogram(12);
  const auto cfg = short_config();
  Rng a = make_stream(13, 0);
  Rng b = make_stream(13, 0);
  const auto x = run_chain(p, cfg, a);
  const auto y = run_chain(p, cfg, b);
  CHECK(x.curves == y.curves);
  CHECK(x.states == y.states);
  CHECK(x.loglik_trace == y.loglik_trace);
  CHECK(x.component_trace == y.component_trace);

  CHECK(x.loglik_trace.size() == cfg.iterations);
  CHECK(x.curves.size() == (cfg.iterations - cfg.burnin) / cfg.thin);
  CHECK(x.states.size() == x.curves.size());
  CHECK(x.truncation >= cfg.truncation.lo);
  CHECK(x.truncation <= cfg.truncation.hi);
  CHECK(x.initial_components >= cfg.initial_components.lo);
  CHECK(x.initial_components <= cfg.initial_components.hi);
  for (std::size_t i = 0; i < x.curves.size(); ++i) {
    CHECK_NOTHROW(validate(x.states[i]));
    CHECK(std::abs(integrate(x.curve(i)) - 1.0) < 1e-4);
  }
}

TEST_CASE("chains are independent of thread count") {
  const auto p = simulated_periodogram(14);
  const auto cfg = short_config(200, 100);
  const auto one = run_chains(p, cfg, 3, 1);
  const auto many = run_chains(p, cfg, 3, 3);
  REQUIRE(one.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(one[i].curves == many[i].curves);
    CHECK(one[i].loglik_trace == many[i].loglik_trace);
  }
  CHECK(one[0].loglik_trace != one[1].loglik_trace);
}

TEST_CASE("scale invariance") {
  Rng rng = make_stream(15, 0);
  const auto x = simulate_ar2({0.1, 0.2}, 1.0, 128, rng);
  auto scaled = x.samples();
  for (auto& v : scaled) v *= 8.0;
  const auto cfg = short_config(200, 100);
  const auto a = estimate(x, cfg, 1);
  const auto b = estimate(TimeSeriesEpoch(scaled, x.fs()), cfg, 1);
  CHECK(a[0].curves == b[0].curves);
  CHECK(a[0].loglik_trace == b[0].loglik_trace);
}
