#include <algorithm>
#include <cmath>
#include <random>

#include "arspec/conditions.hpp"
#include "arspec/error.hpp"
#include "doctest.h"

using namespace arspec;

namespace {

const std::vector<double> kGrid{0.1, 0.2, 0.3};

TimeSeriesEpoch dummy_epoch(double fs = 1000.0) {
  return TimeSeriesEpoch({1.0, -1.0, 2.0, 0.5, -0.3, 0.1, 0.7, -2.0}, fs);
}

MixtureState one_peak(double phase, double lm = 0.5) {
  MixtureState s;
  s.cuts = {0.0, 0.5};
  s.components = {{phase, lm}};
  s.breaks = {0.5, kClosureBreak};
  s.weights = {1.0};
  return s;
}

// A fitted trial whose draws are given explicitly.
TrialFit fake_fit(std::vector<std::vector<double>> draws, double phase = 0.03) {
  TrialFit f;
  f.ok = true;
  ChainOutput c;
  c.grid = kGrid;
  c.fs = 1000.0;
  for (std::size_t i = 0; i < draws.size(); ++i) c.states.push_back(one_peak(phase));
  c.curves = std::move(draws);
  f.chains = {c};
  f.median = median_curve(f.chains);
  return f;
}

struct Fake {
  TrialSet ts;
  std::vector<TrialFit> fits;

  void add(Cell cell, std::vector<std::vector<double>> draws, double phase = 0.03, std::string odor = "B") {
    ts.trials.push_back({dummy_epoch(), cell, "s1", std::move(odor), ""});
    fits.push_back(fake_fit(std::move(draws), phase));
    fits.back().trial = fits.size() - 1;
  }
};

Fake symmetric_fake() {
  Fake f;
  f.add(kCells[0], {{1.0, 2.0, 3.0}, {1.5, 2.5, 3.5}});
  f.add(kCells[1], {{0.5, 4.0, 1.0}, {0.7, 3.0, 1.1}});
  f.add(kCells[2], {{2.0, 2.0, 2.0}});
  f.add(kCells[3], {{3.0, 1.0, 0.5}, {2.5, 1.5, 0.25}, {2.0, 1.0, 0.0}});
  return f;
}

double mode_within(const std::vector<double>& xs, double halfwidth) {
  double best = xs.front();
  std::size_t best_count = 0;
  for (double c : xs) {
    const auto n = static_cast<std::size_t>(
        std::count_if(xs.begin(), xs.end(), [&](double v) { return std::abs(v - c) <= halfwidth; }));
    if (n > best_count) {
      best_count = n;
      best = c;
    }
  }
  return best;
}

std::size_t nearest(const std::vector<double>& grid, double w) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (std::abs(grid[i] - w) < std::abs(grid[k] - w)) k = i;
  }
  return k;
}

}  // namespace

TEST_CASE("labels") {
  CHECK(parse_condition("InSeq") == Condition::InSeq);
  CHECK(parse_condition("OutSeq") == Condition::OutSeq);
  CHECK(parse_period("PreOdor") == Period::PreOdor);
  CHECK(parse_period("Odor") == Period::Odor);
  CHECK_THROWS_AS(parse_condition("inseq"), Error);
  CHECK(to_string(kCells[3]) == "OutSeq/Odor");

  TrialSet ts;
  CHECK_THROWS_AS(validate(ts), Error);
  ts.trials.push_back({dummy_epoch(), kCells[0], "s1", "B", ""});
  CHECK_NOTHROW(validate(ts));
  ts.trials.push_back({dummy_epoch(500.0), kCells[1], "s1", "B", ""});
  CHECK_THROWS_AS(validate(ts), Error);
  ts.trials.back() = {dummy_epoch(), kCells[1], "", "B", ""};
  CHECK_THROWS_AS(validate(ts), Error);
}

TEST_CASE("combine trials") {
  Fake f;
  f.add(kCells[0], {{1.0, 1.0, 1.0}});
  f.add(kCells[0], {{2.0, 2.0, 2.0}});
  f.add(kCells[0], {{9.0, 9.0, 9.0}});
  f.add(kCells[1], {{4.0, 5.0, 6.0}});
  CHECK(combine_trials(f.ts, f.fits, kCells[0]).values == std::vector<double>{2.0, 2.0, 2.0});
  CHECK(combine_trials(f.ts, f.fits, kCells[1]).values == std::vector<double>{4.0, 5.0, 6.0});

  Fake g;
  g.add(kCells[0], {{9.0, 9.0, 9.0}});
  g.add(kCells[0], {{1.0, 1.0, 1.0}});
  g.add(kCells[0], {{2.0, 2.0, 2.0}});
  CHECK(combine_trials(g.ts, g.fits, kCells[0]).values == combine_trials(f.ts, f.fits, kCells[0]).values);

  try {
    combine_trials(f.ts, f.fits, kCells[2]);
    FAIL("expected EmptyCell");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCell);
    CHECK(std::string(e.what()).find("OutSeq/PreOdor") != std::string::npos);
  }

  f.fits[1].ok = false;  // failed trials are skipped, not used
  CHECK(combine_trials(f.ts, f.fits, kCells[0]).values == std::vector<double>{5.0, 5.0, 5.0});
}

TEST_CASE("resample bands") {
  Rng rng = make_stream(1, 0);
  const std::vector<std::vector<double>> same(4, {1.0, 2.0, 3.0});
  const std::vector<SignedCell> zero{{&same, 1.0}, {&same, -1.0}};
  const auto [lo, hi] = resample_bands(zero, kGrid, 1000, 0.05, rng);
  CHECK(lo.values == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(hi.values == std::vector<double>{0.0, 0.0, 0.0});
  CHECK_THROWS_AS(resample_bands(zero, kGrid, 999, 0.05, rng), Error);

  const std::vector<std::vector<double>> a{{1.0, 0.0, 5.0}, {4.0, 2.0, 1.0}, {2.0, 7.0, 3.0}};
  const std::vector<std::vector<double>> b{{0.5, 1.0, 2.0}, {3.0, 0.0, 0.0}, {1.0, 4.0, 6.0}};
  const std::vector<SignedCell> cells{{&a, 1.0}, {&b, -1.0}};

  SUBCASE("matches full enumeration of the 3 x 3 draw pairs") {
    // With 9 equally likely differences the 2.5% and 97.5% quantiles of a large
    // resample are the smallest and largest difference.
    Rng r = make_stream(2, 0);
    const auto [l, u] = resample_bands(cells, kGrid, 20000, 0.05, r);
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<double> all;
      for (const auto& x : a)
        for (const auto& y : b) all.push_back(x[k] - y[k]);
      CHECK(l.values[k] == *std::min_element(all.begin(), all.end()));
      CHECK(u.values[k] == *std::max_element(all.begin(), all.end()));
    }
    // gamma = 0.5: quartiles of the 9-point distribution sit strictly inside a
    // probability step (2.25/9 and 6.75/9), so they equal the 3rd and 7th values.
    Rng q = make_stream(3, 0);
    const auto [ql, qu] = resample_bands(cells, kGrid, 200000, 0.5, q);
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<double> all;
      for (const auto& x : a)
        for (const auto& y : b) all.push_back(x[k] - y[k]);
      std::sort(all.begin(), all.end());
      CHECK(ql.values[k] == all[2]);
      CHECK(qu.values[k] == all[6]);
    }
  }

  SUBCASE("nesting") {
    Rng r1 = make_stream(4, 0);
    Rng r2 = make_stream(4, 0);
    const auto [l95, u95] = resample_bands(cells, kGrid, 5000, 0.05, r1);
    const auto [l99, u99] = resample_bands(cells, kGrid, 5000, 0.01, r2);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(l99.values[k] <= l95.values[k]);
      CHECK(u99.values[k] >= u95.values[k]);
    }
  }

  SUBCASE("order of draws does not matter") {
    auto a2 = a;
    auto b2 = b;
    std::reverse(a2.begin(), a2.end());
    std::rotate(b2.begin(), b2.begin() + 1, b2.end());
    const std::vector<SignedCell> permuted{{&a2, 1.0}, {&b2, -1.0}};
    Rng r1 = make_stream(5, 0);
    Rng r2 = make_stream(5, 0);
    const auto x = resample_bands(cells, kGrid, 1000, 0.1, r1);
    const auto y = resample_bands(permuted, kGrid, 1000, 0.1, r2);
    CHECK(x.first.values == y.first.values);
    CHECK(x.second.values == y.second.values);
  }
}

TEST_CASE("Kolmogorov-Smirnov test") {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const std::vector<double> y{4.0, 5.0, 6.0};
  CHECK(ks_test(x, x).statistic == 0.0);
  CHECK(ks_test(x, x).pvalue == 1.0);
  CHECK(ks_test(x, y).statistic == 1.0);
  CHECK(ks_test(x, y).pvalue < 0.1);
  const std::vector<double> tied{1.0, 1.0, 2.0, 2.0};
  const std::vector<double> other{1.0, 2.0, 2.0, 3.0};
  CHECK(ks_test(tied, other).statistic == doctest::Approx(0.25));
  const std::vector<double> empty;
  CHECK_THROWS_AS(ks_test(x, empty), Error);

  CHECK(kolmogorov_q(0.0) == 1.0);
  // Q(1) from the alternating series, summed by hand to 6 terms.
  double q1 = 0.0;
  for (int k = 1; k <= 6; ++k) q1 += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k);
  CHECK(kolmogorov_q(1.0) == doctest::Approx(q1).epsilon(1e-12));
  CHECK(kolmogorov_q(1.36) == doctest::Approx(0.0494).epsilon(0.01));

  SUBCASE("symmetry") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z;
    for (int t = 0; t < 20; ++t) {
      std::vector<double> a(5 + t), b(9 + 2 * t);
      for (auto& v : a) v = z(rng);
      for (auto& v : b) v = 0.3 + z(rng);
      CHECK(ks_test(a, b).statistic == ks_test(b, a).statistic);
      CHECK(ks_test(a, b).pvalue == ks_test(b, a).pvalue);
    }
  }

  SUBCASE("p-value against a permutation oracle, n = m = 30") {
    // For continuous data D depends only on the interleaving of the labels.
    const int n = 30;
    const int perms = 1000000;
    std::mt19937_64 rng(7);
    std::vector<int> count(n + 1, 0);
    std::vector<int> lab(2 * n);
    for (int i = 0; i < 2 * n; ++i) lab[i] = i < n;
    for (int t = 0; t < perms; ++t) {
      std::shuffle(lab.begin(), lab.end(), rng);
      int a = 0, b = 0, d = 0;
      for (int v : lab) {
        v ? ++a : ++b;
        d = std::max(d, std::abs(a - b));
      }
      ++count[d];
    }
    for (int d = 4; d <= 14; ++d) {
      double tail = 0.0;
      for (int e = d; e <= n; ++e) tail += count[e];
      tail /= perms;
      // Samples realizing D = d / n: the first d of x sit below all of y.
      std::vector<double> xs, ys;
      for (int i = 0; i < n; ++i) xs.push_back(i < d ? -100.0 + i : 2.0 * i + 0.5);
      for (int i = 0; i < n; ++i) ys.push_back(2.0 * i + 1.0);
      const auto r = ks_test(xs, ys);
      REQUIRE(r.statistic == doctest::Approx(static_cast<double>(d) / n));
      CHECK(std::abs(r.pvalue - tail) < 0.01);
    }
  }
}

TEST_CASE("contrast on fitted cells") {
  SUBCASE("identical draws in every cell give zero contrasts") {
    Fake f;
    for (const auto& c : kCells) f.add(c, {{1.0, 3.0, 2.0}, {2.0, 1.0, 0.5}});
    const auto r = contrast(f.ts, f.fits, {});
    CHECK(r.delta_in.values == std::vector<double>(3, 0.0));
    CHECK(r.delta_out.values == std::vector<double>(3, 0.0));
    CHECK(r.delta_io.values == std::vector<double>(3, 0.0));
    REQUIRE(r.ks.size() == 4);
    for (const auto& row : r.ks) CHECK(row.result.pvalue == 1.0);
  }

  SUBCASE("identities") {
    auto f = symmetric_fake();
    const auto r = contrast(f.ts, f.fits, {});
    const auto ia = combine_trials(f.ts, f.fits, kCells[0]).values;
    const auto ib = combine_trials(f.ts, f.fits, kCells[1]).values;
    const auto oa = combine_trials(f.ts, f.fits, kCells[2]).values;
    const auto ob = combine_trials(f.ts, f.fits, kCells[3]).values;
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(r.delta_io.values[k] == r.delta_in.values[k] - r.delta_out.values[k]);
      // Positive interaction exactly when the condition gap shrinks from A to B.
      CHECK((r.delta_io.values[k] > 0) == (ia[k] - oa[k] > ib[k] - ob[k]));
      CHECK(r.bands[2].first.values[k] <= r.bands[2].second.values[k]);
      CHECK(r.flagged[k] == (r.bands[2].first.values[k] > 0 || r.bands[2].second.values[k] < 0));
    }

    // Swapping the condition labels flips the interaction exactly.
    auto swapped = f;
    for (auto& t : swapped.ts.trials) {
      t.cell.condition = t.cell.condition == Condition::InSeq ? Condition::OutSeq : Condition::InSeq;
    }
    const auto s = contrast(swapped.ts, swapped.fits, {});
    for (std::size_t k = 0; k < 3; ++k) CHECK(s.delta_io.values[k] == -r.delta_io.values[k]);
  }

  SUBCASE("missing cell") {
    Fake f;
    for (std::size_t c = 0; c < 3; ++c) f.add(kCells[c], {{1.0, 1.0, 1.0}});
    try {
      contrast(f.ts, f.fits, {});
      FAIL("expected EmptyCell");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyCell);
      CHECK(std::string(e.what()).find("OutSeq/Odor") != std::string::npos);
    }
  }

  SUBCASE("stratified KS rows") {
    Fake f;
    for (const auto& c : kCells) {
      f.add(c, {{1.0, 1.0, 1.0}}, 0.02, "B");
      f.add(c, {{1.0, 1.0, 1.0}}, 0.03, "C");
    }
    ContrastOptions opt;
    opt.stratify_by_odor = true;
    const auto r = contrast(f.ts, f.fits, opt);
    REQUIRE(r.ks.size() == 8);
    CHECK(r.ks[0].odor == "B");
    CHECK(r.ks[4].odor == "C");
    CHECK(r.ks[0].n_first == 1);
  }
}

TEST_CASE("peak distribution") {
  Fake f;
  f.add(kCells[0], {{1.0, 1.0, 1.0}}, 0.008);
  const auto peaks = peak_distribution(f.ts, f.fits, kCells[0]);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0] == doctest::Approx(8.0));

  Fake g;
  for (int i = 0; i < 4; ++i) g.add(kCells[1], {{1.0, 1.0, 1.0}}, 0.05);
  const auto same = peak_distribution(g.ts, g.fits, kCells[1]);
  CHECK(same == std::vector<double>(4, same[0]));
}

TEST_CASE("fit trials") {
  SamplerConfig cfg;
  cfg.iterations = 300;
  cfg.burnin = 200;
  cfg.grid = midpoint_grid(100);

  FixtureSpec spec;
  spec.trials_per_cell = {2, 2, 2, 2};
  spec.length = 128;
  spec.identical_cells = true;
  const auto ts = make_fixture(spec, 3);
  REQUIRE(ts.trials.size() == 8);
  CHECK(ts.trials[0].epoch.samples() == ts.trials[2].epoch.samples());
  CHECK(ts.trials[0].epoch.samples() != ts.trials[1].epoch.samples());
  CHECK(trial_seed(ts, 0, 9) == trial_seed(ts, 2, 9));
  CHECK(trial_seed(ts, 0, 9) != trial_seed(ts, 1, 9));

  const auto fits = fit_trials(ts, cfg, 1, 2);
  REQUIRE(fits.size() == 8);
  for (const auto& f : fits) {
    CHECK(f.ok);
    CHECK(f.chains.size() == 1);
  }
  CHECK(fits[0].chains[0].curves == fits[2].chains[0].curves);
  CHECK(fits[0].chains[0].curves == fits[6].chains[0].curves);

  const auto r = contrast(ts, fits, {});
  for (double v : r.delta_io.values) CHECK(v == 0.0);
  for (double v : r.delta_in.values) CHECK(v == 0.0);
  for (const auto& row : r.ks) CHECK(row.result.pvalue == 1.0);

  const auto again = fit_trials(ts, cfg, 1, 1);
  for (std::size_t i = 0; i < fits.size(); ++i) CHECK(again[i].median.values == fits[i].median.values);

  TrialSet one;
  one.trials.push_back(ts.trials[0]);
  CHECK(fit_trials(one, cfg).size() == 1);

  SUBCASE("a failing trial is flagged, not dropped") {
    TrialSet bad = one;
    bad.trials.push_back({TimeSeriesEpoch(std::vector<double>(16, 2.0), 1000.0), kCells[1], "s1", "B", ""});
    const auto out = fit_trials(bad, cfg);
    REQUIRE(out.size() == 2);
    CHECK(out[0].ok);
    CHECK_FALSE(out[1].ok);
    CHECK(out[1].error.find("ZeroVarianceSignal") != std::string::npos);
  }
}

TEST_CASE("injected peak separates the cells") {
  SamplerConfig cfg;
  cfg.iterations = 3000;
  cfg.burnin = 2000;
  FixtureSpec spec;
  spec.trials_per_cell = {3, 3, 3, 3};
  spec.inject = {{Condition::InSeq, Period::Odor}};
  const auto ts = make_fixture(spec, 11);
  const auto fits = fit_trials(ts, cfg);
  const auto r = contrast(ts, fits, {});
  const std::size_t k = nearest(r.grid, 0.03);
  const auto pre = combine_trials(ts, fits, kCells[0]);
  const auto odor = combine_trials(ts, fits, kCells[1]);
  CHECK(odor.values[k] > pre.values[k]);
  CHECK(r.delta_in.values[k] < 0.0);
  CHECK(r.bands[2].second.values[k] < 0.0);
  CHECK(r.flagged[k]);
}

TEST_CASE("dominant peak recovery over 20 trials") {
  SamplerConfig cfg;
  cfg.iterations = 3000;
  cfg.burnin = 2000;
  FixtureSpec spec;
  spec.trials_per_cell = {20, 1, 1, 1};
  spec.inject = {kCells[0]};
  spec.inject_weight = 0.8;
  spec.inject_log_modulus = 0.02;
  const auto ts = make_fixture(spec, 12);
  std::vector<TrialFit> fits = fit_trials(ts, cfg);
  const auto peaks = peak_distribution(ts, fits, kCells[0]);
  REQUIRE(peaks.size() == 20);
  CHECK(std::abs(mode_within(peaks, 2.0) - 30.0) <= 4.0);
}
