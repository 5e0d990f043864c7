#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "arspec/bench.hpp"
#include "arspec/conditions.hpp"
#include "arspec/error.hpp"
#include "arspec/io.hpp"
#include "arspec/parallel.hpp"
#include "arspec/posterior.hpp"
#include "arspec/random.hpp"
#include "arspec/sampler.hpp"

#ifndef ARSPEC_VERSION
#define ARSPEC_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace arspec;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig:
      return kExitUsage;
    case ErrorCode::NonPositiveModel:
    case ErrorCode::InvalidState:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

// Flag values as typed; converted after parsing so malformed values map to
// InvalidConfig instead of a parser-specific message.
struct SamplerFlags {
  std::size_t iters = 20000;
  std::size_t burnin = 15000;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  std::string alpha_prior = "gamma:0.1,0.1";
  double delta = -2.0;
  double lambda = -0.5;
  double qexp = 2.0;
  std::string truncation = "20:30";
  std::string init_components = "1:20";
  std::size_t grid_cells = SamplerConfig::kDefaultGridCells;
  double step_phase = 0.01;
  double step_log_modulus = 0.05;
  double step_break = 0.5;
};

void add_sampler_flags(CLI::App* sub, SamplerFlags& f) {
  sub->add_option("--iters", f.iters, "MCMC iterations per chain")->capture_default_str();
  sub->add_option("--burnin", f.burnin, "discarded leading iterations")->capture_default_str();
  sub->add_option("--thin", f.thin, "keep every n-th post-burn-in draw")->capture_default_str();
  sub->add_option("--seed", f.seed, "base seed")->capture_default_str();
  sub->add_option("--alpha-prior", f.alpha_prior, "gamma:a,b or lognormal:mu,s2")->capture_default_str();
  sub->add_option("--delta", f.delta, "bandwidth prior exponent")->capture_default_str();
  sub->add_option("--lambda", f.lambda, "component-count prior scale")->capture_default_str();
  sub->add_option("--qexp", f.qexp, "component-count prior power")->capture_default_str();
  sub->add_option("--truncation", f.truncation, "lo:hi range for the stick truncation")->capture_default_str();
  sub->add_option("--init-components", f.init_components, "lo:hi range for the initial C")->capture_default_str();
  sub->add_option("--grid-cells", f.grid_cells, "output grid size")->capture_default_str();
  sub->add_option("--step-phase", f.step_phase, "phase walk half-width")->capture_default_str();
  sub->add_option("--step-log-modulus", f.step_log_modulus, "log-modulus walk half-width")->capture_default_str();
  sub->add_option("--step-break", f.step_break, "logit break walk sd")->capture_default_str();
}

std::pair<double, double> parse_pair(const std::string& s, char sep, const std::string& what) {
  const auto pos = s.find(sep);
  try {
    if (pos == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const std::string a = s.substr(0, pos), b = s.substr(pos + 1);
    const double x = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    const double y = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    return {x, y};
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, "cannot parse " + what + " '" + s + "'");
  }
}

IntRange parse_range(const std::string& s, const std::string& what) {
  const auto [a, b] = parse_pair(s, ':', what);
  if (a < 0 || b < 0 || a != static_cast<std::size_t>(a) || b != static_cast<std::size_t>(b)) {
    throw Error(ErrorCode::InvalidConfig, what + " needs non-negative integers");
  }
  return {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
}

AlphaPrior parse_alpha_prior(const std::string& s) {
  const auto colon = s.find(':');
  const std::string kind = s.substr(0, colon);
  if (colon == std::string::npos || (kind != "gamma" && kind != "lognormal")) {
    throw Error(ErrorCode::InvalidConfig, "alpha prior must be gamma:a,b or lognormal:mu,s2");
  }
  const auto [x, y] = parse_pair(s.substr(colon + 1), ',', "alpha prior");
  return kind == "gamma" ? AlphaPrior::gamma(x, y) : AlphaPrior::lognormal(x, y);
}

SamplerConfig to_config(const SamplerFlags& f) {
  SamplerConfig c;
  c.iterations = f.iters;
  c.burnin = f.burnin;
  c.thin = f.thin;
  c.seed = f.seed;
  c.alpha_prior = parse_alpha_prior(f.alpha_prior);
  c.delta = f.delta;
  c.lambda = f.lambda;
  c.qexp = f.qexp;
  c.truncation = parse_range(f.truncation, "truncation");
  c.initial_components = parse_range(f.init_components, "init-components");
  c.step_phase = f.step_phase;
  c.step_log_modulus = f.step_log_modulus;
  c.step_break = f.step_break;
  if (f.grid_cells == 0) throw Error(ErrorCode::InvalidConfig, "grid-cells must be positive");
  c.grid = midpoint_grid(f.grid_cells);
  validate(c);
  return c;
}

json sampler_json(const SamplerFlags& f) {
  return {{"iters", f.iters},
          {"burnin", f.burnin},
          {"thin", f.thin},
          {"seed", f.seed},
          {"alpha_prior", f.alpha_prior},
          {"delta", f.delta},
          {"lambda", f.lambda},
          {"qexp", f.qexp},
          {"truncation", f.truncation},
          {"init_components", f.init_components},
          {"grid_cells", f.grid_cells},
          {"step_phase", f.step_phase},
          {"step_log_modulus", f.step_log_modulus},
          {"step_break", f.step_break}};
}

Cell parse_cell(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) throw Error(ErrorCode::InvalidConfig, "cell must look like InSeq/Odor: " + s);
  return {parse_condition(s.substr(0, slash)), parse_period(s.substr(slash + 1))};
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects what a run touched so the manifest can be written last.
class Run {
 public:
  Run(std::string command, std::vector<std::string> argv, fs::path out)
      : command_(std::move(command)), argv_(std::move(argv)), out_(std::move(out)),
        started_(std::chrono::steady_clock::now()), started_utc_(utc_now()) {}

  const fs::path& out() const { return out_; }
  fs::path file(const std::string& name) {
    outputs_.push_back(name);
    return out_ / name;
  }
  void input(const fs::path& p) { inputs_.push_back(p); }
  json config = json::object();
  json seeds = json::object();

  void write_manifest() const {
    json m;
    m["tool"] = "arspec";
    m["version"] = ARSPEC_VERSION;
    m["command"] = command_;
    m["argv"] = argv_;
    m["cwd"] = fs::current_path().string();
    m["config"] = config;
    m["seeds"] = seeds;
    m["inputs"] = json::array();
    for (const auto& p : inputs_) m["inputs"].push_back({{"path", fs::absolute(p).string()}, {"sha256", sha256_file(p)}});
    m["outputs"] = json::array();
    for (const auto& name : outputs_) m["outputs"].push_back({{"path", name}, {"sha256", sha256_file(out_ / name)}});
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    m["wall_clock"] = {{"started_utc", started_utc_}, {"seconds", secs}};
    write_text(out_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  fs::path out_;
  std::vector<fs::path> inputs_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point started_;
  std::string started_utc_;
};

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

json component_table_json(const ComponentTable& t) {
  json blocks = json::array();
  for (const auto& b : t.blocks) {
    blocks.push_back({{"draws", b.draws},
                      {"psi_hz_mean", b.psi_hz_mean},
                      {"psi_hz_sd", b.psi_hz_sd},
                      {"log_modulus_mean", b.log_modulus_mean},
                      {"log_modulus_sd", b.log_modulus_sd},
                      {"weight_mean", b.weight_mean},
                      {"weight_sd", b.weight_sd}});
  }
  return {{"components", t.components}, {"matched_states", t.matched_states}, {"no_match", t.no_match},
          {"blocks", blocks}};
}

std::string loglik_csv(const std::vector<std::vector<double>>& traces) {
  std::string s = "chain,iteration,loglik\n";
  for (std::size_t c = 0; c < traces.size(); ++c) {
    for (std::size_t i = 0; i < traces[c].size(); ++i) {
      s += std::to_string(c) + "," + std::to_string(i) + "," + format_double(traces[c][i]) + "\n";
    }
  }
  return s;
}

// ---- simulate ----

struct SimulateFlags {
  std::string family;
  std::size_t length = 500;
  double fs = 1000.0;
  std::size_t replicates = 1;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string trials_per_cell = "5,5,5,5";
  std::vector<std::string> inject;
  double inject_hz = 30.0;
  double inject_log_modulus = 0.1;
  double inject_weight = 0.5;
  bool identical_cells = false;
  std::vector<std::string> odors{"B"};
};

void simulate_trialset(const SimulateFlags& f, Run& run) {
  FixtureSpec spec;
  spec.length = f.length;
  spec.fs = f.fs;
  spec.inject_hz = f.inject_hz;
  spec.inject_log_modulus = f.inject_log_modulus;
  spec.inject_weight = f.inject_weight;
  spec.identical_cells = f.identical_cells;
  spec.odors = f.odors;
  for (const auto& s : f.inject) spec.inject.push_back(parse_cell(s));
  std::vector<std::size_t> counts;
  {
    std::string item;
    std::istringstream in(f.trials_per_cell);
    while (std::getline(in, item, ',')) {
      try {
        counts.push_back(std::stoul(item));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "trials-per-cell must be four counts: " + f.trials_per_cell);
      }
    }
  }
  if (counts.size() != 4) throw Error(ErrorCode::InvalidConfig, "trials-per-cell must be four counts");
  std::copy(counts.begin(), counts.end(), spec.trials_per_cell.begin());

  std::vector<TrialSet> sets;
  for (std::size_t r = 0; r < f.replicates; ++r) sets.push_back(make_fixture(spec, derive_seed(f.seed, r)));
  for (std::size_t r = 0; r < sets.size(); ++r) {
    const std::string dir = f.replicates == 1 ? "" : "set_" + std::to_string(r) + "/";
    write_trialset(run.file(dir + "index.csv"), sets[r]);
    for (const auto& t : sets[r].trials) run.file(dir + t.file);
  }
}

int cmd_simulate(const SimulateFlags& f, Run& run) {
  run.config = {{"family", f.family}, {"t", f.length},          {"fs", f.fs},
                {"replicates", f.replicates}, {"seed", f.seed}, {"out", f.out}};
  run.seeds["base"] = f.seed;
  if (f.family == "trialset") {
    run.config["trials_per_cell"] = f.trials_per_cell;
    run.config["inject"] = f.inject;
    run.config["inject_hz"] = f.inject_hz;
    run.config["inject_log_modulus"] = f.inject_log_modulus;
    run.config["inject_weight"] = f.inject_weight;
    run.config["identical_cells"] = f.identical_cells;
    run.config["odors"] = f.odors;
    simulate_trialset(f, run);
  } else {
    SimSpec spec{parse_family(f.family), f.length, f.fs, f.replicates, f.seed};
    validate(spec);
    for (std::size_t r = 0; r < spec.replicates; ++r) {
      Rng rng = make_stream(spec.seed, r);
      const auto sim = generate(spec.family, spec.length, spec.fs, rng);
      write_signal_csv(run.file("signal_" + std::to_string(r) + ".csv"), sim.signal);
      write_curve_csv(run.file("truth_" + std::to_string(r) + ".csv"), sim.truth, spec.fs);
    }
  }
  return 0;
}

// ---- estimate ----

struct EstimateFlags {
  std::string input;
  double fs = 1000.0;
  std::size_t chains = 2;
  double gamma = 0.05;
  std::size_t threads = 1;
  std::string out = "out";
  SamplerFlags sampler;
};

int cmd_estimate(const EstimateFlags& f, Run& run) {
  const auto cfg = to_config(f.sampler);
  if (f.chains == 0) throw Error(ErrorCode::InvalidConfig, "chains must be positive");
  if (!(f.gamma > 0.0 && f.gamma < 1.0)) throw Error(ErrorCode::InvalidConfig, "gamma must be in (0, 1)");
  run.config = sampler_json(f.sampler);
  run.config.update({{"input", f.input}, {"fs", f.fs}, {"chains", f.chains}, {"gamma", f.gamma}, {"out", f.out}});
  run.seeds["base"] = cfg.seed;
  run.input(f.input);

  const auto ts = read_signal_csv(f.input, f.fs);
  const auto chains = estimate(ts, cfg, f.chains, f.threads);
  const auto s = summarize(chains, f.gamma);

  write_curve_csv(run.file("median.csv"), s.median, f.fs);
  write_curve_csv(run.file("lower.csv"), s.lower, f.fs);
  write_curve_csv(run.file("upper.csv"), s.upper, f.fs);
  std::vector<std::vector<double>> traces;
  json acceptance = json::array();
  static constexpr const char* kMoves[] = {"birth", "death", "phase", "log_modulus", "break"};
  for (const auto& c : chains) {
    traces.push_back(c.loglik_trace);
    json a = json::object();
    for (std::size_t m = 0; m < static_cast<std::size_t>(Move::Count); ++m) {
      a[kMoves[m]] = c.acceptance.rate(static_cast<Move>(m));
    }
    acceptance.push_back({{"truncation", c.truncation},
                          {"initial_components", c.initial_components},
                          {"stored_draws", c.curves.size()},
                          {"acceptance", a}});
  }
  write_text(run.file("loglik.csv"), loglik_csv(traces));
  write_json(run.file("summary.json"), {{"gamma", s.gamma},
                                         {"modal_components", s.modal_components},
                                         {"fs", f.fs},
                                         {"length", ts.size()},
                                         {"components", component_table_json(s.table)},
                                         {"chains", acceptance}});
  return 0;
}

// ---- bench ----

struct BenchFlags {
  std::string family;
  std::size_t length = 500;
  double fs = 1000.0;
  std::size_t replicates = 1;
  std::size_t chains = 2;
  std::size_t threads = 1;
  bool oracle = false;
  std::string out = "out";
  SamplerFlags sampler;
};

int cmd_bench(const BenchFlags& f, Run& run) {
  BenchConfig bc;
  bc.sim = {parse_family(f.family), f.length, f.fs, f.replicates, f.sampler.seed};
  bc.sampler = to_config(f.sampler);
  bc.chains = f.chains;
  bc.threads = f.threads;
  bc.oracle = f.oracle;
  run.config = sampler_json(f.sampler);
  run.config.update({{"family", f.family},
                     {"t", f.length},
                     {"fs", f.fs},
                     {"replicates", f.replicates},
                     {"chains", f.chains},
                     {"oracle", f.oracle},
                     {"out", f.out}});
  run.seeds["base"] = f.sampler.seed;

  const auto result = run_bench(bc);
  const auto peaks = family_peaks(bc.sim.family, bc.sim.fs);
  const auto bands = family_bands(bc.sim.family, bc.sim.fs);

  std::string rows = "replicate,seed,method,metric,target_hz,value\n";
  auto row = [&](const ReplicateResult& r, const char* method, const char* metric, const std::string& target,
                 double v) {
    rows += std::to_string(r.index) + "," + std::to_string(r.seed) + "," + method + "," + metric + "," + target +
            "," + format_double(v) + "\n";
  };
  json reps = json::array();
  for (const auto& r : result.replicates) {
    for (const auto& [name, rep] : {std::pair{"bmard", &r.bmard}, std::pair{"nw", &r.nw}}) {
      row(r, name, "global_iae", "", rep->global_iae);
      for (std::size_t k = 0; k < rep->local.size(); ++k) {
        row(r, name, "local_iae", format_double(peaks[k] * f.fs), rep->local[k].value);
      }
      for (std::size_t k = 0; k < rep->disparity_hz.size(); ++k) {
        row(r, name, "disparity_hz", format_double(bands[k].first * f.fs) + "-" + format_double(bands[k].second * f.fs),
            rep->disparity_hz[k]);
      }
    }
    row(r, "nw", "bandwidth", "", r.nw_bandwidth);
    row(r, "bmard", "modal_components", "", static_cast<double>(r.modal_components));
    for (std::size_t k = 0; k < r.psi_error_hz.size(); ++k) {
      const std::string target = format_double(peaks[k] * f.fs);
      row(r, "bmard", "psi_error_hz", target, r.psi_error_hz[k]);
      row(r, "bmard", "log_modulus_error", target, r.log_modulus_error[k]);
      row(r, "bmard", "weight_error", target, r.weight_error[k]);
    }
    bool band_clipped = false;
    for (const auto& l : r.bmard.local) band_clipped = band_clipped || l.band_not_found;
    reps.push_back({{"index", r.index},
                    {"seed", r.seed},
                    {"modal_components", r.modal_components},
                    {"nw_bandwidth", r.nw_bandwidth},
                    {"band_not_found", band_clipped},
                    {"components", component_table_json(r.table)}});
    run.seeds["replicate_" + std::to_string(r.index)] = r.seed;
  }
  write_text(run.file("replicates.csv"), rows);

  const auto agg = aggregate(result);
  std::string table = "label,count,mean,sd\n";
  json jagg = json::array();
  for (const auto& a : agg) {
    table += a.label + "," + std::to_string(a.count) + "," + format_double(a.mean) + "," + format_double(a.sd) + "\n";
    jagg.push_back({{"label", a.label}, {"count", a.count}, {"mean", a.mean}, {"sd", a.sd}});
  }
  write_text(run.file("aggregate.csv"), table);
  write_json(run.file("aggregate.json"), {{"family", f.family}, {"rows", jagg}, {"replicates", reps}});
  return 0;
}

// ---- contrast ----

struct ContrastFlags {
  std::string index;
  std::size_t chains = 1;
  std::size_t resamples = 2000;
  double gamma = 0.05;
  bool stratify = false;
  std::size_t threads = 1;
  std::string out = "out";
  SamplerFlags sampler;
};

int cmd_contrast(const ContrastFlags& f, Run& run) {
  const auto cfg = to_config(f.sampler);
  if (f.chains == 0) throw Error(ErrorCode::InvalidConfig, "chains must be positive");
  run.config = sampler_json(f.sampler);
  run.config.update({{"index", f.index},
                     {"chains", f.chains},
                     {"resamples", f.resamples},
                     {"gamma", f.gamma},
                     {"stratify", f.stratify},
                     {"out", f.out}});
  run.seeds["base"] = cfg.seed;

  const auto ts = read_trialset(f.index);
  run.input(f.index);
  const auto dir = fs::path(f.index).parent_path();
  for (const auto& t : ts.trials) run.input(fs::path(t.file).is_absolute() ? fs::path(t.file) : dir / t.file);

  const auto fits = fit_trials(ts, cfg, f.chains, f.threads);
  ContrastOptions opt;
  opt.gamma = f.gamma;
  opt.resamples = f.resamples;
  opt.seed = cfg.seed;
  opt.stratify_by_odor = f.stratify;
  const auto c = contrast(ts, fits, opt);
  const double fs = ts.trials.front().epoch.fs();

  const std::pair<const char*, const SpectralCurve*> deltas[] = {
      {"delta_in", &c.delta_in}, {"delta_out", &c.delta_out}, {"delta_io", &c.delta_io}};
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string name = deltas[k].first;
    write_curve_csv(run.file(name + ".csv"), *deltas[k].second, fs);
    write_curve_csv(run.file(name + "_lower.csv"), c.bands[k].first, fs);
    write_curve_csv(run.file(name + "_upper.csv"), c.bands[k].second, fs);
  }

  std::string flagged = "omega,hz\n";
  json jflag = json::array();
  for (std::size_t k = 0; k < c.grid.size(); ++k) {
    if (!c.flagged[k]) continue;
    flagged += format_double(c.grid[k]) + "," + format_double(c.grid[k] * fs) + "\n";
    jflag.push_back(c.grid[k] * fs);
  }
  write_text(run.file("flagged.csv"), flagged);

  std::string peaks = "condition,phase,hz\n";
  for (std::size_t k = 0; k < kCells.size(); ++k) {
    for (double hz : c.peaks_hz[k]) {
      peaks += std::string(to_string(kCells[k].condition)) + "," + std::string(to_string(kCells[k].period)) + "," +
               format_double(hz) + "\n";
    }
  }
  write_text(run.file("peaks.csv"), peaks);

  std::string ks = "odor,first,second,n_first,n_second,statistic,pvalue\n";
  json jks = json::array();
  for (const auto& r : c.ks) {
    ks += r.odor + "," + to_string(r.first) + "," + to_string(r.second) + "," + std::to_string(r.n_first) + "," +
          std::to_string(r.n_second) + "," + format_double(r.result.statistic) + "," +
          format_double(r.result.pvalue) + "\n";
    jks.push_back({{"odor", r.odor},
                   {"first", to_string(r.first)},
                   {"second", to_string(r.second)},
                   {"n_first", r.n_first},
                   {"n_second", r.n_second},
                   {"statistic", r.result.statistic},
                   {"pvalue", r.result.pvalue}});
  }
  write_text(run.file("ks.csv"), ks);

  json failures = json::array();
  for (const auto& fit : fits) {
    run.seeds["trial_" + std::to_string(fit.trial)] = fit.seed;
    if (!fit.ok) failures.push_back({{"trial", fit.trial}, {"file", ts.trials[fit.trial].file}, {"error", fit.error}});
  }
  write_json(run.file("contrast.json"),
             {{"gamma", f.gamma}, {"resamples", f.resamples}, {"flagged_hz", jflag}, {"ks", jks},
              {"failed_trials", failures}});
  return 0;
}

int run_args(std::vector<std::string> args);

// Inlines `--config FILE`: every `key=value` line becomes `--key=value` unless
// the key was already given on the command line. Blank lines and lines
// starting with '#' are skipped.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  auto given = [&](const std::string& flag) {
    for (const auto& a : rest) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  auto trim = [](const std::string& x) {
    const auto b = x.find_first_not_of(" \t\r");
    return b == std::string::npos ? std::string() : x.substr(b, x.find_last_not_of(" \t\r") - b + 1);
  };
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, path + ":" + std::to_string(n) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    const std::string flag = "--" + key;
    if (!given(flag)) rest.push_back(flag + "=" + trim(line.substr(eq + 1)));
  }
  return rest;
}

// Re-executes the recorded argv from the recorded working directory after
// checking that every input still has its recorded digest.
int cmd_replay(const std::string& manifest_path, const std::string& out_override) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + manifest_path);
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, manifest_path + ": " + e.what());
  }
  for (const auto& i : m.at("inputs")) {
    const std::string p = i.at("path");
    if (sha256_file(p) != i.at("sha256").get<std::string>()) {
      throw Error(ErrorCode::InvalidInput, "input changed since the manifest was written: " + p);
    }
  }
  auto args = m.at("argv").get<std::vector<std::string>>();
  if (!out_override.empty()) {
    const std::string out = fs::absolute(out_override).string();
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] == "--out") {
        args[i + 1] = out;
        replaced = true;
      } else if (args[i].rfind("--out=", 0) == 0) {
        args[i] = "--out=" + out;
        replaced = true;
      }
    }
    if (!replaced) {
      args.push_back("--out");
      args.push_back(out);
    }
  }
  fs::current_path(m.at("cwd").get<std::string>());
  return run_args(args);
}

int run_args(std::vector<std::string> args) {
  CLI::App app{"Bayesian spectral density estimation with a mixture of AR(2) kernels"};
  app.set_version_flag("--version", std::string(ARSPEC_VERSION));
  app.require_subcommand(1);

  const std::size_t threads = default_threads();

  SimulateFlags sim;
  auto* s = app.add_subcommand("simulate", "write synthetic signals and their true SDF");
  s->add_option("--family", sim.family, "ar2mix | ar12 | ma4 | trialset")->required();
  s->add_option("--t", sim.length, "samples per signal")->capture_default_str();
  s->add_option("--fs", sim.fs, "sampling rate (Hz)")->capture_default_str();
  s->add_option("--replicates", sim.replicates, "number of signals or trial sets")->capture_default_str();
  s->add_option("--seed", sim.seed)->capture_default_str();
  s->add_option("--out", sim.out, "output directory")->capture_default_str();
  s->add_option("--trials-per-cell", sim.trials_per_cell, "trialset: counts in IA,IB,OA,OB order")
      ->capture_default_str();
  s->add_option("--inject", sim.inject, "trialset: cell(s) with the extra peak, e.g. InSeq/Odor");
  s->add_option("--inject-hz", sim.inject_hz)->capture_default_str();
  s->add_option("--inject-log-modulus", sim.inject_log_modulus)->capture_default_str();
  s->add_option("--inject-weight", sim.inject_weight)->capture_default_str();
  s->add_flag("--identical-cells", sim.identical_cells, "trialset: every cell reuses the same epochs");
  s->add_option("--odors", sim.odors, "trialset: odor labels")->capture_default_str();

  EstimateFlags est;
  est.threads = threads;
  auto* e = app.add_subcommand("estimate", "fit one signal");
  e->add_option("input", est.input, "signal CSV with a `value` column")->required();
  e->add_option("--fs", est.fs, "sampling rate (Hz)")->capture_default_str();
  e->add_option("--chains", est.chains)->capture_default_str();
  e->add_option("--gamma", est.gamma, "band level: (1 - gamma) pointwise band")->capture_default_str();
  e->add_option("--threads", est.threads)->envname("ARSPEC_THREADS");
  e->add_option("--out", est.out, "output directory")->capture_default_str();
  add_sampler_flags(e, est.sampler);

  BenchFlags bench;
  bench.threads = threads;
  auto* b = app.add_subcommand("bench", "simulate, fit and score replicates against the truth");
  b->add_option("--family", bench.family, "ar2mix | ar12 | ma4")->required();
  b->add_option("--t", bench.length)->capture_default_str();
  b->add_option("--fs", bench.fs)->capture_default_str();
  b->add_option("--replicates", bench.replicates)->capture_default_str();
  b->add_option("--chains", bench.chains)->capture_default_str();
  b->add_option("--threads", bench.threads)->envname("ARSPEC_THREADS");
  b->add_flag("--oracle", bench.oracle, "score the true SDF instead of fitting");
  b->add_option("--out", bench.out, "output directory")->capture_default_str();
  add_sampler_flags(b, bench.sampler);

  ContrastFlags con;
  con.threads = threads;
  auto* c = app.add_subcommand("contrast", "condition contrasts over a trial set");
  c->add_option("--index", con.index, "trial index CSV")->required();
  c->add_option("--chains", con.chains, "chains per trial")->capture_default_str();
  c->add_option("--resamples", con.resamples)->capture_default_str();
  c->add_option("--gamma", con.gamma)->capture_default_str();
  c->add_flag("--stratify", con.stratify, "KS tests per odor instead of pooled");
  c->add_option("--threads", con.threads)->envname("ARSPEC_THREADS");
  c->add_option("--out", con.out, "output directory")->capture_default_str();
  add_sampler_flags(c, con.sampler);
  // Trial fits default to a shorter chain than single-signal estimation.
  con.sampler.iters = 4000;
  con.sampler.burnin = 2000;

  std::string config_file;
  for (auto* sub : {s, e, b, c}) sub->add_option("--config", config_file, "flat key=value file; flags win over it");

  std::string manifest, replay_out;
  auto* r = app.add_subcommand("replay", "rerun the command recorded in a manifest");
  r->add_option("manifest", manifest)->required()->check(CLI::ExistingFile);
  r->add_option("--out", replay_out, "write outputs here instead of the recorded directory");

  args = expand_config(std::move(args));
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  if (r->parsed()) return cmd_replay(manifest, replay_out);

  const std::string cmd = app.get_subcommands().front()->get_name();
  const std::string out = cmd == "simulate"   ? sim.out
                          : cmd == "estimate" ? est.out
                          : cmd == "bench"    ? bench.out
                                              : con.out;
  Run run(cmd, args, out);
  int rc = 0;
  if (cmd == "simulate") rc = cmd_simulate(sim, run);
  if (cmd == "estimate") rc = cmd_estimate(est, run);
  if (cmd == "bench") rc = cmd_bench(bench, run);
  if (cmd == "contrast") rc = cmd_contrast(con, run);
  run.write_manifest();
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_args(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code(err.code());
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitNumeric;
  }
}
