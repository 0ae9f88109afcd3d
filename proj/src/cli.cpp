#include "smcd/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "smcd/harness.hpp"
#include "smcd/io.hpp"
#include "smcd/oracle.hpp"
#include "smcd/rml.hpp"
#include "smcd/smc.hpp"

namespace smcd {

namespace {

// Every command-line option is also a config key; the flag wins over the file.
struct Key {
  const char* name;
  const char* help;
};

constexpr Key kModelKeys[] = {
    {"model", "hmm, lgssm or sv"},
    {"states", "finite HMM state count K"},
    {"symbols", "finite HMM alphabet size M"},
    {"theta", "parameter vector, comma separated"},
    {"seed", "seed of the particle (or simulation) random streams"},
};

constexpr Key kDataKeys[] = {
    {"data", "observation CSV (single column)"},
    {"length", "simulate this many observations instead of reading --data"},
    {"data_theta", "parameter used to simulate data (default: theta)"},
    {"data_seed", "seed used to simulate data (default: seed)"},
};

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

std::size_t get_size(const KeyValueConfig& kv, const std::string& key, std::size_t fallback) {
  const auto v = kv.find(key);
  if (!v) return fallback;
  const auto xs = parse_list(*v);
  if (xs.size() != 1 || xs[0] < 0 || xs[0] != static_cast<double>(static_cast<std::size_t>(xs[0])))
    throw std::invalid_argument(key + " must be a non-negative integer");
  return static_cast<std::size_t>(xs[0]);
}

std::string get_string(const KeyValueConfig& kv, const std::string& key, std::string fallback) {
  const auto v = kv.find(key);
  return v ? *v : std::move(fallback);
}

std::vector<std::size_t> get_size_list(const KeyValueConfig& kv, const std::string& key,
                                       std::vector<std::size_t> fallback) {
  const auto v = kv.find(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  for (double x : parse_list(*v)) {
    if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x)))
      throw std::invalid_argument(key + " entries must be non-negative integers");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

Estimator get_estimator(const KeyValueConfig& kv) {
  const auto e = get_string(kv, "estimator", "alg1");
  if (e == "alg1") return Estimator::backward_kernel;
  if (e == "pathspace") return Estimator::path_space;
  throw std::invalid_argument("unknown estimator '" + e + "' (expected alg1 or pathspace)");
}

/// "# key = value" for the resolved configuration, then the tool version.
void write_metadata(CsvWriter& w, const std::string& command, const KeyValueConfig& kv) {
  w.meta("command = " + command);
  for (const auto& [k, v] : kv.entries()) w.meta(k + " = " + v);
  w.meta("version = " + std::string(kVersion));
}

template <class M>
std::vector<typename M::Obs> typed_observations(const M& model, std::span<const double> values) {
  if constexpr (std::is_same_v<typename M::Obs, int>)
    return to_symbols(values, model.num_symbols());
  else
    return {values.begin(), values.end()};
}

/// Observations from --data, or simulated from data_theta with data_seed.
template <class M>
std::vector<typename M::Obs> load_data(const M& model, const KeyValueConfig& kv, std::size_t default_length = 0) {
  if (const auto path = kv.find("data")) {
    const auto file = read_observations(*path);
    return typed_observations(model, file.values);
  }
  const std::size_t length = get_size(kv, "length", default_length);
  if (length == 0) throw std::invalid_argument("give --data or --length");
  const M source = kv.has("data_theta") ? model.with_theta(Theta(parse_list(kv.get("data_theta")), model.theta().names))
                                        : model;
  const auto seed = static_cast<std::uint64_t>(get_size(kv, "data_seed", ModelConfig::from(kv).seed));
  return simulate(source, length, seed).observations;
}

std::string cell(double v) { return format_double(v); }
std::string cell(std::size_t v) { return std::to_string(v); }

// ---------------------------------------------------------------------------

template <class M>
void cmd_simulate(const M& model, const KeyValueConfig& kv, CsvWriter& w) {
  const std::size_t length = get_size(kv, "length", 0);
  if (length == 0) throw std::invalid_argument("simulate needs --length >= 1");
  const auto rec = simulate(model, length, ModelConfig::from(kv).seed);
  w.header({"y"});
  for (const auto& y : rec.observations) w.row({cell(static_cast<double>(y))});
}

template <class M>
void cmd_filter(const M& model, const KeyValueConfig& kv, CsvWriter& w) {
  const auto ys = load_data(model, kv);
  const auto phi = TestFunction::parse(get_string(kv, "phi", "indicator:0"));
  auto cloud = init_cloud(model, get_size(kv, "particles", 1000), ModelConfig::from(kv).seed);
  w.header({"n", "eta_phi", "log_likelihood"});
  double loglik = 0.0;
  for (std::size_t n = 0;; ++n) {
    w.row({cell(n), cell(empirical_mean(cloud, phi)), cell(loglik)});
    if (n == ys.size()) break;
    MixtureWeights mw;
    cloud = bootstrap_step(model, cloud, ys[n], &mw);
    loglik += mw.log_mean;
  }
}

template <class M>
void cmd_deriv(const M& model, const KeyValueConfig& kv, CsvWriter& w) {
  const auto ys = load_data(model, kv);
  const auto phi = TestFunction::parse(get_string(kv, "phi", "indicator:0"));
  DerivativeFilter<M> filter(get_estimator(kv), model, get_size(kv, "particles", 1000), ModelConfig::from(kv).seed);
  const auto& names = model.theta().names;
  w.header({"n", "coordinate", "zeta_phi", "eta_phi"});
  for (std::size_t n = 0;; ++n) {
    const auto z = filter.zeta().evaluate(phi);
    const double eta = empirical_mean(filter.cloud(), phi);
    for (std::size_t r = 0; r < z.size(); ++r) w.row({cell(n), names[r], cell(z[r]), cell(eta)});
    if (n == ys.size()) break;
    filter.advance(model, ys[n]);
  }
}

void write_fits(CsvWriter& w, const std::vector<std::string>& names, const std::vector<LinearFit>& fits,
                const std::string& what) {
  for (std::size_t r = 0; r < fits.size(); ++r)
    w.meta("fit " + what + " " + names[r] + ": slope = " + cell(fits[r].slope) + ", se = " + cell(fits[r].slope_se) +
           ", ci95 = [" + cell(fits[r].ci_low) + ", " + cell(fits[r].ci_high) + "]");
}

template <class M>
void cmd_variance_study(const M& model, const KeyValueConfig& kv, CsvWriter& w) {
  VarianceStudyConfig cfg;
  cfg.estimator = get_estimator(kv);
  cfg.num_particles = get_size(kv, "particles", cfg.num_particles);
  cfg.block_length = get_size(kv, "block", cfg.block_length);
  cfg.grid = get_size_list(kv, "grid", cfg.grid);
  cfg.replications = get_size(kv, "replications", cfg.replications);
  cfg.seed = ModelConfig::from(kv).seed;
  if (cfg.grid.empty()) throw std::invalid_argument("grid must not be empty");
  const auto ys = load_data(model, kv, *std::max_element(cfg.grid.begin(), cfg.grid.end()) + cfg.block_length);
  const auto curve = run_variance_study(model, std::span<const typename M::Obs>(ys), cfg);
  const auto& names = model.theta().names;
  w.header({"n", "coordinate", "mean", "variance", "used", "excluded"});
  for (const auto& p : curve.points)
    for (std::size_t r = 0; r < p.mean.size(); ++r)
      w.row({cell(p.n), names[r], cell(p.mean[r]), cell(p.variance[r]), cell(p.estimates.size()), cell(p.excluded)});
  write_fits(w, names, curve.slope, "variance~n");
}

template <class M>
void cmd_rml(const M& model, const KeyValueConfig& kv, CsvWriter& w) {
  const auto ys = load_data(model, kv);
  RmlRunConfig cfg;
  cfg.schedule = StepSizeSchedule::parse(get_string(kv, "schedule", "flat-decay:0.01,100000,50000,0.6"));
  cfg.average_window = get_size(kv, "window", cfg.average_window);
  const auto seed = ModelConfig::from(kv).seed;
  std::optional<ThetaBox> box;
  if (kv.has("box_lower") || kv.has("box_upper")) {
    ThetaBox b = model.default_box();
    if (auto v = kv.find("box_lower")) b.lower = parse_list(*v);
    if (auto v = kv.find("box_upper")) b.upper = parse_list(*v);
    if (b.lower.size() != model.dim() || b.upper.size() != model.dim())
      throw std::invalid_argument("box bounds must have one entry per coordinate");
    box = b;
  }

  const auto& names = model.theta().names;
  std::vector<std::string> header{"n"};
  header.insert(header.end(), names.begin(), names.end());
  header.insert(header.end(), {"increment_norm", "gamma", "seed"});
  w.header(header);
  const std::string seed_text = std::to_string(seed);
  auto emit = [&](const RmlStepRecord& rec) {
    std::vector<std::string> row{cell(rec.n)};
    for (double v : rec.theta) row.push_back(cell(v));
    row.insert(row.end(), {cell(rec.increment_norm), cell(rec.gamma), seed_text});
    w.row(row);
  };

  RmlRunResult res;
  const std::string gradient = get_string(kv, "gradient", "particle");
  const std::span<const typename M::Obs> obs(ys);
  if (gradient == "exact") {
    if constexpr (std::is_same_v<M, FiniteHmm>) {
      RmlState<FiniteHmm, ExactHmmFilter> state{model, ExactHmmFilter(model),
                                                 box ? *box : model.default_box(), 0, std::nullopt, 0};
      res = run_rml(state, obs, cfg, emit);
    } else {
      throw std::invalid_argument("exact gradients are only available for the finite HMM");
    }
  } else if (gradient == "particle") {
    auto state = rml_init(model, get_estimator(kv), get_size(kv, "particles", 500), seed, box);
    res = run_rml(state, obs, cfg, emit);
  } else {
    throw std::invalid_argument("unknown gradient '" + gradient + "' (expected particle or exact)");
  }
  w.meta("converged = " + format_list(res.converged));
  w.meta("clamp_events = " + std::to_string(res.clamp_events));
}

void cmd_rate_study(const FiniteHmm& model, const KeyValueConfig& kv, CsvWriter& w) {
  RateStudyConfig cfg;
  cfg.estimator = get_estimator(kv);
  cfg.particle_grid = get_size_list(kv, "grid", cfg.particle_grid);
  cfg.time = get_size(kv, "time", cfg.time);
  cfg.replications = get_size(kv, "replications", cfg.replications);
  cfg.phi = TestFunction::parse(get_string(kv, "phi", "indicator:0"));
  cfg.seed = ModelConfig::from(kv).seed;
  const auto ys = load_data(model, kv, cfg.time);
  const auto curve = run_rate_study(model, ys, cfg);
  const auto& names = model.theta().names;
  w.header({"particles", "coordinate", "rmse", "bias", "excluded", "exact_zeta_phi"});
  for (const auto& p : curve.points)
    for (std::size_t r = 0; r < p.rmse.size(); ++r)
      w.row({cell(p.num_particles), names[r], cell(p.rmse[r]), cell(p.bias[r]), cell(p.excluded),
             cell(curve.exact_zeta[r])});
  write_fits(w, names, curve.slope, "log(rmse)~log(N)");
}

void cmd_oracle_hmm(const FiniteHmm& model, const KeyValueConfig& kv, CsvWriter& w) {
  const auto ys = load_data(model, kv);
  const auto phi_fn = TestFunction::parse(get_string(kv, "phi", "indicator:0"));
  std::vector<double> phi(model.num_states());
  for (std::size_t x = 0; x < phi.size(); ++x) phi[x] = phi_fn(static_cast<int>(x));
  const auto& names = model.theta().names;
  w.header({"n", "coordinate", "eta_phi", "zeta_phi", "score_increment", "log_evidence"});
  auto st = exact_hmm_init(model);
  for (std::size_t n = 0; n < ys.size(); ++n) {
    const auto z = exact_zeta(st, phi);
    const auto inc = exact_score_increment(model, st, ys[n]);
    const double eta = exact_eta(st, phi);
    for (std::size_t r = 0; r < z.size(); ++r)
      w.row({cell(n), names[r], cell(eta), cell(z[r]), cell(inc[r]), cell(st.log_evidence)});
    st = exact_hmm_step(model, st, ys[n]);
  }
}

void cmd_oracle_lgssm(const LinearGaussianModel& model, const KeyValueConfig& kv, CsvWriter& w) {
  const auto ys = load_data(model, kv);
  const auto& names = model.theta().names;
  w.header({"n", "coordinate", "predictive_mean", "d_predictive_mean", "score_increment", "log_evidence"});
  auto st = tangent_kalman_init(model);
  for (std::size_t n = 0; n < ys.size(); ++n) {
    auto next = tangent_kalman_step(model, st, ys[n]);
    for (std::size_t r = 0; r < model.dim(); ++r)
      w.row({cell(n), names[r], cell(st.mean), cell(st.dmean[r]), cell(next.last_grad_increment[r]),
             cell(st.log_evidence)});
    st = std::move(next);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Particle filter derivatives, recursive maximum likelihood and exact oracles", "smcderiv"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    std::string config;
    std::string output;
    std::vector<std::pair<std::string, CLI::Option*>> keys;
    std::vector<std::string> values;
  };
  std::vector<std::unique_ptr<Command>> commands;

  auto add = [&](const char* name, const char* help, std::initializer_list<Key> extra, bool data) {
    auto c = std::make_unique<Command>();
    c->app = app.add_subcommand(name, help);
    c->app->add_option("--config", c->config, "key = value config file")->check(CLI::ExistingFile);
    c->app->add_option("-o,--output", c->output, "write CSV here instead of stdout");
    std::vector<Key> keys(std::begin(kModelKeys), std::end(kModelKeys));
    if (data) keys.insert(keys.end(), std::begin(kDataKeys), std::end(kDataKeys));
    keys.insert(keys.end(), extra);
    c->values.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i)
      c->keys.emplace_back(keys[i].name, c->app->add_option(flag_name(keys[i].name), c->values[i], keys[i].help));
    commands.push_back(std::move(c));
  };

  const Key particles{"particles", "particle count N"};
  const Key estimator{"estimator", "alg1 (backward kernel, O(N^2)) or pathspace (O(N))"};
  const Key phi{"phi", "test function: indicator:a, clip:c or identity"};
  add("simulate", "simulate an observation record", {{"length", "number of observations"}}, false);
  add("filter", "run the bootstrap filter and report eta_n(phi)", {particles, phi}, true);
  add("deriv", "run a filter-derivative estimator and report zeta_n(phi)", {particles, estimator, phi}, true);
  add("variance-study", "variance of block-score estimates against time",
      {particles, estimator, {"block", "block length L"}, {"grid", "comma list of block start times"},
       {"replications", "replications per grid point"}},
      true);
  add("rml", "recursive maximum likelihood; theta is the starting point",
      {particles, estimator, {"schedule", "constant:g | flat-decay:g0,n0,c,e | table:g0,g1,..."},
       {"window", "iterates averaged into the converged value"}, {"gradient", "particle or exact (finite HMM)"},
       {"box_lower", "lower clamp bounds"}, {"box_upper", "upper clamp bounds"}},
      true);
  add("rate-study", "RMSE of zeta^N(phi) against the exact finite-HMM value over a particle grid",
      {estimator, phi, {"grid", "comma list of particle counts"}, {"time", "time n"},
       {"replications", "replications per particle count"}},
      true);
  add("oracle", "exact filter, derivative and score (finite HMM) or tangent Kalman (LGSSM)", {phi}, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  for (const auto& c : commands) {
    if (!c->app->parsed()) continue;
    const std::string name = c->app->get_name();
    try {
      KeyValueConfig kv = c->config.empty() ? KeyValueConfig{} : KeyValueConfig::load(c->config);
      for (std::size_t i = 0; i < c->keys.size(); ++i)
        if (c->keys[i].second->count() > 0) kv.set(c->keys[i].first, c->values[i]);
      const auto mc = ModelConfig::from(kv);
      const AnyModel model = make_model(mc);
      // Record the defaults that shape the output too.
      kv.set("seed", std::to_string(mc.seed));
      if (mc.kind == ModelKind::finite_hmm) {
        kv.set("states", std::to_string(mc.states));
        kv.set("symbols", std::to_string(mc.symbols));
      }

      std::ofstream file;
      if (!c->output.empty()) {
        file.open(c->output, std::ios::binary);
        if (!file) throw std::runtime_error("cannot write " + c->output);
      }
      CsvWriter w(c->output.empty() ? out : file);
      write_metadata(w, name, kv);

      std::visit(
          [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if (name == "simulate") return cmd_simulate(m, kv, w);
            if (name == "filter") return cmd_filter(m, kv, w);
            if (name == "deriv") return cmd_deriv(m, kv, w);
            if (name == "variance-study") return cmd_variance_study(m, kv, w);
            if (name == "rml") return cmd_rml(m, kv, w);
            if constexpr (std::is_same_v<M, FiniteHmm>) {
              if (name == "rate-study") return cmd_rate_study(m, kv, w);
              if (name == "oracle") return cmd_oracle_hmm(m, kv, w);
            } else if constexpr (std::is_same_v<M, LinearGaussianModel>) {
              if (name == "oracle") return cmd_oracle_lgssm(m, kv, w);
            }
            throw std::invalid_argument(name + " is not available for model " + std::string(to_string(mc.kind)));
          },
          model);
      if (file.is_open()) {
        file.close();
        if (!file) throw std::runtime_error("error writing " + c->output);
      }
    } catch (const std::exception& e) {
      err << "smcderiv " << name << ": " << e.what() << '\n';
      return 1;
    }
  }
  return 0;
}

}  // namespace smcd
