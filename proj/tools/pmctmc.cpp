#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pmctmc/pmctmc.hpp"

#ifndef PMCTMC_GIT_HASH
#define PMCTMC_GIT_HASH "unknown"
#endif

namespace {

using nlohmann::json;
using namespace pmctmc;

constexpr const char* kVersion = "0.1.0";

/// Strips TOML-style quoting and brackets from a config value.
std::string clean_value(std::string v) {
  auto trim = [](std::string& x) {
    const auto a = x.find_first_not_of(" \t\r");
    const auto b = x.find_last_not_of(" \t\r");
    x = a == std::string::npos ? std::string() : x.substr(a, b - a + 1);
  };
  trim(v);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return v.substr(1, v.size() - 2);
  }
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
    std::string out;
    for (char ch : v.substr(1, v.size() - 2)) {
      if (ch != ' ' && ch != '"') out += ch;
    }
    return out;
  }
  return v;
}

/// Flat key=value pairs from a config file, or the "config" object of a
/// JSON run manifest.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<std::pair<std::string, std::string>> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw UsageError(std::string("bad manifest '") + path + "': " + e.what());
    }
    const json cfg = j.value("config", json::object());
    for (const auto& [k, v] : cfg.items()) {
      out.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    }
    return out;
  }
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    const auto lead = line.find_first_not_of(" \t");
    if (eq == std::string::npos || lead == std::string::npos || line[lead] == '#' ||
        line[lead] == '[') {
      continue;
    }
    out.emplace_back(clean_value(line.substr(0, eq)), clean_value(line.substr(eq + 1)));
  }
  return out;
}

/// Replaces `--config FILE` after the subcommand by the file's entries as
/// flags, placed before the remaining command-line flags so those win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> out;
  std::vector<std::string> from_file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    for (const auto& [k, v] : read_config_file(path)) {
      if (k == "config" || v.empty()) continue;
      from_file.push_back("--" + k);
      from_file.push_back(v);
    }
  }
  if (out.size() >= 2) out.insert(out.begin() + 2, from_file.begin(), from_file.end());
  return out;
}

struct ModelArgs {
  std::string model;
  std::optional<int> servers;
};

void add_model_options(CLI::App* sub, ModelArgs& m, bool required) {
  auto* opt = sub->add_option("--model", m.model, "built-in model: ssir, lv3, lv4, schloegl_bd, mmc");
  if (required) opt->required();
  sub->add_option("--c", m.servers, "number of servers for mmc (default: sidecar, else 1)");
}

/// Documents --config in --help; the file itself is expanded before parsing.
void add_config_option(CLI::App* sub) {
  sub->add_option("--config", "flat key=value config file or run manifest; flags override it")
      ->configurable(false);
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  return path + suffix;
}

std::string chain_path(const std::string& out, std::size_t c) {
  if (c == 0) return out;
  std::filesystem::path p(out);
  const std::string ext = p.extension().string();
  p.replace_extension();
  return p.string() + ".chain" + std::to_string(c + 1) + ext;
}

void write_manifest(const CLI::App* sub, const std::string& out, std::uint64_t seed,
                    const json& extra, const ModelArgs* model = nullptr) {
  json m;
  m["subcommand"] = sub->get_name();
  m["version"] = kVersion;
  m["git_hash"] = PMCTMC_GIT_HASH;
  m["seed"] = seed;
  json flat = json::object();
  std::istringstream lines(sub->config_to_str(true, false));
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line[0] == '#' || line[0] == '[') continue;
    flat[clean_value(line.substr(0, eq))] = clean_value(line.substr(eq + 1));
  }
  // Record the model actually used when it came from the sidecar.
  if (model) {
    flat["model"] = model->model;
    if (model->servers) flat["c"] = std::to_string(*model->servers);
  }
  m["config"] = flat;
  m["outputs"] = extra;
  std::ofstream f(with_suffix(out, ".manifest.json"));
  if (!f) throw UsageError("cannot write manifest for '" + out + "'");
  f << m.dump(2) << '\n';
}

EstimatorMode resolve_mode(const std::string& mode, const ReactionNetwork& net, const Dataset& data) {
  if (mode == "IA") return EstimatorMode::IA;
  if (mode == "RA") return EstimatorMode::RA;
  if (mode == "auto") return choose_mode(net, data);
  throw UsageError("mode must be auto, IA or RA");
}

std::optional<double> resolve_q_bar(Method method, const std::optional<double>& q_bar) {
  if (method != Method::uniformization_global) return std::nullopt;
  if (!q_bar || !std::isfinite(*q_bar) || *q_bar >= 0.0) {
    throw UsageError("uniformization_global needs --qbar with a finite negative value");
  }
  return q_bar;
}

/// Model from --model or, failing that, the dataset sidecar.
ReactionNetwork resolve_model(ModelArgs& m, const std::string& data_path) {
  const auto info = read_dataset_info(data_path);
  if (m.model.empty()) {
    if (!info) throw UsageError("--model is required when the dataset has no sidecar");
    m.model = info->model;
  }
  if (!m.servers) m.servers = info && info->model == m.model ? info->servers : 1;
  return builtin_model(m.model, {*m.servers});
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json j = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(row);
  }
  return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (j[i].size() != j.size()) throw UsageError("proposal covariance must be square");
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  ModelArgs model;
  std::vector<double> theta;
  std::vector<std::int64_t> x0;
  double t_end = 0.0;
  double dt = 1.0;
  std::uint64_t seed = 1;
  std::string out;
};

void setup_simulate(CLI::App& app, SimulateArgs& a) {
  auto* sub = app.add_subcommand("simulate", "simulate a dataset with Gillespie's method");
  add_config_option(sub);
  add_model_options(sub, a.model, true);
  sub->add_option("--theta", a.theta, "parameters")->required()->delimiter(',');
  sub->add_option("--x0", a.x0, "initial state")->required()->delimiter(',');
  sub->add_option("--tend", a.t_end, "last observation time")->required();
  sub->add_option("--dt", a.dt, "observation spacing")->capture_default_str();
  sub->add_option("--seed", a.seed, "random seed")->capture_default_str();
  sub->add_option("-o,--out", a.out, "output CSV")->required();
  sub->callback([sub, &a] {
    const int servers = a.model.servers.value_or(1);
    const auto net = builtin_model(a.model.model, {servers});
    std::mt19937_64 rng(a.seed);
    const auto schedule = regular_schedule(a.t_end, a.dt);
    const Dataset data = sample_dataset(net, a.theta, a.x0, schedule, rng);
    DatasetInfo info{a.model.model, servers, net.lower_bounds(), net.upper_bounds(), a.theta};
    write_dataset(a.out, data, info);
    write_manifest(sub, a.out, a.seed,
                   {{"dataset", a.out}, {"sidecar", sidecar_path(a.out)},
                    {"rows", data.observations.size()}});
    std::cout << "wrote " << data.observations.size() << " observations to " << a.out << '\n';
  });
}

// ---------------------------------------------------------------------------
// tune

struct EstimatorArgs {
  std::string data;
  ModelArgs model;
  std::string mode = "auto";
  std::string method = "skeletoid";
  std::optional<double> q_bar;
  std::string prior = "lognormal:0,1";
  std::vector<double> theta0;
  std::uint64_t seed = 1;
};

void add_estimator_options(CLI::App* sub, EstimatorArgs& e) {
  sub->add_option("--data", e.data, "dataset CSV")->required();
  add_model_options(sub, e.model, false);
  sub->add_option("--mode", e.mode, "estimator: auto, IA or RA")->capture_default_str();
  sub->add_option("--method", e.method,
                  "skeletoid, uniformization_seq or uniformization_global")
      ->capture_default_str();
  sub->add_option("--qbar", e.q_bar, "uniformization rate for uniformization_global (negative)");
  sub->add_option("--prior", e.prior, "lognormal:MU,SIGMA or gamma:SHAPE,RATE")
      ->capture_default_str();
  sub->add_option("--theta0", e.theta0, "initial parameters")->delimiter(',');
  sub->add_option("--seed", e.seed, "random seed")->capture_default_str();
}

struct TuneArgs {
  EstimatorArgs est;
  double eps = 1e-8;
  int r_explore = 15;
  std::size_t sigma_draws = 100;
  std::size_t short_iters = 300;
  std::string out;
};

struct Problem {
  std::shared_ptr<const LikelihoodModel> model;
  Prior prior;
  Method method;
  std::optional<double> q_bar;
};

Problem build_problem(EstimatorArgs& e) {
  const Dataset data = read_dataset(e.data);
  auto net = resolve_model(e.model, e.data);
  const EstimatorMode mode = resolve_mode(e.mode, net, data);
  const Method method = parse_method(e.method);
  const auto q_bar = resolve_q_bar(method, e.q_bar);
  Prior prior = Prior::parse(e.prior, net.param_dim());
  auto model = std::make_shared<const LikelihoodModel>(std::move(net), data, mode);
  return {std::move(model), std::move(prior), method, q_bar};
}

Theta initial_theta(const EstimatorArgs& e, const Problem& p, std::uint64_t seed) {
  if (!e.theta0.empty()) {
    p.model->network().check_theta(e.theta0);
    return e.theta0;
  }
  std::mt19937_64 rng(mix_seed(seed ^ 0x696e6974ULL));
  return p.prior.sample(rng);
}

GridOptions grid_options(double eps, int r_explore, std::size_t draws, std::size_t iters,
                         std::uint64_t seed) {
  GridOptions g;
  g.tuning.profile.eps = eps;
  g.tuning.profile.r_explore = r_explore;
  g.sigma_draws = draws;
  g.short_iters = iters;
  g.seed = seed;
  return g;
}

json tuned_to_json(const AutoTuneResult& r) {
  const auto& chosen = r.grid.entries[r.grid.chosen];
  json j;
  j["config"] = config_to_json(r.config);
  j["p_min"] = chosen.p_min;
  j["sigma_zeta"] = chosen.sigma_zeta;
  j["alpha"] = r.grid.alpha;
  j["met_target"] = r.grid.met_target;
  j["theta_map"] = r.theta_map;
  j["proposal_cov"] = matrix_to_json(r.proposal_cov);
  j["grid"] = json::array();
  for (const auto& e : r.grid.entries) {
    j["grid"].push_back({{"p_min", e.p_min}, {"sigma_zeta", e.sigma_zeta}, {"flops", e.flops}});
  }
  return j;
}

AutoTuneResult tune_problem(const Problem& p, const Theta& theta0, const GridOptions& g) {
  auto r = auto_tune(p.model, p.prior, theta0, p.method, p.q_bar, g);
  if (!r.grid.met_target) {
    std::cerr << "warning: no configuration reached the largest sigma target; using the "
                 "lowest-variance one\n";
  }
  return r;
}

void setup_tune(CLI::App& app, TuneArgs& a) {
  auto* sub = app.add_subcommand("tune", "tune the debiased estimator and proposal");
  add_config_option(sub);
  add_estimator_options(sub, a.est);
  sub->add_option("--eps", a.eps, "convergence tolerance")->capture_default_str();
  sub->add_option("--r-explore", a.r_explore, "minimum truncation levels scanned")
      ->capture_default_str();
  sub->add_option("--sigma-draws", a.sigma_draws, "estimator draws per sigma_zeta")
      ->capture_default_str();
  sub->add_option("--short-iters", a.short_iters, "iterations of each scale trial run")
      ->capture_default_str();
  sub->add_option("-o,--out", a.out, "output tuned configuration (JSON)")->required();
  sub->callback([sub, &a] {
    const Problem p = build_problem(a.est);
    const Theta theta0 = initial_theta(a.est, p, a.est.seed);
    const auto r = tune_problem(p, theta0, grid_options(a.eps, a.r_explore, a.sigma_draws,
                                                        a.short_iters, a.est.seed));
    const json j = tuned_to_json(r);
    std::ofstream f(a.out);
    if (!f) throw UsageError("cannot write '" + a.out + "'");
    f << j.dump(2) << '\n';
    write_manifest(sub, a.out, a.est.seed,
                   {{"tuned", a.out}, {"mode", to_string(p.model->mode())}}, &a.est.model);
    std::cout << "p_min=" << j["p_min"] << " sigma_zeta=" << j["sigma_zeta"]
              << " alpha=" << j["alpha"] << '\n';
  });
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  EstimatorArgs est;
  std::size_t n = 1000;
  std::size_t chains = 1;
  double burnin = 0.1;
  std::string tuned;
  std::string out;
};

void setup_sample(CLI::App& app, SampleArgs& a) {
  auto* sub = app.add_subcommand("sample", "run the pseudo-marginal sampler");
  add_config_option(sub);
  add_estimator_options(sub, a.est);
  sub->add_option("--n", a.n, "iterations per chain")->capture_default_str();
  sub->add_option("--chains", a.chains, "number of chains")->capture_default_str();
  sub->add_option("--burnin", a.burnin, "burn-in fraction for the summary")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.99));
  sub->add_option("--tuned", a.tuned, "tuned configuration from 'tune'");
  sub->add_option("-o,--out", a.out, "output trace CSV")->required();
  sub->callback([sub, &a] {
    const Problem p = build_problem(a.est);
    OsteConfig cfg;
    Eigen::MatrixXd cov;
    Theta theta0;
    if (!a.tuned.empty()) {
      std::ifstream f(a.tuned);
      if (!f) throw UsageError("cannot read '" + a.tuned + "'");
      try {
        const json j = json::parse(f);
        cfg = config_from_json(j.at("config"));
        cov = matrix_from_json(j.at("proposal_cov"));
        theta0 = a.est.theta0.empty() ? j.at("theta_map").get<Theta>() : a.est.theta0;
      } catch (const json::exception& e) {
        throw UsageError(std::string("malformed tuned configuration: ") + e.what());
      }
    } else {
      const Theta start = initial_theta(a.est, p, a.est.seed);
      const auto r = tune_problem(p, start, grid_options(1e-8, 15, 100, 300, a.est.seed));
      cfg = r.config;
      cov = r.proposal_cov;
      theta0 = a.est.theta0.empty() ? r.theta_map : start;
    }
    if (cfg.mode != p.model->mode()) {
      throw UsageError("tuned configuration is for a different estimator mode");
    }
    SamplerConfig sc;
    sc.n_samples = a.n;
    sc.seed = a.est.seed;
    sc.proposal_cov = cov;
    sc.theta0 = theta0;
    const auto traces = multistart(a.chains, pseudo_marginal(p.model, cfg), p.prior, sc);
    json outputs;
    outputs["mode"] = to_string(p.model->mode());
    outputs["chains"] = json::array();
    const auto burn = static_cast<std::size_t>(a.burnin * static_cast<double>(a.n));
    for (std::size_t c = 0; c < traces.size(); ++c) {
      const std::string path = chain_path(a.out, c);
      write_trace(path, traces[c]);
      outputs["chains"].push_back({{"trace", path},
                                   {"seed", chain_seed(a.est.seed, c)},
                                   {"acceptance_rate", traces[c].acceptance_rate()},
                                   {"ess_min", ess_min(traces[c], burn)},
                                   {"ess_per_gflop", ess_per_gflop(traces[c], burn)}});
      std::cout << path << ": acceptance " << traces[c].acceptance_rate() << ", ESS/GFLOP "
                << ess_per_gflop(traces[c], burn) << '\n';
    }
    outputs["tuned_config"] = config_to_json(cfg);
    outputs["proposal_cov"] = matrix_to_json(cov);
    outputs["theta0"] = theta0;
    write_manifest(sub, a.out, a.est.seed, outputs, &a.est.model);
  });
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string cls;
  int dim = 100;
  double t = 1.0;
  int reps = 10;
  std::vector<double> eps{1e-2, 1e-4, 1e-6, 1e-8, 1e-10};
  int max_nnz = 10;
  std::uint64_t seed = 1;
  std::string out;
};

void setup_bench(CLI::App& app, BenchArgs& a) {
  auto* sub = app.add_subcommand("bench", "matrix-exponential benchmark against the oracle");
  add_config_option(sub);
  sub->add_option("--class", a.cls, "sparse, dense, absorbing or gtr")->required();
  sub->add_option("--dim", a.dim, "matrix dimension")->capture_default_str();
  sub->add_option("--t", a.t, "time horizon")->capture_default_str();
  sub->add_option("--reps", a.reps, "random matrices")->capture_default_str();
  sub->add_option("--eps", a.eps, "requested errors")->delimiter(',')->capture_default_str();
  sub->add_option("--max-nnz", a.max_nnz, "sparse class: maximum off-diagonals per row")
      ->capture_default_str();
  sub->add_option("--seed", a.seed, "random seed")->capture_default_str();
  sub->add_option("-o,--out", a.out, "output CSV")->required();
  sub->callback([sub, &a] {
    BenchmarkSpec spec;
    spec.cls = parse_matrix_class(a.cls);
    spec.dim = a.dim;
    spec.t = a.t;
    spec.reps = a.reps;
    spec.eps_grid = a.eps;
    spec.seed = a.seed;
    spec.max_nnz = a.max_nnz;
    const auto rows = bench_expm(spec);
    write_bench_csv(a.out, rows);
    write_manifest(sub, a.out, a.seed, {{"table", a.out}, {"rows", rows.size()}});
    std::cout << "wrote " << rows.size() << " rows to " << a.out << '\n';
  });
}

// ---------------------------------------------------------------------------
// truncstudy

struct TruncArgs {
  ModelArgs model;
  std::string data;
  std::vector<double> theta;
  int r_max = 20;
  int ref_extra = 20;
  std::string out;
};

void setup_truncstudy(CLI::App& app, TruncArgs& a) {
  auto* sub = app.add_subcommand("truncstudy", "transition-probability error versus truncation");
  add_config_option(sub);
  sub->add_option("--data", a.data, "dataset CSV")->required();
  add_model_options(sub, a.model, false);
  sub->add_option("--theta", a.theta, "parameters")->required()->delimiter(',');
  sub->add_option("--r-max", a.r_max, "largest truncation level")->capture_default_str();
  sub->add_option("--ref-extra", a.ref_extra, "extra levels for the reference")
      ->capture_default_str();
  sub->add_option("-o,--out", a.out, "output CSV")->required();
  sub->callback([sub, &a] {
    const Dataset data = read_dataset(a.data);
    const auto net = resolve_model(a.model, a.data);
    const auto rows = truncation_study(net, a.theta, data, a.r_max, a.ref_extra);
    write_truncation_csv(a.out, rows);
    write_manifest(sub, a.out, 0, {{"table", a.out}, {"rows", rows.size()}}, &a.model);
    std::cout << "wrote " << rows.size() << " rows to " << a.out << '\n';
  });
}

// ---------------------------------------------------------------------------
// diag

struct DiagArgs {
  std::vector<std::string> traces;
  double burnin = 0.1;
  std::string out;
};

void setup_diag(CLI::App& app, DiagArgs& a) {
  auto* sub = app.add_subcommand("diag", "ESS and posterior summaries of trace files");
  add_config_option(sub);
  sub->add_option("--trace", a.traces, "trace CSV files")->required()->delimiter(',');
  sub->add_option("--burnin", a.burnin, "burn-in fraction")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.99));
  sub->add_option("-o,--out", a.out, "output summary JSON");
  sub->callback([sub, &a] {
    std::vector<Trace> traces;
    for (const auto& t : a.traces) traces.push_back(read_trace(t));
    json j;
    j["chains"] = json::array();
    std::size_t burn = 0;
    for (std::size_t c = 0; c < traces.size(); ++c) {
      const auto& tr = traces[c];
      burn = static_cast<std::size_t>(a.burnin * static_cast<double>(tr.size()));
      json cj{{"trace", a.traces[c]},
              {"iterations", tr.size()},
              {"acceptance_rate", tr.acceptance_rate()},
              {"ess_min", ess_min(tr, burn)},
              {"ess_per_gflop", ess_per_gflop(tr, burn)}};
      std::cout << a.traces[c] << ": acceptance " << tr.acceptance_rate() << ", min ESS "
                << ess_min(tr, burn) << ", ESS/GFLOP " << ess_per_gflop(tr, burn) << '\n';
      j["chains"].push_back(cj);
    }
    j["parameters"] = json::array();
    const std::size_t dim = traces.front().dim();
    for (std::size_t p = 0; p < dim; ++p) {
      const auto pooled = pooled_column(traces, p, burn);
      json pj{{"name", "theta_" + std::to_string(p + 1)},
              {"q05", quantile(pooled, 0.05)},
              {"median", quantile(pooled, 0.5)},
              {"q95", quantile(pooled, 0.95)},
              {"ess", ess(pooled)}};
      std::cout << "theta_" << (p + 1) << ": median " << pj["median"] << ", 90% interval ["
                << pj["q05"] << ", " << pj["q95"] << "]\n";
      j["parameters"].push_back(pj);
    }
    if (!a.out.empty()) {
      std::ofstream f(a.out);
      if (!f) throw UsageError("cannot write '" + a.out + "'");
      f << j.dump(2) << '\n';
      write_manifest(sub, a.out, 0, {{"summary", a.out}});
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo-marginal inference for continuous-time Markov chains"};
  app.set_version_flag("--version", std::string(kVersion) + " (" + PMCTMC_GIT_HASH + ")");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SimulateArgs sim;
  TuneArgs tune;
  SampleArgs sample;
  BenchArgs bench;
  TruncArgs trunc;
  DiagArgs diag;
  setup_simulate(app, sim);
  setup_tune(app, tune);
  setup_sample(app, sample);
  setup_bench(app, bench);
  setup_truncstudy(app, trunc);
  setup_diag(app, diag);

  try {
    auto args = expand_config(argc, argv);
    args.erase(args.begin());
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const SeedPathError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "usage error: malformed JSON input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
