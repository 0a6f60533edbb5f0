// Command-line front end: simulate, oracle, mcmc, evidence, rank, compare, smooth.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chmm/evidence.hpp"
#include "chmm/exact.hpp"
#include "chmm/io.hpp"
#include "chmm/mcmc.hpp"
#include "chmm/parallel.hpp"
#include "chmm/proposals.hpp"
#include "chmm/random.hpp"
#include "chmm/simulate.hpp"
#include "chmm/sir.hpp"

namespace {

using nlohmann::json;
using namespace chmm;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(seed ^ mix64(a + 0x632be59bd9b4e019ULL)) + b);
}

/// Where the observations come from: a data CSV, or a preset design simulated
/// at the run's parameters.
struct DataSource {
  std::string data;
  std::string design;
  std::string params;
  int model = 16;
  std::uint64_t seed = 1;
  int threads = 0;

  void add(CLI::App* cmd, bool with_design) {
    cmd->add_option("--data", data, "Observation CSV (chicken,pen,transgenic,challenge,t1..tT)");
    if (with_design) cmd->add_option("--design", design, "Simulate this preset design instead of reading --data");
    cmd->add_option("--params", params, "Parameter JSON in natural units (default: simulation-study values)");
    cmd->add_option("--model", model, "Model variant 1-16")->check(CLI::Range(1, 16));
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--threads", threads, "Worker threads (0: CHMM_THREADS or all cores)")->check(CLI::NonNegativeNumber);
  }

  sir::SirParams parameters() const {
    if (params.empty()) return sir::reference_params().tied(sir::ModelVariant::from_index(model));
    return io::params_from_json(json::parse(io::read_file(params)), model);
  }

  sir::SirData load() const {
    if (!data.empty() && !design.empty()) throw UsageError("give either --data or --design, not both");
    if (!data.empty()) return io::parse_data_csv(io::read_file(data));
    if (design.empty()) throw UsageError("--data is required");
    return sir::simulate_experiment(sir::preset_design(design), parameters(), sir::ModelVariant::from_index(model),
                                    seed)
        .data;
  }
};

struct ProposalOptions {
  std::string proposal = "miffbs";
  int l_inner = 0;
  int guiding = 100;
  int guiding_burn_in = 10;
  double regen = -1.0;
  int refresh_sweeps = 2;
  bool per_step_regen = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--proposal", proposal, "Hidden-state proposal: miffbs or diffbs");
    cmd->add_option("--l-inner", l_inner, "Proposal draws per parameter value (0: 1 for miffbs, 100 for diffbs)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--guiding", guiding, "Guiding samples per parameter value")->check(CLI::PositiveNumber);
    cmd->add_option("--guiding-burn-in", guiding_burn_in, "IFFBS sweeps discarded before the guiding samples")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--regen", regen, "Regenerate the guiding ensemble when its ESS falls below this (default N/2)");
    cmd->add_option("--refresh-sweeps", refresh_sweeps, "IFFBS sweeps that refresh a regenerated ensemble")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--per-step-regen", per_step_regen, "Also check the ESS before every time step");
  }

  StateProposalConfig config() const {
    StateProposalConfig c = StateProposalConfig::of(parse_proposal(proposal));
    c.l_inner = l_inner;
    c.n_guiding = guiding;
    c.guiding_burn_in = guiding_burn_in;
    c.miffbs.regen_threshold = regen;
    c.miffbs.refresh_sweeps = refresh_sweeps;
    c.miffbs.per_step_regeneration = per_step_regen;
    return c;
  }
};

struct McmcOptions {
  int iterations = 10000;
  double burn_in_fraction = 0.2;
  double lambda = 0.95;
  double t_df = 0.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--iterations", iterations, "MCMC iterations")->check(CLI::PositiveNumber);
    cmd->add_option("--burn-in-fraction", burn_in_fraction, "Fraction of iterations discarded")
        ->check(CLI::Range(0.0, 0.99));
    cmd->add_option("--lambda", lambda, "Weight of the fitted component in the defense mixture")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--t-df", t_df, "Student-t degrees of freedom for the fitted component (0: Gaussian)");
  }
};

double natural_value(const sir::SirParams& p, const std::string& name) {
  if (name == "p" || name == "p_N") return p.p_N;
  if (name == "p_T") return p.p_T;
  if (name == "nu_N") return p.nu_N;
  if (name == "beta" || name == "beta_N") return p.beta_N;
  if (name == "beta_T") return p.beta_T;
  if (name == "gamma" || name == "gamma_N") return p.gamma_N;
  if (name == "gamma_T") return p.gamma_T;
  throw std::logic_error("unknown parameter name " + name);
}

std::vector<std::vector<double>> natural_samples(const McmcResult& r, const sir::ModelVariant& variant) {
  std::vector<std::vector<double>> out;
  out.reserve(r.theta.size());
  for (const auto& u : r.theta) {
    const auto p = sir::untransform(u, variant);
    std::vector<double> row;
    for (const auto& name : r.names) row.push_back(natural_value(p, name));
    out.push_back(std::move(row));
  }
  return out;
}

json real_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json reals_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(real_json(x));
  return out;
}

struct McmcRun {
  McmcResult result;
  DefenseMixture mixture;
};

McmcRun run_mcmc(const sir::SirFamily& family, const sir::SirData& data, const McmcOptions& o, std::uint64_t seed) {
  McmcConfig cfg;
  cfg.iterations = o.iterations;
  cfg.burn_in_fraction = o.burn_in_fraction;
  Rng rng(seed);
  auto result = mcmc_joint(family, data.observations, cfg, rng);
  auto mixture = fit_defense_mixture(result.theta, o.lambda, o.t_df);
  return {std::move(result), std::move(mixture)};
}

DefenseMixture load_mixture(const std::string& path) {
  const auto j = json::parse(io::read_file(path));
  return io::mixture_from_json(j.contains("mixture") ? j.at("mixture") : j);
}

struct EvidenceRun {
  EvidenceEstimate estimate;
  json diagnostics;
};

/// Mixture from `mixture_path` when given, otherwise from a fresh MCMC run.
/// Model m always uses the same derived seeds, so `evidence --model m` and
/// row m of `rank` agree.
EvidenceRun model_evidence(const sir::SirData& data, int model, const std::string& mixture_path,
                           const McmcOptions& mcmc, const ProposalOptions& prop, int n_theta, std::uint64_t seed,
                           int threads) {
  const auto variant = sir::ModelVariant::from_index(model);
  const sir::SirFamily family(data.chickens, data.steps(), variant);
  json diag = {{"model", model}};
  std::optional<DefenseMixture> mixture;
  if (!mixture_path.empty()) {
    mixture = load_mixture(mixture_path);
  } else {
    auto run = run_mcmc(family, data, mcmc, derive_seed(seed, model, 0));
    diag["mcmc_acceptance_rate"] = run.result.acceptance_rate;
    mixture = std::move(run.mixture);
  }
  EvidenceConfig cfg;
  cfg.n_theta = n_theta;
  cfg.states = prop.config();
  cfg.threads = threads;
  auto est = estimate_evidence(family, data.observations, *mixture, cfg, derive_seed(seed, model, 1), model);
  diag["method"] = est.method;
  diag["n_theta"] = est.n_theta;
  diag["l_inner"] = est.l_inner;
  diag["log_ml"] = real_json(est.log_ml);
  diag["se_log"] = real_json(est.se_log);
  diag["support_failures"] = est.support_failures;
  diag["regenerations"] = est.regenerations;
  diag["chain_start_ess"] = reals_json(est.chain_start_ess);
  diag["log_weights"] = reals_json(est.log_weights);
  return {std::move(est), std::move(diag)};
}

void write_json(const std::string& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

int cmd_simulate(const DataSource& src, const std::string& out_dir, double moribund_prob) {
  if (src.design.empty()) throw UsageError("--design is required");
  auto design = sir::preset_design(src.design);
  if (moribund_prob >= 0.0) design.moribund_prob = moribund_prob;
  const auto variant = sir::ModelVariant::from_index(src.model);
  const auto params = src.parameters();
  const auto sim = sir::simulate_experiment(design, params, variant, src.seed);
  const auto states = sir::sir_states();
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  io::write_file_atomic((dir / "data.csv").string(), io::format_data_csv(sim.data));
  io::write_file_atomic((dir / "truth.csv").string(), io::format_trajectories_csv(sim.truth, states, sim.data.ids));
  write_json((dir / "truth.json").string(), io::trajectories_to_json(sim.truth, states));
  write_json((dir / "observations.json").string(), io::observations_to_json(sim.data.observations));
  write_json((dir / "params.json").string(), io::params_to_json(params, src.model));
  std::cout << json{{"design", design.name}, {"chickens", sim.data.chickens_count()}, {"steps", sim.data.steps()},
                    {"seed", src.seed}, {"out", out_dir}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_oracle(const DataSource& src, std::size_t budget, const std::string& out) {
  const auto data = src.load();
  const sir::SirModel model(data.chickens, data.steps(), src.parameters());
  json pens = json::array();
  double total = 0.0;
  std::vector<int> pen_ids;
  for (const auto& c : data.chickens) pen_ids.push_back(c.pen);
  std::sort(pen_ids.begin(), pen_ids.end());
  pen_ids.erase(std::unique(pen_ids.begin(), pen_ids.end()), pen_ids.end());
  for (int b = 0; b < model.layout().blocks(); ++b) {
    if (joint_state_count(model, b) > budget) {
      throw BudgetExceeded("pen " + std::to_string(pen_ids[b]) + " needs " +
                           std::to_string(model.layout().block_members(b).size()) +
                           "-chicken joint filtering beyond the budget of " + std::to_string(budget) +
                           " joint states");
    }
  }
  for (int b = 0; b < model.layout().blocks(); ++b) {
    const auto f = joint_forward_filter(model, data.observations, b, budget);
    pens.push_back({{"pen", pen_ids[b]}, {"chickens", f.chains.size()}, {"log_ml", real_json(f.log_likelihood)}});
    total += f.log_likelihood;
  }
  const json result = {{"model", src.model}, {"pens", pens}, {"log_ml", real_json(total)}};
  if (!out.empty()) write_json(out, result);
  std::cout << result.dump() << "\n";
  return 0;
}

int cmd_mcmc(const DataSource& src, const McmcOptions& o, const std::string& out, const std::string& theta_csv) {
  const auto data = src.load();
  const auto variant = sir::ModelVariant::from_index(src.model);
  const sir::SirFamily family(data.chickens, data.steps(), variant);
  const auto run = run_mcmc(family, data, o, derive_seed(src.seed, src.model, 0));
  const auto natural = natural_samples(run.result, variant);
  json theta = json::array();
  for (const auto& u : run.result.theta) theta.push_back(u);
  const json result = {{"model", src.model},
                       {"names", run.result.names},
                       {"iterations", o.iterations},
                       {"burn_in_fraction", o.burn_in_fraction},
                       {"acceptance_rate", run.result.acceptance_rate},
                       {"theta_transformed", theta},
                       {"theta_natural", natural},
                       {"mixture", io::mixture_to_json(run.mixture, run.result.names)}};
  if (out.empty()) throw UsageError("--out is required");
  write_json(out, result);
  if (!theta_csv.empty()) io::write_file_atomic(theta_csv, io::format_theta_csv(natural, run.result.names));
  std::cout << json{{"model", src.model}, {"samples", run.result.theta.size()},
                    {"acceptance_rate", run.result.acceptance_rate}, {"out", out}}
                   .dump()
            << "\n";
  return 0;
}

void dump_guiding(const std::string& path, const sir::SirData& data, const sir::SirFamily& family,
                  const DefenseMixture& mixture, const StateProposalConfig& cfg, std::uint64_t seed) {
  std::vector<double> u(mixture.mean().data(), mixture.mean().data() + mixture.dimension());
  const auto model = family.build(u);
  const EmissionTable emissions(*model, data.observations);
  Rng rng(seed);
  const auto ens = generate_guiding_samples(*model, emissions, data.observations, cfg.n_guiding,
                                            cfg.guiding_burn_in, rng);
  const auto states = sir::sir_states();
  std::string out = "sample,chicken";
  for (int t = 0; t < data.steps(); ++t) out += ",t" + std::to_string(t + 1);
  out += "\n";
  for (int n = 0; n < ens.size(); ++n) {
    const auto& x = ens.samples[n].x();
    for (int k = 0; k < x.chains(); ++k) {
      out += std::to_string(n) + "," + data.ids[k];
      for (int t = 0; t < x.steps(); ++t) out += "," + states.label(x(k, t));
      out += "\n";
    }
  }
  io::write_file_atomic(path, out);
}

int cmd_evidence(const DataSource& src, const McmcOptions& mcmc, const ProposalOptions& prop, int n_theta,
                 const std::string& mixture_path, const std::string& out, const std::string& diag_path,
                 const std::string& guiding_path) {
  const auto data = src.load();
  auto run = model_evidence(data, src.model, mixture_path, mcmc, prop, n_theta, src.seed, src.threads);
  if (!out.empty()) io::write_file_atomic(out, io::format_evidence_csv({run.estimate}, "unranked"));
  if (!diag_path.empty()) write_json(diag_path, run.diagnostics);
  if (!guiding_path.empty()) {
    const sir::SirFamily family(data.chickens, data.steps(), sir::ModelVariant::from_index(src.model));
    const auto mixture = mixture_path.empty() ? run_mcmc(family, data, mcmc, derive_seed(src.seed, src.model, 0)).mixture
                                              : load_mixture(mixture_path);
    dump_guiding(guiding_path, data, family, mixture, prop.config(), derive_seed(src.seed, src.model, 2));
  }
  std::cout << io::format_evidence_csv({run.estimate}, "unranked");
  return 0;
}

std::vector<int> parse_models(const std::string& list) {
  std::vector<int> models;
  if (list.empty()) {
    for (int m = 1; m <= 16; ++m) models.push_back(m);
    return models;
  }
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto item = list.substr(start, comma - start);
    const int m = std::stoi(item);
    if (m < 1 || m > 16) throw UsageError("model ids must lie in 1..16");
    models.push_back(m);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return models;
}

int cmd_rank(const DataSource& src, const McmcOptions& mcmc, const ProposalOptions& prop, int n_theta,
             const std::string& models_list, const std::vector<std::string>& evidence_files, const std::string& out,
             const std::string& diag_path) {
  std::vector<EvidenceEstimate> estimates;
  json diag = json::array();
  if (!evidence_files.empty()) {
    for (const auto& f : evidence_files) {
      for (auto& e : io::parse_evidence_csv(io::read_file(f))) estimates.push_back(std::move(e));
    }
  } else {
    const auto data = src.load();
    for (int m : parse_models(models_list)) {
      auto run = model_evidence(data, m, "", mcmc, prop, n_theta, src.seed, src.threads);
      std::cerr << "model " << m << ": log_ml " << io::format_real(run.estimate.log_ml) << "\n";
      estimates.push_back(std::move(run.estimate));
      diag.push_back(std::move(run.diagnostics));
    }
  }
  const auto rows = bayes_factor_table(estimates);
  const auto csv = io::format_ranking_csv(rows);
  if (!out.empty()) io::write_file_atomic(out, csv);
  if (!diag_path.empty()) write_json(diag_path, diag);
  std::cout << csv;
  return 0;
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> methods;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    methods.push_back(parse_method(list.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return methods;
}

int cmd_compare(const DataSource& src, const std::string& methods, int estimates, int particles,
                const ProposalOptions& prop, std::size_t budget, const std::string& out) {
  const auto data = src.load();
  const sir::SirModel model(data.chickens, data.steps(), src.parameters());
  CompareConfig cfg;
  cfg.methods = parse_methods(methods);
  cfg.estimates = estimates;
  cfg.particles = particles;
  cfg.oracle_budget = budget;
  cfg.threads = src.threads;
  cfg.miffbs = prop.config();
  cfg.miffbs.proposal = ProposalKind::kMiffbs;
  cfg.diffbs = prop.config();
  cfg.diffbs.proposal = ProposalKind::kDiffbs;
  const auto reports = compare_methods(model, data.observations, cfg, derive_seed(src.seed, src.model, 3));
  std::string csv = "method,available,log_mean,se_log,lo3,hi3,n,support_failures\n";
  for (const auto& r : reports) {
    if (!r.available) {
      csv += method_name(r.method) + ",0,nan,nan,nan,nan,0,0\n";
      continue;
    }
    csv += method_name(r.method) + ",1," + io::format_real(r.summary.log_mean) + "," +
           io::format_real(r.summary.se_log) + "," + io::format_real(r.summary.lo3) + "," +
           io::format_real(r.summary.hi3) + "," + std::to_string(r.summary.n) + "," +
           std::to_string(r.support_failures) + "\n";
  }
  if (!out.empty()) io::write_file_atomic(out, csv);
  std::cout << format_compare_report(reports, "log marginal likelihood, " + std::to_string(data.chickens_count()) +
                                                  " chickens, model " + std::to_string(src.model));
  return 0;
}

int cmd_smooth(const DataSource& src, const std::string& method, int draws, const ProposalOptions& prop,
               const std::string& mixture_path, std::size_t budget, const std::string& out) {
  const auto data = src.load();
  std::vector<double> flat;
  const int K = data.chickens_count(), T = data.steps();
  if (method == "exact") {
    const sir::SirModel model(data.chickens, T, src.parameters());
    flat = exact_smoothing_marginals(model, data.observations, budget);
  } else if (method == "miffbs") {
    auto cfg = prop.config();
    cfg.proposal = ProposalKind::kMiffbs;
    const auto seed = derive_seed(src.seed, src.model, 4);
    if (!mixture_path.empty()) {
      const sir::SirFamily family(data.chickens, T, sir::ModelVariant::from_index(src.model));
      flat = importance_smoothing_marginals(family, load_mixture(mixture_path), data.observations, cfg, draws, seed,
                                            src.threads);
    } else {
      const sir::SirModel model(data.chickens, T, src.parameters());
      flat = importance_smoothing_marginals(model, data.observations, cfg, draws, seed, src.threads);
    }
  } else {
    throw UsageError("--method must be exact or miffbs");
  }
  std::vector<std::vector<std::vector<double>>> m(K, std::vector<std::vector<double>>(T, std::vector<double>(3)));
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T; ++t) {
      for (int s = 0; s < 3; ++s) m[k][t][s] = flat[(static_cast<std::size_t>(k) * T + t) * 3 + s];
    }
  }
  const auto csv = io::format_smooth_csv(data.ids, m);
  if (out.empty()) {
    std::cout << csv;
  } else {
    io::write_file_atomic(out, csv);
  }
  return 0;
}

// ---------------------------------------------------------------------------

/// Turns the fields of a JSON config into flags placed right after the
/// subcommand, so that flags given on the command line (parsed later) win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + i);
      break;
    }
  }
  if (path.empty()) return args;
  const auto cfg = json::parse(io::read_file(path));
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  std::vector<std::string> flags;
  for (const auto& [key, value] : cfg.items()) {
    std::string name = "--" + key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (value.is_boolean()) {
      if (value.get<bool>()) flags.push_back(name);
    } else if (value.is_array()) {
      if (key == "evidence") {
        for (const auto& v : value) flags.insert(flags.end(), {name, v.get<std::string>()});
        continue;
      }
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      flags.insert(flags.end(), {name, joined});
    } else if (value.is_string()) {
      flags.insert(flags.end(), {name, value.get<std::string>()});
    } else if (!value.is_null()) {
      flags.insert(flags.end(), {name, value.dump()});
    }
  }
  const auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.empty() || a[0] != '-'; });
  if (sub == args.end()) throw UsageError("--config must follow a subcommand");
  args.insert(sub + 1, flags.begin(), flags.end());
  return args;
}

void print_error(const std::string& type, const std::string& message) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence estimation for coupled hidden Markov models and the SIR transmission study"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config_help;
  app.add_option("--config", config_help,
                 "JSON object of option values, given after the subcommand; command-line flags take precedence");

  DataSource src;
  McmcOptions mcmc;
  ProposalOptions prop;
  std::string out, diag, mixture, theta_csv, guiding_dump, models, methods = "oracle,diffbs,miffbs,pf";
  std::string smooth_method = "exact";
  std::vector<std::string> evidence_files;
  int n_theta = 1000, estimates = 100, particles = 5000, draws = 1000;
  std::size_t budget = kDefaultJointBudget;
  double moribund_prob = -1.0;

  auto* simulate = app.add_subcommand("simulate", "Simulate a preset design; writes data, truth and parameters");
  src.add(simulate, true);
  simulate->add_option("--out", out, "Output directory")->required();
  simulate->add_option("--moribund-prob", moribund_prob, "Override the design's moribund extraction probability");

  auto* oracle = app.add_subcommand("oracle", "Exact log marginal likelihood by joint forward filtering");
  src.add(oracle, true);
  oracle->add_option("--budget", budget, "Largest joint state space per pen");
  oracle->add_option("--out", out, "Also write the result JSON here");

  auto* mcmc_cmd = app.add_subcommand("mcmc", "Joint parameter and state MCMC; fits the defense mixture");
  src.add(mcmc_cmd, true);
  mcmc.add(mcmc_cmd);
  mcmc_cmd->add_option("--out", out, "Output JSON (samples and mixture)");
  mcmc_cmd->add_option("--theta-csv", theta_csv, "Also write natural-unit samples as CSV");

  auto* evidence = app.add_subcommand("evidence", "Importance-sampling evidence for one model");
  src.add(evidence, true);
  mcmc.add(evidence);
  prop.add(evidence);
  evidence->add_option("--n-theta", n_theta, "Parameter draws")->check(CLI::PositiveNumber);
  evidence->add_option("--mixture", mixture, "Mixture JSON from `mcmc` (default: run MCMC first)");
  evidence->add_option("--out", out, "Evidence CSV");
  evidence->add_option("--diagnostics", diag, "Diagnostics JSON");
  evidence->add_option("--dump-guiding", guiding_dump, "Write a guiding ensemble at the mixture mean as CSV");

  auto* rank = app.add_subcommand("rank", "Evidence and Bayes-factor ranking over the model variants");
  src.add(rank, true);
  mcmc.add(rank);
  prop.add(rank);
  rank->add_option("--n-theta", n_theta, "Parameter draws per model")->check(CLI::PositiveNumber);
  rank->add_option("--models", models, "Comma-separated model ids (default 1-16)");
  rank->add_option("--evidence", evidence_files, "Rank existing evidence CSVs instead of computing")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  rank->add_option("--out", out, "Ranking CSV");
  rank->add_option("--diagnostics", diag, "Diagnostics JSON");

  auto* compare = app.add_subcommand("compare", "Fixed-parameter comparison of marginal-likelihood estimators");
  src.add(compare, true);
  prop.add(compare);
  compare->add_option("--methods", methods, "Comma-separated subset of oracle,pf,diffbs,miffbs");
  compare->add_option("--budget-estimates", estimates, "Estimates per sampling method")->check(CLI::PositiveNumber);
  compare->add_option("--particles", particles, "Particle-filter particles")->check(CLI::PositiveNumber);
  compare->add_option("--budget", budget, "Largest joint state space per pen for the oracle");
  compare->add_option("--out", out, "Per-method CSV");

  auto* smooth = app.add_subcommand("smooth", "Marginal state probabilities per chicken and half-day step");
  src.add(smooth, true);
  prop.add(smooth);
  smooth->add_option("--method", smooth_method, "exact or miffbs");
  smooth->add_option("--draws", draws, "Importance draws for miffbs")->check(CLI::PositiveNumber);
  smooth->add_option("--mixture", mixture, "Integrate over parameters with this mixture (miffbs only)");
  smooth->add_option("--budget", budget, "Largest joint state space per pen for exact smoothing");
  smooth->add_option("--out", out, "Smoothing CSV (default stdout)");

  try {
    auto args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("UsageError", e.what());
    return 2;
  }

  try {
    if (*simulate) {
      if (simulate->count("--seed") == 0) throw UsageError("--seed is required for simulate");
      return cmd_simulate(src, out, moribund_prob);
    }
    if (*oracle) return cmd_oracle(src, budget, out);
    if (*mcmc_cmd) return cmd_mcmc(src, mcmc, out, theta_csv);
    if (*evidence) return cmd_evidence(src, mcmc, prop, n_theta, mixture, out, diag, guiding_dump);
    if (*rank) return cmd_rank(src, mcmc, prop, n_theta, models, evidence_files, out, diag);
    if (*compare) return cmd_compare(src, methods, estimates, particles, prop, budget, out);
    if (*smooth) return cmd_smooth(src, smooth_method, draws, prop, mixture, budget, out);
  } catch (const UsageError& e) {
    print_error("UsageError", e.what());
    return 2;
  } catch (const BudgetExceeded& e) {
    print_error("BudgetExceeded", e.what());
    return 3;
  } catch (const SupportError& e) {
    print_error("SupportError", e.what());
    return 4;
  } catch (const io::FormatError& e) {
    print_error("FormatError", e.what());
    return 5;
  } catch (const std::exception& e) {
    print_error("Error", e.what());
    return 1;
  }
  return 0;
}
