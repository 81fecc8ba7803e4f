// kmt: command-line front end for coupling thresholds, empirical threshold
// streams, change-point detection, hitting-time bounds and validation suites.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "kmt/changepoint.hpp"
#include "kmt/empirical_variance.hpp"
#include "kmt/hitting_time.hpp"
#include "kmt/serialization.hpp"
#include "kmt/validation.hpp"

namespace {

constexpr const char* kToolVersion = "0.1.0";

using nlohmann::json;

struct GlobalOptions {
  int threads = 0;
  std::uint64_t seed = 20240717;
  std::string manifest_path;
};

int effective_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KMT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? int(hw) : 1;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<unsigned> parse_levels(const std::string& text) {
  std::vector<unsigned> out;
  for (double v : parse_list(text)) out.push_back(unsigned(v));
  return out;
}

// Numbers from line-delimited text or the first field of CSV rows.
std::vector<double> read_stream(const std::string& path) {
  std::istream* in = &std::cin;
  std::ifstream file;
  if (path != "-") {
    file.open(path);
    if (!file) throw std::runtime_error("cannot open input: " + path);
    in = &file;
  }
  std::vector<double> values;
  std::string line;
  while (std::getline(*in, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    const std::string field = comma == std::string::npos ? line : line.substr(0, comma);
    try {
      values.push_back(std::stod(field));
    } catch (const std::exception&) {
      continue;  // header or junk line
    }
  }
  return values;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output: " + path);
  out << content;
}

struct ManifestWriter {
  json parameters;
  std::vector<std::string> artifacts;
  std::string command;
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const std::string& path) const {
    json m;
    m["command"] = command;
    m["parameters"] = parameters;
    m["artifacts"] = artifacts;
    m["seed"] = seed;
    m["tool_version"] = kToolVersion;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream out(path, std::ios::binary);
    if (out) out << m.dump(2) << '\n';
  }
};

kmt::BoundSearchConfig make_bounds(double alpha_floor, int p_max_override,
                                   std::size_t kappa_grid) {
  kmt::BoundSearchConfig cfg;
  cfg.p_max = p_max_override > 0 ? p_max_override : kmt::default_p_max(alpha_floor);
  cfg.kappa_grid_size = kappa_grid;
  return cfg;
}

// ---------------------------------------------------------------------------

int run_thresholds(std::size_t n, double R, double sigma, double alpha,
                   const std::string& kind, const std::string& out_csv,
                   const std::string& out_json, int p_max, std::size_t kappa_grid,
                   double variant_beta, bool zeta, ManifestWriter& manifest) {
  kmt::BoundedModel model(R, sigma);
  kmt::BoundSearchConfig cfg = make_bounds(alpha, p_max, kappa_grid);
  kmt::WassersteinEvaluator ev(model, cfg);
  std::optional<kmt::VariantConfig> variant;
  if (variant_beta > 1.0) {
    variant = kmt::VariantConfig::geometric(variant_beta, kmt::ceil_log2(n));
    variant->zeta_enabled = zeta;
  }
  kmt::ThresholdSchedule sched =
      kind == "sum" ? kmt::build_sum_schedule(ev, n, alpha, {},
                                              variant ? &*variant : nullptr)
                    : kmt::build_bridge_schedule(ev, n, alpha,
                                                 variant ? &*variant : nullptr);
  std::ostringstream csv;
  sched.write_csv(csv);
  write_text(out_csv, csv.str());
  manifest.artifacts.push_back(out_csv);
  if (!out_json.empty()) {
    write_text(out_json, kmt::to_json(sched).dump(2) + "\n");
    manifest.artifacts.push_back(out_json);
  }
  std::cout << "wrote " << out_csv << " (n=" << n << ", max=" << sched.max_value()
            << ")\n";
  return 0;
}

int run_empirical(const std::string& input, double R, double alpha, double rho,
                  std::size_t n, const std::string& kind, const std::string& out_csv,
                  int p_max, ManifestWriter& manifest) {
  const std::vector<double> ys = read_stream(input);
  if (ys.empty()) throw std::runtime_error("empirical: empty input stream");
  kmt::BoundSearchConfig cfg = make_bounds(alpha * (1.0 - rho), p_max, 24);
  kmt::EmpiricalThresholdStream stream(
      R, alpha, rho, n, cfg,
      kind == "sum" ? kmt::ScheduleKind::sum : kmt::ScheduleKind::bridge);
  std::ostringstream csv;
  csv << "k,sigma_L,sigma_U,threshold,fallback\n";
  const std::size_t limit = std::min(n, ys.size());
  for (std::size_t i = 0; i < limit; ++i) {
    const kmt::EmpiricalThreshold row = stream.observe(ys[i]);
    csv << row.k << ',' << row.sigma_lo << ',' << row.sigma_hi << ',' << row.threshold
        << ',' << (row.fallback ? 1 : 0) << '\n';
  }
  write_text(out_csv, csv.str());
  manifest.artifacts.push_back(out_csv);
  std::cout << "wrote " << out_csv << " (" << limit << " rows)\n";
  return 0;
}

kmt::DetectorConfig make_detector_config(double R, double delta, double delta1,
                                         double delta2, double beta,
                                         const std::string& grid_levels,
                                         std::size_t horizon) {
  kmt::DetectorConfig cfg;
  cfg.R = R;
  cfg.delta = delta;
  cfg.delta1 = delta1;
  cfg.delta2 = delta2;
  cfg.beta = beta;
  cfg.grid = grid_levels.empty()
                 ? kmt::BlockGrid::default_grid(horizon)
                 : kmt::BlockGrid::from_levels(parse_levels(grid_levels));
  cfg.bounds = make_bounds(delta2 / 16.0, 0, 24);
  cfg.validate();
  return cfg;
}

int run_changepoint_run(const std::string& input, double R, double delta, double delta1,
                        double delta2, double beta, const std::string& grid,
                        const std::string& out_csv, ManifestWriter& manifest) {
  const std::vector<double> ys = read_stream(input);
  if (ys.empty()) throw std::runtime_error("changepoint run: empty input stream");
  kmt::DetectorConfig cfg =
      make_detector_config(R, delta, delta1, delta2, beta, grid, ys.size());
  kmt::ChangePointDetector det(cfg);
  std::ostringstream csv;
  csv << "t,stat,threshold,alarm\n";
  for (double y : ys) {
    const auto step = det.observe(y);
    csv << step.t << ',' << step.stat << ',' << step.threshold << ','
        << (step.alarm_now ? 1 : 0) << '\n';
    if (det.alarm()) break;
  }
  write_text(out_csv, csv.str());
  manifest.artifacts.push_back(out_csv);
  if (det.alarm()) {
    std::cout << "alarm at t=" << det.alarm()->second << " (s=" << det.alarm()->first
              << ")\n";
  } else {
    std::cout << "no alarm in " << ys.size() << " observations\n";
  }
  return 0;
}

int run_changepoint_simulate(const std::string& shifts_text, std::size_t ell,
                             std::size_t trials, std::size_t horizon, std::size_t T_cp,
                             double R, double delta, double delta1, double delta2,
                             double beta, const std::string& grid, double oracle_sigma,
                             const std::string& out_csv, const GlobalOptions& global,
                             ManifestWriter& manifest) {
  kmt::DetectorConfig cfg =
      make_detector_config(R, delta, delta1, delta2, beta, grid, horizon);
  auto pool = std::make_shared<kmt::EvaluatorPool>(cfg.bounds);
  std::ostringstream csv;
  csv << "shift,detection_rate,mean_delay\n";
  for (double shift : parse_list(shifts_text)) {
    const kmt::DetectionCurvePoint point = kmt::run_detection_experiment(
        shift, ell, T_cp, horizon, cfg, trials, global.seed,
        effective_threads(global.threads), pool, oracle_sigma);
    csv << point.shift << ',' << point.detection_rate << ',' << point.mean_delay
        << '\n';
    std::cout << "shift=" << point.shift << " detection_rate=" << point.detection_rate
              << " false_alarm_rate=" << point.false_alarm_rate
              << " mean_delay=" << point.mean_delay << '\n';
  }
  write_text(out_csv, csv.str());
  manifest.artifacts.push_back(out_csv);
  return 0;
}

int run_hitting_bound(std::size_t N, double mu, double sigma, double R, double g,
                      double alpha, std::size_t paths, const std::string& out_json,
                      const GlobalOptions& global, ManifestWriter& manifest) {
  kmt::HittingTimeProblem problem;
  problem.N = N;
  problem.R = R;
  problem.mu_N = mu;
  problem.sigma_N = sigma;
  problem.alpha = alpha;
  problem.g_const = g;
  kmt::BoundSearchConfig cfg = make_bounds(alpha, 0, 24);
  const kmt::HittingBoundResult result = kmt::hitting_bound(
      problem, cfg, paths, global.seed, effective_threads(global.threads));
  const json j = kmt::to_json(result);
  std::cout << j.dump(2) << '\n';
  if (!out_json.empty()) {
    write_text(out_json, j.dump(2) + "\n");
    manifest.artifacts.push_back(out_json);
  }
  return 0;
}

int run_hitting_minn(const std::string& mu_text, const std::string& g_text, double R,
                     double sigma, std::size_t paths, const std::string& out_csv,
                     const GlobalOptions& global, ManifestWriter& manifest) {
  kmt::BoundSearchConfig cfg = make_bounds(1e-6, 0, 24);
  std::ostringstream csv;
  csv << "mu,g,min_N\n";
  for (double mu : parse_list(mu_text)) {
    for (double g : parse_list(g_text)) {
      const kmt::MinNontrivialResult row = kmt::min_nontrivial_N(
          mu, g, R, sigma, cfg, paths, global.seed, effective_threads(global.threads));
      csv << mu << ',' << g << ',' << (row.found ? std::to_string(row.N) : "none")
          << '\n';
      std::cout << "mu=" << mu << " g=" << g << " min_N="
                << (row.found ? std::to_string(row.N) : "trivial up to N_max")
                << " bound=" << row.bound << '\n';
    }
  }
  if (!out_csv.empty()) {
    write_text(out_csv, csv.str());
    manifest.artifacts.push_back(out_csv);
  } else {
    std::cout << csv.str();
  }
  return 0;
}

int run_validate_wasserstein(const std::string& alphabet_text,
                             const std::string& probs_text, std::size_t n,
                             std::size_t k, int p, const std::string& out_json,
                             ManifestWriter& manifest) {
  const std::vector<double> values = parse_list(alphabet_text);
  std::vector<double> probs = parse_list(probs_text);
  if (probs.empty()) probs.assign(values.size(), 1.0 / double(values.size()));
  const kmt::FiniteDistribution dist =
      kmt::FiniteDistribution::from_weights(values, probs);

  double lo = values.front(), hi = values.front();
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo >= 0.0)) throw std::runtime_error("alphabet must be nonnegative (Y in [0,R])");
  const double R = hi;
  const double sigma = std::sqrt(dist.variance());
  kmt::BoundedModel model(R, sigma);
  kmt::BoundSearchConfig cfg = make_bounds(0.01, std::max(p, 8), 24);
  kmt::WassersteinEvaluator ev(model, cfg);

  const double brute = kmt::conditional_wp_norm_bruteforce(dist, n, k, p);
  const auto bound = ev.omega_conditional(n, k, p);
  json j;
  j["n"] = n;
  j["k"] = k;
  j["p"] = p;
  j["sigma"] = sigma;
  j["R"] = R;
  j["brute_force"] = brute;
  j["bound"] = bound.value;
  j["branch"] = bound.branch == kmt::BoundBranch::trivial ? "trivial" : "omega_full";
  j["dominated"] = brute <= bound.value + 1e-9;
  std::cout << j.dump(2) << '\n';
  if (!out_json.empty()) {
    write_text(out_json, j.dump(2) + "\n");
    manifest.artifacts.push_back(out_json);
  }
  return 0;
}

int run_validate_coverage(std::size_t n, double alpha, std::size_t trials, double q,
                          const std::string& out_json, const GlobalOptions& global,
                          ManifestWriter& manifest) {
  kmt::BoundedModel model(1.0, std::sqrt(q * (1.0 - q)));
  kmt::BoundSearchConfig cfg = make_bounds(alpha, 0, 24);
  kmt::WassersteinEvaluator ev(model, cfg);
  const kmt::ThresholdSchedule bridge = kmt::build_bridge_schedule(ev, n, alpha);
  const kmt::ThresholdSchedule sum = kmt::build_sum_schedule(ev, n, alpha);

  std::size_t exceed_bridge = 0, exceed_sum = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const kmt::CouplingTrace tr =
        kmt::binary_dyadic_coupling(n, q, 1.0, global.seed + trial);
    bool eb = false, es = false;
    for (std::size_t k = 1; k <= n; ++k) {
      if (std::abs(tr.W[k - 1] - tr.Ztilde[k - 1]) > bridge.values[k - 1]) eb = true;
      if (std::abs(tr.S[k - 1] - tr.Z[k - 1]) > sum.values[k - 1]) es = true;
    }
    exceed_bridge += eb;
    exceed_sum += es;
  }
  json j;
  j["n"] = n;
  j["alpha"] = alpha;
  j["trials"] = trials;
  j["success_prob"] = q;
  j["seed"] = global.seed;
  j["exceedance_rate_bridge"] = double(exceed_bridge) / double(trials);
  j["exceedance_rate_sum"] = double(exceed_sum) / double(trials);
  j["mc_slack"] = 3.0 * std::sqrt(alpha / double(trials));
  std::cout << j.dump(2) << '\n';
  if (!out_json.empty()) {
    write_text(out_json, j.dump(2) + "\n");
    manifest.artifacts.push_back(out_json);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Computable coupling thresholds for bounded i.i.d. sequences"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions global;
  std::string config_path;
  app.add_option("--threads", global.threads, "Worker threads (0 = hardware)");
  app.add_option("--seed", global.seed, "RNG seed (all randomness derives from it)");
  app.add_option("--config", config_path, "JSON config file (flags override it)");
  app.add_option("--manifest", global.manifest_path, "Run manifest output path");

  // thresholds ---------------------------------------------------------------
  auto* thresholds = app.add_subcommand("thresholds", "Coupling threshold schedules");
  thresholds->fallthrough();
  std::size_t th_n = 1024;
  double th_R = 1.0, th_sigma = 0.25, th_alpha = 0.05, th_variant_beta = 0.0;
  std::string th_kind = "sum", th_out = "thresholds.csv", th_json;
  int th_pmax = 0;
  std::size_t th_kappa = 24;
  bool th_zeta = false;
  thresholds->add_option("--n", th_n, "Horizon");
  thresholds->add_option("--R", th_R, "Range of Y");
  thresholds->add_option("--sigma", th_sigma, "Standard deviation");
  thresholds->add_option("--alpha", th_alpha, "Confidence budget");
  thresholds->add_option("--kind", th_kind, "bridge or sum")
      ->check(CLI::IsMember({"bridge", "sum"}));
  thresholds->add_option("--out", th_out, "CSV output path");
  thresholds->add_option("--json", th_json, "Optional JSON output path");
  thresholds->add_option("--p-max", th_pmax, "Largest p in the search grid");
  thresholds->add_option("--kappa-grid", th_kappa, "Kappa grid size");
  thresholds->add_option("--variant-beta", th_variant_beta,
                         "Geometric level weights C_l = beta^l (0 disables)");
  thresholds->add_flag("--zeta", th_zeta, "Enable the zeta midpoint fallback");

  // empirical ----------------------------------------------------------------
  auto* empirical = app.add_subcommand("empirical", "Unknown-sigma threshold stream");
  empirical->fallthrough();
  std::string em_input = "-", em_kind = "bridge", em_out = "empirical.csv";
  double em_R = 1.0, em_alpha = 0.05, em_rho = 0.5;
  std::size_t em_n = 1024;
  int em_pmax = 0;
  empirical->add_option("--input", em_input, "Stream file ('-' for stdin)");
  empirical->add_option("--R", em_R, "Range of Y");
  empirical->add_option("--alpha", em_alpha, "Confidence budget");
  empirical->add_option("--rho", em_rho, "Budget share for the variance CS");
  empirical->add_option("--n", em_n, "Horizon");
  empirical->add_option("--kind", em_kind, "bridge or sum")
      ->check(CLI::IsMember({"bridge", "sum"}));
  empirical->add_option("--out", em_out, "CSV output path");
  empirical->add_option("--p-max", em_pmax, "Largest p in the search grid");

  // changepoint ---------------------------------------------------------------
  auto* changepoint = app.add_subcommand("changepoint", "Online mean-shift detection");
  changepoint->fallthrough();
  changepoint->require_subcommand(1);
  auto* cp_run = changepoint->add_subcommand("run", "Run the detector on a stream");
  cp_run->fallthrough();
  std::string cp_input = "-", cp_grid, cp_out = "changepoint.csv";
  double cp_R = 1.0, cp_delta = 0.05, cp_delta1 = 0.01, cp_delta2 = 0.01, cp_beta = 2.0;
  cp_run->add_option("--input", cp_input, "Stream file ('-' for stdin)");
  cp_run->add_option("--R", cp_R, "Range of Y");
  cp_run->add_option("--delta", cp_delta, "Type-I budget");
  cp_run->add_option("--delta1", cp_delta1, "Variance-CS budget");
  cp_run->add_option("--delta2", cp_delta2, "Coupling budget");
  cp_run->add_option("--beta", cp_beta, "Block budget decay");
  cp_run->add_option("--grid", cp_grid, "Comma-separated block exponents L_i");
  cp_run->add_option("--out", cp_out, "CSV output path");

  auto* cp_sim = changepoint->add_subcommand("simulate", "Detection-rate experiment");
  cp_sim->fallthrough();
  std::string sim_shifts = "0.05,0.1,0.2", sim_grid, sim_out = "detection.csv";
  std::size_t sim_ell = 30, sim_trials = 100, sim_horizon = 4096, sim_T = 2000;
  double sim_R = 1.2, sim_delta = 0.05, sim_delta1 = 0.01, sim_delta2 = 0.01,
         sim_beta = 2.0, sim_oracle = 0.0;
  cp_sim->add_option("--shift", sim_shifts, "Comma-separated mean shifts");
  cp_sim->add_option("--ell", sim_ell, "Uniforms averaged per observation");
  cp_sim->add_option("--trials", sim_trials, "Monte-Carlo trials per shift");
  cp_sim->add_option("--horizon", sim_horizon, "Stream length");
  cp_sim->add_option("--T", sim_T, "Change-point time");
  cp_sim->add_option("--R", sim_R, "Detector range assumption");
  cp_sim->add_option("--delta", sim_delta, "Type-I budget");
  cp_sim->add_option("--delta1", sim_delta1, "Variance-CS budget");
  cp_sim->add_option("--delta2", sim_delta2, "Coupling budget");
  cp_sim->add_option("--beta", sim_beta, "Block budget decay");
  cp_sim->add_option("--grid", sim_grid, "Comma-separated block exponents L_i");
  cp_sim->add_option("--out", sim_out, "CSV output path");
  cp_sim->add_option("--oracle-sigma", sim_oracle,
                     "Run with known-variance intervals [sigma, sigma] (0 = off)");

  // hitting --------------------------------------------------------------------
  auto* hitting = app.add_subcommand("hitting", "First-hitting-time bounds");
  hitting->fallthrough();
  hitting->require_subcommand(1);
  auto* hit_bound = hitting->add_subcommand("bound", "Bound P(tau_N >= N)");
  hit_bound->fallthrough();
  std::size_t hb_N = 1024, hb_paths = 100000;
  double hb_mu = -0.01, hb_sigma = 0.5, hb_R = 1.0, hb_g = 10.0, hb_alpha = 0.001;
  std::string hb_out;
  hit_bound->add_option("--N", hb_N, "Horizon");
  hit_bound->add_option("--mu", hb_mu, "Per-step drift");
  hit_bound->add_option("--sigma", hb_sigma, "Per-step standard deviation");
  hit_bound->add_option("--R", hb_R, "Range (X in [-R/2, R/2])");
  hit_bound->add_option("--g", hb_g, "Constant boundary");
  hit_bound->add_option("--alpha", hb_alpha, "Coupling budget");
  hit_bound->add_option("--paths", hb_paths, "Monte-Carlo paths");
  hit_bound->add_option("--out", hb_out, "Optional JSON output path");

  auto* hit_minn = hitting->add_subcommand("min-n", "Smallest non-trivial horizon");
  hit_minn->fallthrough();
  std::string mn_mu = "-0.1,-0.25,-0.5", mn_g = "10,20", mn_out;
  double mn_R = 1.0, mn_sigma = 0.5;
  std::size_t mn_paths = 100000;
  hit_minn->add_option("--mu", mn_mu, "Comma-separated drifts (negative)");
  hit_minn->add_option("--g", mn_g, "Comma-separated boundaries");
  hit_minn->add_option("--R", mn_R, "Range");
  hit_minn->add_option("--sigma", mn_sigma, "Per-step standard deviation");
  hit_minn->add_option("--paths", mn_paths, "Monte-Carlo paths");
  hit_minn->add_option("--out", mn_out, "CSV output path (stdout when omitted)");

  // validate --------------------------------------------------------------------
  auto* validate = app.add_subcommand("validate", "Oracle validation suites");
  validate->fallthrough();
  validate->require_subcommand(1);
  auto* val_w = validate->add_subcommand("wasserstein", "Brute force vs bound");
  val_w->fallthrough();
  std::string vw_alphabet = "0,2", vw_probs = "", vw_out;
  std::size_t vw_n = 6, vw_k = 3;
  int vw_p = 2;
  val_w->add_option("--alphabet", vw_alphabet, "Comma-separated alphabet values");
  val_w->add_option("--probs", vw_probs, "Comma-separated probabilities");
  val_w->add_option("--n", vw_n, "Sample size (<= 10)");
  val_w->add_option("--k", vw_k, "Bridge index");
  val_w->add_option("--p", vw_p, "Wasserstein order");
  val_w->add_option("--out", vw_out, "Optional JSON output path");

  auto* val_c = validate->add_subcommand("coverage", "Dyadic coupling coverage");
  val_c->fallthrough();
  std::size_t vc_n = 256, vc_trials = 2000;
  double vc_alpha = 0.1, vc_q = 0.5;
  std::string vc_out;
  val_c->add_option("--n", vc_n, "Horizon (power of two)");
  val_c->add_option("--alpha", vc_alpha, "Budget");
  val_c->add_option("--trials", vc_trials, "Coupling trials");
  val_c->add_option("--q", vc_q, "Success probability of the binary alphabet");
  val_c->add_option("--out", vc_out, "Optional JSON output path");

  // Config file: JSON with optional per-subcommand sections plus top-level
  // threads/seed; flags given on the command line win.
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      std::ifstream in(args[i + 1]);
      if (!in) {
        std::cerr << "cannot open config: " << args[i + 1] << '\n';
        return 2;
      }
      json cfg = json::parse(in, nullptr, false);
      if (cfg.is_discarded()) {
        std::cerr << "config is not valid JSON\n";
        return 2;
      }
      std::vector<std::string> injected;
      if (cfg.contains("threads"))
        injected.insert(injected.end(),
                        {"--threads", std::to_string(cfg["threads"].get<int>())});
      if (cfg.contains("seed"))
        injected.insert(injected.end(),
                        {"--seed", std::to_string(cfg["seed"].get<std::uint64_t>())});
      // Section keys become --key value tokens right after the subcommand path.
      std::vector<std::string> rebuilt = injected;
      for (std::size_t j = 0; j < args.size(); ++j) {
        rebuilt.push_back(args[j]);
        if (cfg.contains(args[j]) && cfg[args[j]].is_object()) {
          json section = cfg[args[j]];
          // A nested section (e.g. hitting.min-n) is applied after its token.
          for (auto& [key, value] : section.items()) {
            if (value.is_object()) continue;
            rebuilt.push_back("--" + key);
            rebuilt.push_back(value.is_string() ? value.get<std::string>()
                                                : value.dump());
          }
        }
      }
      args = rebuilt;
      break;
    }
  }

  try {
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const std::string& a : args) cargs.push_back(a.c_str());
    app.parse(int(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  ManifestWriter manifest;
  manifest.seed = global.seed;
  for (const std::string& a : args) manifest.command += (manifest.command.empty() ? "" : " ") + a;
  manifest.parameters["seed"] = global.seed;
  manifest.parameters["threads"] = effective_threads(global.threads);
  std::cout << "seed=" << global.seed << "\n";

  int rc = 0;
  try {
    if (thresholds->parsed()) {
      rc = run_thresholds(th_n, th_R, th_sigma, th_alpha, th_kind, th_out, th_json,
                          th_pmax, th_kappa, th_variant_beta, th_zeta, manifest);
    } else if (empirical->parsed()) {
      rc = run_empirical(em_input, em_R, em_alpha, em_rho, em_n, em_kind, em_out,
                         em_pmax, manifest);
    } else if (changepoint->parsed() && cp_run->parsed()) {
      rc = run_changepoint_run(cp_input, cp_R, cp_delta, cp_delta1, cp_delta2, cp_beta,
                               cp_grid, cp_out, manifest);
    } else if (changepoint->parsed() && cp_sim->parsed()) {
      rc = run_changepoint_simulate(sim_shifts, sim_ell, sim_trials, sim_horizon, sim_T,
                                    sim_R, sim_delta, sim_delta1, sim_delta2, sim_beta,
                                    sim_grid, sim_oracle, sim_out, global, manifest);
    } else if (hitting->parsed() && hit_bound->parsed()) {
      rc = run_hitting_bound(hb_N, hb_mu, hb_sigma, hb_R, hb_g, hb_alpha, hb_paths,
                             hb_out, global, manifest);
    } else if (hitting->parsed() && hit_minn->parsed()) {
      rc = run_hitting_minn(mn_mu, mn_g, mn_R, mn_sigma, mn_paths, mn_out, global,
                            manifest);
    } else if (validate->parsed() && val_w->parsed()) {
      rc = run_validate_wasserstein(vw_alphabet, vw_probs, vw_n, vw_k, vw_p, vw_out,
                                    manifest);
    } else if (validate->parsed() && val_c->parsed()) {
      rc = run_validate_coverage(vc_n, vc_alpha, vc_trials, vc_q, vc_out, global,
                                 manifest);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  if (!global.manifest_path.empty()) manifest.write(global.manifest_path);
  return rc;
}
