// Command line front end: simulate datasets, fit the aggregated-load model,
// tabulate count distributions, and render fit reports.

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aggload/errors.hpp"
#include "aggload/fit.hpp"
#include "aggload/json_io.hpp"
#include "aggload/model.hpp"
#include "aggload/simulate.hpp"
#include "aggload/version.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aggload;

namespace {

int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("AGGLOAD_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw InputError("AGGLOAD_THREADS must be a positive integer");
    if (v < static_cast<long>(hw)) hw = static_cast<unsigned>(v);
  }
  return static_cast<int>(hw);
}

std::string iso_timestamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Manifest without timestamp: embedded into every output so reruns with the
// same seed stay byte-identical.  manifest.json adds the timestamp.
json make_manifest(const std::string& command, const std::string& config_path,
                   const std::vector<std::pair<std::string, std::string>>& inputs,
                   const std::vector<std::string>& outputs, std::uint64_t seed) {
  json m;
  m["command"] = command;
  m["config"] = config_path.empty() ? json() : json(config_path);
  json in = json::object();
  for (const auto& [key, value] : inputs) in[key] = value;
  m["inputs"] = std::move(in);
  m["outputs"] = outputs;
  m["seed"] = seed;
  m["tool_version"] = kVersion;
  return m;
}

void write_manifest_file(const fs::path& dir, json manifest) {
  manifest["timestamp"] = iso_timestamp();
  write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

std::string fmt17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

CountVector parse_count_list(const std::string& text) {
  CountVector out;
  std::istringstream is(text);
  std::string piece;
  while (std::getline(is, piece, ',')) {
    try {
      std::size_t pos = 0;
      long v = std::stol(piece, &pos);
      if (pos != piece.size() || v < 0) throw std::invalid_argument(piece);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InputError("bad count '" + piece + "' in '" + text + "'");
    }
  }
  if (out.empty()) throw InputError("empty count list '" + text + "'");
  return out;
}

// ---- simulate ----

struct SimulateOpts {
  std::string config;
  int case_id = 0;
  int replicates = 5;
  std::uint64_t seed = 1;
  bool replicates_set = false;
  bool seed_set = false;
  std::string out;
};

int run_simulate(const SimulateOpts& opts) {
  SimScenario scenario;
  if (!opts.config.empty()) {
    if (opts.case_id != 0)
      throw InputError("pass either --config or --case, not both");
    scenario = load_scenario(opts.config);
    if (opts.seed_set) scenario.seed = opts.seed;
    if (opts.replicates_set) scenario.num_days = opts.replicates;
    if (opts.seed_set || opts.replicates_set) {
      if (scenario.case_id >= 1 && scenario.case_id <= 4 &&
          !scenario.reported_counts.empty()) {
        // Canned cases keep their pinned reported counts; only revalidate.
        scenario.validate();
      } else {
        scenario.reported_counts.clear();
        finalize_scenario(scenario);
      }
    }
  } else if (opts.case_id >= 1 && opts.case_id <= 4) {
    scenario = build_case(opts.case_id, default_base_gammas(), opts.seed, opts.replicates);
  } else {
    throw InputError("simulate needs --config FILE or --case 1..4");
  }

  fs::create_directories(opts.out);
  const fs::path out_dir(opts.out);
  json manifest = make_manifest(
      "simulate", opts.config, {},
      {"data.csv", "reported_counts.csv", "truth.json", "manifest.json"}, scenario.seed);
  const std::string embed = "manifest " + manifest.dump();

  std::vector<TransformerData> data = simulate_dataset(scenario, 0);
  save_data(data, (out_dir / "data.csv").string(),
            (out_dir / "reported_counts.csv").string(), embed);
  save_scenario(scenario, (out_dir / "truth.json").string(), manifest.dump());
  write_manifest_file(out_dir, manifest);

  std::cout << "simulated " << data.size() << " transformers, " << data.front().num_days()
            << " day(s), " << data.front().num_times() << " grid points -> " << opts.out
            << "\n";
  return 0;
}

// ---- fit ----

struct FitOpts {
  std::string data;
  std::string counts;
  std::string fraud;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  long long b_runs = 0;
  int max_iters = 0;
  double tol = 0.0;
  bool seed_set = false, b_set = false, iters_set = false, tol_set = false;
  bool exact = false;
};

int run_fit(const FitOpts& opts) {
  FitConfig cfg;
  if (!opts.config.empty()) cfg = load_fit_config(opts.config);
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.b_set) cfg.h_runs = opts.b_runs;
  if (opts.iters_set) cfg.max_outer_iters = opts.max_iters;
  if (opts.tol_set) cfg.rel_tol = opts.tol;
  if (opts.exact) cfg.exact_tables = true;
  cfg.num_threads = worker_count();

  std::string counts_path = opts.counts;
  if (counts_path.empty())
    counts_path = (fs::path(opts.data).parent_path() / "reported_counts.csv").string();

  std::vector<TransformerData> data = load_data(opts.data, counts_path);
  FraudMatrix fraud = load_fraud(opts.fraud);
  FitResult result = fit(data, fraud, cfg);

  fs::create_directories(opts.out);
  const fs::path out_dir(opts.out);
  json manifest = make_manifest("fit", opts.config,
                                {{"data", opts.data},
                                 {"counts", counts_path},
                                 {"fraud", opts.fraud}},
                                {"fit_result.json", "manifest.json"}, cfg.seed);
  save_fit_result(result, (out_dir / "fit_result.json").string(), manifest.dump());
  write_manifest_file(out_dir, manifest);

  std::cout << "status: " << (result.converged ? "converged" : "max-iterations")
            << " after " << result.iterations << " iteration(s)\n";
  std::cout << "loglik: " << result.breakdown.total << " (gauss "
            << result.breakdown.gauss << ", counts " << result.breakdown.counts << ")\n";
  std::cout << "sigma_sq: " << result.params.sigma_sq << "\n";
  std::cout << "sigma_gamma_sq:";
  for (Eigen::Index c = 0; c < result.params.sigma_gamma_sq.size(); ++c)
    std::cout << ' ' << result.params.sigma_gamma_sq(c);
  std::cout << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::cout << "transformer " << data[i].id << ": reported (";
    for (std::size_t c = 0; c < data[i].reported.size(); ++c)
      std::cout << (c ? "," : "") << data[i].reported[c];
    std::cout << ") -> estimated (";
    for (std::size_t c = 0; c < result.params.counts[i].size(); ++c)
      std::cout << (c ? "," : "") << result.params.counts[i][c];
    std::cout << ")\n";
  }
  for (const std::string& w : result.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "wrote " << (out_dir / "fit_result.json").string() << "\n";
  return 0;
}

// ---- htable ----

struct HTableOpts {
  std::string fraud;
  std::string reported;
  long long b_runs = 100000;
  std::uint64_t seed = 1;
  bool exact = false;
  std::string out;
};

int run_htable(const HTableOpts& opts) {
  FraudMatrix fraud = load_fraud(opts.fraud);
  CountVector reported = parse_count_list(opts.reported);

  HTable table = opts.exact
                     ? exact_h(fraud, reported)
                     : estimate_h_table(fraud, reported, opts.b_runs, opts.seed,
                                        worker_count());

  fs::create_directories(opts.out);
  const fs::path out_dir(opts.out);
  json manifest = make_manifest("htable", "", {{"fraud", opts.fraud}},
                                {"htable.json", "manifest.json"}, opts.seed);
  save_htable(table, (out_dir / "htable.json").string(), manifest.dump());
  write_manifest_file(out_dir, manifest);

  std::vector<CountVector> order = candidate_counts(table);
  std::size_t shown = std::min<std::size_t>(order.size(), 20);
  std::cout << (table.is_exact() ? "exact" : "monte-carlo") << " table over "
            << order.size() << " count vectors";
  if (!table.is_exact()) std::cout << " (" << table.num_runs << " runs)";
  std::cout << "\n";
  for (std::size_t r = 0; r < shown; ++r) {
    std::cout << "  (";
    for (std::size_t c = 0; c < order[r].size(); ++c)
      std::cout << (c ? "," : "") << order[r][c];
    std::cout << ")  " << table.h(order[r]) << "\n";
  }
  if (shown < order.size()) std::cout << "  ... " << order.size() - shown << " more\n";
  std::cout << "wrote " << (out_dir / "htable.json").string() << "\n";
  return 0;
}

// ---- report ----

struct ReportOpts {
  std::string result;
  std::string out;
};

int run_report(const ReportOpts& opts) {
  FitResult res = load_fit_result(opts.result);
  const ModelParams& p = res.params;
  DesignMatrix design = eval_basis(p.basis, res.times);
  const int c_total = p.num_classes();
  const std::size_t n_transformers = res.transformer_ids.size();

  fs::create_directories(opts.out);
  const fs::path out_dir(opts.out);
  std::vector<std::string> outputs = {"typologies.svg", "trace.svg",
                                      "report_typologies.csv", "report_trace.csv",
                                      "report_aggregates.csv", "report_counts.csv",
                                      "manifest.json"};
  for (const std::string& id : res.transformer_ids)
    outputs.push_back("aggregate_" + id + ".svg");
  json manifest =
      make_manifest("report", "", {{"result", opts.result}}, outputs, 0);
  const std::string embed = "manifest " + manifest.dump();

  // Class typologies.
  std::vector<tools::SvgSeries> typ_series(c_total);
  std::vector<Eigen::VectorXd> typologies(c_total);
  for (int c = 0; c < c_total; ++c) {
    typologies[c] = p.typology(c, design);
    typ_series[c].x = res.times;
    typ_series[c].y.assign(typologies[c].data(), typologies[c].data() + typologies[c].size());
    typ_series[c].label = "class " + std::to_string(c + 1);
  }
  tools::write_line_chart((out_dir / "typologies.svg").string(),
                          "Estimated class typologies", "hour of day", "kVA per consumer",
                          typ_series);

  // Log-likelihood trace.
  tools::SvgSeries trace_series;
  trace_series.label = "joint log likelihood";
  for (std::size_t s = 0; s < res.trace.size(); ++s) {
    trace_series.x.push_back(static_cast<double>(s));
    trace_series.y.push_back(res.trace[s].loglik);
  }
  tools::write_line_chart((out_dir / "trace.svg").string(), "Fit progress",
                          "update step", "log likelihood", {trace_series});

  // Observed vs fitted aggregate per transformer.
  std::vector<Eigen::VectorXd> fitted(n_transformers);
  for (std::size_t i = 0; i < n_transformers; ++i) {
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(p.basis.num_basis);
    for (int c = 0; c < c_total; ++c)
      coeff += static_cast<double>(p.counts[i][c]) * p.gammas.row(c).transpose();
    fitted[i] = design.values * coeff;

    tools::SvgSeries observed, model;
    observed.label = "observed day mean";
    observed.x = res.times;
    Eigen::VectorXd obs = res.observed_mean.col(static_cast<Eigen::Index>(i));
    observed.y.assign(obs.data(), obs.data() + obs.size());
    model.label = "fitted mean";
    model.x = res.times;
    model.y.assign(fitted[i].data(), fitted[i].data() + fitted[i].size());
    model.dashed = true;
    tools::write_line_chart(
        (out_dir / ("aggregate_" + res.transformer_ids[i] + ".svg")).string(),
        "Transformer " + res.transformer_ids[i], "hour of day", "aggregate kVA",
        {observed, model});
  }

  // Plot-ready CSV companions.
  {
    std::ofstream csv(out_dir / "report_typologies.csv");
    csv << "# " << embed << "\n";
    csv << "time_hours";
    for (int c = 0; c < c_total; ++c) csv << ",class_" << c + 1;
    csv << "\n";
    for (std::size_t r = 0; r < res.times.size(); ++r) {
      csv << fmt17(res.times[r]);
      for (int c = 0; c < c_total; ++c)
        csv << ',' << fmt17(typologies[c](static_cast<Eigen::Index>(r)));
      csv << "\n";
    }
  }
  {
    std::ofstream csv(out_dir / "report_trace.csv");
    csv << "# " << embed << "\n";
    csv << "step,iteration,update,loglik\n";
    for (std::size_t s = 0; s < res.trace.size(); ++s)
      csv << s << ',' << res.trace[s].iteration << ',' << res.trace[s].step << ','
          << fmt17(res.trace[s].loglik) << "\n";
  }
  {
    std::ofstream csv(out_dir / "report_aggregates.csv");
    csv << "# " << embed << "\n";
    csv << "transformer_id,time_hours,observed_mean,fitted_mean\n";
    for (std::size_t i = 0; i < n_transformers; ++i)
      for (std::size_t r = 0; r < res.times.size(); ++r)
        csv << res.transformer_ids[i] << ',' << fmt17(res.times[r]) << ','
            << fmt17(res.observed_mean(static_cast<Eigen::Index>(r),
                                       static_cast<Eigen::Index>(i)))
            << ',' << fmt17(fitted[i](static_cast<Eigen::Index>(r))) << "\n";
  }
  {
    std::ofstream csv(out_dir / "report_counts.csv");
    csv << "# " << embed << "\n";
    csv << "transformer_id,class,reported,estimated\n";
    for (std::size_t i = 0; i < n_transformers; ++i) {
      const CountVector& reported =
          i < res.tables.size() ? res.tables[i].reported : CountVector(c_total, 0);
      for (int c = 0; c < c_total; ++c)
        csv << res.transformer_ids[i] << ',' << c + 1 << ',' << reported[c] << ','
            << p.counts[i][c] << "\n";
    }
  }

  write_manifest_file(out_dir, manifest);
  std::cout << "wrote report to " << opts.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aggregated load curve model: simulate, fit, tabulate, report"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SimulateOpts sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim_cmd->add_option("--config", sim.config, "scenario JSON file");
  sim_cmd->add_option("--case", sim.case_id, "canned scenario 1..4");
  CLI::Option* sim_rep = sim_cmd->add_option("--replicates", sim.replicates,
                                             "replicate days per transformer");
  CLI::Option* sim_seed = sim_cmd->add_option("--seed", sim.seed, "master scenario seed");
  sim_cmd->add_option("--out", sim.out, "output directory")->required();

  FitOpts fit_opts;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the model to a dataset");
  fit_cmd->add_option("--data", fit_opts.data, "readings CSV")->required();
  fit_cmd->add_option("--counts", fit_opts.counts,
                      "reported-counts CSV (default: reported_counts.csv next to --data)");
  fit_cmd->add_option("--fraud", fit_opts.fraud, "fraud matrix JSON")->required();
  fit_cmd->add_option("--config", fit_opts.config, "fit configuration JSON");
  fit_cmd->add_option("--out", fit_opts.out, "output directory")->required();
  CLI::Option* fit_seed = fit_cmd->add_option("--seed", fit_opts.seed, "H table seed");
  CLI::Option* fit_b = fit_cmd->add_option("--b-runs", fit_opts.b_runs,
                                           "Monte Carlo runs per H table");
  CLI::Option* fit_iters =
      fit_cmd->add_option("--max-iters", fit_opts.max_iters, "outer iteration cap");
  CLI::Option* fit_tol = fit_cmd->add_option("--tol", fit_opts.tol,
                                             "relative log-likelihood tolerance");
  fit_cmd->add_flag("--exact", fit_opts.exact, "enumerate H tables exactly");

  HTableOpts ht;
  CLI::App* ht_cmd = app.add_subcommand("htable", "tabulate the true-count distribution");
  ht_cmd->add_option("--fraud", ht.fraud, "fraud matrix JSON")->required();
  ht_cmd->add_option("--reported", ht.reported, "reported counts, e.g. 32,43")->required();
  ht_cmd->add_option("--b-runs", ht.b_runs, "Monte Carlo runs");
  ht_cmd->add_option("--seed", ht.seed, "Monte Carlo seed");
  ht_cmd->add_flag("--exact", ht.exact, "enumerate exactly instead of sampling");
  ht_cmd->add_option("--out", ht.out, "output directory")->required();

  ReportOpts rep;
  CLI::App* rep_cmd = app.add_subcommand("report", "render plots from a fit result");
  rep_cmd->add_option("--result", rep.result, "fit_result.json from 'fit'")->required();
  rep_cmd->add_option("--out", rep.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim_cmd->parsed()) {
      sim.replicates_set = sim_rep->count() > 0;
      sim.seed_set = sim_seed->count() > 0;
      return run_simulate(sim);
    }
    if (fit_cmd->parsed()) {
      fit_opts.seed_set = fit_seed->count() > 0;
      fit_opts.b_set = fit_b->count() > 0;
      fit_opts.iters_set = fit_iters->count() > 0;
      fit_opts.tol_set = fit_tol->count() > 0;
      return run_fit(fit_opts);
    }
    if (ht_cmd->parsed()) return run_htable(ht);
    if (rep_cmd->parsed()) return run_report(rep);
    std::cerr << "no command given\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
