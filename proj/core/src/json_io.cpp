#include "aggload/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aggload/errors.hpp"

namespace aggload {

using nlohmann::json;

namespace {

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

json parse_manifest(const std::string& manifest_json) {
  if (manifest_json.empty()) return json();
  json m = parse(manifest_json, "manifest");
  if (!m.is_object()) throw InputError("manifest: expected a JSON object");
  return m;
}

[[noreturn]] void field_fail(const std::string& path, const std::string& why) {
  throw InputError(path + ": " + why);
}

const json& need(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object()) field_fail(ctx, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) field_fail(ctx + "." + key, "missing");
  return *it;
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) field_fail(path, "expected a number");
  return v.get<double>();
}

long as_long(const json& v, const std::string& path) {
  if (!v.is_number_integer()) field_fail(path, "expected an integer");
  return v.get<long>();
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  // Values above LLONG_MAX parse as unsigned; check that tag before the sign.
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (!v.is_number_integer() || v.get<long long>() < 0)
    field_fail(path, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

Eigen::MatrixXd as_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) field_fail(path, "expected a nonempty 2-D array");
  const std::size_t rows = v.size();
  if (!v[0].is_array()) field_fail(path, "expected a 2-D array");
  const std::size_t cols = v[0].size();
  Eigen::MatrixXd out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!v[r].is_array() || v[r].size() != cols)
      field_fail(path, "ragged rows in 2-D array");
    for (std::size_t c = 0; c < cols; ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          as_double(v[r][c], path);
  }
  return out;
}

Eigen::VectorXd as_vector(const json& v, const std::string& path) {
  if (!v.is_array()) field_fail(path, "expected an array");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = as_double(v[i], path);
  return out;
}

CountVector as_counts(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) field_fail(path, "expected a nonempty integer array");
  CountVector out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_long(v[i], path));
  return out;
}

std::vector<CountVector> as_count_list(const json& v, const std::string& path) {
  if (!v.is_array()) field_fail(path, "expected an array of integer arrays");
  std::vector<CountVector> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::ostringstream p;
    p << path << "[" << i << "]";
    out.push_back(as_counts(v[i], p.str()));
  }
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

// Log likelihoods can legitimately be -inf (counts outside table support);
// JSON has no infinities, so those serialize as null.
json loglik_to_json(double v) {
  if (std::isfinite(v)) return json(v);
  return json();
}

double loglik_from_json(const json& v, const std::string& path) {
  if (v.is_null()) return kNegInf;
  return as_double(v, path);
}

json basis_json(const BasisSpec& spec) {
  return json{{"degree", spec.degree},
              {"num_basis", spec.num_basis},
              {"t_lo", spec.t_lo},
              {"t_hi", spec.t_hi}};
}

BasisSpec basis_from(const json& v, const std::string& ctx) {
  BasisSpec spec;
  spec.degree = static_cast<int>(as_long(need(v, "degree", ctx), ctx + ".degree"));
  spec.num_basis = static_cast<int>(as_long(need(v, "num_basis", ctx), ctx + ".num_basis"));
  spec.t_lo = as_double(need(v, "t_lo", ctx), ctx + ".t_lo");
  spec.t_hi = as_double(need(v, "t_hi", ctx), ctx + ".t_hi");
  spec.validate();
  return spec;
}

json htable_json(const HTable& table) {
  json out;
  json reported = json::array();
  for (long v : table.reported) reported.push_back(v);
  out["reported"] = std::move(reported);
  json entries = json::array();
  if (table.is_exact()) {
    out["mode"] = "exact";
    for (const auto& [m, p] : table.exact_probs) {
      json mj = json::array();
      for (long v : m) mj.push_back(v);
      entries.push_back(json{{"m", std::move(mj)}, {"h", p}});
    }
  } else {
    out["mode"] = "monte-carlo";
    out["b"] = table.num_runs;
    out["seed"] = table.seed;
    for (const auto& [m, c] : table.cell_counts) {
      json mj = json::array();
      for (long v : m) mj.push_back(v);
      entries.push_back(json{{"m", std::move(mj)}, {"num", c}, {"den", table.num_runs}});
    }
  }
  out["entries"] = std::move(entries);
  return out;
}

HTable htable_from(const json& v, const std::string& ctx) {
  HTable table;
  table.reported = as_counts(need(v, "reported", ctx), ctx + ".reported");
  const json& mode = need(v, "mode", ctx);
  const json& entries = need(v, "entries", ctx);
  if (!entries.is_array()) field_fail(ctx + ".entries", "expected an array");
  if (mode == "exact") {
    table.num_runs = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      std::ostringstream p;
      p << ctx << ".entries[" << i << "]";
      CountVector m = as_counts(need(entries[i], "m", p.str()), p.str() + ".m");
      table.exact_probs[m] = as_double(need(entries[i], "h", p.str()), p.str() + ".h");
    }
  } else if (mode == "monte-carlo") {
    table.num_runs = as_long(need(v, "b", ctx), ctx + ".b");
    if (table.num_runs <= 0) field_fail(ctx + ".b", "must be positive");
    table.seed = as_u64(need(v, "seed", ctx), ctx + ".seed");
    long long total = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      std::ostringstream p;
      p << ctx << ".entries[" << i << "]";
      CountVector m = as_counts(need(entries[i], "m", p.str()), p.str() + ".m");
      long long num = as_long(need(entries[i], "num", p.str()), p.str() + ".num");
      long long den = as_long(need(entries[i], "den", p.str()), p.str() + ".den");
      if (den != table.num_runs) field_fail(p.str() + ".den", "does not match table b");
      if (num < 0) field_fail(p.str() + ".num", "negative cell count");
      table.cell_counts[m] = num;
      total += num;
    }
    if (total != table.num_runs)
      field_fail(ctx + ".entries", "cell counts do not sum to b");
  } else {
    field_fail(ctx + ".mode", "expected 'monte-carlo' or 'exact'");
  }
  return table;
}

}  // namespace

// ---- file helpers ----

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path + "'");
}

// ---- basis ----

std::string basis_to_json(const BasisSpec& spec) { return basis_json(spec).dump(2) + "\n"; }

BasisSpec basis_from_json_text(const std::string& text) {
  return basis_from(parse(text, "basis"), "basis");
}

// ---- fraud ----

FraudMatrix fraud_from_json_text(const std::string& text) {
  json v = parse(text, "fraud");
  const json* arr = &v;
  if (v.is_object()) arr = &need(v, "fraud_matrix", "fraud");
  Eigen::MatrixXd probs = as_matrix(*arr, "fraud_matrix");
  // Config files carry rounded decimals; accept rows within 1e-9 of 1 and
  // let the constructor renormalize.
  return FraudMatrix(std::move(probs), 1e-9);
}

FraudMatrix load_fraud(const std::string& path) {
  try {
    return fraud_from_json_text(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string fraud_to_json(const FraudMatrix& fraud) {
  return json{{"fraud_matrix", matrix_to_json(fraud.probs())}}.dump(2) + "\n";
}

// ---- scenario ----

SimScenario scenario_from_json_text(const std::string& text) {
  json v = parse(text, "scenario");
  if (!v.is_object()) throw InputError("scenario: expected a JSON object");

  long case_id = v.contains("case") ? as_long(v["case"], "scenario.case") : 0;
  if (case_id != 0 && !v.contains("gammas")) {
    // Canned case: only days and seed are tunable.
    int num_days = v.contains("num_days")
                       ? static_cast<int>(as_long(v["num_days"], "scenario.num_days"))
                       : 5;
    std::uint64_t seed = v.contains("seed") ? as_u64(v["seed"], "scenario.seed") : 1;
    return build_case(static_cast<int>(case_id), default_base_gammas(), seed, num_days);
  }

  SimScenario s;
  s.case_id = static_cast<int>(case_id);
  s.num_days = static_cast<int>(as_long(need(v, "num_days", "scenario"), "scenario.num_days"));
  s.seed = v.contains("seed") ? as_u64(v["seed"], "scenario.seed") : 1;
  s.basis = basis_from(need(v, "basis", "scenario"), "scenario.basis");
  s.gammas = as_matrix(need(v, "gammas", "scenario"), "scenario.gammas");
  s.sigma_gamma_sq =
      as_vector(need(v, "sigma_gamma_sq", "scenario"), "scenario.sigma_gamma_sq");
  s.sigma_sq = as_double(need(v, "sigma_sq", "scenario"), "scenario.sigma_sq");
  s.fraud = as_matrix(need(v, "fraud_matrix", "scenario"), "scenario.fraud_matrix");
  s.true_counts = as_count_list(need(v, "true_counts", "scenario"), "scenario.true_counts");
  s.num_transformers = static_cast<int>(s.true_counts.size());
  if (v.contains("reported_counts"))
    s.reported_counts = as_count_list(v["reported_counts"], "scenario.reported_counts");
  if (v.contains("times")) {
    Eigen::VectorXd t = as_vector(v["times"], "scenario.times");
    s.times.assign(t.data(), t.data() + t.size());
  }
  finalize_scenario(s);
  return s;
}

SimScenario load_scenario(const std::string& path) {
  try {
    return scenario_from_json_text(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string scenario_to_json(const SimScenario& scenario, const std::string& manifest_json) {
  json out;
  json manifest = parse_manifest(manifest_json);
  if (!manifest.is_null()) out["manifest"] = std::move(manifest);
  out["case"] = scenario.case_id;
  out["num_transformers"] = scenario.num_transformers;
  out["num_days"] = scenario.num_days;
  out["seed"] = scenario.seed;
  out["basis"] = basis_json(scenario.basis);
  out["gammas"] = matrix_to_json(scenario.gammas);
  out["sigma_gamma_sq"] = vector_to_json(scenario.sigma_gamma_sq);
  out["sigma_sq"] = scenario.sigma_sq;
  out["fraud_matrix"] = matrix_to_json(scenario.fraud);
  json tc = json::array(), rc = json::array();
  for (const CountVector& m : scenario.true_counts) {
    json row = json::array();
    for (long x : m) row.push_back(x);
    tc.push_back(std::move(row));
  }
  for (const CountVector& m : scenario.reported_counts) {
    json row = json::array();
    for (long x : m) row.push_back(x);
    rc.push_back(std::move(row));
  }
  out["true_counts"] = std::move(tc);
  out["reported_counts"] = std::move(rc);
  out["times"] = scenario.times;
  return out.dump(2) + "\n";
}

void save_scenario(const SimScenario& scenario, const std::string& path,
                   const std::string& manifest_json) {
  write_text_file(path, scenario_to_json(scenario, manifest_json));
}

// ---- H tables ----

std::string htable_to_json(const HTable& table, const std::string& manifest_json) {
  json out = htable_json(table);
  json manifest = parse_manifest(manifest_json);
  if (!manifest.is_null()) out["manifest"] = std::move(manifest);
  return out.dump(2) + "\n";
}

HTable htable_from_json_text(const std::string& text) {
  return htable_from(parse(text, "htable"), "htable");
}

HTable load_htable(const std::string& path) {
  try {
    return htable_from_json_text(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void save_htable(const HTable& table, const std::string& path,
                 const std::string& manifest_json) {
  write_text_file(path, htable_to_json(table, manifest_json));
}

// ---- fit config ----

FitConfig fit_config_from_json_text(const std::string& text) {
  json v = parse(text, "fit config");
  if (!v.is_object()) throw InputError("fit config: expected a JSON object");
  FitConfig cfg;
  if (v.contains("basis")) cfg.basis = basis_from(v["basis"], "fit config.basis");
  if (v.contains("max_outer_iters"))
    cfg.max_outer_iters =
        static_cast<int>(as_long(v["max_outer_iters"], "fit config.max_outer_iters"));
  if (v.contains("rel_tol")) cfg.rel_tol = as_double(v["rel_tol"], "fit config.rel_tol");
  if (v.contains("inner_tol"))
    cfg.inner_tol = as_double(v["inner_tol"], "fit config.inner_tol");
  if (v.contains("sigma_sq_floor"))
    cfg.sigma_sq_floor = as_double(v["sigma_sq_floor"], "fit config.sigma_sq_floor");
  if (v.contains("h_runs")) cfg.h_runs = as_long(v["h_runs"], "fit config.h_runs");
  if (v.contains("seed")) cfg.seed = as_u64(v["seed"], "fit config.seed");
  if (v.contains("exact_tables")) {
    if (!v["exact_tables"].is_boolean())
      field_fail("fit config.exact_tables", "expected a boolean");
    cfg.exact_tables = v["exact_tables"].get<bool>();
  }
  if (v.contains("num_threads"))
    cfg.num_threads = static_cast<int>(as_long(v["num_threads"], "fit config.num_threads"));
  if (v.contains("variance_ratios"))
    cfg.variance_ratios = as_vector(v["variance_ratios"], "fit config.variance_ratios");
  return cfg;
}

FitConfig load_fit_config(const std::string& path) {
  try {
    return fit_config_from_json_text(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string fit_config_to_json(const FitConfig& config) {
  json out;
  out["basis"] = basis_json(config.basis);
  out["max_outer_iters"] = config.max_outer_iters;
  out["rel_tol"] = config.rel_tol;
  out["inner_tol"] = config.inner_tol;
  out["sigma_sq_floor"] = config.sigma_sq_floor;
  out["h_runs"] = config.h_runs;
  out["seed"] = config.seed;
  out["exact_tables"] = config.exact_tables;
  out["num_threads"] = config.num_threads;
  if (config.variance_ratios.size() > 0)
    out["variance_ratios"] = vector_to_json(config.variance_ratios);
  return out.dump(2) + "\n";
}

// ---- fit result ----

std::string fit_result_to_json(const FitResult& result, const std::string& manifest_json) {
  json out;
  json manifest = parse_manifest(manifest_json);
  if (!manifest.is_null()) out["manifest"] = std::move(manifest);

  out["converged"] = result.converged;
  out["status"] = result.converged ? "converged" : "max-iterations";
  out["iterations"] = result.iterations;
  out["loglik"] = json{{"total", loglik_to_json(result.breakdown.total)},
                       {"gauss", loglik_to_json(result.breakdown.gauss)},
                       {"counts", loglik_to_json(result.breakdown.counts)}};

  const ModelParams& p = result.params;
  json params;
  params["basis"] = basis_json(p.basis);
  params["gammas"] = matrix_to_json(p.gammas);
  params["sigma_gamma_sq"] = vector_to_json(p.sigma_gamma_sq);
  params["sigma_sq"] = p.sigma_sq;
  json counts = json::array();
  for (const CountVector& m : p.counts) {
    json row = json::array();
    for (long v : m) row.push_back(v);
    counts.push_back(std::move(row));
  }
  params["counts"] = std::move(counts);
  out["params"] = std::move(params);

  out["times"] = result.times;

  // Derived curves for reporting: class typologies and per-transformer
  // fitted aggregate means on the observation grid.
  DesignMatrix design = eval_basis(p.basis, result.times);
  json typologies = json::array();
  for (int c = 0; c < p.num_classes(); ++c) {
    Eigen::VectorXd curve = p.typology(c, design);
    typologies.push_back(std::vector<double>(curve.data(), curve.data() + curve.size()));
  }
  out["typologies"] = std::move(typologies);

  json fitted = json::array();
  json observed = json::array();
  for (std::size_t i = 0; i < p.counts.size(); ++i) {
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(p.basis.num_basis);
    for (int c = 0; c < p.num_classes(); ++c)
      coeff += static_cast<double>(p.counts[i][c]) * p.gammas.row(c).transpose();
    Eigen::VectorXd mu = design.values * coeff;
    fitted.push_back(std::vector<double>(mu.data(), mu.data() + mu.size()));
    Eigen::VectorXd col = result.observed_mean.col(static_cast<Eigen::Index>(i));
    observed.push_back(std::vector<double>(col.data(), col.data() + col.size()));
  }
  out["fitted_mean"] = std::move(fitted);
  out["observed_mean"] = std::move(observed);

  out["transformer_ids"] = result.transformer_ids;

  json trace = json::array();
  for (const TraceEntry& e : result.trace)
    trace.push_back(json{{"iteration", e.iteration},
                         {"step", e.step},
                         {"loglik", loglik_to_json(e.loglik)}});
  out["trace"] = std::move(trace);

  json tables = json::array();
  for (const HTable& t : result.tables) tables.push_back(htable_json(t));
  out["tables"] = std::move(tables);

  json lstar = json::array();
  for (std::size_t i = 0; i < result.lstar_tables.size(); ++i) {
    json rows = json::array();
    for (const auto& [m, value] : result.lstar_tables[i]) {
      json mj = json::array();
      for (long v : m) mj.push_back(v);
      rows.push_back(json{{"m", std::move(mj)}, {"lstar", loglik_to_json(value)}});
    }
    lstar.push_back(std::move(rows));
  }
  out["lstar"] = std::move(lstar);

  out["warnings"] = result.warnings;
  return out.dump(2) + "\n";
}

FitResult fit_result_from_json_text(const std::string& text) {
  json v = parse(text, "fit result");
  if (!v.is_object()) throw InputError("fit result: expected a JSON object");
  FitResult result;
  const json& converged = need(v, "converged", "fit result");
  if (!converged.is_boolean()) field_fail("fit result.converged", "expected a boolean");
  result.converged = converged.get<bool>();
  result.iterations =
      static_cast<int>(as_long(need(v, "iterations", "fit result"), "fit result.iterations"));

  const json& ll = need(v, "loglik", "fit result");
  result.breakdown.total = loglik_from_json(need(ll, "total", "fit result.loglik"),
                                            "fit result.loglik.total");
  result.breakdown.gauss = loglik_from_json(need(ll, "gauss", "fit result.loglik"),
                                            "fit result.loglik.gauss");
  result.breakdown.counts = loglik_from_json(need(ll, "counts", "fit result.loglik"),
                                             "fit result.loglik.counts");

  const json& pj = need(v, "params", "fit result");
  result.params.basis = basis_from(need(pj, "basis", "fit result.params"),
                                   "fit result.params.basis");
  result.params.gammas =
      as_matrix(need(pj, "gammas", "fit result.params"), "fit result.params.gammas");
  result.params.sigma_gamma_sq = as_vector(need(pj, "sigma_gamma_sq", "fit result.params"),
                                           "fit result.params.sigma_gamma_sq");
  result.params.sigma_sq =
      as_double(need(pj, "sigma_sq", "fit result.params"), "fit result.params.sigma_sq");
  result.params.counts = as_count_list(need(pj, "counts", "fit result.params"),
                                       "fit result.params.counts");
  result.params.validate();

  Eigen::VectorXd times = as_vector(need(v, "times", "fit result"), "fit result.times");
  result.times.assign(times.data(), times.data() + times.size());

  const json& ids = need(v, "transformer_ids", "fit result");
  if (!ids.is_array()) field_fail("fit result.transformer_ids", "expected an array");
  for (const json& id : ids) {
    if (!id.is_string()) field_fail("fit result.transformer_ids", "expected strings");
    result.transformer_ids.push_back(id.get<std::string>());
  }

  const json& tr = need(v, "trace", "fit result");
  if (!tr.is_array()) field_fail("fit result.trace", "expected an array");
  for (std::size_t i = 0; i < tr.size(); ++i) {
    std::ostringstream p;
    p << "fit result.trace[" << i << "]";
    TraceEntry e;
    e.iteration = static_cast<int>(as_long(need(tr[i], "iteration", p.str()),
                                           p.str() + ".iteration"));
    const json& step = need(tr[i], "step", p.str());
    if (!step.is_string()) field_fail(p.str() + ".step", "expected a string");
    e.step = step.get<std::string>();
    e.loglik = loglik_from_json(need(tr[i], "loglik", p.str()), p.str() + ".loglik");
    result.trace.push_back(std::move(e));
  }

  const json& tables = need(v, "tables", "fit result");
  if (!tables.is_array()) field_fail("fit result.tables", "expected an array");
  for (std::size_t i = 0; i < tables.size(); ++i) {
    std::ostringstream p;
    p << "fit result.tables[" << i << "]";
    result.tables.push_back(htable_from(tables[i], p.str()));
  }

  if (v.contains("lstar")) {
    const json& ls = v["lstar"];
    if (!ls.is_array()) field_fail("fit result.lstar", "expected an array");
    for (std::size_t i = 0; i < ls.size(); ++i) {
      std::map<CountVector, double> table;
      std::ostringstream p;
      p << "fit result.lstar[" << i << "]";
      if (!ls[i].is_array()) field_fail(p.str(), "expected an array");
      for (const json& row : ls[i]) {
        CountVector m = as_counts(need(row, "m", p.str()), p.str() + ".m");
        table[m] = loglik_from_json(need(row, "lstar", p.str()), p.str() + ".lstar");
      }
      result.lstar_tables.push_back(std::move(table));
    }
  }

  const json& observed = need(v, "observed_mean", "fit result");
  Eigen::MatrixXd om = as_matrix(observed, "fit result.observed_mean");
  // Stored row-per-transformer; kept column-per-transformer in memory.
  result.observed_mean = om.transpose();

  if (v.contains("warnings")) {
    for (const json& w : v["warnings"]) {
      if (!w.is_string()) field_fail("fit result.warnings", "expected strings");
      result.warnings.push_back(w.get<std::string>());
    }
  }
  return result;
}

FitResult load_fit_result(const std::string& path) {
  try {
    return fit_result_from_json_text(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void save_fit_result(const FitResult& result, const std::string& path,
                     const std::string& manifest_json) {
  write_text_file(path, fit_result_to_json(result, manifest_json));
}

}  // namespace aggload
