#pragma once

#include <string>

#include "aggload/basis.hpp"
#include "aggload/counts.hpp"
#include "aggload/fit.hpp"
#include "aggload/simulate.hpp"

namespace aggload {

// JSON readers/writers for every on-disk artifact.  Readers throw InputError
// naming the offending field; writers emit UTF-8 text with stable key order.
// The optional manifest_json argument, when nonempty, must itself be a JSON
// object; it is embedded under the "manifest" key.

// ---- basis ----
std::string basis_to_json(const BasisSpec& spec);
BasisSpec basis_from_json_text(const std::string& text);

// ---- fraud matrix ----
// Accepts either a bare row-major 2-D array or {"fraud_matrix": [[...]]};
// row sums are checked against 1 within 1e-9 and then renormalized.
FraudMatrix fraud_from_json_text(const std::string& text);
FraudMatrix load_fraud(const std::string& path);
std::string fraud_to_json(const FraudMatrix& fraud);

// ---- simulation scenarios ----
// Either a canned case ({"case": 1..4, "num_days", "seed"}) or a full custom
// scenario with explicit gammas, variances, fraud matrix and counts.
SimScenario scenario_from_json_text(const std::string& text);
SimScenario load_scenario(const std::string& path);
std::string scenario_to_json(const SimScenario& scenario,
                             const std::string& manifest_json = "");
void save_scenario(const SimScenario& scenario, const std::string& path,
                   const std::string& manifest_json = "");

// ---- H tables ----
// Monte Carlo tables store each cell as the exact rational num/den (runs in
// the cell over total runs); exact tables store the enumerated probability.
std::string htable_to_json(const HTable& table, const std::string& manifest_json = "");
HTable htable_from_json_text(const std::string& text);
HTable load_htable(const std::string& path);
void save_htable(const HTable& table, const std::string& path,
                 const std::string& manifest_json = "");

// ---- fit configuration ----
// Every field is optional; absent fields keep FitConfig defaults.
FitConfig fit_config_from_json_text(const std::string& text);
FitConfig load_fit_config(const std::string& path);
std::string fit_config_to_json(const FitConfig& config);

// ---- fit results ----
std::string fit_result_to_json(const FitResult& result,
                               const std::string& manifest_json = "");
FitResult fit_result_from_json_text(const std::string& text);
FitResult load_fit_result(const std::string& path);
void save_fit_result(const FitResult& result, const std::string& path,
                     const std::string& manifest_json = "");

// ---- helpers ----
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace aggload
