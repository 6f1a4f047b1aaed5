#pragma once

#include <Eigen/Dense>
#include <vector>

namespace aggload {

// Cubic-by-default B-spline basis on a closed interval.
struct BasisSpec {
  int degree = 3;
  int num_basis = 9;      // K: number of basis functions / coefficients
  double t_lo = 0.0;
  double t_hi = 24.0;

  // Throws InputError unless degree >= 0, num_basis >= degree + 1 and
  // t_lo < t_hi.
  void validate() const;

  bool operator==(const BasisSpec&) const = default;
};

// Basis evaluations on a fixed grid: values(r, k) = phi_k(times[r]).
struct DesignMatrix {
  Eigen::MatrixXd values;      // (#times) x K
  std::vector<double> times;
};

// Clamped (open uniform) knot vector: degree+1 copies of each endpoint and
// num_basis - degree - 1 equally spaced interior knots.  Length is
// num_basis + degree + 1.
std::vector<double> make_knots(const BasisSpec& spec);

// Evaluates all K basis functions at each time via the Cox-de Boor span
// recurrence.  Every time must lie in [t_lo, t_hi]; a point outside the
// domain raises InputError naming the offending value.
DesignMatrix eval_basis(const BasisSpec& spec, const std::vector<double>& times);

// Greville abscissae: the coefficient vector gamma_k = greville_k makes the
// spline reproduce the identity function on the domain (degree >= 1).
std::vector<double> greville_abscissae(const BasisSpec& spec);

}  // namespace aggload
