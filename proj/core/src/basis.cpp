#include "aggload/basis.hpp"

#include <algorithm>
#include <sstream>

#include "aggload/errors.hpp"

namespace aggload {

void BasisSpec::validate() const {
  if (degree < 0) throw InputError("basis: degree must be >= 0");
  if (num_basis < degree + 1) {
    std::ostringstream msg;
    msg << "basis: num_basis (" << num_basis << ") must be >= degree + 1 ("
        << degree + 1 << ")";
    throw InputError(msg.str());
  }
  if (!(t_lo < t_hi)) throw InputError("basis: domain requires t_lo < t_hi");
}

std::vector<double> make_knots(const BasisSpec& spec) {
  spec.validate();
  const int deg = spec.degree;
  const int k = spec.num_basis;
  std::vector<double> knots;
  knots.reserve(k + deg + 1);
  for (int i = 0; i <= deg; ++i) knots.push_back(spec.t_lo);
  const int interior = k - deg - 1;
  for (int i = 1; i <= interior; ++i) {
    double frac = static_cast<double>(i) / (interior + 1);
    knots.push_back(spec.t_lo + frac * (spec.t_hi - spec.t_lo));
  }
  for (int i = 0; i <= deg; ++i) knots.push_back(spec.t_hi);
  return knots;
}

DesignMatrix eval_basis(const BasisSpec& spec, const std::vector<double>& times) {
  spec.validate();
  const int deg = spec.degree;
  const int k = spec.num_basis;
  const std::vector<double> knots = make_knots(spec);

  DesignMatrix design;
  design.times = times;
  design.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), k);

  std::vector<double> left(deg + 1), right(deg + 1), n(deg + 1);
  for (std::size_t r = 0; r < times.size(); ++r) {
    const double t = times[r];
    if (!(t >= spec.t_lo && t <= spec.t_hi)) {
      std::ostringstream msg;
      msg << "basis: time " << t << " outside domain [" << spec.t_lo << ", "
          << spec.t_hi << "]";
      throw InputError(msg.str());
    }

    // Knot span index: largest j in [deg, k-1] with knots[j] <= t, which
    // pins t == t_hi to the last nonempty span.
    int span = deg;
    while (span < k - 1 && t >= knots[span + 1]) ++span;

    // Triangular Cox-de Boor scheme: n[0..d] are the d+1 basis functions
    // alive on this span at degree d.
    n[0] = 1.0;
    for (int d = 1; d <= deg; ++d) {
      left[d] = t - knots[span + 1 - d];
      right[d] = knots[span + d] - t;
      double saved = 0.0;
      for (int s = 0; s < d; ++s) {
        double tmp = n[s] / (right[s + 1] + left[d - s]);
        n[s] = saved + right[s + 1] * tmp;
        saved = left[d - s] * tmp;
      }
      n[d] = saved;
    }

    for (int s = 0; s <= deg; ++s) design.values(r, span - deg + s) = n[s];
  }
  return design;
}

std::vector<double> greville_abscissae(const BasisSpec& spec) {
  spec.validate();
  if (spec.degree < 1) throw InputError("basis: Greville abscissae need degree >= 1");
  const std::vector<double> knots = make_knots(spec);
  std::vector<double> out(spec.num_basis);
  for (int i = 0; i < spec.num_basis; ++i) {
    double sum = 0.0;
    for (int d = 1; d <= spec.degree; ++d) sum += knots[i + d];
    out[i] = sum / spec.degree;
  }
  return out;
}

}  // namespace aggload
