#pragma once

// Internal 1-D and simplex minimizers for the coordinate updates.  Not part
// of the installed API.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace aggload::detail {

struct ScalarMin {
  double x = 0.0;
  double f = 0.0;
};

// Brent's method on [lo, hi]: parabolic steps with golden-section fallback.
// tol acts as a relative tolerance on x (plus a small absolute floor).
template <class F>
ScalarMin brent_minimize(F&& f, double lo, double hi, double tol, int max_iter = 200) {
  constexpr double kGolden = 0.3819660112501051;  // 2 - golden ratio
  double a = lo, b = hi;
  double x = a + kGolden * (b - a);
  double w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int it = 0; it < max_iter; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-12;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;

    bool golden = true;
    if (std::abs(e) > tol1) {
      // Parabola through x, v, w.
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      double e_old = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_old) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm > x ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm ? a : b) - x;
      d = kGolden * e;
    }

    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx};
}

struct SimplexMin {
  Eigen::VectorXd x;
  double f = 0.0;
};

// Nelder-Mead with the standard coefficients (reflect 1, expand 2, contract
// 1/2, shrink 1/2).  Stops when the simplex f-spread drops under tol
// relative to the best value, or after max_iter iterations.
template <class F>
SimplexMin nelder_mead(F&& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& steps,
                       double tol, int max_iter = 400) {
  const int dim = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> pts(dim + 1, x0);
  std::vector<double> fs(dim + 1);
  for (int i = 0; i < dim; ++i) pts[i + 1](i) += steps(i);
  for (int i = 0; i <= dim; ++i) fs[i] = f(pts[i]);

  auto order = [&] {
    for (int i = 1; i <= dim; ++i) {
      Eigen::VectorXd px = pts[i];
      double pf = fs[i];
      int j = i - 1;
      while (j >= 0 && fs[j] > pf) {
        pts[j + 1] = pts[j];
        fs[j + 1] = fs[j];
        --j;
      }
      pts[j + 1] = std::move(px);
      fs[j + 1] = pf;
    }
  };
  order();

  for (int it = 0; it < max_iter; ++it) {
    if (fs[dim] - fs[0] <= tol * (std::abs(fs[0]) + 1.0)) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) centroid += pts[i];
    centroid /= dim;

    Eigen::VectorXd xr = centroid + (centroid - pts[dim]);
    double fr = f(xr);
    if (fr < fs[0]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[dim]);
      double fe = f(xe);
      if (fe < fr) { pts[dim] = xe; fs[dim] = fe; }
      else { pts[dim] = xr; fs[dim] = fr; }
    } else if (fr < fs[dim - 1]) {
      pts[dim] = xr; fs[dim] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * ((fr < fs[dim] ? xr : pts[dim]) - centroid);
      double fc = f(xc);
      if (fc < std::min(fr, fs[dim])) {
        pts[dim] = xc; fs[dim] = fc;
      } else {
        for (int i = 1; i <= dim; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          fs[i] = f(pts[i]);
        }
      }
    }
    order();
  }
  return {pts[0], fs[0]};
}

}  // namespace aggload::detail
