#pragma once

#include "nlgrad/kernel.hpp"
#include "format.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <string>
#include <vector>

namespace nlgrad::detail {

/// Globally adaptive 21-point Gauss-Kronrod on [a, b]: the panel with the
/// largest error estimate is bisected until the summed estimate drops below
/// rel_tol * L1. Throws QuadratureError when the panel budget runs out.
template <typename F>
double adaptive_integrate(F&& f, double a, double b, double rel_tol,
                          const char* what, int max_panels = 4000) {
  if (b <= a) return 0.0;
  using Rule = boost::math::quadrature::gauss_kronrod<double, 21>;
  struct Panel {
    double a, b, value, error, l1;
    bool operator<(const Panel& o) const { return error < o.error; }
  };
  auto evaluate = [&](double lo, double hi) {
    Panel p{lo, hi, 0.0, 0.0, 0.0};
    p.value = Rule::integrate(f, lo, hi, 0, 0.0, &p.error, &p.l1);
    // the single-panel estimate is reported on the reference interval
    p.error *= 0.5 * (hi - lo);
    return p;
  };
  std::priority_queue<Panel> panels;
  panels.push(evaluate(a, b));
  double value = panels.top().value;
  double error = panels.top().error;
  double l1 = panels.top().l1;
  const double eps = std::numeric_limits<double>::epsilon();
  while (error > rel_tol * l1 + 1e3 * std::numeric_limits<double>::min()) {
    const Panel worst = panels.top();
    const double mid = 0.5 * (worst.a + worst.b);
    // stop once the worst panel is at roundoff level or cannot be split
    if (static_cast<int>(panels.size()) >= max_panels || !(mid > worst.a && mid < worst.b) ||
        worst.error <= 50 * eps * worst.l1) {
      break;
    }
    panels.pop();
    const Panel left = evaluate(worst.a, mid);
    const Panel right = evaluate(mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    panels.push(left);
    panels.push(right);
  }
  // recompute the sums to shed accumulated cancellation
  value = error = l1 = 0.0;
  while (!panels.empty()) {
    value += panels.top().value;
    error += panels.top().error;
    l1 += panels.top().l1;
    panels.pop();
  }
  if (!std::isfinite(value) || error > std::max(rel_tol * l1, 100 * eps * l1) + 1e3 * std::numeric_limits<double>::min()) {
    throw QuadratureError(std::string(what) + " did not converge on [" + fmt_sci(a) + ", " +
                              fmt_sci(b) + "], error " + fmt_sci(error) + " vs L1 " + fmt_sci(l1),
                          error);
  }
  return value;
}

}  // namespace nlgrad::detail
