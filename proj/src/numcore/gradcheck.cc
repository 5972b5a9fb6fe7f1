#include "eda/numcore/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace eda::numcore {

namespace {

double eval(const ScalarFn& f, const Matrix& x) {
  Tape tape;
  return f(tape, tape.constant(x)).item();
}

}  // namespace

Matrix autodiff_grad(const ScalarFn& f, const Matrix& x) {
  Tape tape;
  Var in = tape.leaf(x);
  Var out = f(tape, in);
  tape.backward(out);
  return in.grad();
}

FdReport fd_check(const ScalarFn& f, const Matrix& x, double eps) {
  const Matrix analytic = autodiff_grad(f, x);
  FdReport report;
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = eval(f, probe);
    probe[i] = x[i] - eps;
    const double down = eval(f, probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double rel =
        std::abs(numeric - analytic[i]) / std::max(std::abs(analytic[i]), 1e-8);
    if (i == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
  }
  return report;
}

}  // namespace eda::numcore
