#ifndef EDA_NUMCORE_GRADCHECK_H_
#define EDA_NUMCORE_GRADCHECK_H_

#include <cstddef>
#include <functional>

#include "eda/numcore/matrix.h"
#include "eda/numcore/tape.h"

namespace eda::numcore {

// Builds a scalar (1x1) node from the checked input on the given tape.
using ScalarFn = std::function<Var(Tape&, const Var&)>;

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central differences (f(x+eps e) - f(x-eps e)) / 2eps against reverse-mode
// gradients. Relative error per entry uses max(|analytic|, 1e-8) as the
// denominator; the report holds the worst entry.
FdReport fd_check(const ScalarFn& f, const Matrix& x, double eps = 1e-5);

// Reverse-mode gradient of f at x.
Matrix autodiff_grad(const ScalarFn& f, const Matrix& x);

}  // namespace eda::numcore

#endif  // EDA_NUMCORE_GRADCHECK_H_
