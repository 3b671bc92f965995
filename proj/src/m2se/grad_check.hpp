#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "m2se/attention.hpp"
#include "m2se/matrix.hpp"

namespace m2se {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries = 0;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Compares `analytic` (same order and shapes as `tensors`) against central
// differences of `loss`, perturbing each tensor entry in place and restoring it
// afterwards. `loss` must read the parameters through the same storage.
GradCheckReport grad_check(std::span<const NamedTensor> tensors,
                           std::span<const Matrix> analytic,
                           const std::function<double()>& loss, double epsilon);

}  // namespace m2se
