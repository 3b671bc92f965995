#include "m2se/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "m2se/error.hpp"

namespace m2se {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(std::span<const NamedTensor> tensors,
                           std::span<const Matrix> analytic,
                           const std::function<double()>& loss, double epsilon) {
  require(epsilon >= 1e-5 && epsilon <= 1e-2, ErrorCode::kInvalidArgument,
          "epsilon must lie in [1e-5, 1e-2]");
  require(tensors.size() == analytic.size(), ErrorCode::kDimensionMismatch,
          "analytic gradient list does not match parameter list");

  const double base = loss();
  require(std::isfinite(base), ErrorCode::kNonFinite, "loss is not finite at the check point");

  GradCheckReport report;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Matrix& param = *tensors[t].tensor;
    const Matrix& grad = analytic[t];
    require(param.same_shape(grad), ErrorCode::kDimensionMismatch,
            "gradient shape differs for " + tensors[t].name);
    auto values = param.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double plus = loss();
      values[i] = saved - epsilon;
      const double minus = loss();
      values[i] = saved;
      require(std::isfinite(plus) && std::isfinite(minus), ErrorCode::kNonFinite,
              "loss became non-finite while perturbing " + tensors[t].name);

      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = grad.values()[i];
      const double err = relative_error(a, numeric);
      ++report.entries;
      if (err > report.max_rel_error || report.worst_tensor.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.worst_tensor = tensors[t].name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace m2se
