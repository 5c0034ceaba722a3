// Copyright 2026 The reltrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "reltrack/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace reltrack {

namespace {

double evaluate(const ScalarFn& f) {
  Graph<double> g(false, kernels::Exec::kSerial);
  const double v = g.value(f(g))[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: objective is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, const std::vector<Parameter<double>*>& params,
                           const GradCheckOptions& options) {
  for (Parameter<double>* p : params) p->zero_grad();
  {
    Graph<double> g(true, kernels::Exec::kSerial);
    Var out = f(g);
    if (!std::isfinite(g.value(out)[0])) throw NumericError("grad_check: objective is not finite");
    g.backward(out);
  }

  GradCheckResult result;
  const double h = options.step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<double>* p = params[k];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = evaluate(f);
      p->value[i] = saved - h;
      const double down = evaluate(f);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), options.floor});
      const double err = std::abs(numeric - analytic) / denom;
      if (err > result.max_rel_error) result = {err, result.checked, k, i, numeric, analytic};
      ++result.checked;
    }
  }
  return result;
}

}  // namespace reltrack
