#include <algorithm>
#include <cmath>
#include <limits>

#include "flowforge/autodiff.hpp"

namespace flowforge {
namespace {

double evaluate(const std::function<Var(Tape&)>& fn) {
  Tape t(false);
  return fn(t).value().item();
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(Tape&)>& fn, std::span<Parameter* const> params, double step,
                           double floor) {
  Tape tape;
  const Var loss = fn(tape);
  const GradientMap grads = tape.backward(loss);

  GradCheckReport report;
  for (Parameter* p : params) {
    const Tensor4 analytic = grads.contains(*p) ? grads[*p] : Tensor4(p->value.shape());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + step;
      p->bump();
      const double plus = evaluate(fn);
      p->value[i] = orig - step;
      p->bump();
      const double minus = evaluate(fn);
      p->value[i] = orig;
      p->bump();

      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({floor, std::abs(a), std::abs(numeric)});
      ++report.coordinates;
      report.max_abs_error = std::max(report.max_abs_error, std::abs(a - numeric));
      if (err > report.max_rel_error || std::isnan(err)) {
        report.max_rel_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
        report.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace flowforge
