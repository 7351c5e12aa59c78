#pragma once

#include "egd/core.hpp"

#include <functional>
#include <optional>
#include <utility>

namespace egd {

/// Value and gradient of a smooth function on R^dim.
///
/// `evaluate` is an optional fused path returning both at once; when absent it
/// is synthesized from `value` and `gradient`. `hessian` is set only where an
/// analytic form is available.
struct Objective {
  using ValueFn = std::function<double(const ParamVector&)>;
  using GradientFn = std::function<ParamVector(const ParamVector&)>;
  using FusedFn = std::function<std::pair<double, ParamVector>(const ParamVector&)>;
  using HessianFn = std::function<Matrix(const ParamVector&)>;

  int dim = 1;
  ValueFn value;
  GradientFn gradient;
  FusedFn fused;
  HessianFn hessian;
  std::optional<ParamVector> optimum;
  std::optional<double> optimal_value;
  std::optional<HomogeneityProfile> profile;

  std::pair<double, ParamVector> evaluate(const ParamVector& theta) const {
    if (fused) return fused(theta);
    return {value(theta), gradient(theta)};
  }

  /// f(theta*) if known, falling back to evaluating at the optimum.
  std::optional<double> optimum_value() const {
    if (optimal_value) return optimal_value;
    if (optimum) return value(*optimum);
    return std::nullopt;
  }
};

}  // namespace egd
