#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "creagen/tensor.hpp"

namespace creagen {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct GradCheckOptions {
    double eps = 1e-5;
    double tolerance = 1e-4;
    /// Coordinates probed per tensor; 0 probes every coordinate.
    std::size_t max_coords = 0;
    std::uint64_t seed = 0;
    /// Lower bound on the per-tensor gradient scale. Tensors whose whole gradient
    /// is below it are judged on absolute error instead (round-off dominates there).
    double scale_floor = 0.0;
};

/// Relative error of one tensor: max_i |analytic_i - numeric_i| / max_i |numeric_i|,
/// i.e. the worst deviation measured against the tensor's own gradient scale.
struct ParamGradError {
    std::string name;
    double rel_error = 0.0;
    double abs_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t probed = 0;
};

struct GradCheckReport {
    std::vector<ParamGradError> params;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = true;

    /// Entries sorted by descending relative error, at most `count`.
    std::vector<ParamGradError> worst(std::size_t count) const;
};

/// Compares reverse-mode gradients of `fn` against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps) for every tensor in `points`. `fn` must
/// recompute a scalar from the current contents of those tensors. Throws if
/// two baseline evaluations disagree bitwise.
GradCheckReport grad_check(const std::function<Tensor()>& fn, const std::vector<NamedTensor>& points,
                           const GradCheckOptions& options = {});

}  // namespace creagen
