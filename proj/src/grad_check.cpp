#include "creagen/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace creagen {

std::vector<ParamGradError> GradCheckReport::worst(std::size_t count) const {
    auto sorted = params;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.rel_error > b.rel_error; });
    if (sorted.size() > count) sorted.resize(count);
    return sorted;
}

GradCheckReport grad_check(const std::function<Tensor()>& fn, const std::vector<NamedTensor>& points,
                           const GradCheckOptions& options) {
    if (!(options.eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
    std::vector<Tensor> tensors;
    for (const auto& p : points) {
        if (!p.tensor.requires_grad()) {
            throw std::invalid_argument("grad_check: point '" + p.name + "' does not require gradients");
        }
        tensors.push_back(p.tensor);
    }
    for (auto& t : tensors) t.zero_grad();

    double f0 = 0.0, f1 = 0.0;
    {
        NoGradGuard guard;
        f0 = fn().item();
        f1 = fn().item();
    }
    if (std::bit_cast<std::uint64_t>(f0) != std::bit_cast<std::uint64_t>(f1)) {
        throw std::runtime_error("grad_check: function is not deterministic across repeated evaluations");
    }

    Tensor loss = fn();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    for (auto& t : tensors) {
        analytic.emplace_back(t.grad().begin(), t.grad().end());
        t.zero_grad();
    }

    GradCheckReport report;
    report.tolerance = options.tolerance;
    std::mt19937_64 rng(options.seed);
    for (std::size_t p = 0; p < tensors.size(); ++p) {
        auto& t = tensors[p];
        std::vector<std::size_t> coords(t.numel());
        std::iota(coords.begin(), coords.end(), 0);
        if (options.max_coords > 0 && coords.size() > options.max_coords) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.max_coords);
            std::sort(coords.begin(), coords.end());
        }
        std::vector<double> numeric(coords.size());
        {
            NoGradGuard guard;
            auto data = t.mutable_data();
            for (std::size_t c = 0; c < coords.size(); ++c) {
                double saved = data[coords[c]];
                data[coords[c]] = saved + options.eps;
                double fp = fn().item();
                data[coords[c]] = saved - options.eps;
                double fm = fn().item();
                data[coords[c]] = saved;
                numeric[c] = (fp - fm) / (2.0 * options.eps);
            }
        }
        ParamGradError err;
        err.name = points[p].name;
        err.probed = coords.size();
        double scale = options.scale_floor;
        for (double v : numeric) scale = std::max(scale, std::fabs(v));
        for (std::size_t c = 0; c < coords.size(); ++c) {
            double a = analytic[p][coords[c]];
            double d = std::fabs(a - numeric[c]);
            if (d > err.abs_error || c == 0) {
                err.abs_error = d;
                err.worst_index = coords[c];
                err.analytic = a;
                err.numeric = numeric[c];
            }
        }
        err.rel_error = scale > 0.0 ? err.abs_error / scale : err.abs_error;
        report.max_rel_error = std::max(report.max_rel_error, err.rel_error);
        report.params.push_back(err);
    }
    report.passed = report.max_rel_error <= options.tolerance;
    return report;
}

}  // namespace creagen
