#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "creagen/grad_check.hpp"

namespace creagen {

/// One registered finite-difference check. `run` builds fresh random inputs
/// from the seed and checks them at the given tolerance.
struct GradCheckCase {
    std::string name;
    std::string group;  // op | loss | layer | network
    double tolerance = 1e-4;
    std::function<GradCheckReport(std::uint64_t seed, double tolerance)> run;
};

const std::vector<GradCheckCase>& grad_check_cases();

struct GradCheckOutcome {
    std::string name;
    std::string group;
    std::uint64_t seed = 0;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string worst_param;
    std::string error;  // exception text when the check could not run
};

/// Runs every case whose name contains `filter` (empty = all) on `seeds` seeds
/// derived from `root_seed`. Network-level cases run on min(seeds, network_seeds).
std::vector<GradCheckOutcome> run_grad_check_suite(std::size_t seeds, std::uint64_t root_seed,
                                                   const std::string& filter = "", std::size_t network_seeds = 3);

std::string grad_check_csv(const std::vector<GradCheckOutcome>& outcomes);

}  // namespace creagen
