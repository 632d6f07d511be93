#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vcsr {

struct GradSuiteEntry {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 1e-4;
    bool pass = false;
};

struct GradSuiteReport {
    std::vector<GradSuiteEntry> entries;
    double worst = 0.0;
    bool all_pass = false;
    double seconds = 0.0;
};

// Central finite-difference verification of every differentiable op plus the
// full training objective on a micro model (soft-selection path). Shared by
// the grad-check CLI subcommand and the acceptance gate.
GradSuiteReport run_grad_suite(uint64_t seed = 1);

}  // namespace vcsr
