#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace specsr {

/// Central-finite-difference verification of every backward path, run in
/// double precision. `inject_fault` perturbs the named op's analytic
/// gradient before comparison (a hook for checking that the checker fails
/// loudly); leave empty for normal operation.
struct GradCheckOptions {
    std::uint64_t seed = 0;
    double tolerance = 1e-4;      // relative, against the larger magnitude
    double abs_floor = 1e-7;      // differences below this always pass
    std::string inject_fault;     // op name, e.g. "conv_backward"
};

struct OpCheckResult {
    std::string op;
    double max_rel_err = 0.0;
    long checked = 0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<OpCheckResult> ops;
    bool all_pass = false;
};

/// Known op names: conv_backward, prelu_backward, center_crop_backward,
/// add_backward, l2_loss_grad, model_backward_small (every parameter of a
/// reduced configuration), model_backward_default (sampled parameters of
/// the reference configuration plus the input gradient).
GradCheckReport run_gradcheck(const GradCheckOptions& options = {});

}  // namespace specsr
