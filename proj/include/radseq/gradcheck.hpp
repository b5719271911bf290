#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radseq/sequencer.hpp"

namespace radseq {

/// Central finite differences in 64-bit mode; 32-bit differences are too
/// noisy for the 1e-4 gate.
struct GradCheckOptions {
    double eps = 1e-5;
    double tolerance = 1e-4;
    std::uint64_t seed = 91157;
    /// Coordinates sampled per parameter tensor in the whole-network check.
    std::size_t samples_per_tensor = 24;
};

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t checked = 0;

    bool pass(const GradCheckOptions& opt) const { return max_rel_err < opt.tolerance; }
};

/// |analytic - numeric| relative to max(|analytic|, |numeric|), floored at
/// 1e-4 so that finite-difference noise on near-zero gradients does not
/// register as error.
double gradient_rel_error(double analytic, double numeric);

/// Checks every differentiable kernel (conv, pool, relu, linear,
/// softmax-cross-entropy) against central finite differences on small
/// random tensors, exhaustively over all coordinates.
std::vector<GradCheckResult> run_kernel_gradient_checks(const GradCheckOptions& opt = {});

/// Whole-network check: analytic backward() of the cross-entropy loss vs
/// finite differences over sampled parameter coordinates of a freshly built
/// 64-bit model.
GradCheckResult run_network_gradient_check(const ModelSpec& spec, const GradCheckOptions& opt = {});

}  // namespace radseq
