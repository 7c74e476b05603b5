#pragma once

#include "mocos/autodiff.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mocos::ad {

/// Builds a scalar program on `tape` from leaves bound to the inputs.
using TapeProgram = std::function<Var(Tape& tape)>;

/// Max relative error |a - n| / max(1e-6, |a| + |n|) between the tape's
/// gradient and central differences with step `eps`, over every coordinate of
/// every input parameter. The program must be deterministic.
double check_gradients(const TapeProgram& program, std::span<Parameter* const> inputs,
                       double eps = 1e-5);

struct GradCheckResult {
    std::string name;
    double max_rel_error;
    double tolerance;
    bool passed() const { return max_rel_error <= tolerance; }
};

/// Gradient checks over every cataloged op plus the composed MGT layer and
/// CSP loss, on random inputs drawn from `seed`.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed);

struct AdamConfig {
    double lr = 3.5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update. Parameters without an entry in `grads`
/// are treated as having zero gradient.
void adam_step(std::span<Parameter* const> params, const GradTable& grads, AdamState& state,
               const AdamConfig& config);

} // namespace mocos::ad
