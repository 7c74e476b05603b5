#include "mocos/errors.hpp"
#include "mocos/optim.hpp"

#include <algorithm>
#include <cmath>

namespace mocos::ad {

namespace {

// Relative-error denominator floor. Central differences at eps = 1e-5 carry
// roundoff near 1e-11 per unit of |f|, so smaller gradients are compared on
// this absolute scale instead.
constexpr double kScaleFloor = 1e-6;

double evaluate(const TapeProgram& program) {
    Tape tape(false);
    const Var out = program(tape);
    if (out.value().size() != 1)
        throw ValidationError("check_gradients: program must return a scalar, got " +
                              out.value().shape_str());
    return out.value()[0];
}

} // namespace

double check_gradients(const TapeProgram& program, std::span<Parameter* const> inputs, double eps) {
    Tape tape;
    const Var out = program(tape);
    const GradTable grads = tape.backward(out);

    double worst = 0.0;
    for (Parameter* p : inputs) {
        const Tensor* analytic = grads.find(*p);
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + eps;
            const double plus = evaluate(program);
            p->value[i] = saved - eps;
            const double minus = evaluate(program);
            p->value[i] = saved;

            const double numeric = (plus - minus) / (2.0 * eps);
            const double a = analytic ? (*analytic)[i] : 0.0;
            const double err = std::abs(a - numeric) / std::max(kScaleFloor, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace mocos::ad
