#include "mocos/errors.hpp"
#include "mocos/optim.hpp"

#include <cmath>

namespace mocos::ad {

void adam_step(std::span<Parameter* const> params, const GradTable& grads, AdamState& state,
               const AdamConfig& config) {
    if (state.first_moment.empty()) {
        for (const Parameter* p : params) {
            state.first_moment.emplace_back(p->value.shape(), 0.0);
            state.second_moment.emplace_back(p->value.shape(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size())
        throw ValidationError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                              " tensors but " + std::to_string(params.size()) + " were given");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);

    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        Tensor& m = state.first_moment[k];
        Tensor& v = state.second_moment[k];
        if (m.shape() != p.value.shape())
            throw ValidationError("adam_step: moment shape " + m.shape_str() + " vs parameter '" +
                                  p.name + "' shape " + p.value.shape_str());
        const Tensor* g = grads.find(p);
        if (g && g->shape() != p.value.shape())
            throw ValidationError("adam_step: gradient shape " + g->shape_str() + " vs parameter '" +
                                  p.name + "' shape " + p.value.shape_str());
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double gi = g ? (*g)[i] : 0.0;
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p.value[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
        }
    }
}

} // namespace mocos::ad
