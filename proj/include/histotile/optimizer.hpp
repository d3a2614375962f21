#pragma once

#include "histotile/errors.hpp"
#include "histotile/net.hpp"

namespace histotile {

// SGD with (Nesterov) momentum. Per parameter:
//   v' = momentum * v - lr * g
//   nesterov: theta' = theta + momentum * v' - lr * g
//   plain:    theta' = theta + v'
inline void sgd_step(Params& params, const Params& grads, Params& velocity,
                     double lr, double momentum, bool nesterov = true) {
    if (params.tensors.size() != grads.tensors.size() ||
        params.tensors.size() != velocity.tensors.size())
        throw ShapeMismatchError("sgd_step: tensor count mismatch");
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        Tensor& theta = params.tensors[t].value;
        const Tensor& g = grads.tensors[t].value;
        Tensor& v = velocity.tensors[t].value;
        if (!theta.same_shape(g) || !theta.same_shape(v))
            throw ShapeMismatchError("sgd_step: shape mismatch at tensor \"" +
                                     params.tensors[t].name + "\"");
        for (std::size_t i = 0; i < theta.data.size(); ++i) {
            const double vn = momentum * v.data[i] - lr * g.data[i];
            v.data[i] = vn;
            theta.data[i] += nesterov ? momentum * vn - lr * g.data[i] : vn;
        }
    }
}

} // namespace histotile
