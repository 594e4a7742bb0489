#include "kia/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "kia/errors.hpp"

namespace kia {

namespace {

double evaluate(const MultiParamFunction& f, const std::vector<Tensor>& params) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.constant(p));
    const double v = f(tape, leaves).value().item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
    return v;
}

}  // namespace

double grad_check(const MultiParamFunction& f, const std::vector<Tensor>& params, double eps) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.leaf(p, true));
    const Var loss = f(tape, leaves);
    const Gradients grads = tape.backward(loss);

    double worst = 0.0;
    std::vector<Tensor> probe = params;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const Tensor analytic = grads.get(leaves[p]);
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            const double orig = params[p][i];
            probe[p][i] = orig + eps;
            const double up = evaluate(f, probe);
            probe[p][i] = orig - eps;
            const double down = evaluate(f, probe);
            probe[p][i] = orig;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[i];
            if (!std::isfinite(a)) throw NumericError("grad_check: non-finite analytic gradient");
            worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
        }
    }
    return worst;
}

double grad_check(const ParamFunction& f, const Tensor& theta, double eps) {
    return grad_check([&f](Tape& tape, std::span<const Var> ps) { return f(tape, ps[0]); },
                      std::vector<Tensor>{theta}, eps);
}

}  // namespace kia
