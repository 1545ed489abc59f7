#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace polarseg {

// Central finite differences (f(x+h)-f(x-h))/2h against an analytic gradient.
// Relative error is |fd-an| / max(1, |fd|, |an|) so near-zero gradients are
// compared absolutely. Meant for double precision only.
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_coord = 0;
    double fd = 0.0, analytic = 0.0;
};

GradCheckResult finite_diff_gradcheck(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x, const std::vector<double>& analytic_grad,
                                      double eps, const std::vector<std::size_t>* coords = nullptr);

double grad_rel_err(double fd, double analytic);

}  // namespace polarseg
