#include "polarseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polarseg {

double grad_rel_err(double fd, double analytic) {
    const double denom = std::max({1.0, std::abs(fd), std::abs(analytic)});
    return std::abs(fd - analytic) / denom;
}

GradCheckResult finite_diff_gradcheck(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x, const std::vector<double>& analytic_grad,
                                      double eps, const std::vector<std::size_t>* coords) {
    if (analytic_grad.size() != x.size()) throw std::invalid_argument("gradcheck: gradient size mismatch");
    GradCheckResult res;
    auto check_coord = [&](std::size_t i) {
        const double orig = x[i];
        const double h = eps * std::max(1.0, std::abs(orig));
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        const double err = grad_rel_err(fd, analytic_grad[i]);
        if (err > res.max_rel_err) {
            res.max_rel_err = err;
            res.worst_coord = i;
            res.fd = fd;
            res.analytic = analytic_grad[i];
        }
    };
    if (coords) {
        for (std::size_t i : *coords) check_coord(i);
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) check_coord(i);
    }
    return res;
}

}  // namespace polarseg
