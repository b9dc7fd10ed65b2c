#include "freecap/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "freecap/errors.hpp"

namespace freecap {

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double abs_tol, const std::vector<double>& breakpoints) {
    if (!(a <= b)) throw DomainError("integrate: expected a <= b");
    std::vector<double> cuts{a};
    for (double c : breakpoints)
        if (c > a && c < b) cuts.push_back(c);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    // Relative tolerance is with respect to the L1 norm of each piece; a tight value keeps the
    // absolute error well under abs_tol for the O(1) integrals used here.
    const double rel_tol = std::max(1e-14, std::min(1e-6, abs_tol * 1e-2));
    // integrate() is non-const in this Boost version; one instance per thread.
    thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);

    QuadratureResult total;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i];
        const double hi = cuts[i + 1];
        if (hi - lo <= 0.0) continue;
        double err = 0.0;
        double l1 = 0.0;
        const auto g = [&f](double x) { return f(x); };
        const double piece = integrator.integrate(g, lo, hi, rel_tol, &err, &l1);
        total.value += piece;
        total.abs_error += err;
    }
    return total;
}

}  // namespace freecap
