#pragma once

#include <functional>
#include <vector>

namespace freecap {

struct QuadratureResult {
    double value = 0.0;
    double abs_error = 0.0;
};

/// Adaptive integral of f over [a, b], split at the interior `breakpoints`.
///
/// Each piece is integrated by double-exponential (tanh-sinh) refinement, which never
/// samples the endpoints and converges at the square-root edges and 1/sqrt(x)
/// singularities that spectral densities have.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double abs_tol = 1e-10, const std::vector<double>& breakpoints = {});

}  // namespace freecap
