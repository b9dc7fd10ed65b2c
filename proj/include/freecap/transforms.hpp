#pragma once

// Marcenko-Pastur law and the transform calculus (eta, S, Stieltjes) shared by
// every closed form in the library.
//
// Conventions: for a positive semidefinite matrix X with eigenvalue law F,
//   eta_X(g)      = E[1 / (1 + g * lambda)]
//   S-transform   Sigma_X(x) = -(x + 1) / x * eta_X^{-1}(x + 1)
//   Stieltjes     S_X(z) = E[1 / (lambda - z)] = -eta_X(-1/z) / z
// The MP law is that of (1/K) G G^H with G a K x M standard complex Gaussian
// matrix and beta = M / K: mean eigenvalue beta, atom (1 - beta)^+ at zero.

#include <complex>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "freecap/errors.hpp"

namespace freecap {

using Complex = std::complex<double>;

/// Ratio of horizontal to vertical matrix dimension. Always positive and finite.
class AspectRatio {
public:
    explicit AspectRatio(double value);
    double value() const noexcept { return value_; }

private:
    double value_;
};

/// Point mass of a spectral distribution.
struct Atom {
    double location = 0.0;
    double mass = 0.0;
};

/// Sampled bulk density plus exact point masses.
///
/// The bulk is stored on a strictly increasing grid. An optional evaluator gives
/// the bulk at arbitrary points (analytic laws, closed-form pipelines); when it is
/// absent, bulk_at() interpolates the samples linearly and is zero off-grid.
class SpectralDensity {
public:
    using Evaluator = std::function<double(double)>;

    /// `interval_masses`, when given, holds the exact bulk mass of each grid interval and
    /// replaces the trapezoid rule in bulk_mass() and cdf().
    SpectralDensity(std::vector<double> grid, std::vector<double> bulk, std::vector<Atom> atoms,
                    Evaluator evaluator = {}, std::vector<double> interval_masses = {});

    const std::vector<double>& grid() const noexcept { return grid_; }
    const std::vector<double>& bulk() const noexcept { return bulk_; }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    bool has_evaluator() const noexcept { return static_cast<bool>(evaluator_); }

    double bulk_at(double x) const;
    /// Bulk mass: trapezoid rule on the samples unless exact interval masses were supplied.
    double bulk_mass() const;
    double atom_mass() const;
    double total_mass() const { return bulk_mass() + atom_mass(); }
    double normalization_deviation() const;

    /// Throws ValidationError when |total mass - 1| exceeds tol.
    void require_normalized(double tol) const;

    /// Cumulative distribution of the bulk plus atoms at or below x. Within a grid interval the
    /// bulk is interpolated linearly and scaled to the interval's mass.
    double cdf(double x) const;

    double support_lo() const { return grid_.front(); }
    double support_hi() const { return grid_.back(); }

private:
    std::vector<double> grid_;
    std::vector<double> bulk_;
    std::vector<Atom> atoms_;
    Evaluator evaluator_;
    std::vector<double> cumulative_;
    std::vector<double> trapezoid_;  ///< per-interval trapezoid mass, for cdf scaling
};

inline constexpr double kSampledNormalizationTol = 1e-3;
inline constexpr double kAnalyticNormalizationTol = 1e-9;

// --- Marcenko-Pastur law ---------------------------------------------------

/// Bulk support [(1 - sqrt(beta))^2, (1 + sqrt(beta))^2].
std::pair<double, double> mp_support(AspectRatio beta);

/// Continuous part sqrt((x-a)^+ (b-x)^+) / (2 pi x). The atom is never folded in.
double mp_density(double x, AspectRatio beta);

/// Mass (1 - beta)^+ of the atom at zero.
double mp_atom(AspectRatio beta);

/// eta_MP(x, beta) = 1 - phi(x, beta) / (4x), evaluated in the cancellation-free form
/// 1 - 4 beta x / (s1 + s2)^2 with s1,2 = sqrt(x (1 +- sqrt(beta))^2 + 1); eta(0) = 1.
double mp_eta(double x, AspectRatio beta);

/// Analytic continuation of mp_eta off the negative real axis (principal square roots).
Complex mp_eta(Complex x, AspectRatio beta);

/// S-transform (a.k.a. Sigma-transform) 1 / (beta + z).
double mp_s_transform(double z, AspectRatio beta);

// --- generic transform calculus --------------------------------------------

/// eta transform of a tabulated law: integral of 1/(1 + g x) over bulk and atoms.
/// The density must be normalized within `normalization_tol`.
double eta_from_density(const SpectralDensity& density, double g,
                        double normalization_tol = kSampledNormalizationTol);

/// Stieltjes transform recovered from an eta transform: S(z) = -eta(-1/z) / z.
Complex stieltjes_from_eta(const std::function<Complex(Complex)>& eta, Complex z);

/// Density from the imaginary part of the Stieltjes transform just above the real axis.
/// Uses one Richardson step: f = 2 f(eps) - f(2 eps) with f(y) = Im S(x + j y) / pi.
double density_from_stieltjes(const std::function<Complex(Complex)>& stieltjes, double x,
                              double eps);

/// Imaginary offset used for density extraction on a grid spanning `span`.
double extraction_epsilon(double span);

struct InversionOptions {
    int max_newton_steps = 200;
    int max_bisections = 20;
    double tolerance = 1e-10;
    /// Real interval known to bracket the solution. Enables bisection fallback when
    /// both target and iterate are real.
    std::optional<std::pair<double, double>> real_bracket;
};

/// Solves eta_inv(w) = target by damped Newton (step halving) seeded at `seed`.
///
/// Returns w with |eta_inv(w) - target| <= tolerance * (1 + |target|). On the real axis
/// with a bracket supplied, a failed Newton step is replaced by a bisection step.
/// Throws ConvergenceError with the last iterate when the budget is exhausted.
Complex invert_eta(const std::function<Complex(Complex)>& eta_inv, Complex target, Complex seed,
                   const InversionOptions& options = {});

// --- grids -------------------------------------------------------------------

std::vector<double> linear_grid(double lo, double hi, std::size_t count);

/// Cosine-spaced points lo + (hi - lo)(1 - cos t)/2, t uniform on [0, pi]. Clusters samples at
/// square-root edges and 1/sqrt(x) poles, where the trapezoid rule in t converges fast.
std::vector<double> edge_clustered_grid(double lo, double hi, std::size_t count);

inline constexpr std::size_t kDefaultGridPoints = 2000;

/// Shrinks [lo, hi] to the region where `density` exceeds `threshold`, keeping one coarse
/// step of padding. Returns the input bracket when nothing exceeds the threshold.
std::pair<double, double> trim_support(const std::function<double(double)>& density, double lo,
                                       double hi, double threshold, std::size_t probes = 400);

}  // namespace freecap
