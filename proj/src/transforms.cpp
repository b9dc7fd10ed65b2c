#include "freecap/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace freecap {

AspectRatio::AspectRatio(double value) : value_(value) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        std::ostringstream msg;
        msg << "aspect ratio must be positive and finite, got " << value;
        throw DomainError(msg.str());
    }
}

SpectralDensity::SpectralDensity(std::vector<double> grid, std::vector<double> bulk,
                                 std::vector<Atom> atoms, Evaluator evaluator,
                                 std::vector<double> interval_masses)
    : grid_(std::move(grid)), bulk_(std::move(bulk)), atoms_(std::move(atoms)),
      evaluator_(std::move(evaluator)) {
    if (grid_.size() < 2) throw ValidationError("spectral density needs at least two grid points");
    if (grid_.size() != bulk_.size()) throw ValidationError("grid and bulk sizes differ");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        if (!std::isfinite(grid_[i]) || grid_[i] < 0.0)
            throw ValidationError("grid points must be finite and nonnegative");
        if (i > 0 && !(grid_[i] > grid_[i - 1]))
            throw ValidationError("grid must be strictly increasing");
        if (!std::isfinite(bulk_[i]) || bulk_[i] < 0.0)
            throw ValidationError("bulk density must be finite and nonnegative");
    }
    for (const Atom& a : atoms_) {
        if (!(a.location >= 0.0) || !std::isfinite(a.location))
            throw ValidationError("atom location must be finite and nonnegative");
        if (!(a.mass >= 0.0 && a.mass <= 1.0)) throw ValidationError("atom mass must lie in [0, 1]");
    }
    if (!interval_masses.empty() && interval_masses.size() + 1 != grid_.size())
        throw ValidationError("need one interval mass per grid interval");
    trapezoid_.resize(grid_.size() - 1);
    cumulative_.assign(grid_.size(), 0.0);
    for (std::size_t i = 1; i < grid_.size(); ++i) {
        trapezoid_[i - 1] = 0.5 * (bulk_[i] + bulk_[i - 1]) * (grid_[i] - grid_[i - 1]);
        double mass = trapezoid_[i - 1];
        if (!interval_masses.empty()) {
            mass = interval_masses[i - 1];
            if (!(mass >= 0.0) || !std::isfinite(mass))
                throw ValidationError("interval masses must be finite and nonnegative");
        }
        cumulative_[i] = cumulative_[i - 1] + mass;
    }
}

double SpectralDensity::bulk_at(double x) const {
    if (evaluator_) return evaluator_(x);
    if (x < grid_.front() || x > grid_.back()) return 0.0;
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    if (it == grid_.end()) return bulk_.back();
    const std::size_t hi = static_cast<std::size_t>(it - grid_.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - grid_[lo]) / (grid_[hi] - grid_[lo]);
    return (1.0 - t) * bulk_[lo] + t * bulk_[hi];
}

double SpectralDensity::bulk_mass() const { return cumulative_.back(); }

double SpectralDensity::atom_mass() const {
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.mass;
    return m;
}

double SpectralDensity::normalization_deviation() const { return std::abs(total_mass() - 1.0); }

void SpectralDensity::require_normalized(double tol) const {
    const double dev = normalization_deviation();
    if (!(dev <= tol)) {
        std::ostringstream msg;
        msg << "spectral density not normalized: total mass " << total_mass() << " (tolerance " << tol
            << ")";
        throw ValidationError(msg.str());
    }
}

double SpectralDensity::cdf(double x) const {
    double value = 0.0;
    for (const Atom& a : atoms_)
        if (a.location <= x) value += a.mass;
    if (x < grid_.front()) return value;
    if (x >= grid_.back()) return value + cumulative_.back();
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - grid_.begin());
    const std::size_t lo = hi - 1;
    const double dx = x - grid_[lo];
    const double slope = (bulk_[hi] - bulk_[lo]) / (grid_[hi] - grid_[lo]);
    const double mass = cumulative_[hi] - cumulative_[lo];
    const double share = trapezoid_[lo] > 0.0 ? dx * (bulk_[lo] + 0.5 * slope * dx) / trapezoid_[lo]
                                              : dx / (grid_[hi] - grid_[lo]);
    return value + cumulative_[lo] + share * mass;
}

// --- Marcenko-Pastur ---------------------------------------------------------

std::pair<double, double> mp_support(AspectRatio beta) {
    const double r = std::sqrt(beta.value());
    return {(1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

double mp_density(double x, AspectRatio beta) {
    if (x < 0.0) throw DomainError("mp_density: x must be nonnegative");
    if (x == 0.0) return 0.0;
    const auto [a, b] = mp_support(beta);
    const double span = std::max(0.0, x - a) * std::max(0.0, b - x);
    return std::sqrt(span) / (2.0 * std::numbers::pi * x);
}

double mp_atom(AspectRatio beta) { return std::max(0.0, 1.0 - beta.value()); }

double mp_eta(double x, AspectRatio beta) {
    if (x < 0.0) throw DomainError("mp_eta: argument must be nonnegative");
    const double r = std::sqrt(beta.value());
    const double s1 = std::sqrt(x * (1.0 + r) * (1.0 + r) + 1.0);
    const double s2 = std::sqrt(x * (1.0 - r) * (1.0 - r) + 1.0);
    const double sum = s1 + s2;
    return 1.0 - 4.0 * beta.value() * x / (sum * sum);
}

Complex mp_eta(Complex x, AspectRatio beta) {
    const double r = std::sqrt(beta.value());
    const Complex s1 = std::sqrt(x * ((1.0 + r) * (1.0 + r)) + 1.0);
    const Complex s2 = std::sqrt(x * ((1.0 - r) * (1.0 - r)) + 1.0);
    const Complex sum = s1 + s2;
    return 1.0 - 4.0 * beta.value() * x / (sum * sum);
}

double mp_s_transform(double z, AspectRatio beta) {
    const double denom = beta.value() + z;
    if (denom == 0.0) throw DomainError("mp_s_transform: pole at z = -beta");
    return 1.0 / denom;
}

// --- transform calculus --------------------------------------------------------

double eta_from_density(const SpectralDensity& density, double g, double normalization_tol) {
    if (g < 0.0) throw DomainError("eta_from_density: g must be nonnegative");
    density.require_normalized(normalization_tol);
    const auto& x = density.grid();
    const auto& f = density.bulk();
    double value = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double left = f[i - 1] / (1.0 + g * x[i - 1]);
        const double right = f[i] / (1.0 + g * x[i]);
        value += 0.5 * (left + right) * (x[i] - x[i - 1]);
    }
    for (const Atom& a : density.atoms()) value += a.mass / (1.0 + g * a.location);
    return value;
}

Complex stieltjes_from_eta(const std::function<Complex(Complex)>& eta, Complex z) {
    if (z == Complex(0.0, 0.0)) throw DomainError("stieltjes_from_eta: z must be nonzero");
    return -eta(-1.0 / z) / z;
}

double density_from_stieltjes(const std::function<Complex(Complex)>& stieltjes, double x,
                              double eps) {
    const double near = stieltjes(Complex(x, eps)).imag() / std::numbers::pi;
    const double far = stieltjes(Complex(x, 2.0 * eps)).imag() / std::numbers::pi;
    return 2.0 * near - far;
}

double extraction_epsilon(double span) { return 1e-6 * std::max(1.0, span); }

namespace {

Complex central_derivative(const std::function<Complex(Complex)>& f, Complex w) {
    const double h = 1e-6 * (std::abs(w) > 0.0 ? std::abs(w) : 1e-3);
    return (f(w + h) - f(w - h)) / (2.0 * h);
}

bool finite(Complex c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); }

}  // namespace

Complex invert_eta(const std::function<Complex(Complex)>& eta_inv, Complex target, Complex seed,
                   const InversionOptions& options) {
    const auto residual = [&](Complex w) { return eta_inv(w) - target; };
    const double tol = options.tolerance * (1.0 + std::abs(target));

    const bool real_mode =
        options.real_bracket.has_value() && target.imag() == 0.0 && seed.imag() == 0.0;
    double lo = 0.0, hi = 0.0, sign_lo = 0.0;
    bool bracket_ok = false;
    if (real_mode) {
        std::tie(lo, hi) = *options.real_bracket;
        const double nudge = 1e-13 * (hi - lo);
        const double f_lo = residual(lo + nudge).real();
        const double f_hi = residual(hi - nudge).real();
        if (!std::isnan(f_lo) && !std::isnan(f_hi) && f_lo * f_hi <= 0.0) {
            bracket_ok = true;
            sign_lo = f_lo > 0.0 ? 1.0 : -1.0;
        }
        if (!(seed.real() > lo && seed.real() < hi)) seed = 0.5 * (lo + hi);
    }

    Complex w = seed;
    Complex f = residual(w);
    int bisections = 0;
    for (int step = 0; step < options.max_newton_steps; ++step) {
        if (finite(f) && std::abs(f) <= tol) return w;

        Complex next = w;
        Complex f_next = f;
        bool accepted = false;
        if (finite(f)) {
            const Complex d = central_derivative(eta_inv, w);
            if (finite(d) && std::abs(d) > 0.0) {
                const Complex delta = f / d;
                double damping = 1.0;
                for (int halving = 0; halving < 40; ++halving, damping *= 0.5) {
                    Complex trial = w - damping * delta;
                    if (real_mode) trial = Complex(trial.real(), 0.0);
                    if (real_mode && bracket_ok && !(trial.real() > lo && trial.real() < hi))
                        continue;
                    const Complex f_trial = residual(trial);
                    if (finite(f_trial) && std::abs(f_trial) < std::abs(f)) {
                        next = trial;
                        f_next = f_trial;
                        accepted = true;
                        break;
                    }
                }
            }
        }
        if (!accepted) {
            if (!(real_mode && bracket_ok) || bisections >= options.max_bisections)
                throw ConvergenceError("invert_eta: damped Newton stalled", w,
                                       finite(f) ? std::abs(f) : HUGE_VAL);
            next = Complex(0.5 * (lo + hi), 0.0);
            f_next = residual(next);
            ++bisections;
        }
        if (real_mode && bracket_ok && std::isfinite(f_next.real())) {
            if ((f_next.real() > 0.0 ? 1.0 : -1.0) == sign_lo)
                lo = next.real();
            else
                hi = next.real();
        }
        w = next;
        f = f_next;
    }
    if (finite(f) && std::abs(f) <= tol) return w;
    throw ConvergenceError("invert_eta: iteration budget exhausted", w,
                           finite(f) ? std::abs(f) : HUGE_VAL);
}

// --- grids -----------------------------------------------------------------------

std::vector<double> linear_grid(double lo, double hi, std::size_t count) {
    if (count < 2) throw DomainError("linear_grid: need at least two points");
    if (!(hi > lo)) throw DomainError("linear_grid: need lo < hi");
    std::vector<double> g(count);
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) g[i] = lo + step * static_cast<double>(i);
    g.back() = hi;
    return g;
}

std::vector<double> edge_clustered_grid(double lo, double hi, std::size_t count) {
    if (count < 2) throw DomainError("edge_clustered_grid: need at least two points");
    if (!(hi > lo)) throw DomainError("edge_clustered_grid: need lo < hi");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1);
        g[i] = lo + 0.5 * (hi - lo) * (1.0 - std::cos(t));
    }
    g.front() = lo;
    g.back() = hi;
    return g;
}

std::pair<double, double> trim_support(const std::function<double(double)>& density, double lo,
                                       double hi, double threshold, std::size_t probes) {
    const auto probe = linear_grid(lo, hi, probes);
    std::size_t first = probes, last = 0;
    for (std::size_t i = 0; i < probes; ++i) {
        if (density(probe[i]) > threshold) {
            first = std::min(first, i);
            last = i;
        }
    }
    if (first == probes) return {lo, hi};
    const std::size_t a = first == 0 ? 0 : first - 1;
    const std::size_t b = std::min(probes - 1, last + 1);
    return {probe[a], probe[b]};
}

}  // namespace freecap
