#include "freecap/closedform.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>

#include "freecap/quadrature.hpp"

namespace freecap {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrackTolerance = 1e-12;

// Inverse eta transform of M or K,
//   eta^{-1}(w) = -(w - 1)(sqrt(D(w)) + 1 + (gamma - w) p) / (2w)   [divided by q (beta + w - 1) for K]
//   D(w) = 1 + (w - gamma)^2 p^2 + 2 (gamma + w) p = p^2 ((w - c)^2 + h^2),
//   c = gamma - 1/p, h = 2 sqrt(gamma / p).
// Continuation runs in the uniformizing variable tau with w = c + (h/2)(tau - 1/tau), where
// sqrt(D) = p (h/2)(tau + 1/tau) is single valued; tau and -1/tau are the two sheets over w.
// Without interference (p = 0) D is 1 and tau is w itself.
class InverseEta {
public:
    enum class Kind { M, K };

    InverseEta(const EffectiveScales& scales, Kind kind)
        : q_(scales.qtilde), p_(scales.ptilde), beta_(scales.beta.value()),
          gamma_(scales.gamma.value()), kind_(kind) {
        if (p_ > 0.0) {
            c_ = gamma_ - 1.0 / p_;
            h_ = 2.0 * std::sqrt(gamma_ / p_);
        }
    }

    Complex radicand(Complex w) const {
        return 1.0 + (w - gamma_) * (w - gamma_) * (p_ * p_) + (2.0 * gamma_ + 2.0 * w) * p_;
    }

    Complex value(Complex w, Complex root) const { return finish(w, root + 1.0 + (gamma_ - w) * p_); }

    Complex principal(Complex w) const { return value(w, std::sqrt(radicand(w))); }

    Complex w_of(Complex tau) const { return p_ > 0.0 ? c_ + 0.5 * h_ * (tau - 1.0 / tau) : tau; }
    // On the surface sqrt(D) + 1 + (gamma - w) p is exactly 2 + p h / tau, which avoids the
    // cancellation for large tau.
    Complex on_surface(Complex tau) const {
        if (!(p_ > 0.0)) return finish(tau, 2.0);
        return finish(w_of(tau), 2.0 + p_ * h_ / tau);
    }

    // Relative rounding of w_of(tau) over machine epsilon; large near w = 0, where the terms cancel.
    double w_conditioning(Complex tau) const {
        if (!(p_ > 0.0)) return 1.0;
        const double terms = std::abs(c_) + 0.5 * h_ * (std::abs(tau) + 1.0 / std::abs(tau));
        return std::max(1.0, terms / std::max(std::abs(w_of(tau)), 1e-300));
    }

    // w = 1 on the sheet with sqrt(D(1)) > 0.
    Complex initial_tau() const {
        if (!(p_ > 0.0)) return 1.0;
        const double d = 1.0 - c_;
        return (d + std::sqrt(d * d + h_ * h_)) / h_;
    }

    // Mean eigenvalue = -1 / (d eta^{-1} / dw) at w = 1.
    double mean_eigenvalue() const {
        const double r1 = std::sqrt(radicand(1.0).real());
        const double mean_m = 2.0 / (r1 + 1.0 + (gamma_ - 1.0) * p_);
        return kind_ == Kind::M ? mean_m : q_ * beta_ * mean_m;
    }

    // eta maps [0, inf) onto (lower, 1]: the mass at zero is (1 - beta)^+ for K, none for M.
    double real_lower() const { return kind_ == Kind::K ? std::max(0.0, 1.0 - beta_) : 0.0; }

private:
    Complex finish(Complex w, Complex bracket) const {
        Complex m = -(w - 1.0) * bracket / (2.0 * w);
        if (kind_ == Kind::K) m /= q_ * ((beta_ - 1.0) + w);
        return m;
    }

    double q_, p_, beta_, gamma_;
    Kind kind_;
    double c_ = 0.0;
    double h_ = 0.0;
};

double solve_real(const InverseEta& inv, double psi) {
    if (!(psi >= 0.0) || !std::isfinite(psi))
        throw DomainError("eta: real argument must be finite and nonnegative");
    if (psi == 0.0) return 1.0;
    InversionOptions options;
    options.tolerance = kTrackTolerance;
    options.real_bracket = std::make_pair(inv.real_lower(), 1.0);
    const double seed = 1.0 / (1.0 + psi * inv.mean_eigenvalue());
    const Complex w = invert_eta([&](Complex c) { return inv.principal(c); }, psi, seed, options);
    return w.real();
}

// Continuation from (psi, eta) = (0, 1) through the given psi targets. Returns eta at each
// target. Steps that fail to converge or move too far are subdivided.
std::vector<Complex> track(const InverseEta& inv, std::span<const Complex> targets) {
    std::vector<Complex> out;
    out.reserve(targets.size());
    Complex tau = inv.initial_tau();
    Complex start = 0.0;
    for (const Complex target : targets) {
        double s = 0.0;
        double ds = 1.0;
        while (s < 1.0) {
            const double s_try = std::min(1.0, s + ds);
            const Complex psi = start + s_try * (target - start);
            bool ok = false;
            Complex tau_new = tau;
            try {
                InversionOptions options;
                options.max_newton_steps = 60;
                options.tolerance = kTrackTolerance * inv.w_conditioning(tau);
                tau_new = invert_eta([&](Complex t) { return inv.on_surface(t); }, psi, tau, options);
                const Complex w = inv.w_of(tau);
                ok = std::abs(tau_new - tau) <= 0.3 * std::abs(tau) &&
                     std::abs(inv.w_of(tau_new) - w) <= 0.3 * std::abs(w);
            } catch (const ConvergenceError&) {
                ok = false;
            }
            if (ok) {
                tau = tau_new;
                s = s_try;
                ds = std::min(1.0, 2.0 * ds);
            } else {
                ds *= 0.5;
                if (ds < 1e-12)
                    throw ConvergenceError("eta continuation failed to advance", inv.w_of(tau),
                                           std::abs(inv.on_surface(tau) - psi));
            }
        }
        out.push_back(inv.w_of(tau));
        start = target;
    }
    return out;
}

Complex solve_complex(const InverseEta& inv, Complex psi) {
    if (psi.imag() == 0.0 && psi.real() >= 0.0) return solve_real(inv, psi.real());
    const std::array<Complex, 1> path{psi};
    return track(inv, path).front();
}

// Density at x from Im S(x + j y) / pi with S(z) = -eta(-1/z) / z, following z down the
// vertical line from far above the spectrum to y = 2 eps and y = eps.
double stieltjes_density(const InverseEta& inv, double x, double eps, double scale, double hard_edge = 0.0) {
    // Close to a hard edge the offset must stay well below the distance to it.
    eps = std::max(std::min(eps, 1e-3 * std::abs(x - hard_edge)), 1e-15 * scale);
    std::vector<Complex> targets;
    double y = 4.0 * (std::abs(x) + scale + 1.0);
    while (y > 4.0 * eps) {
        targets.push_back(-1.0 / Complex(x, y));
        y *= 0.5;
    }
    targets.push_back(-1.0 / Complex(x, 2.0 * eps));
    targets.push_back(-1.0 / Complex(x, eps));
    const auto etas = track(inv, targets);
    const auto density_at = [&](Complex eta, double height) {
        const Complex z(x, height);
        return (-eta / z).imag() / kPi;
    };
    const double far = density_at(etas[etas.size() - 2], 2.0 * eps);
    const double near = density_at(etas.back(), eps);
    return 2.0 * near - far;
}

// K's small eigenvalues follow N's, which reach the origin only for beta = 1 and then with the
// law x^{-1/2}. Below the floor the continuation has run out of digits, so that law takes over.
double density_near_origin(const InverseEta& inv, double x, double eps, double scale) {
    const double floor = 1e-12 * scale;
    if (x >= floor) return stieltjes_density(inv, x, eps, scale);
    return stieltjes_density(inv, floor, eps, scale) * std::sqrt(floor / x);
}

void require_valid_scales(double qtilde, double ptilde) {
    if (!(qtilde > 0.0) || !std::isfinite(qtilde)) throw DomainError("qtilde must be positive");
    if (!(ptilde >= 0.0) || !std::isfinite(ptilde)) throw DomainError("ptilde must be nonnegative");
}

// Mass of scale * MP(ratio) on [x0, x1], integrated in the angle t of
// x = scale * (a + (b - a)(1 - cos t) / 2), where the integrand is smooth up to both edges.
double scaled_mp_mass(double scale, AspectRatio ratio, double x0, double x1) {
    const auto [a, b] = mp_support(ratio);
    const double lo = std::max(x0 / scale, a);
    const double hi = std::min(x1 / scale, b);
    if (!(hi > lo)) return 0.0;
    const auto angle = [&](double x) { return std::acos(std::clamp(1.0 - 2.0 * (x - a) / (b - a), -1.0, 1.0)); };
    const double t0 = angle(lo);
    const double t1 = angle(hi);
    static constexpr std::array<double, 5> node{0.0, 0.5384693101056831, -0.5384693101056831,
                                                0.9061798459386640, -0.9061798459386640};
    static constexpr std::array<double, 5> weight{0.5688888888888889, 0.4786286704993665,
                                                  0.4786286704993665, 0.2369268850561891,
                                                  0.2369268850561891};
    const double mid = 0.5 * (t0 + t1);
    const double half = 0.5 * (t1 - t0);
    double sum = 0.0;
    for (std::size_t i = 0; i < node.size(); ++i) {
        const double t = mid + half * node[i];
        const double x = a + 0.5 * (b - a) * (1.0 - std::cos(t));
        // density * dx/dt; sqrt((x-a)(b-x)) = (b-a) sin(t) / 2
        const double s = std::sin(t);
        sum += weight[i] * (b - a) * (b - a) * s * s / (8.0 * kPi * x);
    }
    return sum * half;
}

SpectralDensity scaled_mp(double scale, AspectRatio ratio, std::vector<double> grid) {
    if (grid.empty()) {
        const auto [a, b] = mp_support(ratio);
        grid = edge_clustered_grid(scale * a, scale * b, kDefaultGridPoints);
    }
    const auto evaluator = [scale, ratio](double x) {
        return x <= 0.0 ? 0.0 : mp_density(x / scale, ratio) / scale;
    };
    std::vector<double> bulk(grid.size());
    std::transform(grid.begin(), grid.end(), bulk.begin(), evaluator);
    std::vector<double> masses(grid.size() > 0 ? grid.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        masses[i] = scaled_mp_mass(scale, ratio, grid[i], grid[i + 1]);
    std::vector<Atom> atoms;
    if (mp_atom(ratio) > 0.0) atoms.push_back({0.0, mp_atom(ratio)});
    return SpectralDensity(std::move(grid), std::move(bulk), std::move(atoms), evaluator,
                           std::move(masses));
}

// Interpolates flagged samples from their nearest good neighbours.
void patch_flagged(std::vector<double>& bulk, const std::vector<bool>& flagged,
                   const std::vector<double>& grid) {
    const std::size_t n = bulk.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!flagged[i]) continue;
        std::size_t lo = i, hi = i;
        while (lo > 0 && flagged[lo]) --lo;
        while (hi + 1 < n && flagged[hi]) ++hi;
        const bool lo_ok = !flagged[lo];
        const bool hi_ok = !flagged[hi];
        if (lo_ok && hi_ok) {
            const double t = (grid[i] - grid[lo]) / (grid[hi] - grid[lo]);
            bulk[i] = (1.0 - t) * bulk[lo] + t * bulk[hi];
        } else {
            bulk[i] = lo_ok ? bulk[lo] : (hi_ok ? bulk[hi] : 0.0);
        }
    }
}

using PointDensity = std::function<double(double)>;

SpectralDensity extract(const PointDensity& point, std::pair<double, double> bound,
                        std::vector<double> grid, std::vector<Atom> atoms, double eps,
                        ExtractionReport* report) {
    const auto safe_point = [&](double x) {
        try {
            return std::max(0.0, point(x));
        } catch (const ConvergenceError&) {
            return 0.0;
        }
    };
    bool auto_grid = false;
    if (grid.empty()) {
        const std::size_t probes = 400;
        const auto probe = linear_grid(bound.first, bound.second, probes);
        double peak = 0.0;
        for (double x : probe) peak = std::max(peak, safe_point(x));
        const auto trimmed =
            trim_support(safe_point, bound.first, bound.second, 1e-9 * peak, probes);
        grid = edge_clustered_grid(trimmed.first, trimmed.second, kDefaultGridPoints);
        auto_grid = true;
    }
    std::vector<double> bulk(grid.size(), 0.0);
    std::vector<bool> flagged(grid.size(), false);
    std::size_t failures = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        try {
            bulk[i] = std::max(0.0, point(grid[i]));
        } catch (const ConvergenceError&) {
            flagged[i] = true;
            ++failures;
        }
    }
    if (static_cast<double>(failures) > 0.01 * static_cast<double>(grid.size()))
        throw ConvergenceError("density extraction failed at more than 1% of grid points", 0.0,
                               static_cast<double>(failures));
    patch_flagged(bulk, flagged, grid);

    // On the cosine grid the masses are integrated in the angle variable, where the density
    // times dx/dt stays bounded at hard edges; a plain trapezoid loses the 1/sqrt mass there.
    std::vector<double> masses;
    if (auto_grid) {
        const double lo = grid.front();
        const double hi = grid.back();
        const double dt = kPi / static_cast<double>(grid.size() - 1);
        const double offset = 0.5 / std::sqrt(3.0);
        masses.resize(grid.size() - 1);
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            double sum = 0.0;
            bool ok = true;
            for (double node : {0.5 - offset, 0.5 + offset}) {
                const double t = (static_cast<double>(i) + node) * dt;
                const double x = lo + 0.5 * (hi - lo) * (1.0 - std::cos(t));
                try {
                    sum += std::max(0.0, point(x)) * 0.5 * (hi - lo) * std::sin(t);
                } catch (const ConvergenceError&) {
                    ok = false;
                }
            }
            masses[i] = ok ? 0.5 * dt * sum : 0.5 * (bulk[i] + bulk[i + 1]) * (grid[i + 1] - grid[i]);
        }
    }
    SpectralDensity density(std::move(grid), std::move(bulk), std::move(atoms),
                            [point](double x) { return std::max(0.0, point(x)); },
                            std::move(masses));
    if (report) {
        report->flagged_points = failures;
        report->epsilon = eps;
        report->normalization_deviation = density.normalization_deviation();
    }
    return density;
}

}  // namespace

EffectiveScales::EffectiveScales(double qtilde_, double ptilde_, AspectRatio beta_,
                                 AspectRatio gamma_)
    : qtilde(qtilde_), ptilde(ptilde_), beta(beta_), gamma(gamma_) {
    require_valid_scales(qtilde, ptilde);
}

// --- N ---------------------------------------------------------------------------

SpectralDensity aepdf_N(const EffectiveScales& scales, std::vector<double> grid) {
    return scaled_mp(scales.qtilde, scales.beta, std::move(grid));
}

SpectralDensity aepdf_Ntilde(const EffectiveScales& scales, std::vector<double> grid) {
    if (!(scales.ptilde > 0.0)) throw DomainError("aepdf_Ntilde: ptilde must be positive");
    return scaled_mp(scales.ptilde, scales.gamma, std::move(grid));
}

double s_transform_N(double z, const EffectiveScales& scales) {
    return mp_s_transform(z, scales.beta) / scales.qtilde;
}

double s_transform_Ntilde(double z, const EffectiveScales& scales) {
    if (!(scales.ptilde > 0.0)) throw DomainError("s_transform_Ntilde: ptilde must be positive");
    return mp_s_transform(z, scales.gamma) / scales.ptilde;
}

// --- M ---------------------------------------------------------------------------

Complex eta_inv_M(Complex x, const EffectiveScales& scales) {
    if (x == Complex(0.0)) throw DomainError("eta_inv_M: pole at x = 0");
    return InverseEta(scales, InverseEta::Kind::M).principal(x);
}

double eta_M(double psi, const EffectiveScales& scales) {
    return solve_real(InverseEta(scales, InverseEta::Kind::M), psi);
}

Complex eta_M(Complex psi, const EffectiveScales& scales) {
    return solve_complex(InverseEta(scales, InverseEta::Kind::M), psi);
}

double eta_M_quadrature_oracle(double psi, const EffectiveScales& scales) {
    const double p = scales.ptilde;
    const double g = scales.gamma.value();
    if (!(p > 0.0)) throw DomainError("eta_M_quadrature_oracle: ptilde must be positive");
    if (!(psi >= 0.0)) throw DomainError("eta_M_quadrature_oracle: psi must be nonnegative");
    const double a = p * (1.0 - std::sqrt(g)) * (1.0 - std::sqrt(g));
    const double b = p * (1.0 + std::sqrt(g)) * (1.0 + std::sqrt(g));
    const auto integrand = [&](double w) {
        if (w <= a || w >= b) return 0.0;
        const double law = std::sqrt((w - a) * (b - w)) / (2.0 * kPi * w * p);
        return (w + 1.0) / (1.0 + psi + w) * law;
    };
    const double bulk = integrate(integrand, a, b, 1e-12).value;
    return bulk + std::max(0.0, 1.0 - g) / (1.0 + psi);
}

namespace {

struct ContourPoles {
    double z2, z3, z4, z5;
    double radicand_sqrt;  // S
    double b_plus_s;       // B + S
};

// Poles of the unit-circle integrand. The small root zeta4 is evaluated in the rationalized
// form -2 sqrt(gamma) p / (B + S), which is the same expression without the cancellation.
ContourPoles contour_poles(double psi, double p, double g) {
    const double sg = std::sqrt(g);
    const double big_b = (1.0 + g) * p + 1.0 + psi;
    const double s = std::sqrt((g - 1.0) * (g - 1.0) * p * p +
                               2.0 * (1.0 + psi) * (1.0 + g) * p + (1.0 + psi) * (1.0 + psi));
    ContourPoles poles{};
    poles.z2 = (-(1.0 + g) + (1.0 - g)) / (2.0 * sg);
    poles.z3 = (-(1.0 + g) - (1.0 - g)) / (2.0 * sg);
    poles.z5 = -(big_b + s) / (2.0 * p * sg);
    poles.z4 = -2.0 * p * sg / (big_b + s);
    poles.radicand_sqrt = s;
    poles.b_plus_s = big_b + s;
    return poles;
}

Complex contour_integrand(Complex z, double psi, double p, double g) {
    const double sg = std::sqrt(g);
    const Complex z2 = z * z;
    const Complex num = ((1.0 + p * (1.0 + g)) * z + sg * p * (z2 + 1.0)) * (z2 - 1.0) * (z2 - 1.0);
    const Complex den = z2 * ((1.0 + g) * z + sg * (z2 + 1.0)) *
                        (z * (1.0 + psi + p * (1.0 + g)) + sg * p * (z2 + 1.0));
    return num / den;
}

// Residue by the trapezoidal rule on a small circle; exact up to (r / distance)^n.
Complex circle_residue(const std::function<Complex(Complex)>& f, Complex pole, double radius) {
    constexpr int n = 128;
    Complex sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const Complex t = std::polar(1.0, 2.0 * kPi * k / n);
        sum += f(pole + radius * t) * radius * t;
    }
    return sum / static_cast<double>(n);
}

struct FormulaResidues {
    double r0, r1, r2, r3, r4, r5;
};

FormulaResidues formula_residues(double psi, double p, double g, const ContourPoles& poles) {
    const double s = poles.radicand_sqrt;
    // B - S and S^2 - B S share the factor 4 gamma p^2 / (B + S).
    const double b_minus_s = 4.0 * g * p * p / poles.b_plus_s;
    const double numerator = -s * b_minus_s * psi;  // (-B S + S^2) psi
    const double e = numerator / (p * g * (1.0 + psi) * b_minus_s);
    FormulaResidues r{};
    r.r0 = -(p + p * g + psi) / (p * g);
    r.r1 = 1.0 / std::sqrt(g);
    r.r2 = (g - 1.0) / (g + psi * g);
    r.r3 = -r.r2;
    r.r4 = e;
    r.r5 = -e;
    return r;
}

double long_closed_form(double psi, double p, double g) {
    const double s = std::sqrt(p * p * (g - 1.0) * (g - 1.0) + 2.0 * (1.0 + psi) * (g + 1.0) * p +
                               (1.0 + psi) * (1.0 + psi));
    const double num = -(psi * psi + (1.0 + (1.0 + g) * p) * psi + p) * s + psi * psi * psi +
                       (2.0 + (2.0 + 2.0 * g) * p) * psi * psi +
                       (1.0 + (1.0 + g * g) * p * p + (2.0 * g + 3.0) * p) * psi +
                       (g + 1.0) * p * p + p;
    const double big_b = psi + 1.0 + (g + 1.0) * p;
    const double b_minus_s = (big_b * big_b - s * s) / (big_b + s);
    return num / ((1.0 + psi) * b_minus_s);
}

void require_contour_inputs(double psi, const EffectiveScales& scales) {
    if (!(scales.ptilde > 0.0)) throw DomainError("residue form: ptilde must be positive");
    if (!(psi >= 0.0) || !std::isfinite(psi))
        throw DomainError("residue form: psi must be finite and nonnegative");
}

}  // namespace

PoleResidueTable poles_and_residues(double psi, const EffectiveScales& scales) {
    require_contour_inputs(psi, scales);
    const double p = scales.ptilde;
    const double g = scales.gamma.value();
    const ContourPoles poles = contour_poles(psi, p, g);
    const FormulaResidues formula = formula_residues(psi, p, g, poles);

    const std::array<double, 5> distinct{0.0, poles.z2, poles.z3, poles.z4, poles.z5};
    const std::array<const char*, 5> distinct_label{"zeta0", "zeta2", "zeta3", "zeta4", "zeta5"};
    double min_gap = HUGE_VAL;
    for (std::size_t i = 0; i < distinct.size(); ++i)
        for (std::size_t j = i + 1; j < distinct.size(); ++j)
            min_gap = std::min(min_gap, std::abs(distinct[i] - distinct[j]));

    PoleResidueTable table;
    table.degenerate = min_gap < 1e-6 || std::abs(g - 1.0) < 1e-9;

    std::array<Complex, 5> numeric{};
    if (!table.degenerate) {
        const auto f = [&](Complex z) { return contour_integrand(z, psi, p, g); };
        for (std::size_t i = 0; i < distinct.size(); ++i) {
            double gap = HUGE_VAL;
            for (std::size_t j = 0; j < distinct.size(); ++j)
                if (j != i) gap = std::min(gap, std::abs(distinct[i] - distinct[j]));
            numeric[i] = circle_residue(f, distinct[i], 0.3 * gap);
        }
    }

    const auto matches = [](Complex a, Complex b) {
        return std::abs(a - b) <= 1e-8 * (1.0 + std::abs(b));
    };
    const std::array<double, 6> pole_of_label{0.0, 0.0, poles.z2, poles.z3, poles.z4, poles.z5};
    const std::array<std::size_t, 6> distinct_index{0, 0, 1, 2, 3, 4};
    const std::array<double, 6> formula_of_label{formula.r0, formula.r1, formula.r2,
                                                 formula.r3, formula.r4, formula.r5};
    for (std::size_t i = 0; i < 6; ++i) {
        PoleResidue row;
        row.label = "zeta" + std::to_string(i);
        row.pole = pole_of_label[i];
        row.formula_residue = formula_of_label[i];
        row.inside_unit_disk = std::abs(pole_of_label[i]) < 1.0;
        if (!table.degenerate) {
            row.numeric_residue = numeric[distinct_index[i]];
            row.formula_matches_numeric = matches(row.formula_residue, row.numeric_residue);
            for (std::size_t j = 0; j < distinct.size(); ++j)
                if (matches(row.formula_residue, numeric[j])) row.formula_matches_pole = distinct_label[j];
        }
        table.entries.push_back(row);
    }
    return table;
}

ResidueAdjudication eta_M_residue_form(double psi, const EffectiveScales& scales) {
    require_contour_inputs(psi, scales);
    const double p = scales.ptilde;
    const double g = scales.gamma.value();
    ResidueAdjudication out;
    out.psi = psi;
    out.oracle = eta_M_quadrature_oracle(psi, scales);

    const PoleResidueTable table = poles_and_residues(psi, scales);
    out.degenerate = table.degenerate;
    const auto valid = [&](double v) { return std::abs(v - out.oracle) <= kResidueValidationTol; };

    out.long_closed_form = long_closed_form(psi, p, g);
    out.long_closed_form_valid = valid(*out.long_closed_form);
    out.long_form_to_oracle_ratio = *out.long_closed_form / out.oracle;

    if (out.degenerate) return out;

    const ContourPoles poles = contour_poles(psi, p, g);
    const FormulaResidues formula = formula_residues(psi, p, g, poles);
    out.residue_sum = -0.5 * g * (formula.r0 + formula.r2 + formula.r5);
    out.residue_sum_valid = valid(*out.residue_sum);

    // The contour only covers the bulk of Ntilde; its atom (1 - gamma)^+ at zero is added back.
    Complex inside = 0.0;
    const std::array<std::size_t, 5> distinct_rows{0, 2, 3, 4, 5};
    for (std::size_t row : distinct_rows) {
        const auto& e = table.entries[row];
        if (e.inside_unit_disk) inside += e.numeric_residue;
    }
    out.numeric_residue_sum = -0.5 * g * inside.real() + std::max(0.0, 1.0 - g) / (1.0 + psi);
    out.numeric_residue_sum_valid = valid(*out.numeric_residue_sum);
    return out;
}

double long_closed_form_at_zero(const EffectiveScales& scales) {
    require_contour_inputs(0.0, scales);
    return long_closed_form(0.0, scales.ptilde, scales.gamma.value());
}

std::pair<double, double> support_bound_M(const EffectiveScales& scales) {
    const double rg = std::sqrt(scales.gamma.value());
    const double a = scales.ptilde * (1.0 - rg) * (1.0 - rg);
    const double b = scales.ptilde * (1.0 + rg) * (1.0 + rg);
    return {1.0 / (1.0 + b), 1.0 / (1.0 + a)};
}

namespace {

// For gamma = 1 the interference spectrum reaches zero and M's density blows up at 1.
double hard_edge_M(const EffectiveScales& scales) { return scales.gamma.value() == 1.0 ? 1.0 : 0.0; }

}  // namespace

double density_M(double x, const EffectiveScales& scales, double eps) {
    if (x <= 0.0 || scales.interference_free()) return 0.0;
    return stieltjes_density(InverseEta(scales, InverseEta::Kind::M), x, eps, 1.0, hard_edge_M(scales));
}

SpectralDensity aepdf_M(const EffectiveScales& scales, std::vector<double> grid,
                        ExtractionReport* report) {
    if (scales.interference_free()) {
        if (grid.empty()) grid = linear_grid(0.0, 1.0, kDefaultGridPoints);
        std::vector<double> bulk(grid.size(), 0.0);
        SpectralDensity density(std::move(grid), std::move(bulk), {{1.0, 1.0}},
                                [](double) { return 0.0; });
        if (report) *report = ExtractionReport{0, 0.0, density.normalization_deviation()};
        return density;
    }
    const auto bound = support_bound_M(scales);
    const double span = grid.empty() ? bound.second - bound.first : grid.back() - grid.front();
    const double eps = extraction_epsilon(span);
    std::vector<Atom> atoms;
    const double atom = std::max(0.0, 1.0 - scales.gamma.value());
    if (atom > 0.0) atoms.push_back({1.0, atom});
    const InverseEta inv(scales, InverseEta::Kind::M);
    const double edge = hard_edge_M(scales);
    const auto point = [inv, eps, edge](double x) {
        return x <= 0.0 ? 0.0 : stieltjes_density(inv, x, eps, 1.0, edge);
    };
    return extract(point, bound, std::move(grid), std::move(atoms), eps, report);
}

// --- K -----------------------------------------------------------------------------

Complex eta_inv_K(Complex x, const EffectiveScales& scales) {
    if (x == Complex(0.0)) throw DomainError("eta_inv_K: pole at x = 0");
    if (x == Complex(1.0 - scales.beta.value())) throw DomainError("eta_inv_K: pole at x = 1 - beta");
    return InverseEta(scales, InverseEta::Kind::K).principal(x);
}

double eta_K(double psi, const EffectiveScales& scales) {
    return solve_real(InverseEta(scales, InverseEta::Kind::K), psi);
}

Complex eta_K(Complex psi, const EffectiveScales& scales) {
    return solve_complex(InverseEta(scales, InverseEta::Kind::K), psi);
}

std::pair<double, double> support_bound_K(const EffectiveScales& scales) {
    const double rb = std::sqrt(scales.beta.value());
    const double n_lo = scales.qtilde * (1.0 - rb) * (1.0 - rb);
    const double n_hi = scales.qtilde * (1.0 + rb) * (1.0 + rb);
    const auto [m_lo, m_hi] = scales.interference_free() ? std::make_pair(1.0, 1.0)
                                                         : support_bound_M(scales);
    // M's atom at 1 (gamma < 1) can pair with the top of N's bulk.
    const double m_top = scales.gamma.value() < 1.0 ? 1.0 : m_hi;
    return {n_lo * m_lo, n_hi * m_top};
}

double density_K(double x, const EffectiveScales& scales, double eps) {
    if (x <= 0.0) return 0.0;
    return density_near_origin(InverseEta(scales, InverseEta::Kind::K), x, eps,
                               support_bound_K(scales).second);
}

SpectralDensity aepdf_K(const EffectiveScales& scales, std::vector<double> grid,
                        ExtractionReport* report) {
    const auto bound = support_bound_K(scales);
    const double span = grid.empty() ? bound.second - bound.first : grid.back() - grid.front();
    const double eps = extraction_epsilon(span);
    std::vector<Atom> atoms;
    if (mp_atom(scales.beta) > 0.0) atoms.push_back({0.0, mp_atom(scales.beta)});
    const InverseEta inv(scales, InverseEta::Kind::K);
    const double scale = bound.second;
    const auto point = [inv, eps, scale](double x) {
        return x <= 0.0 ? 0.0 : density_near_origin(inv, x, eps, scale);
    };
    return extract(point, bound, std::move(grid), std::move(atoms), eps, report);
}

}  // namespace freecap
