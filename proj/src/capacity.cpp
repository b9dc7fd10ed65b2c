#include "freecap/capacity.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "freecap/quadrature.hpp"

namespace freecap {

namespace {

// Edges of the region where the sampled bulk is positive, widened to the neighbouring
// zero samples so the true edge lies inside.
std::pair<double, double> sampled_support(const SpectralDensity& d) {
    const auto& g = d.grid();
    const auto& f = d.bulk();
    std::size_t first = 0;
    while (first < f.size() && !(f[first] > 0.0)) ++first;
    if (first == f.size()) return {g.front(), g.front()};
    std::size_t last = f.size() - 1;
    while (last > first && !(f[last] > 0.0)) --last;
    return {g[first > 0 ? first - 1 : 0], g[last + 1 < g.size() ? last + 1 : last]};
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return s;
}

}  // namespace

CapacityResult capacity_from_density(const SpectralDensity& density, double normalization_tol) {
    if (density.grid().front() < 0.0) throw ValidationError("capacity: support must be nonnegative");
    CapacityResult out;
    double atom_term = 0.0;
    for (const Atom& a : density.atoms()) atom_term += a.mass * std::log1p(a.location);

    if (density.has_evaluator()) {
        const auto [lo, hi] = sampled_support(density);
        if (hi > lo) {
            density.require_normalized(normalization_tol);
            const QuadratureResult cap =
                integrate([&](double x) { return std::log1p(x) * density.bulk_at(x); }, lo, hi, 1e-8);
            out.nats = cap.value + atom_term;
            out.quadrature_abs_err = cap.abs_error;
        } else {
            density.require_normalized(normalization_tol);
            out.nats = atom_term;
        }
    } else {
        density.require_normalized(normalization_tol);
        std::vector<double> y(density.grid().size());
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = std::log1p(density.grid()[i]) * density.bulk()[i];
        out.nats = trapezoid(density.grid(), y) + atom_term;
    }
    out.bits = out.nats / std::numbers::ln2;
    return out;
}

CapacityResult capacity_closed_form(const EffectiveScales& scales) {
    CapacityResult out = scales.interference_free() ? capacity_from_density(aepdf_N(scales))
                                                    : capacity_from_density(aepdf_K(scales));
    out.scales = scales;
    return out;
}

CapacityResult capacity_closed_form(const ChannelDims& dims, const PowerProfile& powers) {
    // No signal power: K is identically zero.
    if (powers.qtilde(dims) == 0.0) return {};
    return capacity_closed_form(effective_scales(dims, powers));
}

std::vector<SweepPoint> capacity_sweep(const CellularConfig& base, const std::vector<int>& cluster_sizes,
                                       const SweepOptions& options) {
    const SeededStreams streams(options.seed);
    std::vector<SweepPoint> sweep;
    for (int c : cluster_sizes) {
        CellularConfig cfg = base;
        cfg.cluster_size = c;
        const CellularProfiles prof = cellular_linear_profile(cfg);
        const auto [mu, nu] = link_budget(cfg);
        PowerProfile powers;
        powers.mu = mu;
        powers.nu = prof.dims.N > 0 ? nu : 0.0;
        powers.q = profile_norm_q(prof.sigma, prof.dims);
        powers.p = prof.dims.N > 0 ? profile_norm_p(prof.sigma_i, prof.dims) : 0.0;
        const EffectiveScales scales = effective_scales(prof.dims, powers);

        SweepPoint pt{c, scales, scales.interference_free(), capacity_closed_form(scales), std::nullopt, 0.0};
        if (options.mc_iterations > 0) {
            const ChannelModel model(prof.sigma, prof.sigma_i, powers);
            MCReport rep = empirical_capacity(model, options.mc_iterations,
                                              streams.derive(static_cast<std::uint64_t>(c)));
            rep.closed_form_capacity = pt.closed_form.nats;
            rep.capacity_rel_err = std::abs(rep.capacity_nats_per_rx_dim - pt.closed_form.nats) / pt.closed_form.nats;
            pt.rel_err = rep.capacity_rel_err;
            pt.monte_carlo = std::move(rep);
        }
        sweep.push_back(std::move(pt));
    }
    return sweep;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& sweep) {
    out << "cluster_size,capacity_nats,capacity_bits,mc_capacity,rel_err\n" << std::setprecision(17);
    for (const SweepPoint& p : sweep) {
        out << p.cluster_size << ',' << p.closed_form.nats << ',' << p.closed_form.bits << ',';
        if (p.monte_carlo) out << p.monte_carlo->capacity_nats_per_rx_dim << ',' << p.rel_err;
        else out << ',';
        out << '\n';
    }
}

}  // namespace freecap
