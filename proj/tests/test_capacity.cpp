#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "freecap/capacity.hpp"
#include "oracles.hpp"

using namespace freecap;
using doctest::Approx;

namespace {

EffectiveScales free_scales(double qt, double beta) {
    return EffectiveScales(qt, 0.0, AspectRatio(beta), AspectRatio(1.0));
}

// Interference-free capacity by direct quadrature of log(1 + qt x) against MP(beta).
double mp_capacity_oracle(double qt, double beta) {
    const double a = (1 - std::sqrt(beta)) * (1 - std::sqrt(beta));
    const double b = (1 + std::sqrt(beta)) * (1 + std::sqrt(beta));
    return oracle::edge_integral([&](double x) { return std::log1p(qt * x) * oracle::mp_bulk(x, beta); }, a, b);
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("point masses") {
    const SpectralDensity zero({0.0, 1.0}, {0.0, 0.0}, {{0.0, 1.0}});
    CHECK(capacity_from_density(zero).nats == 0.0);

    const SpectralDensity e({0.0, 1.0}, {0.0, 0.0}, {{std::numbers::e - 1.0, 1.0}});
    CHECK(capacity_from_density(e).nats == Approx(1.0).epsilon(1e-15));
    CHECK(capacity_from_density(e).bits == Approx(1.0 / std::numbers::ln2).epsilon(1e-15));
}

TEST_CASE("unit-scale square MP capacity") {
    const auto c = capacity_closed_form(free_scales(1.0, 1.0));
    CHECK(close(c.nats, oracle::square_mp_capacity(1.0), 1e-6));
    CHECK(close(c.nats, mp_capacity_oracle(1.0, 1.0), 1e-6));
    CHECK(c.bits == c.nats / std::numbers::ln2);
    REQUIRE(c.scales.has_value());
    CHECK(c.scales->qtilde == 1.0);
    CHECK(c.quadrature_abs_err < 1e-6);
}

TEST_CASE("interference-free capacity against quadrature") {
    for (double beta : {0.1, 0.5, 1.0, 2.0, 10.0})
        for (double qt : {0.1, 1.0, 10.0}) {
            const auto c = capacity_closed_form(free_scales(qt, beta));
            CHECK(close(c.nats, mp_capacity_oracle(qt, beta), 1e-5));
        }
    for (double qt : {0.5, 2.0, 20.0}) CHECK(close(capacity_closed_form(free_scales(qt, 1.0)).nats,
                                                   oracle::square_mp_capacity(qt), 1e-6));
}

TEST_CASE("the K law with no interference integrates to the MP capacity") {
    for (double beta : {0.5, 1.0, 3.0}) {
        const auto s = free_scales(2.0, beta);
        CHECK(close(capacity_from_density(aepdf_K(s)).nats, mp_capacity_oracle(2.0, beta), 1e-4));
    }
}

TEST_CASE("zero signal power") {
    const ChannelDims dims(4, 8, 8);
    PowerProfile pw;
    pw.mu = 0.0;
    pw.nu = 3.0;
    pw.q = 1.0;
    pw.p = 1.0;
    const auto c = capacity_closed_form(dims, pw);
    CHECK(c.nats == 0.0);
    CHECK(c.bits == 0.0);
}

TEST_CASE("dims and powers overload") {
    const ChannelDims dims(10, 20, 30);
    PowerProfile pw;
    pw.mu = 0.2;
    pw.nu = 0.1;
    pw.q = 0.5;
    pw.p = 2.0;
    const auto a = capacity_closed_form(dims, pw);
    const auto b = capacity_closed_form(EffectiveScales(1.0, 2.0, AspectRatio(2.0), AspectRatio(3.0)));
    CHECK(a.nats == Approx(b.nats).epsilon(1e-12));
}

TEST_CASE("capacity grows with signal power and falls with interference") {
    const AspectRatio beta(2.0), gamma(1.5);
    double prev = 0.0;
    for (double qt : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double c = capacity_closed_form(EffectiveScales(qt, 1.0, beta, gamma)).nats;
        CHECK(c >= prev);
        prev = c;
    }
    prev = capacity_closed_form(free_scales(3.0, 2.0)).nats;
    for (double pt : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const double c = capacity_closed_form(EffectiveScales(3.0, pt, beta, gamma)).nats;
        CHECK(c <= prev);
        prev = c;
    }
}

TEST_CASE("a point mass at zero contributes nothing") {
    const auto base = aepdf_N(free_scales(1.5, 1.0));
    const double c0 = capacity_from_density(base).nats;
    for (double a : {0.1, 0.4, 0.9}) {
        std::vector<double> bulk = base.bulk();
        for (double& v : bulk) v *= 1.0 - a;
        const SpectralDensity mixed(base.grid(), bulk, {{0.0, a}},
                                    [&base, a](double x) { return (1.0 - a) * base.bulk_at(x); });
        CHECK(capacity_from_density(mixed).nats == Approx((1.0 - a) * c0).epsilon(1e-10));
    }
}

TEST_CASE("sampled densities without an evaluator") {
    // Uniform on [0, 1]: integral of log(1 + x) is 2 ln 2 - 1.
    std::vector<double> grid, bulk;
    for (int i = 0; i <= 2000; ++i) {
        grid.push_back(i / 2000.0);
        bulk.push_back(1.0);
    }
    const SpectralDensity u(grid, bulk, {});
    CHECK(close(capacity_from_density(u).nats, 2.0 * std::numbers::ln2 - 1.0, 1e-7));
}

TEST_CASE("unnormalized input is rejected") {
    const SpectralDensity half({0.0, 1.0}, {0.0, 0.0}, {{0.5, 0.5}});
    CHECK_THROWS_AS(capacity_from_density(half), ValidationError);
    const SpectralDensity loose({0.0, 1.0}, {0.0, 0.0}, {{0.5, 0.995}});
    CHECK_NOTHROW(capacity_from_density(loose));
    CHECK_THROWS_AS(capacity_from_density(loose, 1e-3), ValidationError);
}

TEST_CASE("closed form agrees with simulation without interference") {
    const int k = 128;
    for (double qt : {1.0, 10.0}) {
        const auto model = model_for_scales(ones_profile(k, k), ones_profile(k, 1), qt, 0.0);
        const auto rep = empirical_capacity(model, 20, SeededStreams(42));
        const double cf = capacity_closed_form(model.scales()).nats;
        CHECK(std::abs(rep.capacity_nats_per_rx_dim - cf) / cf <= 0.03);
    }
}

TEST_CASE("closed form agrees with simulation for row-regular profiles at beta 5, gamma 10") {
    const auto model = model_for_scales(ones_profile(60, 300), ones_profile(60, 600), 10.0, 5.0);
    const auto rep = empirical_capacity(model, 100, SeededStreams(9));
    const double cf = capacity_closed_form(model.scales()).nats;
    CHECK(std::abs(rep.capacity_nats_per_rx_dim - cf) / cf <= 0.03);
    CHECK(rep.max_form_discrepancy <= 1e-9);
}

TEST_CASE("sweep over the whole array is interference free") {
    CellularConfig cfg;
    cfg.total_cells = 6;
    cfg.uts_per_cell = 3;
    const auto sweep = capacity_sweep(cfg, {6});
    REQUIRE(sweep.size() == 1u);
    CHECK(sweep[0].interference_free);
    CHECK(sweep[0].scales.ptilde == 0.0);
    CHECK(sweep[0].closed_form.nats > 0.0);
    CHECK_FALSE(sweep[0].monte_carlo.has_value());
    CHECK_THROWS(capacity_sweep(cfg, {7}));
}

TEST_CASE("sweep scales follow the profiles") {
    CellularConfig cfg;
    const auto sweep = capacity_sweep(cfg, {1, 2, 3});
    double prev = 0.0;
    for (const auto& pt : sweep) {
        const auto prof = cellular_linear_profile([&] {
            CellularConfig c = cfg;
            c.cluster_size = pt.cluster_size;
            return c;
        }());
        const double mu = link_budget(cfg).first;
        CHECK(pt.scales.qtilde == Approx(prof.dims.K * mu * profile_norm(prof.sigma)).epsilon(1e-12));
        CHECK(pt.scales.ptilde == Approx(prof.dims.K * mu * profile_norm(prof.sigma_i)).epsilon(1e-12));
        CHECK(pt.scales.beta.value() == 10.0);
        CHECK(pt.closed_form.nats >= prev);
        prev = pt.closed_form.nats;
    }
}

TEST_CASE("sweep with simulation and csv output") {
    CellularConfig cfg;
    cfg.total_cells = 8;
    cfg.uts_per_cell = 4;
    SweepOptions opt;
    opt.mc_iterations = 30;
    opt.seed = 5;
    const auto sweep = capacity_sweep(cfg, {1, 2, 8}, opt);
    for (const auto& pt : sweep) {
        REQUIRE(pt.monte_carlo.has_value());
        CHECK(pt.monte_carlo->iterations == 30);
        CHECK(pt.rel_err == pt.monte_carlo->capacity_rel_err);
        CHECK(pt.monte_carlo->closed_form_capacity.value() == pt.closed_form.nats);
    }
    const auto again = capacity_sweep(cfg, {1, 2, 8}, opt);
    for (std::size_t i = 0; i < sweep.size(); ++i)
        CHECK(again[i].monte_carlo->capacity_nats_per_rx_dim == sweep[i].monte_carlo->capacity_nats_per_rx_dim);

    std::ostringstream out;
    write_sweep_csv(out, sweep);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "cluster_size,capacity_nats,capacity_bits,mc_capacity,rel_err");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
    }
    CHECK(rows == 3);

    std::ostringstream bare;
    write_sweep_csv(bare, capacity_sweep(cfg, {1}));
    CHECK(bare.str().find("\n1,") != std::string::npos);
    CHECK(bare.str().substr(bare.str().size() - 3) == ",,\n");
}
