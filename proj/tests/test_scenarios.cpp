#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "freecap/scenarios.hpp"

using namespace freecap;
using doctest::Approx;

namespace {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

Eigen::MatrixXd permuted(const Eigen::MatrixXd& m, std::mt19937_64& rng) {
    std::vector<int> rows(static_cast<std::size_t>(m.rows())), cols(static_cast<std::size_t>(m.cols()));
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::shuffle(cols.begin(), cols.end(), rng);
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out(i, j) = m(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    return out;
}

}  // namespace

TEST_CASE("variance profile validation") {
    Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 2);
    bad(1, 0) = -0.1;
    CHECK_THROWS_AS(VarianceProfile{bad}, ValidationError);
    bad(1, 0) = std::nan("");
    CHECK_THROWS_AS(VarianceProfile{bad}, ValidationError);
    CHECK_THROWS_AS(VarianceProfile{Eigen::MatrixXd(0, 3)}, ValidationError);
}

TEST_CASE("channel dims") {
    const ChannelDims d(4, 8, 2);
    CHECK(d.beta().value() == 2.0);
    CHECK(d.gamma().value() == 0.5);
    CHECK_THROWS(ChannelDims(0, 1, 1));
    CHECK_THROWS(ChannelDims(2, 0, 1));
    CHECK_THROWS(ChannelDims(2, 1, -1));
    CHECK_THROWS(ChannelDims(2, 1, 0).gamma());
}

TEST_CASE("ones profile") {
    const auto s = ones_profile(2, 3);
    CHECK(s.rows() == 2);
    CHECK(s.cols() == 3);
    CHECK(s.entries().minCoeff() == 1.0);
    CHECK(s.entries().maxCoeff() == 1.0);
    CHECK(profile_norm_q(ones_profile(4, 6), ChannelDims(4, 6, 1)) == 1.0);
    CHECK(row_regularity_deviation(s) == 0.0);
}

TEST_CASE("kron profile") {
    const std::vector<double> one{1.0};
    const auto a = kron_profile(one, 2);
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 1);
    CHECK(a.entries().isOnes());

    const std::vector<double> v{0.5, 0.25};
    const auto b = kron_profile(v, 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(b(i, 0) == 0.5);
        CHECK(b(i, 1) == 0.25);
    }
    CHECK(profile_norm(b) == Approx((0.25 + 0.0625) / 2.0).epsilon(1e-15));
    CHECK(row_regularity_deviation(b) == 0.0);
    CHECK_THROWS_AS(kron_profile(std::vector<double>{}, 2), ValidationError);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> w(static_cast<std::size_t>(1 + trial % 7));
        double sq = 0.0;
        for (double& x : w) {
            x = u(rng);
            sq += x * x;
        }
        const auto k = kron_profile(w, 1 + trial % 5);
        CHECK(profile_norm(k) == Approx(sq / static_cast<double>(w.size())).epsilon(1e-13));
        CHECK(row_regularity_deviation(k) == 0.0);
    }
}

TEST_CASE("diminishing profile") {
    const auto s = diminishing_profile(5, 5);
    CHECK(s(0, 0) == 1.0);
    CHECK(s(0, 3) == Approx(0.5).epsilon(1e-15));
    CHECK(s(2, 0) == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(s(2, 0) == s(0, 2));
    CHECK(profile_norm_q(diminishing_profile(2, 2), ChannelDims(2, 2, 1)) == Approx(0.75).epsilon(1e-15));
    // Edge rows see a different entry distribution from the centre rows.
    CHECK(row_regularity_deviation(diminishing_profile(60, 60)) > 0.1);
}

TEST_CASE("row regularity deviation") {
    Eigen::MatrixXd m(2, 2);
    m << 1, 0, 0, 0;
    CHECK(row_regularity_deviation(VarianceProfile(m), {0.5}) == Approx(0.5));

    // A circulant profile has identical row distributions.
    Eigen::MatrixXd c(40, 40);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j) {
            const int d = std::min(std::abs(i - j), 40 - std::abs(i - j));
            c(i, j) = 1.0 / std::sqrt(1.0 + d);
        }
    CHECK(row_regularity_deviation(VarianceProfile(c)) == 0.0);
}

TEST_CASE("norms are permutation invariant") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd m(5, 7);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
        const double q = profile_norm(VarianceProfile(m));
        CHECK(profile_norm(VarianceProfile(permuted(m, rng))) == Approx(q).epsilon(1e-14));
    }
    CHECK(profile_norm(VarianceProfile(Eigen::MatrixXd::Constant(3, 9, 0.5))) == 0.25);
}

TEST_CASE("norm shape checks") {
    const auto s = ones_profile(3, 4);
    CHECK_THROWS_AS(profile_norm_q(s, ChannelDims(3, 5, 1)), ValidationError);
    CHECK_THROWS_AS(profile_norm_p(s, ChannelDims(3, 1, 5)), ValidationError);
    CHECK(profile_norm_p(s, ChannelDims(3, 1, 4)) == 1.0);
}

TEST_CASE("path loss amplitude") {
    const CellularConfig cfg;
    const double g0 = std::sqrt(db_to_linear(-34.5));
    CHECK(pathloss_amplitude(cfg, 0.0) == Approx(g0).epsilon(1e-14));
    CHECK(pathloss_amplitude(cfg, 1.0) == Approx(g0 * std::pow(2.0, -1.75)).epsilon(1e-14));
    CHECK(pathloss_amplitude(cfg, 100.0) < pathloss_amplitude(cfg, 10.0));
}

TEST_CASE("link budget") {
    const CellularConfig cfg;
    const auto [mu, nu] = link_budget(cfg);
    // 10 log10(200 mW / 1 mW) minus the noise floor in dBm.
    const double tx_dbm = 10.0 * std::log10(200.0);
    const double noise_dbm = -169.0 + 10.0 * std::log10(5e6);
    CHECK(mu == Approx(db_to_linear(tx_dbm - noise_dbm)).epsilon(1e-12));
    CHECK(mu == Approx(3.17e12).epsilon(5e-3));
    CHECK(mu == nu);

    CellularConfig off = cfg;
    off.ut_tx_power_w = 0.0;
    CHECK(link_budget(off).first == 0.0);
}

TEST_CASE("cellular profile single cell") {
    CellularConfig cfg;
    cfg.total_cells = 1;
    cfg.cluster_size = 1;
    cfg.uts_per_cell = 1;
    const auto cp = cellular_linear_profile(cfg);
    CHECK(cp.sigma.rows() == 1);
    CHECK(cp.sigma.cols() == 1);
    CHECK(cp.sigma_i.cols() == 0);
    CHECK(cp.dims.N == 0);
    // The single terminal sits on the base station.
    CHECK(cp.sigma(0, 0) == Approx(std::sqrt(db_to_linear(-34.5))).epsilon(1e-14));
}

TEST_CASE("cellular profile dimensions and entries") {
    CellularConfig cfg;
    const double g0 = std::sqrt(db_to_linear(-cfg.ref_pathloss_db));
    for (int cluster : {1, 2, 3, 7, 10, 50}) {
        cfg.cluster_size = cluster;
        const auto cp = cellular_linear_profile(cfg);
        CHECK(cp.dims.K == cluster);
        CHECK(cp.dims.M == cluster * cfg.uts_per_cell);
        CHECK(cp.dims.N == (cfg.total_cells - cluster) * cfg.uts_per_cell);
        CHECK(cp.sigma.rows() == cluster);
        CHECK(cp.sigma.cols() == cp.dims.M);
        CHECK(cp.sigma_i.cols() == cp.dims.N);
        CHECK(cp.sigma.entries().minCoeff() > 0.0);
        CHECK(cp.sigma.entries().maxCoeff() <= g0);
        if (cp.dims.N > 0) {
            CHECK(cp.sigma_i.entries().minCoeff() > 0.0);
            CHECK(cp.sigma_i.entries().maxCoeff() <= g0);
        }
    }
    cfg.cluster_size = 51;
    CHECK_THROWS_AS(cellular_linear_profile(cfg), ValidationError);
}

TEST_CASE("cellular profile geometry") {
    CellularConfig cfg;
    cfg.total_cells = 3;
    cfg.cluster_size = 1;
    cfg.uts_per_cell = 2;
    const auto cp = cellular_linear_profile(cfg);
    // Terminals at R/2 and 3R/2 within each cell; the base station sits at the cell centre.
    const double r = cfg.cell_radius_m;
    CHECK(cp.sigma(0, 0) == Approx(pathloss_amplitude(cfg, r / 2)).epsilon(1e-14));
    CHECK(cp.sigma(0, 1) == Approx(pathloss_amplitude(cfg, r / 2)).epsilon(1e-14));
    std::vector<double> got(cp.sigma_i.entries().data(), cp.sigma_i.entries().data() + 4);
    std::sort(got.begin(), got.end());
    CHECK(got[0] == Approx(pathloss_amplitude(cfg, 2.5 * r)).epsilon(1e-14));
    CHECK(got[1] == Approx(pathloss_amplitude(cfg, 2.5 * r)).epsilon(1e-14));
    CHECK(got[2] == Approx(pathloss_amplitude(cfg, 1.5 * r)).epsilon(1e-14));
    CHECK(got[3] == Approx(pathloss_amplitude(cfg, 1.5 * r)).epsilon(1e-14));
}

TEST_CASE("centred cluster becomes more row regular as the array grows") {
    CellularConfig cfg;
    cfg.cluster_size = 5;
    double prev = 2.0;
    for (int cells : {10, 30, 50}) {
        cfg.total_cells = cells;
        const double dev = row_regularity_deviation(cellular_linear_profile(cfg).sigma_i);
        CHECK(dev <= prev);
        prev = dev;
    }
}

TEST_CASE("effective scales") {
    const ChannelDims dims(4, 8, 12);
    PowerProfile pw;
    pw.mu = 2.0;
    pw.nu = 0.5;
    pw.q = 0.25;
    pw.p = 3.0;
    const auto s = effective_scales(dims, pw);
    CHECK(s.qtilde == Approx(4 * 2.0 * 0.25));
    CHECK(s.ptilde == Approx(4 * 0.5 * 3.0));
    CHECK(s.beta.value() == 2.0);
    CHECK(s.gamma.value() == 3.0);

    pw.nu = 0.0;
    const auto free = effective_scales(dims, pw);
    CHECK(free.interference_free());
    CHECK(free.gamma.value() == 1.0);
    const auto none = effective_scales(ChannelDims(4, 8, 0), pw);
    CHECK(none.interference_free());
}

TEST_CASE("config parsing") {
    std::istringstream in(
        "# comment line\n"
        "cell_radius_m = 500\n"
        "cluster_size = 4   # trailing\n"
        "\n"
        "noise_density_dbm_hz=-170.5\n");
    const auto cfg = parse_cellular_config(in);
    CHECK(cfg.cell_radius_m == 500.0);
    CHECK(cfg.cluster_size == 4);
    CHECK(cfg.noise_density_dbm_hz == -170.5);
    CHECK(cfg.total_cells == 50);
    CHECK(cfg.uts_per_cell == 10);

    std::istringstream unknown("cell_radius = 500\n");
    CHECK_THROWS_AS(parse_cellular_config(unknown), ValidationError);
    std::istringstream malformed("cluster_size = four\n");
    CHECK_THROWS_AS(parse_cellular_config(malformed), ValidationError);
    std::istringstream too_big("cluster_size = 60\n");
    CHECK_THROWS_AS(parse_cellular_config(too_big), ValidationError);
    std::istringstream negative("cell_radius_m = -1\n");
    CHECK_THROWS_AS(parse_cellular_config(negative), ValidationError);
    CHECK_THROWS(load_cellular_config("/nonexistent/path.cfg"));
}

TEST_CASE("config round trip") {
    CellularConfig cfg;
    cfg.cell_radius_m = 750.25;
    cfg.pathloss_exponent = 3.7;
    cfg.cluster_size = 6;
    cfg.bandwidth_hz = 1.25e6;
    std::stringstream ss;
    write_cellular_config(ss, cfg);
    const auto back = parse_cellular_config(ss);
    CHECK(back.cell_radius_m == cfg.cell_radius_m);
    CHECK(back.pathloss_exponent == cfg.pathloss_exponent);
    CHECK(back.cluster_size == cfg.cluster_size);
    CHECK(back.bandwidth_hz == cfg.bandwidth_hz);
    CHECK(back.ref_pathloss_db == cfg.ref_pathloss_db);
}

TEST_CASE("profile csv round trip") {
    const auto s = cellular_linear_profile(CellularConfig{}).sigma;
    std::stringstream ss;
    write_profile_csv(ss, s);
    const auto back = read_profile_csv(ss);
    CHECK(back.rows() == s.rows());
    CHECK(back.cols() == s.cols());
    CHECK(back.entries() == s.entries());

    std::istringstream bad("rows=2\n1,2\n");
    CHECK_THROWS_AS(read_profile_csv(bad), ValidationError);
    std::istringstream short_rows("# rows=2 cols=2\n1,2\n");
    CHECK_THROWS_AS(read_profile_csv(short_rows), ValidationError);
}
