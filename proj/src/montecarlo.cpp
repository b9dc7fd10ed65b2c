#include "freecap/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace freecap {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

ComplexMatrix hermitize(const ComplexMatrix& a) { return 0.5 * (a + a.adjoint()); }

double log_det_plus_identity(const std::vector<double>& eig) {
    double s = 0.0;
    for (double l : eig) s += std::log1p(std::max(l, 0.0));
    return s;
}

}  // namespace

Rng SeededStreams::stream(std::uint64_t index) const {
    std::seed_seq seq{static_cast<std::uint32_t>(master_), static_cast<std::uint32_t>(master_ >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

SeededStreams SeededStreams::derive(std::uint64_t tag) const {
    return SeededStreams(splitmix(master_ ^ splitmix(tag)));
}

ComplexMatrix sample_gaussian(int rows, int cols, Rng& rng) {
    if (rows < 0 || cols < 0) throw ValidationError("sample_gaussian: negative dimensions");
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    ComplexMatrix g(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) {
            const double re = normal(rng);
            g(i, j) = Complex(re, normal(rng));
        }
    return g;
}

ComplexMatrix sample_channel(const VarianceProfile& sigma, Rng& rng) {
    ComplexMatrix g = sample_gaussian(static_cast<int>(sigma.rows()), static_cast<int>(sigma.cols()), rng);
    return g.cwiseProduct(sigma.entries().cast<Complex>());
}

std::vector<double> hermitian_eigenvalues(const ComplexMatrix& a) {
    if (a.rows() != a.cols()) throw ValidationError("hermitian_eigenvalues: matrix is not square");
    if (a.size() == 0) return {};
    const double scale = a.norm();
    if ((a - a.adjoint()).norm() > 1e-12 * std::max(scale, 1e-300))
        throw ValidationError("hermitian_eigenvalues: matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(a, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("hermitian eigen-solver did not converge", Complex(0.0), scale);
    const Eigen::VectorXd& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

std::string to_string(TargetMatrix target) {
    switch (target) {
        case TargetMatrix::N: return "N";
        case TargetMatrix::M: return "M";
        case TargetMatrix::K: return "K";
    }
    return "?";
}

TargetMatrix parse_target(const std::string& text) {
    if (text == "N") return TargetMatrix::N;
    if (text == "M") return TargetMatrix::M;
    if (text == "K") return TargetMatrix::K;
    throw ValidationError("unknown target matrix '" + text + "' (expected N, M or K)");
}

ChannelModel::ChannelModel(VarianceProfile sigma_, VarianceProfile sigma_i_, PowerProfile powers_)
    : sigma(std::move(sigma_)),
      sigma_i(std::move(sigma_i_)),
      powers(powers_),
      dims(static_cast<int>(sigma.rows()), static_cast<int>(sigma.cols()),
           static_cast<int>(sigma_i.cols())) {
    if (sigma_i.cols() > 0 && sigma_i.rows() != sigma.rows())
        throw ValidationError("signal and interference profiles need the same number of rows");
    if (!(powers.mu >= 0.0) || !(powers.nu >= 0.0))
        throw ValidationError("powers mu and nu must be nonnegative");
    powers.q = profile_norm_q(sigma, dims);
    powers.p = dims.N > 0 ? profile_norm_p(sigma_i, dims) : 0.0;
    if (!(powers.q > 0.0)) throw ValidationError("signal profile is identically zero");
}

ChannelModel model_for_scales(VarianceProfile sigma, VarianceProfile sigma_i, double qtilde,
                              double ptilde) {
    const ChannelDims dims(static_cast<int>(sigma.rows()), static_cast<int>(sigma.cols()),
                           static_cast<int>(sigma_i.cols()));
    const double q = profile_norm_q(sigma, dims);
    const double p = dims.N > 0 ? profile_norm_p(sigma_i, dims) : 0.0;
    if (!(q > 0.0)) throw ValidationError("signal profile is identically zero");
    if (ptilde > 0.0 && !(p > 0.0))
        throw ValidationError("interference requested but the interference profile is empty");
    PowerProfile powers;
    powers.mu = qtilde / (dims.K * q);
    powers.nu = ptilde > 0.0 ? ptilde / (dims.K * p) : 0.0;
    return ChannelModel(std::move(sigma), std::move(sigma_i), powers);
}

Realization realize(const ChannelModel& model, Rng& rng) {
    const int k = model.dims.K;
    const ComplexMatrix h = sample_channel(model.sigma, rng);
    const ComplexMatrix n = hermitize(model.powers.mu * (h * h.adjoint()));

    Realization r;
    r.eig_n = hermitian_eigenvalues(n);

    const bool interfered = model.dims.N > 0 && model.powers.nu > 0.0;
    if (!interfered) {
        r.eig_m.assign(static_cast<std::size_t>(k), 1.0);
        r.eig_k = r.eig_n;
        r.capacity = log_det_plus_identity(r.eig_k) / k;
        r.capacity_alt = r.capacity;
        return r;
    }

    const ComplexMatrix hi = sample_channel(model.sigma_i, rng);
    const ComplexMatrix nt = hermitize(model.powers.nu * (hi * hi.adjoint()));
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(nt);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("eigen-decomposition of the interference term failed", Complex(0.0), 0.0);
    const Eigen::VectorXd lt = es.eigenvalues().cwiseMax(0.0);

    const Eigen::VectorXd m_eig = (1.0 + lt.array()).inverse();
    r.eig_m.assign(m_eig.data(), m_eig.data() + m_eig.size());
    std::sort(r.eig_m.begin(), r.eig_m.end());

    const ComplexMatrix& v = es.eigenvectors();
    const ComplexMatrix m_half = v * m_eig.cwiseSqrt().cast<Complex>().asDiagonal() * v.adjoint();
    r.eig_k = hermitian_eigenvalues(hermitize(m_half * n * m_half));

    r.capacity = log_det_plus_identity(r.eig_k) / k;
    // log det(I + N + Ntilde) - log det(I + Ntilde)
    const std::vector<double> joint = hermitian_eigenvalues(hermitize(n + nt));
    std::vector<double> lt_vec(lt.data(), lt.data() + lt.size());
    r.capacity_alt = (log_det_plus_identity(joint) - log_det_plus_identity(lt_vec)) / k;
    return r;
}

SpectralDensity EmpiricalHistogram::as_density() const {
    std::vector<double> centres(density.size());
    for (std::size_t b = 0; b < density.size(); ++b) centres[b] = 0.5 * (edges[b] + edges[b + 1]);
    return SpectralDensity(std::move(centres), density, atoms);
}

EmpiricalHistogram make_histogram(std::vector<double> samples, std::optional<double> atom_location,
                                  int bins) {
    if (samples.empty()) throw ValidationError("make_histogram: no samples");
    std::sort(samples.begin(), samples.end());
    const double total = static_cast<double>(samples.size());
    const double span_scale = std::max({1.0, std::abs(samples.front()), std::abs(samples.back())});

    std::vector<double> rest;
    std::size_t atom_count = 0;
    if (atom_location) {
        const double tol = 1e-9 * span_scale;
        for (double s : samples) {
            if (std::abs(s - *atom_location) <= tol) ++atom_count;
            else rest.push_back(s);
        }
    } else {
        rest = samples;
    }

    double lo = samples.front();
    double hi = samples.back();
    if (!(hi > lo)) {
        lo -= 0.5 * span_scale * 1e-6;
        hi += 0.5 * span_scale * 1e-6;
    }
    // Small outward pad so that every sample, and an atom at the boundary, lands inside.
    const double pad = 1e-12 * span_scale;
    lo -= pad;
    hi += pad;

    int nbins = bins;
    if (nbins <= 0) {
        const std::vector<double>& basis = rest.size() >= 4 ? rest : samples;
        const auto quantile = [&](double q) {
            const double pos = q * static_cast<double>(basis.size() - 1);
            const auto i = static_cast<std::size_t>(pos);
            const double t = pos - static_cast<double>(i);
            return i + 1 < basis.size() ? basis[i] * (1 - t) + basis[i + 1] * t : basis[i];
        };
        const double iqr = quantile(0.75) - quantile(0.25);
        const double h = 2.0 * iqr / std::cbrt(static_cast<double>(basis.size()));
        nbins = h > 0.0 ? static_cast<int>(std::ceil((hi - lo) / h)) : 1;
        nbins = std::clamp(nbins, 1, 10000);
    }

    EmpiricalHistogram hist;
    hist.edges.resize(static_cast<std::size_t>(nbins) + 1);
    for (int b = 0; b <= nbins; ++b) hist.edges[b] = lo + (hi - lo) * b / nbins;
    hist.edges.back() = hi;

    const auto bin_of = [&](double x) {
        auto b = static_cast<int>((x - lo) / (hi - lo) * nbins);
        return std::clamp(b, 0, nbins - 1);
    };
    const auto count_into = [&](const std::vector<double>& xs) {
        std::vector<double> counts(static_cast<std::size_t>(nbins), 0.0);
        for (double x : xs) counts[static_cast<std::size_t>(bin_of(x))] += 1.0;
        return counts;
    };

    std::vector<double> counts = count_into(samples);
    bool has_atom = false;
    if (atom_location && atom_count > 0 && nbins > 1) {
        const int b = bin_of(*atom_location);
        const int nb = b == 0 ? 1 : (b == nbins - 1 ? nbins - 2 : (counts[b - 1] > counts[b + 1] ? b - 1 : b + 1));
        has_atom = counts[static_cast<std::size_t>(b)] > 5.0 * counts[static_cast<std::size_t>(nb)];
    }
    if (has_atom) {
        counts = count_into(rest);
        hist.atoms.push_back(Atom{*atom_location, static_cast<double>(atom_count) / total});
    }

    hist.density.resize(counts.size());
    for (std::size_t b = 0; b < counts.size(); ++b)
        hist.density[b] = counts[b] / (total * (hist.edges[b + 1] - hist.edges[b]));
    return hist;
}

DistributionDistance compare_to_closed_form(const std::vector<double>& sorted_samples,
                                            const EmpiricalHistogram& hist,
                                            const SpectralDensity& closed_form) {
    if (sorted_samples.empty()) throw ValidationError("compare_to_closed_form: no samples");
    const double total = static_cast<double>(sorted_samples.size());
    const std::size_t nbins = hist.edges.size() - 1;

    // Empirical masses per bin including point masses, so atoms on both sides cancel.
    std::vector<double> emp(nbins, 0.0);
    {
        std::size_t b = 0;
        for (double x : sorted_samples) {
            while (b + 1 < nbins && x >= hist.edges[b + 1]) ++b;
            emp[b] += 1.0 / total;
        }
    }

    DistributionDistance d;
    const double f_lo = closed_form.cdf(std::nextafter(hist.edges.front(), -HUGE_VAL));
    double prev = f_lo;
    d.l1 = f_lo;  // closed-form mass below the histogram range
    for (std::size_t b = 0; b < nbins; ++b) {
        const double f = b + 1 == nbins ? closed_form.cdf(hist.edges[b + 1]) : closed_form.cdf(std::nextafter(hist.edges[b + 1], -HUGE_VAL));
        d.l1 += std::abs(emp[b] - (f - prev));
        prev = f;
    }
    d.l1 += std::max(0.0, closed_form.total_mass() - prev);

    // Samples within round-off of a point mass sit on it; at jumps the left limit of the
    // closed-form cdf is compared with the empirical cdf just below the sample.
    const double span_scale = std::max({1.0, std::abs(sorted_samples.front()), std::abs(sorted_samples.back())});
    for (std::size_t i = 0; i < sorted_samples.size(); ++i) {
        double x = sorted_samples[i];
        for (const Atom& a : hist.atoms)
            if (std::abs(x - a.location) <= 1e-9 * span_scale) x = a.location;
        const double f = closed_form.cdf(x);
        const double f_left = closed_form.cdf(std::nextafter(x, -HUGE_VAL));
        d.ks = std::max({d.ks, static_cast<double>(i + 1) / total - f,
                         f_left - static_cast<double>(i) / total});
    }
    return d;
}

EmpiricalRun simulate(const ChannelModel& model, int iterations, const SeededStreams& streams) {
    if (iterations < 1) throw ValidationError("simulate: iterations must be positive");
    EmpiricalRun run;
    run.iterations = iterations;
    run.seed = streams.master_seed();
    const auto reserve = static_cast<std::size_t>(iterations) * static_cast<std::size_t>(model.dims.K);
    run.eig_n.reserve(reserve);
    run.eig_m.reserve(reserve);
    run.eig_k.reserve(reserve);
    for (int it = 0; it < iterations; ++it) {
        Rng rng = streams.stream(static_cast<std::uint64_t>(it));
        const Realization r = realize(model, rng);
        run.eig_n.insert(run.eig_n.end(), r.eig_n.begin(), r.eig_n.end());
        run.eig_m.insert(run.eig_m.end(), r.eig_m.begin(), r.eig_m.end());
        run.eig_k.insert(run.eig_k.end(), r.eig_k.begin(), r.eig_k.end());
        run.capacity += r.capacity;
        run.capacity_alt += r.capacity_alt;
        const double size = std::max(std::abs(r.capacity), std::abs(r.capacity_alt));
        if (size > 0.0)
            run.max_form_discrepancy =
                std::max(run.max_form_discrepancy, std::abs(r.capacity - r.capacity_alt) / size);
    }
    run.capacity /= iterations;
    run.capacity_alt /= iterations;
    std::sort(run.eig_n.begin(), run.eig_n.end());
    std::sort(run.eig_m.begin(), run.eig_m.end());
    std::sort(run.eig_k.begin(), run.eig_k.end());
    return run;
}

const std::vector<double>& pooled(const EmpiricalRun& run, TargetMatrix target) {
    switch (target) {
        case TargetMatrix::N: return run.eig_n;
        case TargetMatrix::M: return run.eig_m;
        case TargetMatrix::K: break;
    }
    return run.eig_k;
}

EmpiricalHistogram empirical_density(const EmpiricalRun& run, TargetMatrix target, int bins) {
    const double atom_at = target == TargetMatrix::M ? 1.0 : 0.0;
    return make_histogram(pooled(run, target), atom_at, bins);
}

MCReport empirical_capacity(const ChannelModel& model, int iterations, const SeededStreams& streams) {
    const EmpiricalRun run = simulate(model, iterations, streams);
    MCReport rep;
    rep.target = TargetMatrix::K;
    rep.histogram = empirical_density(run, TargetMatrix::K);
    rep.capacity_nats_per_rx_dim = run.capacity;
    rep.capacity_alt_form = run.capacity_alt;
    rep.max_form_discrepancy = run.max_form_discrepancy;
    rep.iterations = run.iterations;
    rep.rng_seed = run.seed;
    return rep;
}

MCReport build_report(const EmpiricalRun& run, TargetMatrix target, const SpectralDensity& closed_form,
                      std::optional<double> closed_capacity, int bins) {
    MCReport rep;
    rep.target = target;
    rep.histogram = empirical_density(run, target, bins);
    rep.capacity_nats_per_rx_dim = run.capacity;
    rep.capacity_alt_form = run.capacity_alt;
    rep.max_form_discrepancy = run.max_form_discrepancy;
    rep.iterations = run.iterations;
    rep.rng_seed = run.seed;
    const DistributionDistance d = compare_to_closed_form(pooled(run, target), rep.histogram, closed_form);
    rep.l1_distance = d.l1;
    rep.ks_distance = d.ks;
    rep.closed_form_capacity = closed_capacity;
    if (closed_capacity)
        rep.capacity_rel_err = std::abs(run.capacity - *closed_capacity) / std::abs(*closed_capacity);
    return rep;
}

}  // namespace freecap
