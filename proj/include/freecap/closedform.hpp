#pragma once

// Closed forms for the eigenvalue laws of
//   N = mu H H^H,  Ntilde = nu H_I H_I^H,  M = (I + Ntilde)^{-1},  K = N M
// in the large-system limit with fixed aspect ratios beta = M/K, gamma = N/K and
// effective scales qtilde = K mu q, ptilde = K nu p.
//
// M's law is defined by its inverse eta transform; eta_M and eta_K are obtained by
// numerical inversion with square-root branch tracking, and densities by Stieltjes
// inversion just above the real axis.

#include <optional>
#include <string>
#include <vector>

#include "freecap/transforms.hpp"

namespace freecap {

/// Effective signal and interference scales of the channel.
/// ptilde == 0 means no interference; gamma is then irrelevant but must still be valid.
struct EffectiveScales {
    EffectiveScales(double qtilde, double ptilde, AspectRatio beta, AspectRatio gamma);

    double qtilde;
    double ptilde;
    AspectRatio beta;
    AspectRatio gamma;

    bool interference_free() const noexcept { return ptilde == 0.0; }
};

/// Per-grid-point diagnostics of a Stieltjes-inversion density.
struct ExtractionReport {
    std::size_t flagged_points = 0;
    double epsilon = 0.0;
    double normalization_deviation = 0.0;
};

// --- N and Ntilde: scaled Marcenko-Pastur ------------------------------------------

/// Eigenvalues of N are qtilde times MP(beta): bulk (1/q) f_MP(x/q, beta), atom (1-beta)^+ at 0.
/// An empty grid selects kDefaultGridPoints over the bulk support.
SpectralDensity aepdf_N(const EffectiveScales& scales, std::vector<double> grid = {});

/// Law of Ntilde, i.e. ptilde times MP(gamma). Requires ptilde > 0.
SpectralDensity aepdf_Ntilde(const EffectiveScales& scales, std::vector<double> grid = {});

double s_transform_N(double z, const EffectiveScales& scales);
double s_transform_Ntilde(double z, const EffectiveScales& scales);

// --- M ---------------------------------------------------------------------------

/// -(x-1) (sqrt(1 + (x-gamma)^2 p^2 + (2 gamma + 2x) p) + 1 + (gamma - x) p) / (2x),
/// principal square root.
Complex eta_inv_M(Complex x, const EffectiveScales& scales);

/// eta transform of M for real psi >= 0; value in (0, 1], eta_M(0) = 1.
double eta_M(double psi, const EffectiveScales& scales);

/// Analytic continuation of eta_M, obtained by continuation from psi = 0 along the ray to psi.
Complex eta_M(Complex psi, const EffectiveScales& scales);

/// Independent route: integral of (w+1)/(1+psi+w) against the law of Ntilde, plus its atom.
double eta_M_quadrature_oracle(double psi, const EffectiveScales& scales);

/// Residue bookkeeping for the unit-circle contour form of eta_M.
struct PoleResidue {
    std::string label;              ///< "zeta0" .. "zeta5"
    Complex pole;
    Complex formula_residue;        ///< closed-form residue assigned to this label
    Complex numeric_residue;        ///< residue of the contour integrand at `pole`
    bool inside_unit_disk = false;
    bool formula_matches_numeric = false;
    std::string formula_matches_pole;  ///< label whose numeric residue equals the formula one, if any
};

struct PoleResidueTable {
    std::vector<PoleResidue> entries;
    bool degenerate = false;  ///< confluent poles on the unit circle (gamma == 1)
};

PoleResidueTable poles_and_residues(double psi, const EffectiveScales& scales);

/// Three-way comparison of eta_M(psi): quadrature oracle, the residue sum
/// -(gamma/2)(rho0 + rho2 + rho5), the long closed form, and the sum of numerically computed
/// residues inside the unit disk. A formula is valid when within 1e-6 of the oracle.
struct ResidueAdjudication {
    double psi = 0.0;
    double oracle = 0.0;
    std::optional<double> residue_sum;
    std::optional<double> long_closed_form;
    std::optional<double> numeric_residue_sum;
    bool residue_sum_valid = false;
    bool long_closed_form_valid = false;
    bool numeric_residue_sum_valid = false;
    bool degenerate = false;
    /// long_closed_form / oracle; equals ptilde whenever the closed form is off by that factor.
    std::optional<double> long_form_to_oracle_ratio;
};

inline constexpr double kResidueValidationTol = 1e-6;

ResidueAdjudication eta_M_residue_form(double psi, const EffectiveScales& scales);

/// eta_M(0) of the long closed form, which simplifies to ptilde.
double long_closed_form_at_zero(const EffectiveScales& scales);

/// Law of M: atom (1-gamma)^+ at 1 plus the bulk on [1/(1+b~), 1/(1+a~)].
SpectralDensity aepdf_M(const EffectiveScales& scales, std::vector<double> grid = {},
                        ExtractionReport* report = nullptr);

// --- K -----------------------------------------------------------------------------

/// (1/qtilde) / (beta + x - 1) * eta_inv_M(x).
Complex eta_inv_K(Complex x, const EffectiveScales& scales);

double eta_K(double psi, const EffectiveScales& scales);
Complex eta_K(Complex psi, const EffectiveScales& scales);

/// Bulk density of K at a single point by Stieltjes inversion (no atom).
double density_K(double x, const EffectiveScales& scales, double eps);
double density_M(double x, const EffectiveScales& scales, double eps);

/// Interval guaranteed to contain the bulk of K: product of the N and M support bounds.
std::pair<double, double> support_bound_K(const EffectiveScales& scales);
std::pair<double, double> support_bound_M(const EffectiveScales& scales);

/// Law of K: atom (1-beta)^+ at 0 plus the Stieltjes-inverted bulk. Not renormalized;
/// the deviation lands in `report`. Throws ConvergenceError when more than 1% of the grid
/// points fail to invert.
SpectralDensity aepdf_K(const EffectiveScales& scales, std::vector<double> grid = {},
                        ExtractionReport* report = nullptr);

}  // namespace freecap
