#pragma once

#include <array>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "pcw/dispersion.hpp"
#include "pcw/geometry.hpp"
#include "pcw/kernels.hpp"

namespace pcw {

// 2D TE (in-plane E, scalar H_z) plane-wave expansion of the W1 supercell.
// Lengths are in units of the lattice constant a, wavevectors in units of
// 2π/a, frequencies as ν = a/λ.

struct SupercellLattice {
    Eigen::Vector2d a1, a2; // real-space periods
    Eigen::Vector2d b1, b2; // reciprocal, a_i · b_j = δ_ij
    double area = 0.0;

    static SupercellLattice for_geometry(const WaveguideGeometry& g);
    std::vector<Eigen::Vector2d> hole_centers(const WaveguideGeometry& g) const;
};

struct PlaneWaveBasis {
    int reciprocal_cutoff = 0;
    std::vector<std::array<int, 2>> indices; // (m, n): G = m b1 + n b2
    std::vector<Eigen::Vector2d> vectors;

    std::size_t wave_count() const { return vectors.size(); }

    // Every supercell reciprocal vector with |G| <= cutoff · 2/sqrt(3), the
    // length of the primitive reciprocal vector of the underlying crystal.
    static PlaneWaveBasis build(const WaveguideGeometry& g, int reciprocal_cutoff);
};

inline constexpr int kDefaultCutoff = 5;

// Fourier coefficients ε_G over all index differences of a basis.
class DielectricTable {
public:
    DielectricTable(int max_m, int max_n, std::vector<std::complex<double>> values);

    std::complex<double> operator()(int dm, int dn) const
    {
        return values_[static_cast<std::size_t>((dm + max_m_) * (2 * max_n_ + 1) + (dn + max_n_))];
    }
    int max_m() const { return max_m_; }
    int max_n() const { return max_n_; }
    bool is_real(double tolerance = 1e-13) const;
    const std::vector<std::complex<double>>& values() const { return values_; }

private:
    int max_m_, max_n_;
    std::vector<std::complex<double>> values_;
};

DielectricTable dielectric_fourier(const WaveguideGeometry& g, const PlaneWaveBasis& basis,
                                   Execution exec = Execution::parallel);

struct ModeSet {
    std::vector<double> frequencies; // ascending
    Eigen::MatrixXcd vectors;        // H_z plane-wave coefficients, one column per band
};

// Holds the inverse-ε matrix for one geometry/basis; solving at different k is
// const and thread-safe.
class BandSolver {
public:
    BandSolver(const WaveguideGeometry& g, PlaneWaveBasis basis, Execution exec = Execution::parallel);

    const WaveguideGeometry& geometry() const { return geometry_; }
    const PlaneWaveBasis& basis() const { return basis_; }
    int default_band_count() const { return geometry_.supercell_rows + 8; }

    // Θ_{GG'} = (k+G)·(k+G') [ε^{-1}]_{GG'}; eigenvalues are ν².
    Eigen::MatrixXcd operator_matrix(double k) const;
    std::vector<double> frequencies(double k, int band_count = 0) const;
    ModeSet modes(double k, int band_count = 0) const;

    // Fraction of ∫|H_z|² lying in the strip |y| < half_width (units of a)
    // around the waveguide axis.
    double core_weight(const Eigen::VectorXcd& mode, double half_width) const;

private:
    template <class Scalar>
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> operator_upper(double k) const;
    // Empty when the returned eigenvectors fail the residual check.
    template <class Scalar>
    std::optional<ModeSet> solve(double k, int band_count, bool want_vectors) const;
    ModeSet solve_without_lapack(double k, int band_count) const;

    WaveguideGeometry geometry_;
    PlaneWaveBasis basis_;
    SupercellLattice lattice_;
    bool real_ = false;
    Eigen::MatrixXd inv_eps_real_;
    Eigen::MatrixXcd inv_eps_complex_;
};

std::vector<double> solve_bands(const WaveguideGeometry& g, const PlaneWaveBasis& basis, double k,
                                int band_count = 0);

struct BandStructure {
    WaveguideGeometry geometry;
    PlaneWaveBasis basis;
    std::vector<double> k_samples;      // units of 2π/a, ascending, within [0, 0.5]
    Eigen::MatrixXd frequencies;        // rows: k, columns: band
    std::vector<Eigen::MatrixXcd> modes; // per k; empty when computed without vectors
    int guided_band_index = -1;         // band index of the guided mode at k = 0.5
};

std::vector<double> uniform_k_samples(double k_min, double k_max, std::size_t count);

BandStructure compute_band_structure(const BandSolver& solver, const std::vector<double>& k_samples,
                                     int band_count = 0, bool with_modes = true,
                                     Execution exec = Execution::parallel);

struct GapWindow {
    double lower = 0.0; // top of the band below the gap
    double upper = 0.0; // bottom of the band above the gap
    int bands_below = 0;
};

// Largest gap between consecutive bands of the bulk crystal over k in [0, 0.5].
GapWindow bulk_gap_window(const WaveguideGeometry& g, const PlaneWaveBasis& basis, int k_count = 26,
                          Execution exec = Execution::parallel);

struct GuidedModeOptions {
    double core_half_width = 0.8660254037844386; // sqrt(3)/2: up to the first hole-row centres
    double min_core_weight = 0.5;
    int bulk_k_count = 26;
};

struct BandEdge {
    double frequency = 0.0;
    double wavelength_nm = 0.0;
    int band_index = -1;
    double core_weight = 0.0;
    GapWindow gap;
};

// Guided-mode frequency at k = 0.5 only (what calibration needs).
BandEdge find_band_edge(const WaveguideGeometry& g, const PlaneWaveBasis& basis,
                        const GuidedModeOptions& options = {});

// Picks the gap-window, core-localized band at k = 0.5 and follows it to
// smaller k by eigenvector overlap. Sets bands.guided_band_index.
DispersionCurve extract_guided_band(BandStructure& bands, const GuidedModeOptions& options = {});

struct CalibrationOptions {
    double index_low = 2.5;
    double index_high = 3.44;
    double tolerance_nm = 0.01;
    int max_iterations = 60;
    GuidedModeOptions guided;
};

struct CalibrationResult {
    double effective_index = 0.0;
    double band_edge_wavelength_nm = 0.0;
    double residual_nm = 0.0;
    int iterations = 0;
};

CalibrationResult calibrate_effective_index(const WaveguideGeometry& g, int reciprocal_cutoff, double target_nm,
                                            const CalibrationOptions& options = {});

} // namespace pcw
