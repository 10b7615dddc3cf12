#include "pcw/photonic_bands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <lapacke.h>

#include "pcw/error.hpp"

namespace pcw {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

[[noreturn]] void eigensolver_failure(double k, std::size_t waves, lapack_int info)
{
    std::ostringstream os;
    os << "band solver: eigensolver failed at k = " << k << " with " << waves << " plane waves (LAPACK info "
       << info << ")";
    throw Error(ErrorKind::NonConvergence, os.str());
}

// Some OpenBLAS builds return wrong dgemm results on AVX-512 cores, which
// corrupts eigenvectors while leaving eigenvalues intact. Once a residual
// check fails for a LAPACK routine it is skipped for the rest of the process.
std::atomic<bool> real_lapack_usable{true};
std::atomic<bool> complex_lapack_usable{true};

template <class Matrix>
bool eigenpairs_accurate(const Matrix& upper, const std::vector<double>& w, const Matrix& z)
{
    const double scale = std::max(1.0, upper.template triangularView<Eigen::Upper>().toDenseMatrix().norm());
    Matrix az = upper.template selfadjointView<Eigen::Upper>() * z;
    for (Eigen::Index b = 0; b < z.cols(); ++b) {
        double residual = (az.col(b) - w[static_cast<std::size_t>(b)] * z.col(b)).norm();
        if (!(residual <= 1e-9 * scale) || !(std::abs(z.col(b).norm() - 1.0) <= 1e-9))
            return false;
    }
    return true;
}

} // namespace

SupercellLattice SupercellLattice::for_geometry(const WaveguideGeometry& g)
{
    const double n = g.supercell_rows;
    SupercellLattice l;
    l.a1 = {1.0, 0.0};
    l.a2 = {0.5 * n, 0.5 * kSqrt3 * n};
    l.b1 = {1.0, -1.0 / kSqrt3};
    l.b2 = {0.0, 2.0 / (kSqrt3 * n)};
    l.area = 0.5 * kSqrt3 * n;
    return l;
}

std::vector<Eigen::Vector2d> SupercellLattice::hole_centers(const WaveguideGeometry& g) const
{
    std::vector<Eigen::Vector2d> centers;
    const int half = (g.supercell_rows - 1) / 2;
    for (int row = -half; row <= half; ++row) {
        if (row == 0 && g.remove_center_row)
            continue;
        centers.emplace_back(0.5 * row, 0.5 * kSqrt3 * row);
    }
    return centers;
}

PlaneWaveBasis PlaneWaveBasis::build(const WaveguideGeometry& g, int reciprocal_cutoff)
{
    require(reciprocal_cutoff >= 3, ErrorKind::InvalidArgument, "plane-wave basis: cutoff must be >= 3");
    g.validate();
    const auto lattice = SupercellLattice::for_geometry(g);
    const double radius = reciprocal_cutoff * 2.0 / kSqrt3;
    const int rows = g.supercell_rows;

    struct Entry {
        double norm;
        int m, n;
    };
    std::vector<Entry> entries;
    const int m_max = static_cast<int>(std::floor(radius));
    for (int m = -m_max; m <= m_max; ++m) {
        // G_y = (2n - m N) / (N sqrt3)
        double y_max = std::sqrt(std::max(0.0, radius * radius - double(m) * m));
        int n_lo = static_cast<int>(std::floor((m * rows - rows * kSqrt3 * y_max) / 2.0)) - 1;
        int n_hi = static_cast<int>(std::ceil((m * rows + rows * kSqrt3 * y_max) / 2.0)) + 1;
        for (int n = n_lo; n <= n_hi; ++n) {
            Eigen::Vector2d G = m * lattice.b1 + n * lattice.b2;
            double norm = G.norm();
            if (norm <= radius + 1e-12)
                entries.push_back({norm, m, n});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.norm != b.norm)
            return a.norm < b.norm;
        if (a.m != b.m)
            return a.m < b.m;
        return a.n < b.n;
    });
    PlaneWaveBasis basis;
    basis.reciprocal_cutoff = reciprocal_cutoff;
    for (const auto& e : entries) {
        basis.indices.push_back({e.m, e.n});
        basis.vectors.push_back(e.m * lattice.b1 + e.n * lattice.b2);
    }
    return basis;
}

DielectricTable::DielectricTable(int max_m, int max_n, std::vector<std::complex<double>> values)
    : max_m_(max_m), max_n_(max_n), values_(std::move(values))
{
}

bool DielectricTable::is_real(double tolerance) const
{
    double scale = 0.0, imag = 0.0;
    for (const auto& v : values_) {
        scale = std::max(scale, std::abs(v));
        imag = std::max(imag, std::abs(v.imag()));
    }
    return imag <= tolerance * scale;
}

DielectricTable dielectric_fourier(const WaveguideGeometry& g, const PlaneWaveBasis& basis, Execution exec)
{
    g.validate();
    int max_m = 0, max_n = 0;
    for (const auto& idx : basis.indices) {
        max_m = std::max(max_m, std::abs(idx[0]));
        max_n = std::max(max_n, std::abs(idx[1]));
    }
    max_m *= 2;
    max_n *= 2;
    const auto lattice = SupercellLattice::for_geometry(g);
    const auto centers = lattice.hole_centers(g);

    std::vector<Eigen::Vector2d> gs;
    gs.reserve(static_cast<std::size_t>((2 * max_m + 1) * (2 * max_n + 1)));
    for (int dm = -max_m; dm <= max_m; ++dm)
        for (int dn = -max_n; dn <= max_n; ++dn)
            gs.push_back(dm * lattice.b1 + dn * lattice.b2);

    kernels::HoleLattice holes{centers, g.hole_radius_ratio, lattice.area,
                               g.effective_index * g.effective_index, 1.0};
    std::vector<std::complex<double>> values(gs.size());
    if (exec == Execution::parallel)
        kernels::omp::dielectric_coefficients(gs, holes, values);
    else
        kernels::serial::dielectric_coefficients(gs, holes, values);
    return DielectricTable(max_m, max_n, std::move(values));
}

BandSolver::BandSolver(const WaveguideGeometry& g, PlaneWaveBasis basis, Execution exec)
    : geometry_(g), basis_(std::move(basis)), lattice_(SupercellLattice::for_geometry(g))
{
    g.validate();
    const auto table = dielectric_fourier(g, basis_, exec);
    const auto n = static_cast<Eigen::Index>(basis_.wave_count());
    Eigen::MatrixXcd eps(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            eps(i, j) = table(basis_.indices[i][0] - basis_.indices[j][0], basis_.indices[i][1] - basis_.indices[j][1]);

    // Ho rule: invert the ε Toeplitz matrix rather than Fourier-transforming 1/ε.
    real_ = table.is_real();
    if (real_) {
        Eigen::MatrixXd eps_r = eps.real();
        Eigen::LLT<Eigen::MatrixXd> llt(eps_r);
        require(llt.info() == Eigen::Success, ErrorKind::NonConvergence, "band solver: ε matrix not positive definite");
        inv_eps_real_ = llt.solve(Eigen::MatrixXd::Identity(n, n));
    } else {
        Eigen::LLT<Eigen::MatrixXcd> llt(eps);
        require(llt.info() == Eigen::Success, ErrorKind::NonConvergence, "band solver: ε matrix not positive definite");
        inv_eps_complex_ = llt.solve(Eigen::MatrixXcd::Identity(n, n));
    }
}

Eigen::MatrixXcd BandSolver::operator_matrix(double k) const
{
    const auto n = static_cast<Eigen::Index>(basis_.wave_count());
    Eigen::MatrixXcd theta(n, n);
    const Eigen::Vector2d kv(k, 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Vector2d kj = kv + basis_.vectors[j];
        for (Eigen::Index i = 0; i < n; ++i) {
            double dot = (kv + basis_.vectors[i]).dot(kj);
            theta(i, j) = dot * (real_ ? std::complex<double>(inv_eps_real_(i, j), 0.0) : inv_eps_complex_(i, j));
        }
    }
    return theta;
}

template <class Scalar>
std::optional<ModeSet> BandSolver::solve(double k, int band_count, bool want_vectors) const
{
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const auto n = static_cast<lapack_int>(basis_.wave_count());
    const lapack_int bands = std::min<lapack_int>(band_count > 0 ? band_count : default_band_count(), n);
    Matrix a = operator_upper<Scalar>(k);
    Matrix original;
    if (want_vectors)
        original = a;

    std::vector<double> w(static_cast<std::size_t>(n));
    Matrix z(n, want_vectors ? bands : 1);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(bands));
    lapack_int found = 0;
    const char jobz = want_vectors ? 'V' : 'N';
    lapack_int info;
    if constexpr (std::is_same_v<Scalar, double>)
        info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, jobz, 'I', 'U', n, a.data(), n, 0.0, 0.0, 1, bands, 0.0, &found,
                              w.data(), z.data(), n, support.data());
    else
        info = LAPACKE_zheevr(LAPACK_COL_MAJOR, jobz, 'I', 'U', n, reinterpret_cast<lapack_complex_double*>(a.data()),
                              n, 0.0, 0.0, 1, bands, 0.0, &found, w.data(),
                              reinterpret_cast<lapack_complex_double*>(z.data()), n, support.data());
    if (info != 0 || found != bands)
        eigensolver_failure(k, basis_.wave_count(), info);
    if (want_vectors && !eigenpairs_accurate(original, w, z))
        return std::nullopt;

    ModeSet out;
    out.frequencies.resize(static_cast<std::size_t>(bands));
    for (lapack_int b = 0; b < bands; ++b)
        out.frequencies[static_cast<std::size_t>(b)] = std::sqrt(std::max(0.0, w[static_cast<std::size_t>(b)]));
    if (want_vectors)
        out.vectors = z.leftCols(bands).template cast<std::complex<double>>();
    return out;
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> BandSolver::operator_upper(double k) const
{
    const auto n = static_cast<Eigen::Index>(basis_.wave_count());
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
    const Eigen::Vector2d kv(k, 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Vector2d kj = kv + basis_.vectors[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i <= j; ++i) {
            double dot = (kv + basis_.vectors[static_cast<std::size_t>(i)]).dot(kj);
            if constexpr (std::is_same_v<Scalar, double>)
                a(i, j) = dot * inv_eps_real_(i, j);
            else
                a(i, j) = dot * (real_ ? std::complex<double>(inv_eps_real_(i, j), 0.0) : inv_eps_complex_(i, j));
        }
    }
    return a;
}

ModeSet BandSolver::solve_without_lapack(double k, int band_count) const
{
    const auto n = static_cast<Eigen::Index>(basis_.wave_count());
    const Eigen::Index bands = std::min<Eigen::Index>(band_count > 0 ? band_count : default_band_count(), n);
    Eigen::MatrixXcd a = operator_upper<std::complex<double>>(k);
    Eigen::MatrixXcd full = a.selfadjointView<Eigen::Upper>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(full);
    if (es.info() != Eigen::Success)
        eigensolver_failure(k, basis_.wave_count(), -1);
    ModeSet out;
    for (Eigen::Index b = 0; b < bands; ++b)
        out.frequencies.push_back(std::sqrt(std::max(0.0, es.eigenvalues()[b])));
    out.vectors = es.eigenvectors().leftCols(bands);
    return out;
}

std::vector<double> BandSolver::frequencies(double k, int band_count) const
{
    require(k >= 0.0 && k <= 0.5, ErrorKind::OutOfDomain, "band solver: k must lie in [0, 0.5]");
    return real_ ? solve<double>(k, band_count, false)->frequencies
                 : solve<std::complex<double>>(k, band_count, false)->frequencies;
}

ModeSet BandSolver::modes(double k, int band_count) const
{
    require(k >= 0.0 && k <= 0.5, ErrorKind::OutOfDomain, "band solver: k must lie in [0, 0.5]");
    if (real_ && real_lapack_usable.load()) {
        if (auto set = solve<double>(k, band_count, true))
            return std::move(*set);
        real_lapack_usable.store(false);
    }
    if (complex_lapack_usable.load()) {
        if (auto set = solve<std::complex<double>>(k, band_count, true))
            return std::move(*set);
        complex_lapack_usable.store(false);
    }
    return solve_without_lapack(k, band_count);
}

double BandSolver::core_weight(const Eigen::VectorXcd& mode, double half_width) const
{
    // Strip |y| < w is |t| < tau in the a2 fractional coordinate; only pairs
    // with equal m survive the integral over the a1 direction.
    const double tau = 2.0 * half_width / (kSqrt3 * geometry_.supercell_rows);
    std::map<int, std::vector<std::size_t>> by_m;
    for (std::size_t i = 0; i < basis_.indices.size(); ++i)
        by_m[basis_.indices[i][0]].push_back(i);
    auto strip = [tau](int d) {
        if (d == 0)
            return 2.0 * tau;
        return std::sin(2.0 * std::numbers::pi * d * tau) / (std::numbers::pi * d);
    };
    double inside = 0.0;
    for (const auto& [m, members] : by_m) {
        for (auto i : members)
            for (auto j : members)
                inside += (std::conj(mode[static_cast<Eigen::Index>(i)]) * mode[static_cast<Eigen::Index>(j)]).real()
                          * strip(basis_.indices[j][1] - basis_.indices[i][1]);
    }
    return inside / mode.squaredNorm();
}

std::vector<double> solve_bands(const WaveguideGeometry& g, const PlaneWaveBasis& basis, double k, int band_count)
{
    return BandSolver(g, basis).frequencies(k, band_count);
}

std::vector<double> uniform_k_samples(double k_min, double k_max, std::size_t count)
{
    require(count >= 2 && k_max > k_min, ErrorKind::InvalidArgument, "k samples: need count >= 2 and k_max > k_min");
    std::vector<double> ks(count);
    for (std::size_t i = 0; i < count; ++i)
        ks[i] = k_min + (k_max - k_min) * static_cast<double>(i) / static_cast<double>(count - 1);
    ks.back() = k_max;
    return ks;
}

BandStructure compute_band_structure(const BandSolver& solver, const std::vector<double>& k_samples, int band_count,
                                     bool with_modes, Execution exec)
{
    require(!k_samples.empty(), ErrorKind::InvalidArgument, "band structure: no k samples");
    for (std::size_t i = 1; i < k_samples.size(); ++i)
        require(k_samples[i] > k_samples[i - 1], ErrorKind::InvalidArgument, "band structure: k must be ascending");

    const int bands = std::min<int>(band_count > 0 ? band_count : solver.default_band_count(),
                                    static_cast<int>(solver.basis().wave_count()));
    BandStructure out;
    out.geometry = solver.geometry();
    out.basis = solver.basis();
    out.k_samples = k_samples;
    out.frequencies.resize(static_cast<Eigen::Index>(k_samples.size()), bands);
    if (with_modes)
        out.modes.resize(k_samples.size());

    auto one = [&](std::size_t i) {
        if (with_modes) {
            auto set = solver.modes(k_samples[i], bands);
            for (int b = 0; b < bands; ++b)
                out.frequencies(static_cast<Eigen::Index>(i), b) = set.frequencies[static_cast<std::size_t>(b)];
            out.modes[i] = std::move(set.vectors);
        } else {
            auto f = solver.frequencies(k_samples[i], bands);
            for (int b = 0; b < bands; ++b)
                out.frequencies(static_cast<Eigen::Index>(i), b) = f[static_cast<std::size_t>(b)];
        }
    };

    const auto count = static_cast<std::ptrdiff_t>(k_samples.size());
    if (exec == Execution::parallel) {
        // Exceptions must not escape an OpenMP region; rethrow the first one after.
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            try {
                one(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical
                if (!failure)
                    failure = std::current_exception();
            }
        }
        if (failure)
            std::rethrow_exception(failure);
    } else {
        for (std::ptrdiff_t i = 0; i < count; ++i)
            one(static_cast<std::size_t>(i));
    }
    return out;
}

GapWindow bulk_gap_window(const WaveguideGeometry& g, const PlaneWaveBasis& basis, int k_count, Execution exec)
{
    BandSolver bulk(g.bulk(), basis, exec);
    const int bands = std::min<int>(2 * g.supercell_rows + 4, static_cast<int>(basis.wave_count()));
    auto structure = compute_band_structure(bulk, uniform_k_samples(0.0, 0.5, static_cast<std::size_t>(k_count)),
                                            bands, false, exec);
    GapWindow best;
    double best_width = -1.0;
    for (int b = 0; b + 1 < bands; ++b) {
        double top = structure.frequencies.col(b).maxCoeff();
        double bottom = structure.frequencies.col(b + 1).minCoeff();
        if (bottom - top > best_width) {
            best_width = bottom - top;
            best = {top, bottom, b + 1};
        }
    }
    require(best_width > 0.0, ErrorKind::NoGuidedMode, "bulk crystal has no band gap; no guided mode");
    return best;
}

namespace {

struct EdgeChoice {
    int band = -1;
    double weight = 0.0;
};

EdgeChoice pick_edge_band(const BandSolver& solver, const ModeSet& edge_modes, const GapWindow& gap,
                          const GuidedModeOptions& options)
{
    for (std::size_t b = 0; b < edge_modes.frequencies.size(); ++b) {
        double nu = edge_modes.frequencies[b];
        if (nu <= gap.lower || nu >= gap.upper)
            continue;
        double w = solver.core_weight(edge_modes.vectors.col(static_cast<Eigen::Index>(b)), options.core_half_width);
        if (w > options.min_core_weight)
            return {static_cast<int>(b), w};
    }
    return {};
}

[[noreturn]] void no_guided_mode(const GapWindow& gap)
{
    std::ostringstream os;
    os << "no guided mode: no core-localized band inside the gap window [" << gap.lower << ", " << gap.upper
       << "] at k = 0.5";
    throw Error(ErrorKind::NoGuidedMode, os.str());
}

} // namespace

BandEdge find_band_edge(const WaveguideGeometry& g, const PlaneWaveBasis& basis, const GuidedModeOptions& options)
{
    BandEdge edge;
    edge.gap = bulk_gap_window(g, basis, options.bulk_k_count);
    BandSolver solver(g, basis);
    auto modes = solver.modes(0.5);
    auto choice = pick_edge_band(solver, modes, edge.gap, options);
    if (choice.band < 0)
        no_guided_mode(edge.gap);
    edge.band_index = choice.band;
    edge.core_weight = choice.weight;
    edge.frequency = modes.frequencies[static_cast<std::size_t>(choice.band)];
    edge.wavelength_nm = g.lattice_constant / edge.frequency;
    return edge;
}

DispersionCurve extract_guided_band(BandStructure& bands, const GuidedModeOptions& options)
{
    const auto& ks = bands.k_samples;
    require(ks.size() >= 32, ErrorKind::InsufficientData, "extract_guided_band: need at least 32 k samples");
    require(std::abs(ks.back() - 0.5) < 1e-12, ErrorKind::InvalidArgument,
            "extract_guided_band: k samples must end at 0.5");
    require(bands.modes.size() == ks.size(), ErrorKind::InvalidArgument,
            "extract_guided_band: band structure was computed without eigenvectors");

    const auto gap = bulk_gap_window(bands.geometry, bands.basis, options.bulk_k_count);
    BandSolver solver(bands.geometry, bands.basis);
    const std::size_t last = ks.size() - 1;
    ModeSet edge_modes;
    for (Eigen::Index b = 0; b < bands.frequencies.cols(); ++b)
        edge_modes.frequencies.push_back(bands.frequencies(static_cast<Eigen::Index>(last), b));
    edge_modes.vectors = bands.modes[last];
    auto choice = pick_edge_band(solver, edge_modes, gap, options);
    if (choice.band < 0)
        no_guided_mode(gap);
    bands.guided_band_index = choice.band;

    std::vector<DispersionPoint> points(ks.size());
    int current = choice.band;
    points[last] = {ks[last], bands.frequencies(static_cast<Eigen::Index>(last), current)};
    Eigen::VectorXcd previous = bands.modes[last].col(current);
    for (std::size_t j = last; j-- > 0;) {
        const auto& vecs = bands.modes[j];
        Eigen::Index best = 0;
        double best_overlap = -1.0;
        for (Eigen::Index b = 0; b < vecs.cols(); ++b) {
            double overlap = std::abs(previous.dot(vecs.col(b)));
            if (overlap > best_overlap) {
                best_overlap = overlap;
                best = b;
            }
        }
        current = static_cast<int>(best);
        previous = vecs.col(best);
        points[j] = {ks[j], bands.frequencies(static_cast<Eigen::Index>(j), current)};
    }
    return DispersionCurve(std::move(points), bands.geometry.lattice_constant, bands.geometry.effective_index,
                           std::make_pair(gap.lower, gap.upper));
}

CalibrationResult calibrate_effective_index(const WaveguideGeometry& g, int reciprocal_cutoff, double target_nm,
                                            const CalibrationOptions& options)
{
    if (!(target_nm > 900.0 && target_nm < 1050.0)) {
        std::ostringstream os;
        os << "calibration failure: target wavelength " << target_nm << " nm outside (900, 1050) nm";
        throw Error(ErrorKind::CalibrationFailure, os.str());
    }
    const auto basis = PlaneWaveBasis::build(g, reciprocal_cutoff);
    CalibrationResult result;
    auto residual = [&](double n) {
        ++result.iterations;
        return find_band_edge(g.with_index(n), basis, options.guided).wavelength_nm - target_nm;
    };
    auto finish = [&](double n, double r) {
        result.effective_index = n;
        result.residual_nm = r;
        result.band_edge_wavelength_nm = target_nm + r;
        return result;
    };

    double lo = options.index_low, hi = options.index_high;
    double f_hi = residual(hi);
    if (std::abs(f_hi) <= options.tolerance_nm)
        return finish(hi, f_hi);
    double f_lo = residual(lo);
    if (std::abs(f_lo) <= options.tolerance_nm)
        return finish(lo, f_lo);
    if ((f_lo < 0.0) == (f_hi < 0.0)) {
        std::ostringstream os;
        os << "calibration failure: target " << target_nm << " nm not bracketed by n_eff in [" << lo << ", " << hi
           << "] (edges " << f_lo + target_nm << " .. " << f_hi + target_nm << " nm)";
        throw Error(ErrorKind::CalibrationFailure, os.str());
    }
    for (int it = 0; it < options.max_iterations; ++it) {
        double mid = 0.5 * (lo + hi);
        double f_mid = residual(mid);
        if (std::abs(f_mid) <= options.tolerance_nm)
            return finish(mid, f_mid);
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    throw Error(ErrorKind::CalibrationFailure, "calibration failure: bisection did not reach the tolerance");
}

} // namespace pcw
