// Times the serial reference kernels against their OpenMP versions and checks
// that both produce identical output.
//
//   pcw_bench [repeats]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include <omp.h>

#include "pcw/decay_fit.hpp"
#include "pcw/kernels.hpp"
#include "pcw/photonic_bands.hpp"
#include "pcw/tcspc.hpp"

using namespace pcw;

namespace {

double median_ms(int repeats, const std::function<void()>& f)
{
    std::vector<double> t;
    for (int r = 0; r < repeats; ++r) {
        auto a = std::chrono::steady_clock::now();
        f();
        t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - a).count());
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

template <class T>
bool identical(const std::vector<T>& a, const std::vector<T>& b)
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

void report(const char* name, double serial, double parallel, bool same)
{
    std::printf("%-28s %10.3f %10.3f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
                same ? "identical" : "MISMATCH");
}

} // namespace

int main(int argc, char** argv)
{
    const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
    std::printf("OpenMP threads: %d, repeats: %d\n", omp_get_max_threads(), repeats);
    std::printf("%-28s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");
    bool all_same = true;

    {
        WaveguideGeometry g;
        auto basis = PlaneWaveBasis::build(g, kDefaultCutoff);
        auto lattice = SupercellLattice::for_geometry(g);
        auto centers = lattice.hole_centers(g);
        std::vector<Eigen::Vector2d> diffs;
        const std::size_t rows = std::min<std::size_t>(200, basis.indices.size());
        for (std::size_t i = 0; i < rows; ++i)
            for (const auto& b : basis.indices) {
                const auto& a = basis.indices[i];
                diffs.push_back((a[0] - b[0]) * lattice.b1 + (a[1] - b[1]) * lattice.b2);
            }
        kernels::HoleLattice holes{centers, g.hole_radius_ratio, lattice.area, g.effective_index * g.effective_index,
                                   1.0};
        std::vector<std::complex<double>> s(diffs.size()), p(diffs.size());
        double ts = median_ms(repeats, [&] { kernels::serial::dielectric_coefficients(diffs, holes, s); });
        double tp = median_ms(repeats, [&] { kernels::omp::dielectric_coefficients(diffs, holes, p); });
        all_same &= identical(s, p);
        report("dielectric_coefficients", ts, tp, identical(s, p));
    }
    {
        std::vector<kernels::DensityCell> cells;
        for (int i = 0; i < 2048; ++i) {
            double lo = 0.26 + 1e-5 * i * i / 2048.0, hi = 0.26 + 1e-5 * (i + 1) * (i + 1) / 2048.0;
            cells.push_back({lo, hi, (hi - lo) * (5.0 + 1.0 / std::sqrt(hi - 0.26))});
        }
        std::vector<double> nu;
        for (int i = 0; i < 4096; ++i)
            nu.push_back(0.259 + 0.02 * i / 4096.0);
        std::vector<double> s(nu.size()), p(nu.size());
        double ts = median_ms(repeats, [&] { kernels::serial::lorentzian_box_sum(cells, 2e-4, nu, s); });
        double tp = median_ms(repeats, [&] { kernels::omp::lorentzian_box_sum(cells, 2e-4, nu, p); });
        all_same &= identical(s, p);
        report("lorentzian_box_sum", ts, tp, identical(s, p));
    }
    {
        AcquisitionConfig acq;
        InstrumentResponse irf;
        const auto edges = acq.bin_edges();
        kernels::EmgComponent comps[] = {{0.8, 0.8}, {0.2, 0.2}};
        kernels::EmgSetup setup{irf.sigma_ns(), irf.t0_ns, acq.repetition_period_ns,
                                prior_pulse_count(0.2, acq.repetition_period_ns)};
        std::vector<double> s(edges.size() - 1), p(edges.size() - 1);
        double ts = median_ms(repeats * 20, [&] { kernels::serial::emg_bin_integrals(edges, comps, setup, s); });
        double tp = median_ms(repeats * 20, [&] { kernels::omp::emg_bin_integrals(edges, comps, setup, p); });
        all_same &= identical(s, p);
        report("emg_bin_integrals", ts, tp, identical(s, p));
    }
    {
        WaveguideGeometry g = WaveguideGeometry{}.with_index(2.764891);
        BandSolver solver(g, PlaneWaveBasis::build(g, 4));
        auto ks = uniform_k_samples(0.3, 0.5, 8);
        BandStructure a, b;
        double ts = median_ms(1, [&] { a = compute_band_structure(solver, ks, 0, false, Execution::serial); });
        double tp = median_ms(1, [&] { b = compute_band_structure(solver, ks, 0, false, Execution::parallel); });
        bool same = a.frequencies == b.frequencies;
        all_same &= same;
        report("band structure (8 k, cut 4)", ts, tp, same);
    }
    {
        AcquisitionConfig acq;
        InstrumentResponse irf;
        std::vector<TaggedHistogram> hs;
        for (int i = 0; i < 4; ++i) {
            DecayParams p{0.8, 1.0 + i, 0.2, (1.0 + i) / 4.0};
            auto clean = expected_curve(p, irf, acq, Execution::serial);
            acq.background_rate = 0.01 * *std::max_element(clean.begin(), clean.end());
            auto e = expected_curve(p, irf, acq, Execution::serial);
            acq.background_rate = 0.0;
            hs.push_back({"h" + std::to_string(i), 0.0, 0.0, sample_histogram(e, 7 + i, irf, acq)});
        }
        std::vector<RatePoint> a, b;
        double ts = median_ms(1, [&] { a = rate_series(hs, {}, Execution::serial); });
        double tp = median_ms(1, [&] { b = rate_series(hs, {}, Execution::parallel); });
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i)
            same = a[i].gamma_tot == b[i].gamma_tot && a[i].sigma == b[i].sigma;
        all_same &= same;
        report("rate_series (4 fits)", ts, tp, same);
    }
    return all_same ? 0 : 1;
}
