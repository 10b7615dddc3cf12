#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "pcw/interp.hpp"

namespace pcw {

struct DispersionPoint {
    double k = 0.0;         // units of 2π/a
    double frequency = 0.0; // ν = a/λ
};

struct GroupIndexSample {
    double frequency = 0.0;
    double group_index = 0.0;
};

// Guided-mode dispersion ν(k) ending at the zone boundary k = 0.5, with the
// group index n_g = dk/dν tabulated on the monotone segment next to the edge.
class DispersionCurve {
public:
    // `points` must be sorted by k and end at k = 0.5. When `gap` is given the
    // guided segment is also cut where ν leaves (gap.first, gap.second).
    DispersionCurve(std::vector<DispersionPoint> points, double lattice_constant_nm, double effective_index,
                    std::optional<std::pair<double, double>> gap = std::nullopt);

    const std::vector<DispersionPoint>& points() const { return points_; }
    double lattice_constant_nm() const { return lattice_nm_; }
    double effective_index() const { return n_eff_; }

    double band_edge_frequency() const { return points_.back().frequency; }
    double band_edge_wavelength_nm() const { return lattice_nm_ / band_edge_frequency(); }

    // True when the guided mode lives at ν > ν_edge (the band gap then lies at
    // longer wavelength, as for the W1 even mode).
    bool propagating_above_edge() const { return above_; }
    // First index of the monotone guided segment (it runs to points().size()-1).
    std::size_t segment_begin() const { return segment_begin_; }
    // Frequency at the far end of the tabulated group index.
    double far_frequency() const { return table_far_; }
    bool stationary_edge() const { return stationary_; }

    double frequency_at_wavelength(double wavelength_nm) const { return lattice_nm_ / wavelength_nm; }
    double wavelength_at_frequency(double nu) const { return lattice_nm_ / nu; }

    // Strictly between the edge and the far end of the segment.
    bool in_propagating_domain(double nu) const;
    // Beyond the edge, away from the guided segment.
    bool in_gap(double nu) const { return above_ ? nu <= band_edge_frequency() : nu >= band_edge_frequency(); }

    // n_g at ν; throws OutOfDomain outside the propagating domain.
    double group_index(double nu) const;
    // ∫ n_g dν between two frequencies of the propagating domain (either order; sign follows ν).
    double group_index_integral(double nu_a, double nu_b) const;

    // Finite-difference group index at the segment points (k-grid order).
    const std::vector<std::optional<double>>& point_group_index() const { return point_ng_; }
    std::vector<GroupIndexSample> group_index_table() const;

private:
    double primitive(double nu) const; // ∫_{ν_edge}^{ν} n_g, in |ν - ν_edge| orientation

    std::vector<DispersionPoint> points_;
    double lattice_nm_;
    double n_eff_;
    bool above_ = true;
    bool stationary_ = true;
    std::size_t segment_begin_ = 0;
    std::vector<std::optional<double>> point_ng_;
    // Table in x = |ν - ν_edge| (ascending), group index as a function of x.
    Pchip table_;
    double near_x_ = 0.0;  // first table point
    double near_ng_ = 0.0;
    double table_far_ = 0.0;
};

} // namespace pcw
