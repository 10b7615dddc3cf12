#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace pcw {

// W1 photonic-crystal waveguide: triangular lattice of air holes with the
// centre row of a (1 x supercell_rows) supercell removed.
struct WaveguideGeometry {
    double lattice_constant = 256.0;   // nm
    double hole_radius_ratio = 0.30;   // r/a
    double effective_index = 3.44;     // background index of the 2D model
    int supercell_rows = 11;           // odd, >= 7
    double membrane_thickness = 150.0; // nm, metadata only
    std::string waveguide_length_note = "100 um";
    bool remove_center_row = true;     // false gives the bulk crystal

    void validate() const;

    WaveguideGeometry bulk() const
    {
        WaveguideGeometry g = *this;
        g.remove_center_row = false;
        return g;
    }
    WaveguideGeometry with_index(double n) const
    {
        WaveguideGeometry g = *this;
        g.effective_index = n;
        return g;
    }
};

nlohmann::json to_json(const WaveguideGeometry& g);

// Accepts a JSON object or "key = value" / "key: value" lines ('#' comments).
// Parse errors name `source` and the offending line.
WaveguideGeometry parse_geometry(std::string_view text, const std::string& source = "<geometry>");
WaveguideGeometry load_geometry(const std::filesystem::path& path);

} // namespace pcw
