#include "pcw/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pcw/error.hpp"

namespace pcw {

void WaveguideGeometry::validate() const
{
    require(lattice_constant > 0.0, ErrorKind::InvalidArgument, "geometry: lattice_constant must be > 0");
    require(hole_radius_ratio >= 0.0 && hole_radius_ratio < 0.5, ErrorKind::InvalidArgument,
            "geometry: hole_radius_ratio must lie in [0, 0.5)");
    require(effective_index > 1.0, ErrorKind::InvalidArgument, "geometry: effective_index must be > 1");
    require(supercell_rows >= 7 && supercell_rows % 2 == 1, ErrorKind::InvalidArgument,
            "geometry: supercell_rows must be odd and >= 7");
}

nlohmann::json to_json(const WaveguideGeometry& g)
{
    return {
        {"lattice_constant", g.lattice_constant},
        {"hole_radius_ratio", g.hole_radius_ratio},
        {"effective_index", g.effective_index},
        {"supercell_rows", g.supercell_rows},
        {"membrane_thickness", g.membrane_thickness},
        {"waveguide_length_note", g.waveguide_length_note},
        {"remove_center_row", g.remove_center_row},
    };
}

namespace {

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return std::string(s.substr(b, e - b));
}

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& what)
{
    std::ostringstream os;
    os << source << ":" << line << ": " << what;
    throw Error(ErrorKind::Parse, os.str());
}

double to_double(const std::string& v, const std::string& source, int line)
{
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        parse_fail(source, line, "expected a number, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& v, const std::string& source, int line)
{
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    parse_fail(source, line, "expected a boolean, got '" + v + "'");
}

void assign(WaveguideGeometry& g, const std::string& key, const std::string& value, const std::string& source,
            int line)
{
    if (key == "lattice_constant")
        g.lattice_constant = to_double(value, source, line);
    else if (key == "hole_radius_ratio")
        g.hole_radius_ratio = to_double(value, source, line);
    else if (key == "effective_index")
        g.effective_index = to_double(value, source, line);
    else if (key == "supercell_rows") {
        double v = to_double(value, source, line);
        if (v != static_cast<int>(v))
            parse_fail(source, line, "supercell_rows must be an integer");
        g.supercell_rows = static_cast<int>(v);
    } else if (key == "membrane_thickness")
        g.membrane_thickness = to_double(value, source, line);
    else if (key == "waveguide_length_note")
        g.waveguide_length_note = value;
    else if (key == "remove_center_row")
        g.remove_center_row = to_bool(value, source, line);
    else
        parse_fail(source, line, "unknown geometry field '" + key + "'");
}

} // namespace

WaveguideGeometry parse_geometry(std::string_view text, const std::string& source)
{
    WaveguideGeometry g;
    std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            // nlohmann reports a byte offset; convert it to a line number.
            std::size_t byte = std::min<std::size_t>(e.byte, body.size());
            int line = 1 + static_cast<int>(std::count(body.begin(), body.begin() + byte, '\n'));
            parse_fail(source, line, std::string("invalid JSON: ") + e.what());
        }
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto& v = it.value();
            std::string value;
            if (v.is_string())
                value = v.get<std::string>();
            else if (v.is_boolean())
                value = v.get<bool>() ? "true" : "false";
            else if (v.is_number())
                value = v.dump();
            else
                parse_fail(source, 1, "field '" + it.key() + "' has an unsupported type");
            assign(g, it.key(), value, source, 1);
        }
    } else {
        std::istringstream in{std::string(text)};
        std::string raw;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            auto hash = raw.find('#');
            std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (content.empty())
                continue;
            auto sep = content.find_first_of("=:");
            if (sep == std::string::npos)
                parse_fail(source, line, "expected 'key = value'");
            std::string key = trim(content.substr(0, sep));
            std::string value = trim(content.substr(sep + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            assign(g, key, value, source, line);
        }
    }
    g.validate();
    return g;
}

WaveguideGeometry load_geometry(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open geometry file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_geometry(ss.str(), path.string());
}

} // namespace pcw
