#include "lpnuq/pgm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "lpnuq/metrics.hpp"

namespace lpnuq {

void write_pgm16(const std::string& path, const Vec& image, int side)
{
    if (side <= 0 || image.size() != static_cast<Eigen::Index>(side) * side)
        throw std::invalid_argument("write_pgm16: bad image size");
    const Vec v = clamp01(image);
    std::string out;
    out += "P5\n" + std::to_string(side) + " " + std::to_string(side)
        + "\n65535\n";
    out.reserve(out.size() + static_cast<size_t>(v.size()) * 2);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const auto s = static_cast<std::uint16_t>(std::lround(v[i] * 65535.0));
        out.push_back(static_cast<char>(s >> 8)); // MSB first per the format
        out.push_back(static_cast<char>(s & 0xff));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw std::runtime_error("write_pgm16: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f)
        throw std::runtime_error("write_pgm16: write failed for " + path);
}

Vec read_pgm16(const std::string& path, int& side)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("read_pgm16: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || maxval != 65535 || w != h || w <= 0)
        throw std::runtime_error("read_pgm16: unsupported header in " + path);
    f.get(); // the single whitespace byte after maxval
    std::vector<char> raw(static_cast<size_t>(w) * h * 2);
    f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size()))
        throw std::runtime_error("read_pgm16: truncated " + path);
    side = w;
    Vec img(static_cast<Eigen::Index>(w) * h);
    for (Eigen::Index i = 0; i < img.size(); ++i) {
        const auto hi = static_cast<std::uint8_t>(raw[static_cast<size_t>(i) * 2]);
        const auto lo = static_cast<std::uint8_t>(raw[static_cast<size_t>(i) * 2 + 1]);
        img[i] = ((hi << 8) | lo) / 65535.0;
    }
    return img;
}

} // namespace lpnuq
