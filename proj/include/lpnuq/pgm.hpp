#pragma once

#include <string>

#include "lpnuq/common.hpp"

namespace lpnuq {

/// Write a 16-bit binary PGM (P5, maxval 65535, big-endian samples).
/// Values are clamped to [0,1] and 1.0 maps to 65535.
void write_pgm16(const std::string& path, const Vec& image, int side);

/// Read back a 16-bit PGM written by write_pgm16; returns values in [0,1].
Vec read_pgm16(const std::string& path, int& side);

} // namespace lpnuq
