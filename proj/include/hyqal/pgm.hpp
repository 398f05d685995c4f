#pragma once

#include <string>

#include "hyqal/tensor.hpp"

namespace hyqal::data {

// Reads P2 (ASCII) or P5 (binary) PGM. Values are scaled by maxval to [0,1];
// maxval > 255 means 16-bit big-endian samples in P5. Malformed input raises
// DataError naming the file and byte offset.
Tensor read_pgm(const std::string& path);

// Writes binary P5. maxval 255 (one byte/sample) or 65535 (big-endian pair).
// Values are clamped to [0,1] and quantized by round(v * maxval). A nonempty
// comment is embedded as a header '#' line.
void write_pgm(const std::string& path, const Tensor& image, unsigned maxval = 255,
               const std::string& comment = "");

} // namespace hyqal::data
