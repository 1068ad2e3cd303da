#pragma once

#include <string>
#include <vector>

#include "scenegen/array.hpp"
#include "scenegen/common.hpp"

namespace scenegen::io {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Binary P6, maxval 255.
void write_ppm(const std::string& path, const ImageU8& image);
ImageU8 read_ppm(const std::string& path);

// Raw little-endian float64, no header; callers carry shapes in a manifest.
void write_doubles(const std::string& path, const std::vector<double>& values);
std::vector<double> read_doubles(const std::string& path, std::size_t expected_count);

}  // namespace scenegen::io
