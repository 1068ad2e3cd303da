#include "scenegen/artifact_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scenegen::io {

static_assert(std::endian::native == std::endian::little,
              "trace files are little-endian; add byte swapping for this platform");

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out << content;
  if (!out) throw IoError("short write: " + path);
}

void write_ppm(const std::string& path, const ImageU8& image) {
  if (image.height < 1 || image.width < 1) throw ArgumentError("empty image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw IoError("short write: " + path);
}

ImageU8 read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (!in || magic != "P6" || maxval != 255 || width < 1 || height < 1)
    throw ParseError("not a supported P6 image: " + path);
  in.get();  // single whitespace after maxval
  ImageU8 image(height, width);
  in.read(reinterpret_cast<char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.rgb.size()))
    throw ParseError("truncated image data: " + path);
  return image;
}

void write_doubles(const std::string& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write trace: " + path);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw IoError("short write: " + path);
}

std::vector<double> read_doubles(const std::string& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open trace: " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(double))
    throw IoError("trace size mismatch in " + path + ": have " + std::to_string(bytes) +
                  " bytes, expected " + std::to_string(expected_count * sizeof(double)));
  in.seekg(0);
  std::vector<double> values(expected_count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("truncated trace: " + path);
  return values;
}

}  // namespace scenegen::io
