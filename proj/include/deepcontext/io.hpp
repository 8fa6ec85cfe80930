#pragma once
// File formats shared across modules: 16-bit depth PNGs (millimeters,
// 0 = missing) and a minimal OBJ subset (`v` and triangular `f`).

#include <filesystem>
#include <string>

#include "deepcontext/geometry.hpp"

namespace deepcontext::io {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

DepthImage read_depth_png(const std::filesystem::path& path);
// Depth is rounded to the nearest millimeter and saturated at 65.535 m.
void write_depth_png(const std::filesystem::path& path, const DepthImage& depth);
// In-memory millimeter quantization matching what write/read produces.
DepthImage quantize_to_millimeters(const DepthImage& depth);

TriMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace deepcontext::io
