#include "deepcontext/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace deepcontext::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint16_t to_millimeters(float meters) {
  if (!(meters > 0)) return 0;
  const double mm = std::round(static_cast<double>(meters) * 1000.0);
  return static_cast<std::uint16_t>(std::min(mm, 65535.0));
}

}  // namespace

DepthImage quantize_to_millimeters(const DepthImage& depth) {
  DepthImage out = depth;
  for (auto& v : out.values) v = static_cast<float>(to_millimeters(v) / 1000.0);
  return out;
}

DepthImage read_depth_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw IoError("not a PNG file: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialization failed");
  }
  DepthImage out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int depth_bits = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth_bits != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("depth PNG must be 16-bit single channel: " + path.string());
  }
  png_set_swap(png);  // PNG stores big-endian samples.
  out = DepthImage(static_cast<int>(width), static_cast<int>(height));
  std::vector<std::uint16_t> row(width);
  for (png_uint_32 v = 0; v < height; ++v) {
    png_read_row(png, reinterpret_cast<png_bytep>(row.data()), nullptr);
    for (png_uint_32 u = 0; u < width; ++u) out.at(static_cast<int>(u), static_cast<int>(v)) = static_cast<float>(row[u] / 1000.0);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_depth_png(const std::filesystem::path& path, const DepthImage& depth) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(depth.width), static_cast<png_uint_32>(depth.height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  std::vector<std::uint16_t> row(static_cast<std::size_t>(depth.width));
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) row[u] = to_millimeters(depth.at(u, v));
    png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

TriMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TriMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad vertex");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::array<int, 3> idx{};
      std::string tok;
      int count = 0;
      while (ss >> tok) {
        if (count == 3) throw IoError(path.string() + ":" + std::to_string(lineno) + ": only triangles are supported");
        // Accept "i", "i/t", "i/t/n" and "i//n"; only the position index is used.
        const int i = std::stoi(tok.substr(0, tok.find('/')));
        idx[count++] = i > 0 ? i - 1 : static_cast<int>(mesh.vertices.size()) + i;
      }
      if (count != 3) throw IoError(path.string() + ":" + std::to_string(lineno) + ": face needs 3 vertices");
      mesh.triangles.push_back(idx);
    }
  }
  mesh.validate();
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace deepcontext::io
