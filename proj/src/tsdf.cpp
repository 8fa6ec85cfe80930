#include "deepcontext/tsdf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "deepcontext/io.hpp"

namespace deepcontext {

static_assert(std::endian::native == std::endian::little, "TSDF files are written in native little-endian order");

void GridConfig::validate() const {
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("grid dims must be positive");
  if (!(voxel_size > 0)) throw std::invalid_argument("voxel size must be positive");
  if (!(truncation > 0)) throw std::invalid_argument("truncation must be positive");
}

GridConfig GridConfig::centered_at(const Vec3& center) const {
  GridConfig out = *this;
  out.origin = center - 0.5 * extent();
  return out;
}

bool GridConfig::same_shape(const GridConfig& other) const {
  return dims == other.dims && voxel_size == other.voxel_size && truncation == other.truncation;
}

GridConfig default_grid() {
  GridConfig g;
  g.dims = {128, 128, 64};
  g.voxel_size = 0.05;
  g.truncation = 0.15;
  g.origin = -0.5 * g.extent();
  return g;
}

GridConfig desk_grid() {
  GridConfig g;
  g.dims = {32, 32, 16};
  g.voxel_size = 0.2;
  g.truncation = 0.15;
  g.origin = -0.5 * g.extent();
  return g;
}

TsdfVolume compute_tsdf(const DepthImage& depth, const CameraIntrinsics& cam,
                        const Rigid3& world_from_camera, const GridConfig& cfg) {
  cam.validate();
  cfg.validate();
  if (!depth.matches(cam)) throw std::invalid_argument("depth image and camera dimensions differ");

  TsdfVolume vol;
  vol.config = cfg;
  vol.values.assign(cfg.voxel_count(), 1.0f);

  const Rigid3 camera_from_world = world_from_camera.inverse();
  const Eigen::Matrix3d rot = camera_from_world.linear();
  const Vec3 step_x = rot.col(0) * cfg.voxel_size;
  const Vec3 step_y = rot.col(1) * cfg.voxel_size;
  const Vec3 step_z = rot.col(2) * cfg.voxel_size;
  const Vec3 base = camera_from_world * cfg.voxel_center(0, 0, 0);
  const double inv_trunc = 1.0 / cfg.truncation;

  std::size_t idx = 0;
  for (int z = 0; z < cfg.dims[2]; ++z) {
    for (int y = 0; y < cfg.dims[1]; ++y) {
      const Vec3 row = base + step_z * z + step_y * y;
      for (int x = 0; x < cfg.dims[0]; ++x, ++idx) {
        const Vec3 p = row + step_x * x;
        if (p.z() <= 1e-6) continue;
        const double inv = 1.0 / p.z();
        const double uf = cam.fx * p.x() * inv + cam.cx;
        const double vf = cam.fy * p.y() * inv + cam.cy;
        const long u = std::lround(uf);
        const long v = std::lround(vf);
        if (u < 0 || v < 0 || u >= cam.width || v >= cam.height) continue;
        const float measured = depth.at(static_cast<int>(u), static_cast<int>(v));
        if (!(measured > 0)) continue;
        const double sdf = std::clamp(static_cast<double>(measured) - p.z(), -cfg.truncation, cfg.truncation);
        vol.values[idx] = static_cast<float>(sdf * inv_trunc);
      }
    }
  }
  return vol;
}

void write_tsdf(const std::filesystem::path& path, const TsdfVolume& vol) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io::IoError("cannot write " + path.string());
  for (int d : vol.config.dims) {
    const auto u = static_cast<std::uint32_t>(d);
    out.write(reinterpret_cast<const char*>(&u), sizeof(u));
  }
  out.write(reinterpret_cast<const char*>(vol.values.data()),
            static_cast<std::streamsize>(vol.values.size() * sizeof(float)));
  if (!out) throw io::IoError("failed writing " + path.string());
}

TsdfVolume read_tsdf(const std::filesystem::path& path, const GridConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io::IoError("cannot open " + path.string());
  TsdfVolume vol;
  vol.config = cfg;
  for (int& d : vol.config.dims) {
    std::uint32_t u = 0;
    in.read(reinterpret_cast<char*>(&u), sizeof(u));
    d = static_cast<int>(u);
  }
  if (!in) throw io::IoError("truncated TSDF header: " + path.string());
  vol.config.validate();
  vol.values.resize(vol.config.voxel_count());
  in.read(reinterpret_cast<char*>(vol.values.data()), static_cast<std::streamsize>(vol.values.size() * sizeof(float)));
  if (!in) throw io::IoError("truncated TSDF payload: " + path.string());
  return vol;
}

}  // namespace deepcontext
