#pragma once
// Single-frame projective truncated signed distance volumes.

#include <array>
#include <filesystem>

#include "deepcontext/geometry.hpp"

namespace deepcontext {

struct GridConfig {
  std::array<int, 3> dims{128, 128, 64};
  double voxel_size = 0.05;
  double truncation = 0.15;
  // Corner of voxel (0,0,0) in the working frame.
  Vec3 origin = Vec3::Zero();

  void validate() const;
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  Vec3 extent() const { return Vec3(dims[0], dims[1], dims[2]) * voxel_size; }
  Vec3 voxel_center(int x, int y, int z) const {
    return origin + Vec3(x + 0.5, y + 0.5, z + 0.5) * voxel_size;
  }
  // Same grid, with its origin placed so the grid is centered on `center`.
  GridConfig centered_at(const Vec3& center) const;
  bool same_shape(const GridConfig& other) const;
};

// 128 x 128 x 64 voxels of 5 cm with 15 cm truncation, centered on the
// working-frame origin.
GridConfig default_grid();
// 32 x 32 x 16 voxels of 20 cm with 15 cm truncation; same physical extent.
GridConfig desk_grid();

struct TsdfVolume {
  GridConfig config;
  std::vector<float> values;  // x-fastest, normalized to [-1, 1]

  float at(int x, int y, int z) const {
    return values[(static_cast<std::size_t>(z) * config.dims[1] + y) * config.dims[0] + x];
  }
};

// Projective TSDF. Each voxel center (working frame) is mapped into the
// camera with inverse(world_from_camera) and projected to its nearest
// pixel; value = clamp(measured depth - voxel depth, +-truncation) /
// truncation. Voxels outside the image, behind the camera or on missing
// depth are +1.
TsdfVolume compute_tsdf(const DepthImage& depth, const CameraIntrinsics& cam,
                        const Rigid3& world_from_camera, const GridConfig& cfg);

// Flat binary: 3 x u32 dims, then float32 values, x-fastest, little-endian.
void write_tsdf(const std::filesystem::path& path, const TsdfVolume& vol);
// The file holds only dims; the remaining config fields come from `cfg`.
TsdfVolume read_tsdf(const std::filesystem::path& path, const GridConfig& cfg);

}  // namespace deepcontext
