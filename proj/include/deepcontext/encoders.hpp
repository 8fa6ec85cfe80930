#pragma once
// Discretizations used by the alignment networks and the box offset
// parameterization of the context network.

#include "deepcontext/geometry.hpp"

namespace deepcontext {

inline constexpr int kRotationBins = 36;
inline constexpr double kRotationBinDegrees = 10.0;

// Translation lattice: 0.5 m spacing, x and y in [-2.5, 2.5], z in
// [-1.5, 1.0]; index = ix * 66 + iy * 6 + iz.
inline constexpr int kTranslationX = 11;
inline constexpr int kTranslationY = 11;
inline constexpr int kTranslationZ = 6;
inline constexpr int kTranslationCells = kTranslationX * kTranslationY * kTranslationZ;
inline constexpr double kTranslationSpacing = 0.5;

// Nearest bin center, wrapping at 360 degrees.
int yaw_to_bin(double yaw);
double bin_to_yaw(int bin);

// Nearest lattice point; out-of-range offsets clamp to the boundary.
int offset_to_cell(const Vec3& offset);
Vec3 cell_to_offset(int cell);

// Center offset normalized by anchor size plus log size ratio.
struct BoxOffset {
  Vec3 dcenter = Vec3::Zero();
  Vec3 dlog_size = Vec3::Zero();
};

BoxOffset encode_box(const OrientedBox3& target, const OrientedBox3& anchor);
// Keeps the anchor's yaw.
OrientedBox3 decode_box(const BoxOffset& offset, const OrientedBox3& anchor);

}  // namespace deepcontext
