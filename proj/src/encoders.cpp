#include "deepcontext/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deepcontext {

int yaw_to_bin(double yaw) {
  if (!std::isfinite(yaw)) throw std::invalid_argument("yaw_to_bin: non-finite yaw");
  const double deg = normalize_yaw(yaw) * 180.0 / kPi;
  return static_cast<int>(std::lround(deg / kRotationBinDegrees)) % kRotationBins;
}

double bin_to_yaw(int bin) {
  if (bin < 0 || bin >= kRotationBins) throw std::out_of_range("rotation bin out of range");
  return bin * kRotationBinDegrees * kPi / 180.0;
}

namespace {

constexpr double kLow[3] = {-2.5, -2.5, -1.5};
constexpr int kCount[3] = {kTranslationX, kTranslationY, kTranslationZ};

}  // namespace

int offset_to_cell(const Vec3& offset) {
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(offset[a])) throw std::invalid_argument("offset_to_cell: non-finite offset");
    const long i = std::lround((offset[a] - kLow[a]) / kTranslationSpacing);
    idx[a] = static_cast<int>(std::clamp<long>(i, 0, kCount[a] - 1));
  }
  return idx[0] * kTranslationY * kTranslationZ + idx[1] * kTranslationZ + idx[2];
}

Vec3 cell_to_offset(int cell) {
  if (cell < 0 || cell >= kTranslationCells) throw std::out_of_range("translation cell out of range");
  const int ix = cell / (kTranslationY * kTranslationZ);
  const int iy = (cell / kTranslationZ) % kTranslationY;
  const int iz = cell % kTranslationZ;
  return Vec3(kLow[0] + ix * kTranslationSpacing, kLow[1] + iy * kTranslationSpacing,
              kLow[2] + iz * kTranslationSpacing);
}

BoxOffset encode_box(const OrientedBox3& target, const OrientedBox3& anchor) {
  BoxOffset o;
  o.dcenter = (target.center - anchor.center).cwiseQuotient(anchor.size);
  for (int a = 0; a < 3; ++a) o.dlog_size[a] = std::log(target.size[a] / anchor.size[a]);
  return o;
}

OrientedBox3 decode_box(const BoxOffset& offset, const OrientedBox3& anchor) {
  const Vec3 center = anchor.center + offset.dcenter.cwiseProduct(anchor.size);
  Vec3 size;
  for (int a = 0; a < 3; ++a) size[a] = anchor.size[a] * std::exp(offset.dlog_size[a]);
  return OrientedBox3(center, size, anchor.yaw);
}

}  // namespace deepcontext
