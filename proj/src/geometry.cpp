#include "deepcontext/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace deepcontext {

double normalize_yaw(double yaw) {
  double y = std::fmod(yaw, kTwoPi);
  if (y < 0) y += kTwoPi;
  if (y >= kTwoPi) y -= kTwoPi;
  return y;
}

double angle_distance(double a, double b) {
  const double d = normalize_yaw(a - b);
  return std::min(d, kTwoPi - d);
}

Eigen::Matrix3d yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
    throw std::invalid_argument("camera principal point outside the image");
}

CameraIntrinsics CameraIntrinsics::desk_default() {
  return CameraIntrinsics{130.0, 130.0, 80.0, 60.0, 160, 120};
}

OrientedBox3::OrientedBox3(const Vec3& c, const Vec3& s, double yaw_rad)
    : center(c), size(s), yaw(normalize_yaw(yaw_rad)) {
  if (!(s.x() > 0 && s.y() > 0 && s.z() > 0))
    throw std::invalid_argument("box extents must be positive");
  if (!c.allFinite() || !std::isfinite(yaw_rad)) throw std::invalid_argument("box parameters must be finite");
}

std::array<Eigen::Vector2d, 4> OrientedBox3::footprint() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double hx = size.x() / 2, hy = size.y() / 2;
  const std::array<Eigen::Vector2d, 4> local{Eigen::Vector2d(-hx, -hy), Eigen::Vector2d(hx, -hy),
                                             Eigen::Vector2d(hx, hy), Eigen::Vector2d(-hx, hy)};
  std::array<Eigen::Vector2d, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Eigen::Vector2d(center.x() + c * local[i].x() - s * local[i].y(),
                             center.y() + s * local[i].x() + c * local[i].y());
  }
  return out;
}

bool OrientedBox3::contains(const Vec3& p, double inflate) const {
  const Vec3 local = yaw_rotation(-yaw) * (p - center);
  const Vec3 half = size * (0.5 * (1.0 + inflate));
  return std::abs(local.x()) <= half.x() && std::abs(local.y()) <= half.y() &&
         std::abs(local.z()) <= half.z();
}

void TriMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& t : triangles)
    for (int idx : t)
      if (idx < 0 || idx >= n) throw std::invalid_argument("mesh triangle index out of range");
}

void TriMesh::append(const TriMesh& other) {
  const int base = static_cast<int>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& t : other.triangles) triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
}

std::pair<Vec3, Vec3> mesh_bounds(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw std::invalid_argument("mesh has no vertices");
  Vec3 lo = mesh.vertices.front(), hi = mesh.vertices.front();
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

TriMesh transform_mesh(const TriMesh& mesh, const Rigid3& pose) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = pose * v;
  return out;
}

TriMesh make_box_mesh(const Vec3& lo, const Vec3& hi) {
  TriMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

TriMesh make_cylinder_mesh(double cx, double cy, double radius, double z0, double z1, int segments) {
  TriMesh m;
  m.vertices.emplace_back(cx, cy, z0);
  m.vertices.emplace_back(cx, cy, z1);
  for (int i = 0; i < segments; ++i) {
    const double a = kTwoPi * i / segments;
    m.vertices.emplace_back(cx + radius * std::cos(a), cy + radius * std::sin(a), z0);
    m.vertices.emplace_back(cx + radius * std::cos(a), cy + radius * std::sin(a), z1);
  }
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    const int b0 = 2 + 2 * i, t0 = b0 + 1, b1 = 2 + 2 * j, t1 = b1 + 1;
    m.triangles.push_back({0, b1, b0});
    m.triangles.push_back({1, t0, t1});
    m.triangles.push_back({b0, b1, t0});
    m.triangles.push_back({t0, b1, t1});
  }
  return m;
}

TriMesh make_sphere_mesh(const Vec3& center, double radius, int rings, int segments) {
  TriMesh m;
  for (int r = 0; r <= rings; ++r) {
    const double phi = kPi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double theta = kTwoPi * s / segments;
      m.vertices.push_back(center + radius * Vec3(std::sin(phi) * std::cos(theta),
                                                   std::sin(phi) * std::sin(theta), std::cos(phi)));
    }
  }
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int a = r * segments + s;
      const int b = r * segments + (s + 1) % segments;
      const int c = (r + 1) * segments + s;
      const int d = (r + 1) * segments + (s + 1) % segments;
      if (r > 0) m.triangles.push_back({a, c, b});
      if (r + 1 < rings) m.triangles.push_back({b, c, d});
    }
  }
  return m;
}

Vec3 backproject_pixel(const CameraIntrinsics& cam, double u, double v, double z) {
  return Vec3((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z);
}

PointCloud backproject_depth(const DepthImage& depth, const CameraIntrinsics& cam) {
  if (!depth.matches(cam)) throw std::invalid_argument("depth image and camera dimensions differ");
  PointCloud cloud;
  cloud.frame = Frame::camera;
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u) {
      const float z = depth.at(u, v);
      if (z > 0) cloud.points.push_back(backproject_pixel(cam, u, v, z));
    }
  return cloud;
}

namespace {

constexpr double kNearPlane = 1e-3;

struct ScreenVertex {
  double sx, sy, inv_z;
};

void rasterize_triangle(const std::array<Vec3, 3>& tri, const CameraIntrinsics& cam, DepthImage& zbuf) {
  std::array<ScreenVertex, 3> s;
  for (int i = 0; i < 3; ++i) {
    const double iz = 1.0 / tri[i].z();
    s[i] = {cam.fx * tri[i].x() * iz + cam.cx, cam.fy * tri[i].y() * iz + cam.cy, iz};
  }
  const double area = (s[1].sx - s[0].sx) * (s[2].sy - s[0].sy) - (s[1].sy - s[0].sy) * (s[2].sx - s[0].sx);
  if (std::abs(area) < 1e-14) return;

  const double min_x = std::min({s[0].sx, s[1].sx, s[2].sx});
  const double max_x = std::max({s[0].sx, s[1].sx, s[2].sx});
  const double min_y = std::min({s[0].sy, s[1].sy, s[2].sy});
  const double max_y = std::max({s[0].sy, s[1].sy, s[2].sy});
  const int u0 = std::max(0, static_cast<int>(std::ceil(min_x)));
  const int u1 = std::min(zbuf.width - 1, static_cast<int>(std::floor(max_x)));
  const int v0 = std::max(0, static_cast<int>(std::ceil(min_y)));
  const int v1 = std::min(zbuf.height - 1, static_cast<int>(std::floor(max_y)));
  if (u0 > u1 || v0 > v1) return;

  const double inv_area = 1.0 / area;
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const double px = u, py = v;
      const double w0 = ((s[1].sx - px) * (s[2].sy - py) - (s[1].sy - py) * (s[2].sx - px)) * inv_area;
      const double w1 = ((s[2].sx - px) * (s[0].sy - py) - (s[2].sy - py) * (s[0].sx - px)) * inv_area;
      const double w2 = 1.0 - w0 - w1;
      if (w0 < 0 || w1 < 0 || w2 < 0) continue;
      const double inv_z = w0 * s[0].inv_z + w1 * s[1].inv_z + w2 * s[2].inv_z;
      if (!(inv_z > 0)) continue;
      const float z = static_cast<float>(1.0 / inv_z);
      float& dst = zbuf.at(u, v);
      if (dst == 0.0f || z < dst) dst = z;
    }
  }
}

}  // namespace

void rasterize_mesh(const TriMesh& mesh, const CameraIntrinsics& cam, DepthImage& zbuffer) {
  cam.validate();
  if (!zbuffer.matches(cam)) throw std::invalid_argument("z-buffer and camera dimensions differ");
  mesh.validate();
  for (const auto& t : mesh.triangles) {
    const std::array<Vec3, 3> tri{mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]};
    const int behind = (tri[0].z() < kNearPlane) + (tri[1].z() < kNearPlane) + (tri[2].z() < kNearPlane);
    if (behind == 3) continue;
    if (behind == 0) {
      rasterize_triangle(tri, cam, zbuffer);
      continue;
    }
    // Clip against the near plane; the result has 3 or 4 vertices.
    std::vector<Vec3> poly;
    for (int i = 0; i < 3; ++i) {
      const Vec3& a = tri[i];
      const Vec3& b = tri[(i + 1) % 3];
      const bool a_in = a.z() >= kNearPlane, b_in = b.z() >= kNearPlane;
      if (a_in) poly.push_back(a);
      if (a_in != b_in) {
        const double t = (kNearPlane - a.z()) / (b.z() - a.z());
        Vec3 p = a + t * (b - a);
        p.z() = kNearPlane;
        poly.push_back(p);
      }
    }
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) rasterize_triangle({poly[0], poly[i], poly[i + 1]}, cam, zbuffer);
  }
}

DepthImage render_mesh_depth(const TriMesh& mesh, const CameraIntrinsics& cam) {
  cam.validate();
  DepthImage out(cam.width, cam.height);
  rasterize_mesh(mesh, cam, out);
  return out;
}

PointCloud transform_cloud(const PointCloud& cloud, double yaw, const Vec3& translation) {
  const Eigen::Matrix3d r = yaw_rotation(yaw);
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(r * p + translation);
  return out;
}

TriMesh fit_mesh_to_box(const TriMesh& mesh, const OrientedBox3& box) {
  if (mesh.vertices.empty()) throw std::invalid_argument("cannot fit an empty mesh");
  const auto [lo, hi] = mesh_bounds(mesh);
  const Vec3 extent = hi - lo;
  if (!(extent.minCoeff() > 1e-12)) throw std::invalid_argument("mesh has zero extent along an axis");
  const Vec3 mid = 0.5 * (lo + hi);
  const Vec3 scale = box.size.cwiseQuotient(extent);
  const Eigen::Matrix3d r = yaw_rotation(box.yaw);
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = r * (v - mid).cwiseProduct(scale) + box.center;
  return out;
}

double convex_intersection_area(std::span<const Eigen::Vector2d> subject,
                                std::span<const Eigen::Vector2d> clip) {
  std::vector<Eigen::Vector2d> poly(subject.begin(), subject.end());
  const std::size_t n = clip.size();
  for (std::size_t e = 0; e < n && !poly.empty(); ++e) {
    const Eigen::Vector2d a = clip[e];
    const Eigen::Vector2d b = clip[(e + 1) % n];
    const Eigen::Vector2d edge = b - a;
    auto side = [&](const Eigen::Vector2d& p) { return edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x()); };
    std::vector<Eigen::Vector2d> next;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Eigen::Vector2d& p = poly[i];
      const Eigen::Vector2d& q = poly[(i + 1) % poly.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0) next.push_back(p);
      if ((sp >= 0) != (sq >= 0)) next.push_back(p + (sp / (sp - sq)) * (q - p));
    }
    poly = std::move(next);
  }
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return std::max(0.0, 0.5 * twice);
}

double box_intersection_volume(const OrientedBox3& a, const OrientedBox3& b) {
  const double z_lo = std::max(a.center.z() - a.size.z() / 2, b.center.z() - b.size.z() / 2);
  const double z_hi = std::min(a.center.z() + a.size.z() / 2, b.center.z() + b.size.z() / 2);
  if (z_hi <= z_lo) return 0.0;
  const auto fa = a.footprint();
  const auto fb = b.footprint();
  return convex_intersection_area(fa, fb) * (z_hi - z_lo);
}

double box_iou_3d(const OrientedBox3& a, const OrientedBox3& b) {
  const double inter = box_intersection_volume(a, b);
  const double uni = a.volume() + b.volume() - inter;
  if (!(uni > 0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace deepcontext
