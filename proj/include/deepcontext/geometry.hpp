#pragma once
// Depth-camera geometry: pinhole intrinsics, depth images, point clouds,
// gravity-upright oriented boxes, triangle meshes, z-buffer rendering and
// exact 3D IoU.
//
// Conventions: gravity axis is +z, yaw is counterclockwise seen from above.
// Camera coordinates are x right, y down, z forward. Missing depth is 0.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace deepcontext {

using Vec3 = Eigen::Vector3d;
using Rigid3 = Eigen::Isometry3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Wraps an angle into [0, 2*pi).
double normalize_yaw(double yaw);
// Smallest absolute difference between two angles, in [0, pi].
double angle_distance(double a, double b);

// Rotation about +z.
Eigen::Matrix3d yaw_rotation(double yaw);

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
  // 160x120 sensor with a Kinect-like field of view.
  static CameraIntrinsics desk_default();
};

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major, meters, 0 = missing

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}

  float at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  float& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  bool matches(const CameraIntrinsics& cam) const { return width == cam.width && height == cam.height; }
};

enum class Frame { camera, gravity_aligned, template_frame };

struct PointCloud {
  std::vector<Vec3> points;
  Frame frame = Frame::camera;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct OrientedBox3 {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  double yaw = 0.0;

  OrientedBox3() = default;
  // Normalizes yaw; throws std::invalid_argument on non-positive sizes.
  OrientedBox3(const Vec3& c, const Vec3& s, double yaw_rad);

  double volume() const { return size.x() * size.y() * size.z(); }
  // Footprint corners in counterclockwise order.
  std::array<Eigen::Vector2d, 4> footprint() const;
  // True when p lies inside the box grown by `inflate` (fractional) per axis.
  bool contains(const Vec3& p, double inflate = 0.0) const;
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  void validate() const;
  void append(const TriMesh& other);
};

// Axis-aligned bounds of a mesh, as (min, max).
std::pair<Vec3, Vec3> mesh_bounds(const TriMesh& mesh);
TriMesh transform_mesh(const TriMesh& mesh, const Rigid3& pose);
// Closed axis-aligned box mesh (12 triangles) spanning [lo, hi].
TriMesh make_box_mesh(const Vec3& lo, const Vec3& hi);
// Closed cylinder along z, centered on (cx, cy), spanning z0..z1.
TriMesh make_cylinder_mesh(double cx, double cy, double radius, double z0, double z1, int segments = 16);
// UV sphere, used by tests and the model library.
TriMesh make_sphere_mesh(const Vec3& center, double radius, int rings = 12, int segments = 24);

// One point per valid pixel via the pinhole model; frame = camera.
PointCloud backproject_depth(const DepthImage& depth, const CameraIntrinsics& cam);
// Back-projects a single pixel center.
Vec3 backproject_pixel(const CameraIntrinsics& cam, double u, double v, double z);

// Z-buffer rasterization of a camera-frame mesh with perspective-correct
// depth at pixel centers. Triangles crossing the near plane are clipped.
DepthImage render_mesh_depth(const TriMesh& mesh, const CameraIntrinsics& cam);
// Rasterizes into an existing buffer, keeping the nearer of old/new depth.
void rasterize_mesh(const TriMesh& mesh, const CameraIntrinsics& cam, DepthImage& zbuffer);

// Rotates every point about +z by yaw, then adds translation.
PointCloud transform_cloud(const PointCloud& cloud, double yaw, const Vec3& translation);

// Scales the mesh per axis so its bounds equal box.size, then applies the
// box yaw and moves it to box.center.
TriMesh fit_mesh_to_box(const TriMesh& mesh, const OrientedBox3& box);

// Exact IoU of two gravity-upright boxes: footprint polygon clipping times
// vertical overlap.
double box_iou_3d(const OrientedBox3& a, const OrientedBox3& b);
double box_intersection_volume(const OrientedBox3& a, const OrientedBox3& b);

// Area of the intersection of two convex counterclockwise polygons.
double convex_intersection_area(std::span<const Eigen::Vector2d> subject,
                                std::span<const Eigen::Vector2d> clip);

}  // namespace deepcontext
