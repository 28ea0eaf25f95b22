#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "phrl/camera.hpp"
#include "phrl/image.hpp"
#include "phrl/scene.hpp"

namespace phrl {

enum class ObjectId : uint8_t { None = 0, Table = 1, Block = 2, Peg = 3 };

struct RenderResult {
  RgbImage rgb;
  DepthImage depth;       // camera-frame z of nearest hit; 0 outside [depth_min, depth_max]
  MaskImage object_id;    // ObjectId values
};

struct RenderRequest {
  CameraIntrinsics intrinsics;
  Pose camera_pose;
  Vec3 peg_tip = Vec3::Zero();   // world position of the peg's lower end
  Pose block_pose;               // box-center frame
  Rgb8 block_color{60, 90, 220};
  Rgb8 peg_color{220, 60, 40};
};

namespace detail {

struct Hit {
  bool valid = false;
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::UnitZ();   // world frame, unit, facing the ray origin side
  ObjectId id = ObjectId::None;
};

constexpr double kRayEps = 1e-9;

/// t-interval of a ray inside the z-slab [z0, z1]. Returns false if empty.
inline bool slab_interval(double oz, double dz, double z0, double z1,
                          double& t0, double& t1) {
  if (std::abs(dz) < kRayEps) {
    if (oz < z0 || oz > z1) return false;
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    return true;
  }
  t0 = (z0 - oz) / dz;
  t1 = (z1 - oz) / dz;
  if (t0 > t1) std::swap(t0, t1);
  return true;
}

/// t-interval of a ray inside an infinite vertical cylinder |p_xy - c_xy| <= r.
inline bool cylinder_interval(const Vec3& o, const Vec3& d, double cx, double cy,
                              double r, double& t0, double& t1) {
  const double ox = o.x() - cx, oy = o.y() - cy;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a < kRayEps * kRayEps) {
    if (ox * ox + oy * oy > r * r) return false;
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    return true;
  }
  const double b = 2.0 * (ox * d.x() + oy * d.y());
  const double c = ox * ox + oy * oy - r * r;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return false;
  const double s = std::sqrt(disc);
  t0 = (-b - s) / (2.0 * a);
  t1 = (-b + s) / (2.0 * a);
  return true;
}

inline Hit hit_table(const Ray& ray) {
  Hit h;
  if (std::abs(ray.direction.z()) < kRayEps) return h;
  const double t = -ray.origin.z() / ray.direction.z();
  if (t <= kRayEps) return h;
  h.valid = true;
  h.t = t;
  h.normal = Vec3::UnitZ();
  h.id = ObjectId::Table;
  return h;
}

/// Closed vertical cylinder: tip at `base`, extending up `length`.
inline Hit hit_peg(const Ray& ray, const Vec3& base, double radius, double length) {
  Hit h;
  double c0, c1, s0, s1;
  if (!cylinder_interval(ray.origin, ray.direction, base.x(), base.y(), radius, c0, c1))
    return h;
  if (!slab_interval(ray.origin.z(), ray.direction.z(), base.z(), base.z() + length, s0, s1))
    return h;
  const double t0 = std::max(c0, s0);
  const double t1 = std::min(c1, s1);
  if (t0 > t1 || t1 <= kRayEps) return h;
  const double t = t0 > kRayEps ? t0 : t1;   // t1 case: origin inside the peg
  h.valid = true;
  h.t = t;
  h.id = ObjectId::Peg;
  const Vec3 p = ray.origin + t * ray.direction;
  if (t == s0 || t == s1) {
    h.normal = ray.direction.z() < 0.0 ? Vec3(Vec3::UnitZ()) : Vec3(-Vec3::UnitZ());
  } else {
    Vec3 n(p.x() - base.x(), p.y() - base.y(), 0.0);
    h.normal = n.normalized();
  }
  return h;
}

/// Rectangular block with a coaxial blind hole bored into the top face.
/// Computed in the block frame (box centered at the origin), normal
/// rotated back to world.
inline Hit hit_block(const Ray& ray, const SceneGeometry& g, const Pose& block_pose) {
  Hit h;
  const Pose inv = block_pose.inverse();
  const Vec3 o = inv.apply(ray.origin);
  const Vec3 d = inv.rotate(ray.direction);
  const Vec3 half = 0.5 * g.block_extents;

  // Box interval by slabs, tracking which axis bounds the entry.
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  int enter_axis = -1;
  for (int i = 0; i < 3; ++i) {
    double a0, a1;
    if (std::abs(d[i]) < kRayEps) {
      if (std::abs(o[i]) > half[i]) return h;
      continue;
    }
    a0 = (-half[i] - o[i]) / d[i];
    a1 = (half[i] - o[i]) / d[i];
    if (a0 > a1) std::swap(a0, a1);
    if (a0 > t0) {
      t0 = a0;
      enter_axis = i;
    }
    t1 = std::min(t1, a1);
    if (t0 > t1) return h;
  }

  // Hole: open at the top face, closed at depth. Extend the subtracted
  // cylinder slightly above the top so the opening has no skin.
  const double ztop = half.z();
  const double zbot = ztop - g.hole_depth;
  double c0 = 1.0, c1 = 0.0;
  bool has_hole = false;
  {
    double cc0, cc1, cs0, cs1;
    if (cylinder_interval(o, d, 0.0, 0.0, g.hole_radius, cc0, cc1) &&
        slab_interval(o.z(), d.z(), zbot, ztop + 1e-6, cs0, cs1)) {
      c0 = std::max(cc0, cs0);
      c1 = std::min(cc1, cs1);
      has_hole = c0 <= c1;
    }
  }

  // Subtract the hole interval from the box interval; nearest surviving entry.
  double t = std::numeric_limits<double>::infinity();
  enum { kBoxFace, kHoleWallOrBottom } kind = kBoxFace;
  if (!has_hole || c0 > t0 + kRayEps) {
    t = t0;
    kind = kBoxFace;
  } else if (c1 < t1 - kRayEps) {
    t = c1;   // re-enter solid through the hole's inner surface
    kind = kHoleWallOrBottom;
  } else {
    return h;  // ray passes clean through the hole
  }
  if (t <= kRayEps || !std::isfinite(t)) return h;

  const Vec3 p = o + t * d;
  Vec3 n_local;
  if (kind == kBoxFace) {
    n_local = Vec3::Zero();
    if (enter_axis < 0) return h;
    n_local[enter_axis] = d[enter_axis] < 0.0 ? 1.0 : -1.0;
  } else if (std::abs(p.z() - zbot) < 1e-7) {
    n_local = Vec3::UnitZ();       // hole bottom
  } else {
    n_local = Vec3(-p.x(), -p.y(), 0.0).normalized();   // hole wall faces inward
  }
  h.valid = true;
  h.t = t;
  h.id = ObjectId::Block;
  h.normal = block_pose.rotate(n_local);
  return h;
}

inline Rgb8 shade(Rgb8 base, const Vec3& normal, const Vec3& light_dir) {
  const double k = 0.3 + 0.7 * std::max(0.0, normal.dot(light_dir));
  auto s = [&](uint8_t v) {
    return static_cast<uint8_t>(std::min(255L, std::lround(v * k)));
  };
  return {s(base.r), s(base.g), s(base.b)};
}

}  // namespace detail

/// Fixed directional light for flat Lambertian shading (ambient 0.3).
inline const Vec3 kLightDir = Vec3(0.3, 0.2, 1.0).normalized();

inline RenderResult render(const SceneGeometry& g, const RenderRequest& req) {
  const CameraIntrinsics& cam = req.intrinsics;
  cam.validate();
  RenderResult out;
  out.rgb = RgbImage(cam.width, cam.height, g.background_color);
  out.depth = DepthImage(cam.width, cam.height, 0.0f);
  out.object_id = MaskImage(cam.width, cam.height, uint8_t(ObjectId::None));

  const Vec3 cam_z = req.camera_pose.rotate(Vec3::UnitZ());
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Ray ray = pixel_ray(cam, req.camera_pose, u, v);
      detail::Hit best = detail::hit_table(ray);
      if (const auto hb = detail::hit_block(ray, g, req.block_pose); hb.valid && hb.t < best.t)
        best = hb;
      if (const auto hp = detail::hit_peg(ray, req.peg_tip, g.peg_radius, g.peg_length);
          hp.valid && hp.t < best.t)
        best = hp;
      if (!best.valid) continue;

      const Vec3 p = ray.origin + best.t * ray.direction;
      Rgb8 base = g.table_color;
      if (best.id == ObjectId::Block) base = req.block_color;
      if (best.id == ObjectId::Peg) base = req.peg_color;
      out.rgb.at(u, v) = detail::shade(base, best.normal, kLightDir);
      out.object_id.at(u, v) = uint8_t(best.id);

      const double z = (p - req.camera_pose.position).dot(cam_z);
      if (z >= cam.depth_min && z <= cam.depth_max)
        out.depth.at(u, v) = static_cast<float>(z);
    }
  }
  return out;
}

/// Stereo-style depth corruption applied after rendering.
struct DepthNoiseParams {
  double sigma_k = 0.002;          // gaussian sigma = k * z^2
  double edge_threshold = 0.020;   // meters of neighbor disparity per pixel
  double edge_dropout_p = 0.8;
  double speckle_p = 0.01;
  double depth_min = 0.05;
  double depth_max = 1.2;
};

inline void apply_depth_noise(DepthImage& d, Rng& rng, const DepthNoiseParams& p = {}) {
  const DepthImage clean = d;
  auto grad = [&](int x, int y) {
    const float c = clean.at(x, y);
    double gmax = 0.0;
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int i = 0; i < 4; ++i) {
      if (nx[i] < 0 || nx[i] >= clean.width || ny[i] < 0 || ny[i] >= clean.height) continue;
      gmax = std::max(gmax, std::abs(double(clean.at(nx[i], ny[i])) - c));
    }
    return gmax;
  };
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      float& z = d.at(x, y);
      if (z <= 0.0f) continue;
      if (grad(x, y) > p.edge_threshold && rng.bernoulli(p.edge_dropout_p)) {
        z = 0.0f;
        continue;
      }
      if (rng.bernoulli(p.speckle_p)) {
        z = 0.0f;
        continue;
      }
      const double noisy = z + rng.normal(0.0, p.sigma_k * double(z) * double(z));
      z = (noisy < p.depth_min || noisy > p.depth_max) ? 0.0f : float(noisy);
    }
  }
}

}  // namespace phrl
