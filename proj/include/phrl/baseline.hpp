#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "phrl/camera.hpp"
#include "phrl/core.hpp"
#include "phrl/env.hpp"
#include "phrl/image.hpp"
#include "phrl/render.hpp"
#include "phrl/scene.hpp"

namespace phrl {

/// HSV window around the mating part's color.  Value tolerance is wide
/// because the flat shading scales brightness per face.
struct SegmentationParams {
  Hsv target{220.0, 0.75, 0.55};
  double h_tol = 35.0;
  double s_tol = 0.25;
  double v_tol = 0.45;
  int min_area = 30;  ///< connected components smaller than this are dropped

  void validate() const {
    if (h_tol < 0 || s_tol < 0 || v_tol < 0)
      throw ConfigError("segmentation tolerances must be >= 0");
  }
};

struct HoleEstimate {
  Vec3 center_world{0, 0, 0};
  /// Plausibility in [0,1]: how well the hole-pixel count matches the
  /// projected disc area.  Defaults to certain for hand-built estimates.
  double confidence = 1.0;
};

namespace baseline_detail {

inline double hue_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

/// Remove 4-connected components smaller than min_area (in place).
inline void drop_small_components(MaskImage& mask, int min_area) {
  const int w = mask.width, h = mask.height;
  std::vector<int> label(size_t(w) * h, 0);
  std::vector<int> stack;
  int next = 0;
  for (int start = 0; start < w * h; ++start) {
    if (mask.pixels[size_t(start)] == 0 || label[size_t(start)] != 0) continue;
    ++next;
    stack.assign(1, start);
    label[size_t(start)] = next;
    std::vector<int> members;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int x = p % w, y = p / w;
      const int nb[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1,
                         y > 0 ? p - w : -1, y + 1 < h ? p + w : -1};
      for (int q : nb) {
        if (q < 0 || mask.pixels[size_t(q)] == 0 || label[size_t(q)] != 0) continue;
        label[size_t(q)] = next;
        stack.push_back(q);
      }
    }
    if (int(members.size()) < min_area)
      for (int p : members) mask.pixels[size_t(p)] = 0;
  }
}

struct Pt {
  int x, y;
  bool operator<(const Pt& o) const { return x < o.x || (x == o.x && y < o.y); }
  bool operator==(const Pt&) const = default;
};

inline long cross(const Pt& o, const Pt& a, const Pt& b) {
  return long(a.x - o.x) * (b.y - o.y) - long(a.y - o.y) * (b.x - o.x);
}

/// Andrew monotone chain; returns hull in counter-clockwise order.
inline std::vector<Pt> convex_hull(std::vector<Pt> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Pt> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline bool inside_hull(const std::vector<Pt>& hull, int x, int y) {
  if (hull.size() < 3) return false;
  for (size_t i = 0; i < hull.size(); ++i) {
    const Pt& a = hull[i];
    const Pt& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, {x, y}) < 0) return false;
  }
  return true;
}

}  // namespace baseline_detail

/// Pixels whose HSV lies within the tolerance window, with small 4-connected
/// components removed.  Mask values: 1 in, 0 out.
inline MaskImage segment_block(const RgbImage& rgb, const SegmentationParams& p) {
  p.validate();
  MaskImage mask(rgb.width, rgb.height);
  for (size_t i = 0; i < rgb.pixels.size(); ++i) {
    const Hsv hsv = rgb_to_hsv(rgb.pixels[i]);
    const bool in = baseline_detail::hue_distance(hsv.h, p.target.h) <= p.h_tol &&
                    std::abs(hsv.s - p.target.s) <= p.s_tol &&
                    std::abs(hsv.v - p.target.v) <= p.v_tol;
    mask.pixels[i] = in ? 1 : 0;
  }
  baseline_detail::drop_small_components(mask, p.min_area);
  return mask;
}

/// Locate the hole: pixels inside the mask's convex hull that are deeper than
/// the block-top median by more than half the hole depth (or depth-invalid)
/// are hole candidates; their centroid is deprojected at the top depth.
inline HoleEstimate estimate_hole_center(const MaskImage& mask, const DepthImage& depth,
                                         const CameraIntrinsics& intr,
                                         const Pose& camera,
                                         const SceneGeometry& geometry = {}) {
  if (mask.width != depth.width || mask.height != depth.height)
    throw ShapeMismatchError("mask/depth dims differ");
  using baseline_detail::Pt;

  std::vector<Pt> on;
  std::vector<double> top_depths;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) {
        on.push_back({x, y});
        const float d = depth.at(x, y);
        if (d > 0.0f) top_depths.push_back(double(d));
      }
  if (on.empty()) throw NoBlockError("empty segmentation mask");
  if (top_depths.empty()) throw NoBlockError("no valid depth on the mask");

  auto mid = top_depths.begin() + long(top_depths.size() / 2);
  std::nth_element(top_depths.begin(), mid, top_depths.end());
  const double top_median = *mid;
  const double threshold = top_median + geometry.hole_depth / 2.0;

  const std::vector<Pt> hull = baseline_detail::convex_hull(on);
  int min_x = mask.width, max_x = -1, min_y = mask.height, max_y = -1;
  for (const Pt& q : hull) {
    min_x = std::min(min_x, q.x);
    max_x = std::max(max_x, q.x);
    min_y = std::min(min_y, q.y);
    max_y = std::max(max_y, q.y);
  }

  // Candidate and inside-hull bitmaps over the hull's bounding box.
  const int bw = max_x - min_x + 1;
  const int bh = max_y - min_y + 1;
  std::vector<uint8_t> inside(size_t(bw) * bh, 0);
  std::vector<uint8_t> cand(size_t(bw) * bh, 0);
  for (int y = min_y; y <= max_y; ++y)
    for (int x = min_x; x <= max_x; ++x) {
      const size_t i = size_t(y - min_y) * bw + (x - min_x);
      if (!baseline_detail::inside_hull(hull, x, y)) continue;
      inside[i] = 1;
      const float d = depth.at(x, y);
      cand[i] = (d <= 0.0f || double(d) > threshold) ? 1 : 0;
    }

  // Deep regions reaching the hull boundary are side faces seen at a slant,
  // not the hole: the hole is enclosed by block-top pixels on all sides.
  // Keep the largest candidate component that stays strictly interior.
  std::vector<int> label(size_t(bw) * bh, -1);
  std::vector<Pt> best_comp, comp, stack;
  int next_label = 0;
  for (int sy = 0; sy < bh; ++sy)
    for (int sx = 0; sx < bw; ++sx) {
      const size_t si = size_t(sy) * bw + sx;
      if (!cand[si] || label[si] >= 0) continue;
      comp.clear();
      stack.assign(1, {sx, sy});
      label[si] = next_label;
      bool touches_edge = false;
      while (!stack.empty()) {
        const Pt p = stack.back();
        stack.pop_back();
        comp.push_back(p);
        static constexpr int dx[4] = {1, -1, 0, 0};
        static constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = p.x + dx[k], ny = p.y + dy[k];
          if (nx < 0 || nx >= bw || ny < 0 || ny >= bh) {
            touches_edge = true;
            continue;
          }
          const size_t ni = size_t(ny) * bw + nx;
          if (!inside[ni]) {
            touches_edge = true;
            continue;
          }
          if (cand[ni] && label[ni] < 0) {
            label[ni] = next_label;
            stack.push_back({nx, ny});
          }
        }
      }
      ++next_label;
      if (!touches_edge && comp.size() > best_comp.size()) best_comp = comp;
    }
  if (best_comp.empty()) throw NoHoleError("no interior pixels beyond the top-depth threshold");

  double su = 0, sv = 0;
  for (const Pt& p : best_comp) {
    su += p.x + min_x;
    sv += p.y + min_y;
  }
  const long count = long(best_comp.size());
  const Vec3 cam_pt =
      deproject_pixel(intr, su / double(count), sv / double(count), top_median);
  HoleEstimate est;
  est.center_world = camera.apply(cam_pt);
  const double r_px = geometry.hole_radius * intr.fx / top_median;
  // Plausibility score: 1 when the hole-pixel count matches the projected
  // disc area, falling off for both shortfall (occlusion) and overshoot
  // (contamination, e.g. side faces seen at a slant).
  const double expected = std::max(M_PI * r_px * r_px, 1.0);
  const double ratio = double(count) / expected;
  est.confidence = ratio <= 1.0 ? ratio : 1.0 / ratio;
  return est;
}

struct BaselineParams {
  SegmentationParams segmentation;
  double gain = 1.0;  ///< unit gain = deadbeat; >2 oscillates once unsaturated
  double hover_height = 0.03;       ///< approach target above the hole axis, m
  double lateral_tolerance = 1e-3;  ///< switch to descent below this xy error
  double insertion_depth = 0.010;   ///< in-hole target below the rim, m
  double action_scale = 0.005;      ///< env metres per unit action
  double min_confidence = 0.05;     ///< estimates below this are ignored
  double search_floor = 0.12;       ///< blind-descent stop height without an estimate
  double spiral_radius_step = 4e-4; ///< offset growth per jammed step, m
  double spiral_radius_max = 3.5e-3;///< bounded by the peg/hole diametral clearance
  double spiral_angle_step = 2.4;   ///< rad per jammed step; irrational-ish coverage
  double descend_confidence = 0.5;  ///< minimum estimate quality to commit to descent
  double look_height = 0.07;        ///< camera-over-hole inspection height above the rim
  int look_patience = 40;           ///< in-position look steps before descending anyway
};

/// One proportional-control step toward the estimated hole.  Two phases:
/// hover above the axis until laterally aligned, then descend to the in-hole
/// pose.  Descent also requires a confident estimate -- committing the peg
/// over a poor estimate blocks the camera's view of the hole for the rest of
/// the episode.  The returned action is in [-1,1]^3 env units.
inline Vec3 baseline_step(const HoleEstimate& estimate, const Pose& tip_pose,
                          const BaselineParams& p) {
  const Vec3 tip = tip_pose.position;
  const Vec3 axis = estimate.center_world;
  const double lateral = std::hypot(axis.x() - tip.x(), axis.y() - tip.y());
  Vec3 target = axis;
  if (lateral > p.lateral_tolerance || estimate.confidence < p.descend_confidence)
    target.z() += p.hover_height;
  else
    target.z() -= p.insertion_depth;
  Vec3 action = p.gain * (target - tip) / p.action_scale;
  return action.cwiseMax(-1.0).cwiseMin(1.0);
}

/// Closed-loop visual-servo policy over an Env.  Re-estimates the hole every
/// step from a fresh noise-free render and keeps the best-scoring estimate
/// seen this episode (later ties win, so equally plausible closer views
/// replace coarse far ones).  Low-scoring frames -- e.g. once the descending
/// peg occludes most of the hole disc -- never displace a good estimate.
///
/// Three behaviours beyond plain servoing cover what vision alone cannot:
///  - no estimate yet (the peg can occlude the hole from the home view):
///    descend blind to change the viewing geometry;
///  - weak estimate: a "look" move parks the camera -- not the tip --
///    straight above the estimate.  The eye-in-hand camera is mounted with a
///    lateral offset, so this shifts the dangling peg out of the line of
///    sight and yields an unoccluded nadir view to re-measure from;
///  - descent jams on the rim (estimate bias near the clearance): walk the
///    commanded axis outward in a bounded spiral until the peg drops in.
class BaselineController {
 public:
  explicit BaselineController(BaselineParams params = {}) : params_(params) {}

  const BaselineParams& params() const { return params_; }
  const std::optional<HoleEstimate>& best_estimate() const { return best_; }

  void reset() {
    best_.reset();
    spiral_radius_ = 0.0;
    spiral_angle_ = 0.0;
    prev_tip_z_ = std::numeric_limits<double>::quiet_NaN();
    prev_cmd_z_ = 0.0;
    look_wait_ = 0;
  }

  Vec3 act(const Env& env) {
    RenderRequest req;
    req.intrinsics = env.config().intrinsics;
    req.camera_pose = env.camera_view();
    req.peg_tip = env.tip_pose().position;
    req.block_pose = env.state().block_pose;
    req.block_color = env.state().block_color;
    req.peg_color = env.state().peg_color;
    const RenderResult frame = render(env.config().geometry, req);

    try {
      const MaskImage mask = segment_block(frame.rgb, params_.segmentation);
      const HoleEstimate est =
          estimate_hole_center(mask, frame.depth, req.intrinsics, req.camera_pose,
                               env.config().geometry);
      if (est.confidence >= params_.min_confidence &&
          (!best_ || est.confidence >= best_->confidence))
        best_ = est;
    } catch (const NoBlockError&) {
    } catch (const NoHoleError&) {
    }

    const Vec3 tip = env.tip_pose().position;

    // A strongly commanded descent that made almost no progress means the peg
    // is resting on something solid; grow the spiral.
    if (prev_cmd_z_ < -0.5 && !std::isnan(prev_tip_z_) &&
        prev_tip_z_ - tip.z() < 0.2 * (-prev_cmd_z_) * params_.action_scale) {
      spiral_radius_ =
          std::min(spiral_radius_ + params_.spiral_radius_step, params_.spiral_radius_max);
      spiral_angle_ += params_.spiral_angle_step;
    }

    Vec3 action;
    if (!best_) {
      action = tip.z() > params_.search_floor ? Vec3(0, 0, -1.0) : Vec3::Zero();
    } else if (best_->confidence < params_.descend_confidence &&
               look_wait_ <= params_.look_patience) {
      // Look phase: place the camera straight above the estimate so the peg
      // no longer blocks the view, and wait for a confident re-measurement.
      const Vec3 cam = req.camera_pose.position;
      Vec3 target = best_->center_world;
      target.x() -= cam.x() - tip.x();
      target.y() -= cam.y() - tip.y();
      target.z() += params_.look_height;
      if ((target - tip).head<2>().norm() < 5e-3) ++look_wait_;
      action = (params_.gain * (target - tip) / params_.action_scale)
                   .cwiseMax(-1.0)
                   .cwiseMin(1.0);
    } else {
      HoleEstimate shifted = *best_;
      shifted.center_world.x() += spiral_radius_ * std::cos(spiral_angle_);
      shifted.center_world.y() += spiral_radius_ * std::sin(spiral_angle_);
      if (look_wait_ > params_.look_patience) shifted.confidence = 1.0;
      action = baseline_step(shifted, env.tip_pose(), params_);
    }
    prev_tip_z_ = tip.z();
    prev_cmd_z_ = action.z();
    return action;
  }

 private:
  BaselineParams params_;
  std::optional<HoleEstimate> best_;
  double spiral_radius_ = 0.0;
  double spiral_angle_ = 0.0;
  double prev_tip_z_ = std::numeric_limits<double>::quiet_NaN();
  double prev_cmd_z_ = 0.0;
  int look_wait_ = 0;
};

}  // namespace phrl
