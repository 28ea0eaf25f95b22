#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "phrl/core.hpp"
#include "phrl/env.hpp"
#include "phrl/net.hpp"

namespace phrl {

/// One environment step as seen by the learner.  `terminated` is the
/// bootstrapping mask: true only for real task termination, not truncation.
struct Transition {
  Observation obs;
  std::array<float, 3> action{};
  float reward = 0.0f;
  Observation next_obs;
  bool terminated = false;
};

/// Sampled minibatch, column-per-transition.  Image blocks are empty when the
/// observations carry no image.
template <class S>
struct Batch {
  MatX<S> obs_image, obs_proprio;
  MatX<S> next_image, next_proprio;
  MatX<S> action;
  VecX<S> reward;
  VecX<S> not_done;  ///< 1 - terminated
};

/// Fixed-capacity FIFO ring with compressed observation storage (image
/// channels quantized to u16, proprio kept as float).  Sampling is uniform
/// with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
  }

  size_t capacity() const { return capacity_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  void push(const Transition& t) {
    Record r;
    encode_obs(t.obs, r.img, r.prop, r.w, r.h, r.c);
    encode_obs(t.next_obs, r.next_img, r.next_prop, r.w, r.h, r.c);
    r.action = t.action;
    r.reward = t.reward;
    r.terminated = t.terminated;
    if (data_.size() < capacity_) {
      data_.push_back(std::move(r));
    } else {
      data_[cursor_] = std::move(r);
      cursor_ = (cursor_ + 1) % capacity_;
    }
  }

  /// Decode the i-th stored transition (storage order).
  Transition get(size_t i) const {
    const Record& r = data_.at(i);
    Transition t;
    t.obs = decode_obs(r.img, r.prop, r.w, r.h, r.c);
    t.next_obs = decode_obs(r.next_img, r.next_prop, r.w, r.h, r.c);
    t.action = r.action;
    t.reward = r.reward;
    t.terminated = r.terminated;
    return t;
  }

  template <class S>
  Batch<S> sample(int n, Rng& rng) const {
    if (data_.empty()) throw EmptyBufferError("sampling from empty replay buffer");
    const Record& first = data_.front();
    const Eigen::Index img_dim = Eigen::Index(first.img.size());
    const Eigen::Index prop_dim = Eigen::Index(first.prop.size());
    Batch<S> b;
    b.obs_image.resize(img_dim, n);
    b.next_image.resize(img_dim, n);
    b.obs_proprio.resize(prop_dim, n);
    b.next_proprio.resize(prop_dim, n);
    b.action.resize(3, n);
    b.reward.resize(n);
    b.not_done.resize(n);
    for (int j = 0; j < n; ++j) {
      const Record& r = data_[size_t(rng.uniform_int(0, int(data_.size()) - 1))];
      for (Eigen::Index k = 0; k < img_dim; ++k) {
        b.obs_image(k, j) = S(r.img[size_t(k)]) / S(65535);
        b.next_image(k, j) = S(r.next_img[size_t(k)]) / S(65535);
      }
      for (Eigen::Index k = 0; k < prop_dim; ++k) {
        b.obs_proprio(k, j) = S(r.prop[size_t(k)]);
        b.next_proprio(k, j) = S(r.next_prop[size_t(k)]);
      }
      for (int k = 0; k < 3; ++k) b.action(k, j) = S(r.action[size_t(k)]);
      b.reward[j] = S(r.reward);
      b.not_done[j] = r.terminated ? S(0) : S(1);
    }
    return b;
  }

 private:
  struct Record {
    std::vector<uint16_t> img, next_img;
    std::vector<float> prop, next_prop;
    int w = 0, h = 0, c = 0;
    std::array<float, 3> action{};
    float reward = 0.0f;
    bool terminated = false;
  };

  static void encode_obs(const Observation& o, std::vector<uint16_t>& img,
                         std::vector<float>& prop, int& w, int& h, int& c) {
    if (o.image) {
      w = o.image->width;
      h = o.image->height;
      c = o.image->channels;
      img.resize(o.image->data.size());
      for (size_t i = 0; i < img.size(); ++i) {
        const float v = std::fmin(1.0f, std::fmax(0.0f, o.image->data[i]));
        img[i] = uint16_t(std::lround(v * 65535.0f));
      }
    }
    prop = o.proprio;
  }

  static Observation decode_obs(const std::vector<uint16_t>& img,
                                const std::vector<float>& prop, int w, int h, int c) {
    Observation o;
    if (!img.empty()) {
      o.image.emplace(w, h, c);
      for (size_t i = 0; i < img.size(); ++i)
        o.image->data[i] = float(img[i]) / 65535.0f;
    }
    o.proprio = prop;
    return o;
  }

  size_t capacity_;
  size_t cursor_ = 0;
  std::vector<Record> data_;
};

}  // namespace phrl
