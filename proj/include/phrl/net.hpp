#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phrl/core.hpp"

namespace phrl {

// Minimal dense/conv network stack used by the RL agents.  Batches are stored
// column-wise: a batch of B vectors of dimension D is a D x B matrix.  The
// scalar type is a template parameter so the same code runs in float for
// training and in double for finite-difference gradient checks.

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class Act : uint8_t { None, Relu, Tanh };

/// One conv layer of an image encoder.
struct ConvSpec {
  uint32_t out_channels = 0;
  uint32_t kernel = 3;
  uint32_t stride = 2;
  bool operator==(const ConvSpec&) const = default;
};

/// Architecture description; serialized into checkpoints.
struct NetSpec {
  std::vector<ConvSpec> conv;     ///< encoder stack, empty = no image input
  std::vector<uint32_t> trunk;    ///< hidden widths of the MLP heads

  bool operator==(const NetSpec&) const = default;

  static NetSpec defaults() {
    return {{{16, 3, 2}, {32, 3, 2}, {32, 3, 2}}, {256, 256}};
  }
};

namespace net_detail {

/// Fan-in uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)), gain 1.
template <class M>
void init_fan_in(M& w, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w.data()[i] = static_cast<typename M::Scalar>(rng.uniform(-bound, bound));
}

}  // namespace net_detail

/// Flat view of one parameter tensor and its gradient.
template <class S>
struct ParamRef {
  S* value = nullptr;
  S* grad = nullptr;
  Eigen::Index size = 0;
  std::vector<uint32_t> dims;  ///< logical shape, for serialization
};

template <class S>
struct DenseLayer {
  MatX<S> W, gW;
  VecX<S> b, gb;
  Act act = Act::None;

  MatX<S> x_cache;  // input
  MatX<S> y_cache;  // post-activation output (used by activation grads)

  DenseLayer() = default;
  DenseLayer(int out, int in, Act a, Rng& rng) : act(a) {
    W.resize(out, in);
    b = VecX<S>::Zero(out);
    net_detail::init_fan_in(W, in, rng);
    net_detail::init_fan_in(b, in, rng);
    gW = MatX<S>::Zero(out, in);
    gb = VecX<S>::Zero(out);
  }

  MatX<S> forward(const MatX<S>& x) {
    if (x.rows() != W.cols())
      throw ShapeMismatchError("dense input rows " + std::to_string(x.rows()) +
                               " != " + std::to_string(W.cols()));
    x_cache = x;
    MatX<S> y = (W * x).colwise() + b;
    switch (act) {
      case Act::None: break;
      case Act::Relu: y = y.cwiseMax(S(0)); break;
      case Act::Tanh: y = y.array().tanh().matrix(); break;
    }
    y_cache = y;
    return y;
  }

  /// Returns dL/dx; accumulates dL/dW, dL/db unless accumulate=false.
  MatX<S> backward(const MatX<S>& dy_in, bool accumulate = true) {
    MatX<S> dy = dy_in;
    switch (act) {
      case Act::None: break;
      case Act::Relu:
        dy = (y_cache.array() > S(0)).template cast<S>() * dy.array();
        break;
      case Act::Tanh:
        dy = (S(1) - y_cache.array().square()) * dy.array();
        break;
    }
    if (accumulate) {
      gW.noalias() += dy * x_cache.transpose();
      gb += dy.rowwise().sum();
    }
    return W.transpose() * dy;
  }

  void collect(std::vector<ParamRef<S>>& out) {
    out.push_back({W.data(), gW.data(), W.size(),
                   {static_cast<uint32_t>(W.rows()), static_cast<uint32_t>(W.cols())}});
    out.push_back({b.data(), gb.data(), b.size(), {static_cast<uint32_t>(b.size())}});
  }
};

/// MLP: a chain of dense layers.  Widths = {in, h1, ..., out}.
template <class S>
class Mlp {
 public:
  Mlp() = default;
  /// Hidden layers get `hidden_act`, the last layer `out_act`.
  Mlp(const std::vector<int>& widths, Act hidden_act, Act out_act, Rng& rng) {
    for (size_t i = 0; i + 1 < widths.size(); ++i) {
      const bool last = i + 2 == widths.size();
      layers_.emplace_back(widths[i + 1], widths[i], last ? out_act : hidden_act, rng);
    }
  }

  MatX<S> forward(const MatX<S>& x) {
    MatX<S> h = x;
    for (auto& l : layers_) h = l.forward(h);
    return h;
  }

  MatX<S> backward(const MatX<S>& dy, bool accumulate = true) {
    MatX<S> d = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      d = it->backward(d, accumulate);
    return d;
  }

  int in_dim() const { return layers_.empty() ? 0 : int(layers_.front().W.cols()); }
  int out_dim() const { return layers_.empty() ? 0 : int(layers_.back().W.rows()); }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    for (auto& l : layers_) l.collect(out);
    return out;
  }

  std::vector<DenseLayer<S>>& layers() { return layers_; }

 private:
  std::vector<DenseLayer<S>> layers_;
};

template <class S>
struct ConvLayer {
  int in_c = 0, out_c = 0, kernel = 3, stride = 2, pad = 1;
  MatX<S> W, gW;  // out_c x (in_c*k*k)
  VecX<S> b, gb;

  ConvLayer() = default;
  ConvLayer(int in_channels, const ConvSpec& spec, Rng& rng)
      : in_c(in_channels),
        out_c(int(spec.out_channels)),
        kernel(int(spec.kernel)),
        stride(int(spec.stride)),
        pad(int(spec.kernel) / 2) {
    const int fan_in = in_c * kernel * kernel;
    W.resize(out_c, fan_in);
    b = VecX<S>::Zero(out_c);
    net_detail::init_fan_in(W, fan_in, rng);
    net_detail::init_fan_in(b, fan_in, rng);
    gW = MatX<S>::Zero(out_c, fan_in);
    gb = VecX<S>::Zero(out_c);
  }

  int out_h(int h) const { return (h + 2 * pad - kernel) / stride + 1; }
  int out_w(int w) const { return (w + 2 * pad - kernel) / stride + 1; }
};

/// Conv encoder: conv stack with ReLU after every layer, output flattened.
/// Sample layout within a column: channel-major, index = c*H*W + y*W + x.
template <class S>
class ConvNet {
 public:
  ConvNet() = default;
  ConvNet(int in_channels, int in_h, int in_w, const std::vector<ConvSpec>& specs,
          Rng& rng)
      : in_c_(in_channels), in_h_(in_h), in_w_(in_w) {
    int c = in_channels, h = in_h, w = in_w;
    for (const auto& s : specs) {
      layers_.emplace_back(c, s, rng);
      h = layers_.back().out_h(h);
      w = layers_.back().out_w(w);
      c = layers_.back().out_c;
      shapes_.push_back({c, h, w});
    }
    out_dim_ = c * h * w;
  }

  int out_dim() const { return out_dim_; }
  int in_dim() const { return in_c_ * in_h_ * in_w_; }
  bool empty() const { return layers_.empty(); }

  MatX<S> forward(const MatX<S>& x) {
    if (x.rows() != in_dim())
      throw ShapeMismatchError("conv input rows " + std::to_string(x.rows()) +
                               " != " + std::to_string(in_dim()));
    const Eigen::Index batch = x.cols();
    cols_cache_.assign(layers_.size(), {});
    relu_cache_.assign(layers_.size(), {});
    MatX<S> cur = x;
    int c = in_c_, h = in_h_, w = in_w_;
    for (size_t li = 0; li < layers_.size(); ++li) {
      auto& L = layers_[li];
      const int oh = L.out_h(h), ow = L.out_w(w);
      const int n = oh * ow, k2 = L.in_c * L.kernel * L.kernel;
      MatX<S> next(L.out_c * n, batch);
      cols_cache_[li].resize(size_t(batch));
      for (Eigen::Index s = 0; s < batch; ++s) {
        MatX<S> cols(k2, n);
        im2col(cur.col(s).data(), c, h, w, L, cols);
        MatX<S> y = (L.W * cols).colwise() + L.b;  // out_c x n
        // flatten channel-major: flat[oc*n + o] = y(oc, o)
        Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            next.col(s).data(), L.out_c, n) = y;
        cols_cache_[li][size_t(s)] = std::move(cols);
      }
      next = next.cwiseMax(S(0));  // ReLU
      relu_cache_[li] = next;
      cur = std::move(next);
      c = L.out_c; h = oh; w = ow;
    }
    return cur;
  }

  MatX<S> backward(const MatX<S>& dfeat, bool accumulate = true) {
    const Eigen::Index batch = dfeat.cols();
    MatX<S> d = dfeat;
    for (size_t li = layers_.size(); li-- > 0;) {
      auto& L = layers_[li];
      d = (relu_cache_[li].array() > S(0)).template cast<S>() * d.array();
      const auto [oc, oh, ow] = shapes_[li];
      const int n = oh * ow;
      const int ih = li == 0 ? in_h_ : std::get<1>(shapes_[li - 1]);
      const int iw = li == 0 ? in_w_ : std::get<2>(shapes_[li - 1]);
      MatX<S> dprev(L.in_c * ih * iw, batch);
      for (Eigen::Index s = 0; s < batch; ++s) {
        Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            dy(d.col(s).data(), oc, n);
        if (accumulate) {
          L.gW.noalias() += dy * cols_cache_[li][size_t(s)].transpose();
          L.gb += dy.rowwise().sum();
        }
        MatX<S> dcols = L.W.transpose() * dy;  // k2 x n
        col2im(dcols, L.in_c, ih, iw, L, dprev.col(s).data());
      }
      d = std::move(dprev);
    }
    return d;
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    for (auto& L : layers_) {
      out.push_back({L.W.data(), L.gW.data(), L.W.size(),
                     {uint32_t(L.out_c), uint32_t(L.in_c), uint32_t(L.kernel),
                      uint32_t(L.kernel)}});
      out.push_back({L.b.data(), L.gb.data(), L.b.size(), {uint32_t(L.out_c)}});
    }
    return out;
  }

  std::vector<ConvLayer<S>>& layers() { return layers_; }

 private:
  static void im2col(const S* img, int c, int h, int w, const ConvLayer<S>& L,
                     MatX<S>& cols) {
    const int oh = L.out_h(h), ow = L.out_w(w);
    Eigen::Index r = 0;
    for (int ch = 0; ch < c; ++ch)
      for (int ky = 0; ky < L.kernel; ++ky)
        for (int kx = 0; kx < L.kernel; ++kx, ++r) {
          Eigen::Index o = 0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * L.stride + ky - L.pad;
            for (int ox = 0; ox < ow; ++ox, ++o) {
              const int ix = ox * L.stride + kx - L.pad;
              cols(r, o) = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                               ? img[ch * h * w + iy * w + ix]
                               : S(0);
            }
          }
        }
  }

  static void col2im(const MatX<S>& dcols, int c, int h, int w,
                     const ConvLayer<S>& L, S* dimg) {
    std::fill(dimg, dimg + Eigen::Index(c) * h * w, S(0));
    const int oh = L.out_h(h), ow = L.out_w(w);
    Eigen::Index r = 0;
    for (int ch = 0; ch < c; ++ch)
      for (int ky = 0; ky < L.kernel; ++ky)
        for (int kx = 0; kx < L.kernel; ++kx, ++r) {
          Eigen::Index o = 0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * L.stride + ky - L.pad;
            for (int ox = 0; ox < ow; ++ox, ++o) {
              const int ix = ox * L.stride + kx - L.pad;
              if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                dimg[ch * h * w + iy * w + ix] += dcols(r, o);
            }
          }
        }
  }

  int in_c_ = 0, in_h_ = 0, in_w_ = 0, out_dim_ = 0;
  std::vector<ConvLayer<S>> layers_;
  std::vector<std::tuple<int, int, int>> shapes_;        // (c,h,w) after each layer
  std::vector<std::vector<MatX<S>>> cols_cache_;         // per layer, per sample
  std::vector<MatX<S>> relu_cache_;
};

/// Zero all gradients referenced by `ps`.
template <class S>
void zero_grads(const std::vector<ParamRef<S>>& ps) {
  for (const auto& p : ps) std::fill(p.grad, p.grad + p.size, S(0));
}

/// In-place Polyak average: dst = tau*src + (1-tau)*dst, elementwise.
template <class S>
void polyak_update(const std::vector<ParamRef<S>>& dst,
                   const std::vector<ParamRef<S>>& src, S tau) {
  if (dst.size() != src.size()) throw ShapeMismatchError("polyak: param count");
  for (size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].size != src[i].size) throw ShapeMismatchError("polyak: tensor size");
    for (Eigen::Index j = 0; j < dst[i].size; ++j)
      dst[i].value[j] = tau * src[i].value[j] + (S(1) - tau) * dst[i].value[j];
  }
}

/// Copy src params into dst.
template <class S>
void copy_params(const std::vector<ParamRef<S>>& dst,
                 const std::vector<ParamRef<S>>& src) {
  if (dst.size() != src.size()) throw ShapeMismatchError("copy: param count");
  for (size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].size != src[i].size) throw ShapeMismatchError("copy: tensor size");
    std::copy(src[i].value, src[i].value + src[i].size, dst[i].value);
  }
}

/// Adam with bias correction; binds to a fixed parameter list.
template <class S>
class Adam {
 public:
  Adam() = default;
  explicit Adam(const std::vector<ParamRef<S>>& ps, double lr = 3e-4,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    Eigen::Index total = 0;
    for (const auto& p : ps) total += p.size;
    m_ = VecX<S>::Zero(total);
    v_ = VecX<S>::Zero(total);
  }

  /// One update over the bound parameters; gradients are left untouched.
  void step(const std::vector<ParamRef<S>>& ps) {
    ++t_;
    const S c1 = S(1.0 - std::pow(beta1_, t_));
    const S c2 = S(1.0 - std::pow(beta2_, t_));
    const S b1 = S(beta1_), b2 = S(beta2_), lr = S(lr_), eps = S(eps_);
    Eigen::Index off = 0;
    for (const auto& p : ps) {
      for (Eigen::Index j = 0; j < p.size; ++j) {
        S& m = m_[off + j];
        S& v = v_[off + j];
        const S g = p.grad[j];
        m = b1 * m + (S(1) - b1) * g;
        v = b2 * v + (S(1) - b2) * g * g;
        p.value[j] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
      }
      off += p.size;
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  int64_t t() const { return t_; }

 private:
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
  VecX<S> m_, v_;
};

}  // namespace phrl
