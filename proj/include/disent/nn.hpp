#pragma once

// Minimal feed-forward layer library with hand-written backward passes.
//
// Parameters live in an ordered ParameterSet of named float tensors; layers
// hold only indices into it, so forward/backward are const and a model can
// be evaluated concurrently on distinct tapes. Spatial activations use a
// channel-major CNHW layout so a whole batch is one GEMM per layer.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "disent/rng.hpp"

namespace disent::nn {

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using ParameterSet = std::vector<Tensor>;

/// Same names and shapes as `params`, all values zero.
ParameterSet zeros_like(const ParameterSet& params);
void fill_zero(ParameterSet& params);
bool all_finite(const ParameterSet& params);

/// Batch activation. Flat activations are n x features (row-major);
/// spatial activations are channels x n x height x width.
struct Activation {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 1;
  std::size_t w = 1;
  bool spatial = false;
  std::vector<float> data;

  std::size_t features() const { return c * h * w; }
  static Activation flat(std::size_t n, std::size_t features);
  static Activation image(std::size_t c, std::size_t n, std::size_t h, std::size_t w);
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual void forward(const ParameterSet& params, const Activation& in,
                       Activation& out) const = 0;
  /// Accumulates parameter gradients into `grads`; writes d(in) when `din` is non-null.
  virtual void backward(const ParameterSet& params, const Activation& in, const Activation& out,
                        const Activation& dout, Activation* din, ParameterSet& grads) const = 0;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialised weights and biases.
class Linear final : public Layer {
 public:
  Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
         Rng& init);
  void forward(const ParameterSet& params, const Activation& in, Activation& out) const override;
  void backward(const ParameterSet& params, const Activation& in, const Activation& out,
                const Activation& dout, Activation* din, ParameterSet& grads) const override;

  std::size_t weight_index() const { return weight_; }
  std::size_t bias_index() const { return bias_; }

 private:
  std::size_t in_, out_, weight_, bias_;
};

/// Kernel 4, stride 2, padding 1: halves the spatial size.
class Conv2d final : public Layer {
 public:
  Conv2d(ParameterSet& params, const std::string& name, std::size_t in_channels,
         std::size_t out_channels, Rng& init);
  void forward(const ParameterSet& params, const Activation& in, Activation& out) const override;
  void backward(const ParameterSet& params, const Activation& in, const Activation& out,
                const Activation& dout, Activation* din, ParameterSet& grads) const override;

 private:
  std::size_t cin_, cout_, weight_, bias_;
};

/// Transposed kernel 4, stride 2, padding 1: doubles the spatial size.
class ConvTranspose2d final : public Layer {
 public:
  ConvTranspose2d(ParameterSet& params, const std::string& name, std::size_t in_channels,
                  std::size_t out_channels, Rng& init);
  void forward(const ParameterSet& params, const Activation& in, Activation& out) const override;
  void backward(const ParameterSet& params, const Activation& in, const Activation& out,
                const Activation& dout, Activation* din, ParameterSet& grads) const override;

 private:
  std::size_t cin_, cout_, weight_, bias_;
};

class LeakyRelu final : public Layer {
 public:
  explicit LeakyRelu(float slope) : slope_(slope) {}
  void forward(const ParameterSet& params, const Activation& in, Activation& out) const override;
  void backward(const ParameterSet& params, const Activation& in, const Activation& out,
                const Activation& dout, Activation* din, ParameterSet& grads) const override;

 private:
  float slope_;
};

/// CNHW image -> n x (c*h*w) rows.
class Flatten final : public Layer {
 public:
  void forward(const ParameterSet& params, const Activation& in, Activation& out) const override;
  void backward(const ParameterSet& params, const Activation& in, const Activation& out,
                const Activation& dout, Activation* din, ParameterSet& grads) const override;
};

/// n x (c*h*w) rows -> CNHW image.
class Unflatten final : public Layer {
 public:
  Unflatten(std::size_t c, std::size_t h, std::size_t w) : c_(c), h_(h), w_(w) {}
  void forward(const ParameterSet& params, const Activation& in, Activation& out) const override;
  void backward(const ParameterSet& params, const Activation& in, const Activation& out,
                const Activation& dout, Activation* din, ParameterSet& grads) const override;

 private:
  std::size_t c_, h_, w_;
};

/// Intermediate activations of one forward pass; activations[0] is the input.
struct Tape {
  std::vector<Activation> activations;
  const Activation& output() const { return activations.back(); }
};

class Sequential {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }

  void forward(const ParameterSet& params, Activation input, Tape& tape) const;
  /// Back-propagates `dout` through the tape. Returns d(input) if requested.
  void backward(const ParameterSet& params, const Tape& tape, Activation dout,
                ParameterSet& grads, Activation* dinput = nullptr) const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// im2col for a 4x4 / stride 2 / padding 1 window over a CNHW source of
// spatial size (h, w). Output rows are (channel, ky, kx), columns
// (n, oy, ox) with oy < h/2, ox < w/2.
void im2col(const float* src, std::size_t c, std::size_t n, std::size_t h, std::size_t w,
            float* col);
/// Adjoint of im2col: accumulates columns back into dst.
void col2im(const float* col, std::size_t c, std::size_t n, std::size_t h, std::size_t w,
            float* dst);

/// Same, restricted to images [n0, n0 + nb) of an n-image source.
void im2col(const float* src, std::size_t c, std::size_t n, std::size_t n0, std::size_t nb,
            std::size_t h, std::size_t w, float* col);
void col2im(const float* col, std::size_t c, std::size_t n, std::size_t n0, std::size_t nb,
            std::size_t h, std::size_t w, float* dst);

}  // namespace disent::nn
