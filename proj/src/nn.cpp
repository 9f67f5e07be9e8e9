#include "disent/nn.hpp"

#include <algorithm>
#include <cmath>

#include "disent/errors.hpp"
#include "disent/simd/kernels.hpp"

namespace disent::nn {
namespace {

constexpr std::size_t kKernel = 4;
constexpr std::size_t kWindow = kKernel * kKernel;

std::vector<float>& scratch() {
  thread_local std::vector<float> buffer;
  return buffer;
}

std::size_t add_uniform_tensor(ParameterSet& params, std::string name,
                               std::vector<std::size_t> shape, std::size_t fan_in, Rng& init) {
  std::size_t count = 1;
  for (auto s : shape) count *= s;
  Tensor t{std::move(name), std::move(shape), std::vector<float>(count)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values) v = static_cast<float>((2.0 * init.uniform() - 1.0) * bound);
  params.push_back(std::move(t));
  return params.size() - 1;
}

void reshape_like(Activation& out, std::size_t c, std::size_t n, std::size_t h, std::size_t w,
                  bool spatial) {
  out.c = c;
  out.n = n;
  out.h = h;
  out.w = w;
  out.spatial = spatial;
  out.data.resize(c * n * h * w);
}

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace

ParameterSet zeros_like(const ParameterSet& params) {
  ParameterSet out = params;
  fill_zero(out);
  return out;
}

void fill_zero(ParameterSet& params) {
  for (auto& t : params) std::fill(t.values.begin(), t.values.end(), 0.0f);
}

bool all_finite(const ParameterSet& params) {
  for (const auto& t : params)
    for (float v : t.values)
      if (!std::isfinite(v)) return false;
  return true;
}

Activation Activation::flat(std::size_t n, std::size_t features) {
  Activation a;
  reshape_like(a, features, n, 1, 1, false);
  return a;
}

Activation Activation::image(std::size_t c, std::size_t n, std::size_t h, std::size_t w) {
  Activation a;
  reshape_like(a, c, n, h, w, true);
  return a;
}

void im2col(const float* src, std::size_t c, std::size_t n, std::size_t h, std::size_t w,
            float* col) {
  im2col(src, c, n, 0, n, h, w, col);
}

void im2col(const float* src, std::size_t c, std::size_t n, std::size_t n0, std::size_t nb,
            std::size_t h, std::size_t w, float* col) {
  const std::size_t ho = h / 2, wo = w / 2;
  const std::size_t cols = nb * ho * wo;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        float* row = col + ((ci * kKernel + ky) * kKernel + kx) * cols;
        // Column x = 2*ox + kx - 1; only the first (kx == 0) or last (kx == 3) tap
        // can fall into the padding.
        const std::size_t lo = kx == 0 ? 1 : 0;
        const std::size_t hi = kx == kKernel - 1 ? wo - 1 : wo;
        for (std::size_t ni = 0; ni < nb; ++ni) {
          const float* plane = src + (ci * n + n0 + ni) * h * w;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            float* dst = row + (ni * ho + oy) * wo;
            const long iy = static_cast<long>(oy * 2 + ky) - 1;
            if (iy < 0 || iy >= static_cast<long>(h)) {
              std::fill(dst, dst + wo, 0.0f);
              continue;
            }
            const float* line = plane + static_cast<std::size_t>(iy) * w + kx;
            if (lo) dst[0] = 0.0f;
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = line[2 * ox - 1];
            if (hi < wo) dst[wo - 1] = 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, std::size_t c, std::size_t n, std::size_t h, std::size_t w,
            float* dst) {
  col2im(col, c, n, 0, n, h, w, dst);
}

void col2im(const float* col, std::size_t c, std::size_t n, std::size_t n0, std::size_t nb,
            std::size_t h, std::size_t w, float* dst) {
  const std::size_t ho = h / 2, wo = w / 2;
  const std::size_t cols = nb * ho * wo;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        const float* row = col + ((ci * kKernel + ky) * kKernel + kx) * cols;
        const std::size_t lo = kx == 0 ? 1 : 0;
        const std::size_t hi = kx == kKernel - 1 ? wo - 1 : wo;
        for (std::size_t ni = 0; ni < nb; ++ni) {
          float* plane = dst + (ci * n + n0 + ni) * h * w;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const long iy = static_cast<long>(oy * 2 + ky) - 1;
            if (iy < 0 || iy >= static_cast<long>(h)) continue;
            const float* src = row + (ni * ho + oy) * wo;
            float* line = plane + static_cast<std::size_t>(iy) * w + kx;
            for (std::size_t ox = lo; ox < hi; ++ox) line[2 * ox - 1] += src[ox];
          }
        }
      }
    }
  }
}

namespace {

// Images per im2col block, sized so one column block stays around 1 MiB.
std::size_t chunk_images(std::size_t depth, std::size_t cols_per_image, std::size_t n) {
  constexpr std::size_t kTargetFloats = 1 << 18;
  const std::size_t per = std::max<std::size_t>(1, kTargetFloats / (depth * cols_per_image));
  return std::min(per, n);
}

void add_channel_bias(const float* b, std::size_t c, std::size_t plane, float* data) {
  for (std::size_t co = 0; co < c; ++co) {
    float* row = data + co * plane;
    for (std::size_t j = 0; j < plane; ++j) row[j] += b[co];
  }
}

}  // namespace

// ---------------------------------------------------------------- Linear

Linear::Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
               Rng& init)
    : in_(in), out_(out) {
  weight_ = add_uniform_tensor(params, name + ".weight", {out, in}, in, init);
  bias_ = add_uniform_tensor(params, name + ".bias", {out}, in, init);
}

void Linear::forward(const ParameterSet& params, const Activation& in, Activation& out) const {
  require(!in.spatial && in.features() == in_, "linear layer input width mismatch");
  reshape_like(out, out_, in.n, 1, 1, false);
  const auto& k = simd::kernels();
  k.gemm(false, true, in.n, out_, in_, 1.0f, in.data.data(), in_,
         params[weight_].values.data(), in_, 0.0f, out.data.data(), out_);
  const float* b = params[bias_].values.data();
  for (std::size_t i = 0; i < in.n; ++i) k.axpy(out_, 1.0f, b, out.data.data() + i * out_);
}

void Linear::backward(const ParameterSet& params, const Activation& in, const Activation&,
                      const Activation& dout, Activation* din, ParameterSet& grads) const {
  const auto& k = simd::kernels();
  k.gemm(true, false, out_, in_, in.n, 1.0f, dout.data.data(), out_, in.data.data(), in_, 1.0f,
         grads[weight_].values.data(), in_);
  float* db = grads[bias_].values.data();
  for (std::size_t i = 0; i < in.n; ++i) k.axpy(out_, 1.0f, dout.data.data() + i * out_, db);
  if (din) {
    reshape_like(*din, in_, in.n, 1, 1, false);
    k.gemm(false, false, in.n, in_, out_, 1.0f, dout.data.data(), out_,
           params[weight_].values.data(), in_, 0.0f, din->data.data(), in_);
  }
}

// ---------------------------------------------------------------- Conv2d
//
// Activations are CNHW, so the columns of one channel row for images
// [n0, n0 + nb) form a contiguous slice; each GEMM works on one such block.

Conv2d::Conv2d(ParameterSet& params, const std::string& name, std::size_t in_channels,
               std::size_t out_channels, Rng& init)
    : cin_(in_channels), cout_(out_channels) {
  weight_ = add_uniform_tensor(params, name + ".weight", {cout_, cin_, kKernel, kKernel},
                               cin_ * kWindow, init);
  bias_ = add_uniform_tensor(params, name + ".bias", {cout_}, cin_ * kWindow, init);
}

void Conv2d::forward(const ParameterSet& params, const Activation& in, Activation& out) const {
  require(in.spatial && in.c == cin_ && in.h % 2 == 0 && in.w % 2 == 0,
          "conv layer input shape mismatch");
  const std::size_t ho = in.h / 2, wo = in.w / 2, per_image = ho * wo;
  const std::size_t cols = in.n * per_image;
  const std::size_t depth = cin_ * kWindow;
  const std::size_t chunk = chunk_images(depth, per_image, in.n);
  auto& col = scratch();
  col.resize(depth * chunk * per_image);
  reshape_like(out, cout_, in.n, ho, wo, true);
  const auto& k = simd::kernels();
  for (std::size_t n0 = 0; n0 < in.n; n0 += chunk) {
    const std::size_t nb = std::min(chunk, in.n - n0);
    const std::size_t bcols = nb * per_image;
    im2col(in.data.data(), cin_, in.n, n0, nb, in.h, in.w, col.data());
    k.gemm(false, false, cout_, bcols, depth, 1.0f, params[weight_].values.data(), depth,
           col.data(), bcols, 0.0f, out.data.data() + n0 * per_image, cols);
  }
  add_channel_bias(params[bias_].values.data(), cout_, cols, out.data.data());
}

void Conv2d::backward(const ParameterSet& params, const Activation& in, const Activation&,
                      const Activation& dout, Activation* din, ParameterSet& grads) const {
  const std::size_t ho = in.h / 2, wo = in.w / 2, per_image = ho * wo;
  const std::size_t cols = in.n * per_image;
  const std::size_t depth = cin_ * kWindow;
  const std::size_t chunk = chunk_images(depth, per_image, in.n);
  auto& col = scratch();
  col.resize(depth * chunk * per_image);
  const auto& k = simd::kernels();
  float* db = grads[bias_].values.data();
  for (std::size_t co = 0; co < cout_; ++co)
    db[co] += static_cast<float>(k.sum(dout.data.data() + co * cols, cols));
  if (din) {
    reshape_like(*din, cin_, in.n, in.h, in.w, true);
    std::fill(din->data.begin(), din->data.end(), 0.0f);
  }
  for (std::size_t n0 = 0; n0 < in.n; n0 += chunk) {
    const std::size_t nb = std::min(chunk, in.n - n0);
    const std::size_t bcols = nb * per_image;
    const float* dblock = dout.data.data() + n0 * per_image;
    im2col(in.data.data(), cin_, in.n, n0, nb, in.h, in.w, col.data());
    k.gemm(false, true, cout_, depth, bcols, 1.0f, dblock, cols, col.data(), bcols, 1.0f,
           grads[weight_].values.data(), depth);
    if (din) {
      k.gemm(true, false, depth, bcols, cout_, 1.0f, params[weight_].values.data(), depth,
             dblock, cols, 0.0f, col.data(), bcols);
      col2im(col.data(), cin_, in.n, n0, nb, in.h, in.w, din->data.data());
    }
  }
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(ParameterSet& params, const std::string& name,
                                 std::size_t in_channels, std::size_t out_channels, Rng& init)
    : cin_(in_channels), cout_(out_channels) {
  weight_ = add_uniform_tensor(params, name + ".weight", {cin_, cout_, kKernel, kKernel},
                               cout_ * kWindow, init);
  bias_ = add_uniform_tensor(params, name + ".bias", {cout_}, cout_ * kWindow, init);
}

void ConvTranspose2d::forward(const ParameterSet& params, const Activation& in,
                              Activation& out) const {
  require(in.spatial && in.c == cin_, "transposed conv input shape mismatch");
  const std::size_t per_image = in.h * in.w;
  const std::size_t cols = in.n * per_image;
  const std::size_t depth = cout_ * kWindow;
  const std::size_t chunk = chunk_images(depth, per_image, in.n);
  auto& col = scratch();
  col.resize(depth * chunk * per_image);
  reshape_like(out, cout_, in.n, in.h * 2, in.w * 2, true);
  std::fill(out.data.begin(), out.data.end(), 0.0f);
  const auto& k = simd::kernels();
  for (std::size_t n0 = 0; n0 < in.n; n0 += chunk) {
    const std::size_t nb = std::min(chunk, in.n - n0);
    const std::size_t bcols = nb * per_image;
    k.gemm(true, false, depth, bcols, cin_, 1.0f, params[weight_].values.data(), depth,
           in.data.data() + n0 * per_image, cols, 0.0f, col.data(), bcols);
    col2im(col.data(), cout_, in.n, n0, nb, out.h, out.w, out.data.data());
  }
  add_channel_bias(params[bias_].values.data(), cout_, in.n * out.h * out.w, out.data.data());
}

void ConvTranspose2d::backward(const ParameterSet& params, const Activation& in,
                               const Activation& out, const Activation& dout, Activation* din,
                               ParameterSet& grads) const {
  const std::size_t per_image = in.h * in.w;
  const std::size_t cols = in.n * per_image;
  const std::size_t depth = cout_ * kWindow;
  const std::size_t chunk = chunk_images(depth, per_image, in.n);
  auto& col = scratch();
  col.resize(depth * chunk * per_image);
  const auto& k = simd::kernels();
  const std::size_t plane = in.n * out.h * out.w;
  float* db = grads[bias_].values.data();
  for (std::size_t co = 0; co < cout_; ++co)
    db[co] += static_cast<float>(k.sum(dout.data.data() + co * plane, plane));
  if (din) reshape_like(*din, cin_, in.n, in.h, in.w, true);
  for (std::size_t n0 = 0; n0 < in.n; n0 += chunk) {
    const std::size_t nb = std::min(chunk, in.n - n0);
    const std::size_t bcols = nb * per_image;
    im2col(dout.data.data(), cout_, in.n, n0, nb, out.h, out.w, col.data());
    k.gemm(false, true, cin_, depth, bcols, 1.0f, in.data.data() + n0 * per_image, cols,
           col.data(), bcols, 1.0f, grads[weight_].values.data(), depth);
    if (din)
      k.gemm(false, false, cin_, bcols, depth, 1.0f, params[weight_].values.data(), depth,
             col.data(), bcols, 0.0f, din->data.data() + n0 * per_image, cols);
  }
}

// ------------------------------------------------------------ LeakyRelu

void LeakyRelu::forward(const ParameterSet&, const Activation& in, Activation& out) const {
  reshape_like(out, in.c, in.n, in.h, in.w, in.spatial);
  simd::kernels().leaky_relu(in.data.data(), out.data.data(), in.data.size(), slope_);
}

void LeakyRelu::backward(const ParameterSet&, const Activation& in, const Activation&,
                         const Activation& dout, Activation* din, ParameterSet&) const {
  if (!din) return;
  reshape_like(*din, in.c, in.n, in.h, in.w, in.spatial);
  simd::kernels().leaky_relu_backward(in.data.data(), dout.data.data(), din->data.data(),
                                      in.data.size(), slope_);
}

// ------------------------------------------------------ Flatten/Unflatten

namespace {

// CNHW -> n x (c*hw) and back.
void to_rows(const float* src, std::size_t c, std::size_t n, std::size_t hw, float* dst) {
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ni = 0; ni < n; ++ni)
      std::copy_n(src + (ci * n + ni) * hw, hw, dst + ni * c * hw + ci * hw);
}

void to_channels(const float* src, std::size_t c, std::size_t n, std::size_t hw, float* dst) {
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ni = 0; ni < n; ++ni)
      std::copy_n(src + ni * c * hw + ci * hw, hw, dst + (ci * n + ni) * hw);
}

}  // namespace

void Flatten::forward(const ParameterSet&, const Activation& in, Activation& out) const {
  require(in.spatial, "flatten expects a spatial activation");
  reshape_like(out, in.c * in.h * in.w, in.n, 1, 1, false);
  to_rows(in.data.data(), in.c, in.n, in.h * in.w, out.data.data());
}

void Flatten::backward(const ParameterSet&, const Activation& in, const Activation&,
                       const Activation& dout, Activation* din, ParameterSet&) const {
  if (!din) return;
  reshape_like(*din, in.c, in.n, in.h, in.w, true);
  to_channels(dout.data.data(), in.c, in.n, in.h * in.w, din->data.data());
}

void Unflatten::forward(const ParameterSet&, const Activation& in, Activation& out) const {
  require(!in.spatial && in.features() == c_ * h_ * w_, "unflatten width mismatch");
  reshape_like(out, c_, in.n, h_, w_, true);
  to_channels(in.data.data(), c_, in.n, h_ * w_, out.data.data());
}

void Unflatten::backward(const ParameterSet&, const Activation& in, const Activation&,
                         const Activation& dout, Activation* din, ParameterSet&) const {
  if (!din) return;
  reshape_like(*din, in.c, in.n, 1, 1, false);
  to_rows(dout.data.data(), c_, in.n, h_ * w_, din->data.data());
}

// ------------------------------------------------------------ Sequential

void Sequential::forward(const ParameterSet& params, Activation input, Tape& tape) const {
  tape.activations.resize(layers_.size() + 1);
  tape.activations[0] = std::move(input);
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->forward(params, tape.activations[i], tape.activations[i + 1]);
}

void Sequential::backward(const ParameterSet& params, const Tape& tape, Activation dout,
                          ParameterSet& grads, Activation* dinput) const {
  Activation dprev;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool want_input = i > 0 || dinput != nullptr;
    layers_[i]->backward(params, tape.activations[i], tape.activations[i + 1], dout,
                         want_input ? &dprev : nullptr, grads);
    if (!want_input) break;
    std::swap(dout, dprev);
  }
  if (dinput) *dinput = std::move(dout);
}

}  // namespace disent::nn
