#include <algorithm>
#include <cstring>
#include <cmath>
#include <string>

#include "mestereo/duonet.hpp"
#include "mestereo/error.hpp"

namespace mestereo::duonet {
namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* who) {
  if (!a.same_shape(b)) {
    throw InvalidInput(std::string(who) + ": shape " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                       "x" + std::to_string(a.channels) + " vs " + std::to_string(b.height) + "x" +
                       std::to_string(b.width) + "x" + std::to_string(b.channels));
  }
}

// Source row/column and blend factor for output coordinate `o` of a x2 upsampling.
struct Tap {
  int lo;
  int hi;
  double frac;
};

Tap bilinear_tap(int o, int in_extent) {
  const double s = std::max(0.0, (o + 0.5) / 2.0 - 0.5);
  const int lo = std::min(static_cast<int>(s), in_extent - 1);
  return {lo, std::min(lo + 1, in_extent - 1), s - lo};
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(int h, int w, int c, T fill)
    : height(h), width(w), channels(c) {
  if (h <= 0 || w <= 0 || c <= 0) throw InvalidInput("tensor extents must be positive");
  data.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill);
}

template <typename T>
Tensor<T> fuse_features(const Tensor<T>& left, const Tensor<T>& right) {
  require_same_shape(left, right, "fuse_features");
  Tensor<T> out = left;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= right.data[i];
  return out;
}

template <typename T>
Tensor<T> inject(const Tensor<T>& stream, const Tensor<T>& fused) {
  require_same_shape(stream, fused, "inject");
  Tensor<T> out = stream;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += fused.data[i];
  return out;
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& t) {
  Tensor<T> out(2 * t.height, 2 * t.width, t.channels);
  for (int y = 0; y < out.height; ++y) {
    const Tap ty = bilinear_tap(y, t.height);
    const T fy = static_cast<T>(ty.frac);
    for (int x = 0; x < out.width; ++x) {
      const Tap tx = bilinear_tap(x, t.width);
      const T fx = static_cast<T>(tx.frac);
      const T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
      const T w10 = fy * (T(1) - fx), w11 = fy * fx;
      for (int c = 0; c < t.channels; ++c) {
        out.at(y, x, c) = w00 * t.at(ty.lo, tx.lo, c) + w01 * t.at(ty.lo, tx.hi, c) +
                          w10 * t.at(ty.hi, tx.lo, c) + w11 * t.at(ty.hi, tx.hi, c);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> upsample_bilinear_backward(const Tensor<T>& grad_out, int in_h, int in_w) {
  if (grad_out.height != 2 * in_h || grad_out.width != 2 * in_w) {
    throw InvalidInput("upsample_bilinear_backward: gradient extent is not twice the input extent");
  }
  Tensor<T> grad_in(in_h, in_w, grad_out.channels);
  for (int y = 0; y < grad_out.height; ++y) {
    const Tap ty = bilinear_tap(y, in_h);
    const T fy = static_cast<T>(ty.frac);
    for (int x = 0; x < grad_out.width; ++x) {
      const Tap tx = bilinear_tap(x, in_w);
      const T fx = static_cast<T>(tx.frac);
      const T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
      const T w10 = fy * (T(1) - fx), w11 = fy * fx;
      for (int c = 0; c < grad_out.channels; ++c) {
        const T g = grad_out.at(y, x, c);
        grad_in.at(ty.lo, tx.lo, c) += w00 * g;
        grad_in.at(ty.lo, tx.hi, c) += w01 * g;
        grad_in.at(ty.hi, tx.lo, c) += w10 * g;
        grad_in.at(ty.hi, tx.hi, c) += w11 * g;
      }
    }
  }
  return grad_in;
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& t) {
  if (t.height % 2 != 0 || t.width % 2 != 0) throw InvalidInput("avg_pool2 needs even extents");
  Tensor<T> out(t.height / 2, t.width / 2, t.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < t.channels; ++c) {
        out.at(y, x, c) = T(0.25) * (t.at(2 * y, 2 * x, c) + t.at(2 * y, 2 * x + 1, c) +
                                     t.at(2 * y + 1, 2 * x, c) + t.at(2 * y + 1, 2 * x + 1, c));
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& grad_out) {
  Tensor<T> grad_in(2 * grad_out.height, 2 * grad_out.width, grad_out.channels);
  for (int y = 0; y < grad_in.height; ++y) {
    for (int x = 0; x < grad_in.width; ++x) {
      for (int c = 0; c < grad_in.channels; ++c) grad_in.at(y, x, c) = T(0.25) * grad_out.at(y / 2, x / 2, c);
    }
  }
  return grad_in;
}

template <typename T>
ConvLayer<T>::ConvLayer(int kernel_size, int in_ch, int out_ch)
    : kernel(kernel_size),
      in_channels(in_ch),
      out_channels(out_ch),
      weights(static_cast<std::size_t>(kernel_size * kernel_size * in_ch * out_ch), T(0)),
      bias(static_cast<std::size_t>(out_ch), T(0)) {
  if (kernel_size < 1 || kernel_size % 2 == 0 || in_ch < 1 || out_ch < 1) {
    throw InvalidInput("convolution needs an odd kernel and positive channel counts");
  }
}

// Copies `in` into a zero border of width r. With the [ky][kx][in][out] weight
// layout, the k*in_channels inputs of one kernel row are then contiguous in
// both the padded tensor and the weights.
template <typename T>
std::vector<T> zero_pad(const Tensor<T>& in, int r) {
  const int pw = in.width + 2 * r;
  const auto c = static_cast<std::size_t>(in.channels);
  std::vector<T> padded(static_cast<std::size_t>(in.height + 2 * r) * static_cast<std::size_t>(pw) * c, T(0));
  for (int y = 0; y < in.height; ++y) {
    const T* src = &in.data[in.offset(y, 0, 0)];
    std::copy(src, src + static_cast<std::size_t>(in.width) * c,
              &padded[(static_cast<std::size_t>(y + r) * static_cast<std::size_t>(pw) + static_cast<std::size_t>(r)) * c]);
  }
  return padded;
}

struct ConvGeometry {
  int height;
  int width;
  int kernel;
  int in_channels;
  std::size_t pitch;  // padded row length in samples
};

template <typename T, int V>
struct PackOf {
  using type = T;
};
template <>
struct PackOf<double, 2> {
  typedef double type __attribute__((vector_size(16)));
};
template <>
struct PackOf<float, 2> {
  typedef float type __attribute__((vector_size(8)));
};

// Accumulates PX horizontally adjacent output pixels at once so small channel
// counts still keep several independent sums in flight. Accumulators are held
// as packs of V lanes (GCC/Clang vector extension) to keep them in registers.
template <typename T, int CO, int PX>
void conv_forward_block(const ConvGeometry& geo, const T* padded, const T* weights, const T* bias, T* out, int y,
                        int x) {
  using Pack = typename PackOf<T, CO % 2 == 0 ? 2 : 1>::type;
  constexpr int V = static_cast<int>(sizeof(Pack) / sizeof(T));
  constexpr int NV = CO / V;
  const auto run = static_cast<std::size_t>(geo.kernel * geo.in_channels);
  const auto cin = static_cast<std::size_t>(geo.in_channels);
  Pack acc[PX][NV];
  for (int p = 0; p < PX; ++p) {
    for (int v = 0; v < NV; ++v) std::memcpy(&acc[p][v], bias + v * V, sizeof(Pack));
  }
  for (int ky = 0; ky < geo.kernel; ++ky) {
    const T* a = padded + static_cast<std::size_t>(y + ky) * geo.pitch + static_cast<std::size_t>(x) * cin;
    const T* w = weights + static_cast<std::size_t>(ky) * run * CO;
    for (std::size_t j = 0; j < run; ++j) {
      Pack wr[NV];
      std::memcpy(wr, w + j * CO, sizeof(wr));
      for (int p = 0; p < PX; ++p) {
        const T av = a[j + static_cast<std::size_t>(p) * cin];
        for (int v = 0; v < NV; ++v) acc[p][v] += av * wr[v];
      }
    }
  }
  T* o = out + (static_cast<std::size_t>(y) * static_cast<std::size_t>(geo.width) + static_cast<std::size_t>(x)) * CO;
  for (int p = 0; p < PX; ++p) std::memcpy(o + static_cast<std::size_t>(p) * CO, acc[p], sizeof(acc[p]));
}

template <typename T, int CO>
void conv_forward(const ConvGeometry& geo, const T* padded, const T* weights, const T* bias, T* out) {
  constexpr int kBlock = CO >= 16 ? 1 : 4;
  for (int y = 0; y < geo.height; ++y) {
    int x = 0;
    for (; x + kBlock <= geo.width; x += kBlock) conv_forward_block<T, CO, kBlock>(geo, padded, weights, bias, out, y, x);
    for (; x < geo.width; ++x) conv_forward_block<T, CO, 1>(geo, padded, weights, bias, out, y, x);
  }
}

template <typename T>
void conv_forward_generic(const ConvGeometry& geo, const T* padded, const T* weights, const T* bias, T* out,
                          std::size_t cout) {
  const auto run = static_cast<std::size_t>(geo.kernel * geo.in_channels);
  for (int y = 0; y < geo.height; ++y) {
    for (int x = 0; x < geo.width; ++x) {
      T* o = out + (static_cast<std::size_t>(y) * static_cast<std::size_t>(geo.width) + static_cast<std::size_t>(x)) * cout;
      std::copy(bias, bias + cout, o);
      for (int ky = 0; ky < geo.kernel; ++ky) {
        const T* a = padded + static_cast<std::size_t>(y + ky) * geo.pitch + static_cast<std::size_t>(x * geo.in_channels);
        const T* w = weights + static_cast<std::size_t>(ky) * run * cout;
        for (std::size_t j = 0; j < run; ++j) {
          const T av = a[j];
          const T* wr = w + j * cout;
          for (std::size_t co = 0; co < cout; ++co) o[co] += av * wr[co];
        }
      }
    }
  }
}

// CO > 0 fixes the output channel count at compile time; CO == 0 reads it from `cout`.
template <typename T, int CO>
void conv_backward(const ConvGeometry& geo, const T* padded, const T* weights, const T* grad_out, T* grad_padded,
                   T* grad_weights, T* grad_bias, std::size_t cout = CO) {
  const std::size_t nco = CO > 0 ? static_cast<std::size_t>(CO) : cout;
  const auto run = static_cast<std::size_t>(geo.kernel * geo.in_channels);
  for (int y = 0; y < geo.height; ++y) {
    for (int x = 0; x < geo.width; ++x) {
      const T* g = grad_out + (static_cast<std::size_t>(y) * static_cast<std::size_t>(geo.width) + static_cast<std::size_t>(x)) * nco;
      for (std::size_t co = 0; co < nco; ++co) grad_bias[co] += g[co];
      for (int ky = 0; ky < geo.kernel; ++ky) {
        const std::size_t at = static_cast<std::size_t>(y + ky) * geo.pitch + static_cast<std::size_t>(x * geo.in_channels);
        const T* a = padded + at;
        T* ga = grad_padded + at;
        const std::size_t base = static_cast<std::size_t>(ky) * run * nco;
        const T* w = weights + base;
        T* gw = grad_weights + base;
        for (std::size_t j = 0; j < run; ++j) {
          const T av = a[j];
          const T* wr = w + j * nco;
          T* gwr = gw + j * nco;
          T acc = T(0);
          for (std::size_t co = 0; co < nco; ++co) {
            acc += wr[co] * g[co];
            gwr[co] += av * g[co];
          }
          ga[j] += acc;
        }
      }
    }
  }
}

template <typename T>
Tensor<T> ConvLayer<T>::forward(const Tensor<T>& in) const {
  if (in.channels != in_channels) {
    throw InvalidInput("convolution expects " + std::to_string(in_channels) + " input channels, got " +
                       std::to_string(in.channels));
  }
  const int r = kernel / 2;
  const auto cout = static_cast<std::size_t>(out_channels);
  const auto pitch = static_cast<std::size_t>(in.width + 2 * r) * static_cast<std::size_t>(in_channels);
  const std::vector<T> padded = zero_pad(in, r);
  Tensor<T> out(in.height, in.width, out_channels);
  const ConvGeometry geo{in.height, in.width, kernel, in_channels, pitch};
  switch (out_channels) {
    case 1: conv_forward<T, 1>(geo, padded.data(), weights.data(), bias.data(), out.data.data()); break;
    case 4: conv_forward<T, 4>(geo, padded.data(), weights.data(), bias.data(), out.data.data()); break;
    case 8: conv_forward<T, 8>(geo, padded.data(), weights.data(), bias.data(), out.data.data()); break;
    case 16: conv_forward<T, 16>(geo, padded.data(), weights.data(), bias.data(), out.data.data()); break;
    case 32: conv_forward<T, 32>(geo, padded.data(), weights.data(), bias.data(), out.data.data()); break;
    default: conv_forward_generic<T>(geo, padded.data(), weights.data(), bias.data(), out.data.data(), cout);
  }
  return out;
}

template <typename T>
Tensor<T> ConvLayer<T>::backward(const Tensor<T>& in, const Tensor<T>& grad_out, ConvLayer& grad) const {
  const int r = kernel / 2;
  const auto cout = static_cast<std::size_t>(out_channels);
  const auto pitch = static_cast<std::size_t>(in.width + 2 * r) * static_cast<std::size_t>(in_channels);
  const std::vector<T> padded = zero_pad(in, r);
  std::vector<T> grad_padded(padded.size(), T(0));
  const ConvGeometry geo{in.height, in.width, kernel, in_channels, pitch};
  const T* g = grad_out.data.data();
  T* gw = grad.weights.data();
  T* gb = grad.bias.data();
  switch (out_channels) {
    case 1: conv_backward<T, 1>(geo, padded.data(), weights.data(), g, grad_padded.data(), gw, gb); break;
    case 4: conv_backward<T, 4>(geo, padded.data(), weights.data(), g, grad_padded.data(), gw, gb); break;
    case 8: conv_backward<T, 8>(geo, padded.data(), weights.data(), g, grad_padded.data(), gw, gb); break;
    case 16: conv_backward<T, 16>(geo, padded.data(), weights.data(), g, grad_padded.data(), gw, gb); break;
    case 32: conv_backward<T, 32>(geo, padded.data(), weights.data(), g, grad_padded.data(), gw, gb); break;
    default: conv_backward<T, 0>(geo, padded.data(), weights.data(), g, grad_padded.data(), gw, gb, cout);
  }
  Tensor<T> grad_in(in.height, in.width, in_channels);
  const auto row = static_cast<std::size_t>(in.width) * static_cast<std::size_t>(in_channels);
  for (int y = 0; y < in.height; ++y) {
    const T* src = &grad_padded[static_cast<std::size_t>(y + r) * pitch + static_cast<std::size_t>(r * in_channels)];
    std::copy(src, src + row, &grad_in.data[grad_in.offset(y, 0, 0)]);
  }
  return grad_in;
}

#define MESTEREO_INSTANTIATE_TENSOR_OPS(T)                                                   \
  template struct Tensor<T>;                                                                 \
  template struct ConvLayer<T>;                                                              \
  template Tensor<T> fuse_features(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> inject(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> upsample_bilinear(const Tensor<T>&);                                    \
  template Tensor<T> upsample_bilinear_backward(const Tensor<T>&, int, int);                 \
  template Tensor<T> avg_pool2(const Tensor<T>&);                                            \
  template Tensor<T> avg_pool2_backward(const Tensor<T>&);

MESTEREO_INSTANTIATE_TENSOR_OPS(float)
MESTEREO_INSTANTIATE_TENSOR_OPS(double)

}  // namespace mestereo::duonet
