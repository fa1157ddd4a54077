#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

// Desk-scale dual-encoder / single-decoder disparity network.
//
// Two encoders with separate parameters see the left and right inputs. At
// every scale their features are multiplied element-wise; the decoder starts
// from the coarsest product and, after each bilinear x2 upsampling and 1x1
// channel-halving convolution, adds the product of the matching scale before
// its 3x3 convolution. Because the encoders only reach the loss through these
// products, the gradient of one encoder is scaled by the other encoder's
// features, which couples their updates.

namespace mestereo::duonet {

/// Row-major height x width x channels feature map.
template <typename T>
struct Tensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int h, int w, int c, T fill = T(0));

  T& at(int y, int x, int c) noexcept { return data[offset(y, x, c)]; }
  T at(int y, int x, int c) const noexcept { return data[offset(y, x, c)]; }
  bool same_shape(const Tensor& o) const noexcept {
    return height == o.height && width == o.width && channels == o.channels;
  }
  std::size_t offset(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// out = a * b element-wise. Throws InvalidInput on shape mismatch.
template <typename T>
Tensor<T> fuse_features(const Tensor<T>& left, const Tensor<T>& right);

/// out = stream + fused element-wise.
template <typename T>
Tensor<T> inject(const Tensor<T>& stream, const Tensor<T>& fused);

/// x2 bilinear upsampling, half-pixel centres (align_corners = false), edge clamped.
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& t);

/// Adjoint of upsample_bilinear for an input of extent (in_h, in_w).
template <typename T>
Tensor<T> upsample_bilinear_backward(const Tensor<T>& grad_out, int in_h, int in_w);

/// 2x2 average pooling (stride 2).
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& t);

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& grad_out);

/// Square stride-1 convolution with zero padding. Weights are laid out
/// [ky][kx][in][out].
template <typename T>
struct ConvLayer {
  int kernel = 3;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  ConvLayer() = default;
  ConvLayer(int kernel, int in_channels, int out_channels);

  Tensor<T> forward(const Tensor<T>& in) const;
  /// Accumulates parameter gradients into `grad` and returns dL/d(input).
  Tensor<T> backward(const Tensor<T>& in, const Tensor<T>& grad_out, ConvLayer& grad) const;
};

struct NetConfig {
  int scales = 3;
  std::vector<int> widths{8, 16, 32};  ///< encoder channels per scale, each twice the previous
  int in_channels = 1;

  void validate() const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Two 3x3 ReLU convolutions; the first convolution's output skips over the second.
template <typename T>
struct EncoderStage {
  ConvLayer<T> first;
  ConvLayer<T> second;
};

/// 1x1 channel-halving convolution, then (after injection) a 3x3 ReLU convolution.
template <typename T>
struct DecoderStage {
  ConvLayer<T> reduce;
  ConvLayer<T> refine;
};

template <typename T>
struct DualNet {
  NetConfig config;
  std::uint64_t seed = 0;
  std::vector<EncoderStage<T>> left_encoder;
  std::vector<EncoderStage<T>> right_encoder;
  std::vector<DecoderStage<T>> decoder;
  ConvLayer<T> head;  ///< 3x3 -> 1 channel, followed by softplus

  /// All parameters zero.
  static DualNet zeros(const NetConfig& config);
  /// He-normal weights, zero biases; left and right encoders draw independent values.
  static DualNet init(const NetConfig& config, std::uint64_t seed);

  /// Visits every parameter array in a fixed order with a stable name.
  void for_each_parameter(const std::function<void(const std::string&, std::span<T>)>& fn);
  void for_each_parameter(const std::function<void(const std::string&, std::span<const T>)>& fn) const;
  std::size_t parameter_count() const;

  /// Exchanges the left and right encoder parameters.
  void swap_encoders() { std::swap(left_encoder, right_encoder); }

  template <typename U>
  DualNet<U> cast() const;
};

/// Per-scale activations retained for the backward pass.
template <typename T>
struct EncoderTrace {
  Tensor<T> input;   ///< pooled input of the stage
  Tensor<T> pre_a;   ///< first conv before ReLU
  Tensor<T> act_a;   ///< relu(pre_a), also the skip branch
  Tensor<T> pre_b;   ///< second conv before ReLU
  Tensor<T> output;  ///< relu(pre_b) + act_a
};

template <typename T>
struct DecoderTrace {
  Tensor<T> input;      ///< stream entering the stage
  Tensor<T> upsampled;
  Tensor<T> reduced;
  Tensor<T> injected;   ///< reduced + fused feature of this scale (or reduced)
  Tensor<T> pre_refine;
  Tensor<T> output;
};

template <typename T>
struct ForwardTrace {
  std::vector<EncoderTrace<T>> left;
  std::vector<EncoderTrace<T>> right;
  std::vector<Tensor<T>> fused;  ///< per scale, finest first
  std::vector<DecoderTrace<T>> decoder;
  Tensor<T> head_pre;
  Tensor<T> output;
};

/// One encoder stage: pool, conv + ReLU, conv + ReLU, identity skip.
template <typename T>
EncoderTrace<T> encoder_stage_forward(const EncoderStage<T>& stage, const Tensor<T>& x);

/// Recomputes the decoder, head and output of `trace` from its fused maps.
template <typename T>
void decode_into(const DualNet<T>& net, ForwardTrace<T>& trace);

/// Throws InvalidInput unless both clues share an extent divisible by 2^scales.
template <typename T>
ForwardTrace<T> forward_trace(const DualNet<T>& net, const Tensor<T>& left_clue, const Tensor<T>& right_clue);

template <typename T>
Tensor<T> forward(const DualNet<T>& net, const Tensor<T>& left_clue, const Tensor<T>& right_clue);

/// Reverse-mode gradients of a scalar loss given dL/d(output). The result has
/// the same layout as `net`.
template <typename T>
DualNet<T> backward(const DualNet<T>& net, const ForwardTrace<T>& trace, const Tensor<T>& grad_output);

template <typename T>
struct StereogramSample {
  Tensor<T> left_clue;
  Tensor<T> right_clue;
  Tensor<T> gt_disparity;
  std::vector<std::uint8_t> valid;  ///< loss mask, all pixels valid for synthetic samples
  std::vector<std::uint8_t> shifted;  ///< pixels inside the displaced region
};

/// Random-dot pair: a rectangle spanning 70-95% of each side of the right
/// view is the left view displaced by `shift` pixels (right(y, x) = left(y, x - shift), clamped at the border);
/// the rest is identical. Requires 0 <= shift < width / 4.
template <typename T>
StereogramSample<T> make_stereogram(std::uint64_t seed, int height, int width, int shift);

template <typename T>
std::vector<StereogramSample<T>> make_dataset(std::uint64_t seed, std::size_t count, int height, int width,
                                              int shift);

/// Mean |pred - gt| over valid pixels; writes dL/d(pred) when `grad` is non-null.
template <typename T>
T masked_l1(const Tensor<T>& pred, const Tensor<T>& gt, std::span<const std::uint8_t> valid,
            Tensor<T>* grad = nullptr);

template <typename T>
struct LossAndGradients {
  T loss = T(0);
  DualNet<T> gradients;
};

template <typename T>
LossAndGradients<T> loss_and_gradients(const DualNet<T>& net, const StereogramSample<T>& sample);

template <typename T>
T evaluate_loss(const DualNet<T>& net, const StereogramSample<T>& sample);

struct TrainOptions {
  int epochs = 30;
  double learning_rate = 1e-2;
  std::uint64_t shuffle_seed = 0;
};

struct TrainResult {
  double initial_loss = 0.0;          ///< mean loss of the untrained net over the dataset
  std::vector<double> epoch_losses;   ///< mean loss seen during each epoch
};

/// Plain per-sample SGD on masked L1. Throws TrainingDiverged on a non-finite loss.
TrainResult train_toy(DualNet<double>& net, std::span<const StereogramSample<double>> dataset,
                      const TrainOptions& options);

/// "epoch,mean_l1_loss" with epoch 0 holding the pre-training loss.
std::string loss_curve_csv(const TrainResult& result);

/// Binary container: 8-byte magic "DUONET01", little-endian uint64 header
/// length, UTF-8 JSON header (config, seed, tensor names and shapes, plus
/// `extra`), then every parameter as little-endian float64 in
/// for_each_parameter order.
void save_net(const std::filesystem::path& path, const DualNet<double>& net, const std::string& extra_json = "{}");
DualNet<double> load_net(const std::filesystem::path& path);

}  // namespace mestereo::duonet
