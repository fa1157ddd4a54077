#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "mestereo/duonet.hpp"
#include "mestereo/error.hpp"

namespace mestereo::duonet {
namespace {

template <typename T>
Tensor<T> relu(const Tensor<T>& t) {
  Tensor<T> out = t;
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& pre, const Tensor<T>& grad) {
  Tensor<T> out = grad;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!(pre.data[i] > T(0))) out.data[i] = T(0);
  }
  return out;
}

template <typename T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T, typename U>
ConvLayer<U> cast_layer(const ConvLayer<T>& l) {
  ConvLayer<U> out(l.kernel, l.in_channels, l.out_channels);
  for (std::size_t i = 0; i < l.weights.size(); ++i) out.weights[i] = static_cast<U>(l.weights[i]);
  for (std::size_t i = 0; i < l.bias.size(); ++i) out.bias[i] = static_cast<U>(l.bias[i]);
  return out;
}

template <typename T, typename Layer, typename F>
void visit_layer(Layer& layer, const std::string& name, F& fn) {
  fn(name + ".weight", std::span(layer.weights));
  fn(name + ".bias", std::span(layer.bias));
}

template <typename T, typename Net, typename F>
void visit_net(Net& net, F& fn) {
  const char* sides[2] = {"left", "right"};
  auto* encoders = std::addressof(net.left_encoder);
  for (int side = 0; side < 2; ++side, encoders = std::addressof(net.right_encoder)) {
    for (std::size_t s = 0; s < encoders->size(); ++s) {
      const std::string prefix = std::string(sides[side]) + "." + std::to_string(s);
      visit_layer<T>((*encoders)[s].first, prefix + ".first", fn);
      visit_layer<T>((*encoders)[s].second, prefix + ".second", fn);
    }
  }
  for (std::size_t t = 0; t < net.decoder.size(); ++t) {
    const std::string prefix = "decoder." + std::to_string(t);
    visit_layer<T>(net.decoder[t].reduce, prefix + ".reduce", fn);
    visit_layer<T>(net.decoder[t].refine, prefix + ".refine", fn);
  }
  visit_layer<T>(net.head, "head", fn);
}

// Backpropagates one encoder given dL/d(fused_s) for every scale.
template <typename T>
void encoder_backward(const std::vector<EncoderStage<T>>& stages, const std::vector<EncoderTrace<T>>& own,
                      const std::vector<EncoderTrace<T>>& other, const std::vector<Tensor<T>>& grad_fused,
                      std::vector<EncoderStage<T>>& grads) {
  Tensor<T> from_finer_side;  // gradient arriving from stage s+1 through its pooling
  for (int s = static_cast<int>(stages.size()) - 1; s >= 0; --s) {
    const auto su = static_cast<std::size_t>(s);
    const EncoderTrace<T>& tr = own[su];
    Tensor<T> g_out = fuse_features(grad_fused[su], other[su].output);
    if (!from_finer_side.data.empty()) add_into(g_out, from_finer_side);
    const Tensor<T> g_pre_b = relu_backward(tr.pre_b, g_out);
    Tensor<T> g_act_a = stages[su].second.backward(tr.act_a, g_pre_b, grads[su].second);
    add_into(g_act_a, g_out);
    const Tensor<T> g_pre_a = relu_backward(tr.pre_a, g_act_a);
    const Tensor<T> g_input = stages[su].first.backward(tr.input, g_pre_a, grads[su].first);
    from_finer_side = avg_pool2_backward(g_input);
  }
}

}  // namespace

void NetConfig::validate() const {
  if (scales < 1) throw InvalidParameter("network needs at least one scale");
  if (static_cast<int>(widths.size()) != scales) {
    throw InvalidParameter("network needs one encoder width per scale");
  }
  if (in_channels < 1) throw InvalidParameter("network needs at least one input channel");
  if (widths[0] < 2 || widths[0] % 2 != 0) throw InvalidParameter("finest encoder width must be even and >= 2");
  for (std::size_t s = 1; s < widths.size(); ++s) {
    if (widths[s] != 2 * widths[s - 1]) {
      throw InvalidParameter("encoder widths must double from scale to scale");
    }
  }
}

template <typename T>
DualNet<T> DualNet<T>::zeros(const NetConfig& config) {
  config.validate();
  DualNet<T> net;
  net.config = config;
  const int scales = config.scales;
  for (int s = 0; s < scales; ++s) {
    const int in_ch = s == 0 ? config.in_channels : config.widths[static_cast<std::size_t>(s - 1)];
    const int width = config.widths[static_cast<std::size_t>(s)];
    EncoderStage<T> stage{ConvLayer<T>(3, in_ch, width), ConvLayer<T>(3, width, width)};
    net.left_encoder.push_back(stage);
    net.right_encoder.push_back(stage);
  }
  for (int t = 0; t < scales; ++t) {
    const int c = config.widths[static_cast<std::size_t>(scales - 1 - t)];
    net.decoder.push_back({ConvLayer<T>(1, c, c / 2), ConvLayer<T>(3, c / 2, c / 2)});
  }
  net.head = ConvLayer<T>(3, config.widths[0] / 2, 1);
  return net;
}

template <typename T>
DualNet<T> DualNet<T>::init(const NetConfig& config, std::uint64_t seed) {
  DualNet<T> net = zeros(config);
  net.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](ConvLayer<T>& layer) {
    const double stddev = std::sqrt(2.0 / (layer.kernel * layer.kernel * layer.in_channels));
    for (T& w : layer.weights) w = static_cast<T>(stddev * normal(rng));
  };
  for (auto& st : net.left_encoder) {
    fill(st.first);
    fill(st.second);
  }
  for (auto& st : net.right_encoder) {
    fill(st.first);
    fill(st.second);
  }
  for (auto& st : net.decoder) {
    fill(st.reduce);
    fill(st.refine);
  }
  fill(net.head);
  return net;
}

template <typename T>
void DualNet<T>::for_each_parameter(const std::function<void(const std::string&, std::span<T>)>& fn) {
  visit_net<T>(*this, fn);
}

template <typename T>
void DualNet<T>::for_each_parameter(
    const std::function<void(const std::string&, std::span<const T>)>& fn) const {
  visit_net<T>(*this, fn);
}

template <typename T>
std::size_t DualNet<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_parameter([&](const std::string&, std::span<const T> v) { n += v.size(); });
  return n;
}

template <typename T>
template <typename U>
DualNet<U> DualNet<T>::cast() const {
  DualNet<U> out;
  out.config = config;
  out.seed = seed;
  for (const auto& st : left_encoder) out.left_encoder.push_back({cast_layer<T, U>(st.first), cast_layer<T, U>(st.second)});
  for (const auto& st : right_encoder) out.right_encoder.push_back({cast_layer<T, U>(st.first), cast_layer<T, U>(st.second)});
  for (const auto& st : decoder) out.decoder.push_back({cast_layer<T, U>(st.reduce), cast_layer<T, U>(st.refine)});
  out.head = cast_layer<T, U>(head);
  return out;
}

template <typename T>
EncoderTrace<T> encoder_stage_forward(const EncoderStage<T>& stage, const Tensor<T>& x) {
  EncoderTrace<T> tr;
  tr.input = avg_pool2(x);
  tr.pre_a = stage.first.forward(tr.input);
  tr.act_a = relu(tr.pre_a);
  tr.pre_b = stage.second.forward(tr.act_a);
  tr.output = relu(tr.pre_b);
  add_into(tr.output, tr.act_a);
  return tr;
}

template <typename T>
void decode_into(const DualNet<T>& net, ForwardTrace<T>& tr) {
  const int scales = net.config.scales;
  if (tr.fused.size() != static_cast<std::size_t>(scales)) throw InvalidInput("trace holds the wrong number of fused maps");
  tr.decoder.clear();
  Tensor<T> stream = tr.fused.back();
  for (int t = 0; t < scales; ++t) {
    const auto tu = static_cast<std::size_t>(t);
    DecoderTrace<T> d;
    d.input = std::move(stream);
    d.upsampled = upsample_bilinear(d.input);
    d.reduced = net.decoder[tu].reduce.forward(d.upsampled);
    const int s = scales - 2 - t;
    d.injected = s >= 0 ? inject(d.reduced, tr.fused[static_cast<std::size_t>(s)]) : d.reduced;
    d.pre_refine = net.decoder[tu].refine.forward(d.injected);
    d.output = relu(d.pre_refine);
    stream = d.output;
    tr.decoder.push_back(std::move(d));
  }
  tr.head_pre = net.head.forward(stream);
  tr.output = tr.head_pre;
  for (T& v : tr.output.data) v = softplus(v);
}

template <typename T>
ForwardTrace<T> forward_trace(const DualNet<T>& net, const Tensor<T>& left_clue, const Tensor<T>& right_clue) {
  if (!left_clue.same_shape(right_clue)) throw InvalidInput("left and right clues differ in shape");
  if (left_clue.channels != net.config.in_channels) {
    throw InvalidInput("clues have " + std::to_string(left_clue.channels) + " channels, network expects " +
                       std::to_string(net.config.in_channels));
  }
  const int scales = net.config.scales;
  const int step = 1 << scales;
  if (left_clue.height % step != 0 || left_clue.width % step != 0) {
    throw InvalidInput("clue extent " + std::to_string(left_clue.height) + "x" + std::to_string(left_clue.width) +
                       " is not divisible by " + std::to_string(step));
  }
  ForwardTrace<T> tr;
  const Tensor<T>* l = &left_clue;
  const Tensor<T>* r = &right_clue;
  for (int s = 0; s < scales; ++s) {
    const auto su = static_cast<std::size_t>(s);
    tr.left.push_back(encoder_stage_forward(net.left_encoder[su], *l));
    tr.right.push_back(encoder_stage_forward(net.right_encoder[su], *r));
    l = &tr.left.back().output;
    r = &tr.right.back().output;
  }
  for (int s = 0; s < scales; ++s) {
    const auto su = static_cast<std::size_t>(s);
    tr.fused.push_back(fuse_features(tr.left[su].output, tr.right[su].output));
  }
  decode_into(net, tr);
  return tr;
}

template <typename T>
Tensor<T> forward(const DualNet<T>& net, const Tensor<T>& left_clue, const Tensor<T>& right_clue) {
  return forward_trace(net, left_clue, right_clue).output;
}

template <typename T>
DualNet<T> backward(const DualNet<T>& net, const ForwardTrace<T>& trace, const Tensor<T>& grad_output) {
  if (!grad_output.same_shape(trace.output)) throw InvalidInput("output gradient shape mismatch");
  DualNet<T> grads = DualNet<T>::zeros(net.config);
  const int scales = net.config.scales;

  Tensor<T> g_head = grad_output;
  for (std::size_t i = 0; i < g_head.data.size(); ++i) g_head.data[i] *= sigmoid(trace.head_pre.data[i]);
  Tensor<T> g_stream = net.head.backward(trace.decoder.back().output, g_head, grads.head);

  std::vector<Tensor<T>> g_fused;
  for (const auto& f : trace.fused) g_fused.emplace_back(f.height, f.width, f.channels);

  for (int t = scales - 1; t >= 0; --t) {
    const auto tu = static_cast<std::size_t>(t);
    const DecoderTrace<T>& d = trace.decoder[tu];
    const Tensor<T> g_pre = relu_backward(d.pre_refine, g_stream);
    const Tensor<T> g_injected = net.decoder[tu].refine.backward(d.injected, g_pre, grads.decoder[tu].refine);
    const int s = scales - 2 - t;
    if (s >= 0) add_into(g_fused[static_cast<std::size_t>(s)], g_injected);
    const Tensor<T> g_up = net.decoder[tu].reduce.backward(d.upsampled, g_injected, grads.decoder[tu].reduce);
    g_stream = upsample_bilinear_backward(g_up, d.input.height, d.input.width);
  }
  add_into(g_fused.back(), g_stream);

  encoder_backward(net.left_encoder, trace.left, trace.right, g_fused, grads.left_encoder);
  encoder_backward(net.right_encoder, trace.right, trace.left, g_fused, grads.right_encoder);
  return grads;
}

template <typename T>
T masked_l1(const Tensor<T>& pred, const Tensor<T>& gt, std::span<const std::uint8_t> valid, Tensor<T>* grad) {
  if (!pred.same_shape(gt) || valid.size() != pred.data.size()) {
    throw InvalidInput("masked_l1: prediction, ground truth and mask must match");
  }
  std::size_t count = 0;
  for (auto v : valid) count += v ? 1 : 0;
  if (count == 0) throw EmptyMaskError("masked_l1: no valid pixel");
  const T inv = T(1) / static_cast<T>(count);
  if (grad != nullptr) *grad = Tensor<T>(pred.height, pred.width, pred.channels);
  T total = T(0);
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    if (!valid[i]) continue;
    const T diff = pred.data[i] - gt.data[i];
    total += std::abs(diff);
    if (grad != nullptr) grad->data[i] = diff > T(0) ? inv : (diff < T(0) ? -inv : T(0));
  }
  return total * inv;
}

template <typename T>
LossAndGradients<T> loss_and_gradients(const DualNet<T>& net, const StereogramSample<T>& sample) {
  const ForwardTrace<T> tr = forward_trace(net, sample.left_clue, sample.right_clue);
  Tensor<T> g;
  LossAndGradients<T> out;
  out.loss = masked_l1(tr.output, sample.gt_disparity, sample.valid, &g);
  out.gradients = backward(net, tr, g);
  return out;
}

template <typename T>
T evaluate_loss(const DualNet<T>& net, const StereogramSample<T>& sample) {
  return masked_l1(forward(net, sample.left_clue, sample.right_clue), sample.gt_disparity, sample.valid);
}

#define MESTEREO_INSTANTIATE_NET(T)                                                                      \
  template struct DualNet<T>;                                                                            \
  template ForwardTrace<T> forward_trace(const DualNet<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> forward(const DualNet<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template EncoderTrace<T> encoder_stage_forward(const EncoderStage<T>&, const Tensor<T>&);             \
  template void decode_into(const DualNet<T>&, ForwardTrace<T>&);                                        \
  template DualNet<T> backward(const DualNet<T>&, const ForwardTrace<T>&, const Tensor<T>&);             \
  template T masked_l1(const Tensor<T>&, const Tensor<T>&, std::span<const std::uint8_t>, Tensor<T>*);   \
  template LossAndGradients<T> loss_and_gradients(const DualNet<T>&, const StereogramSample<T>&);        \
  template T evaluate_loss(const DualNet<T>&, const StereogramSample<T>&);

MESTEREO_INSTANTIATE_NET(float)
MESTEREO_INSTANTIATE_NET(double)
template DualNet<float> DualNet<double>::cast<float>() const;
template DualNet<double> DualNet<float>::cast<double>() const;
template DualNet<double> DualNet<double>::cast<double>() const;

}  // namespace mestereo::duonet
