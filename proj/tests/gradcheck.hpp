#pragma once

// Central finite-difference oracle for duonet gradients.
//
// A perturbation only re-runs the part of the network downstream of the
// touched parameter. Each evaluation also records whether any ReLU input or
// L1 residual changed sign relative to the unperturbed pass; when one did,
// the step is shrunk tenfold so the difference quotient never straddles a
// kink.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mestereo/duonet.hpp"

namespace gradcheck {

using namespace mestereo::duonet;

struct Options {
  double epsilon = 1e-3;
  double min_epsilon = 1e-9;
  double floor = 1e-5;  // gradients smaller than this are compared in absolute terms
};

struct Report {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t shrunk = 0;      // parameters that needed a smaller step
  std::size_t unresolved = 0;  // kink still crossed at min_epsilon
  std::string worst;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

template <typename T>
bool same_signs(const Tensor<T>& a, const Tensor<T>& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if ((a.data[i] > T(0)) != (b.data[i] > T(0))) return false;
  }
  return true;
}

// Where a parameter sits: side 0/1 = left/right encoder at `stage`, side 2 = decoder or head.
struct Site {
  int side = 2;
  int stage = 0;
};

inline Site site_of(const std::string& name) {
  Site s;
  if (name.rfind("left.", 0) == 0 || name.rfind("right.", 0) == 0) {
    s.side = name[0] == 'l' ? 0 : 1;
    const auto dot = name.find('.');
    s.stage = std::stoi(name.substr(dot + 1, name.find('.', dot + 1) - dot - 1));
  }
  return s;
}

template <typename T>
class Evaluator {
 public:
  Evaluator(const DualNet<T>& net, const StereogramSample<T>& sample)
      : net_(net), sample_(sample), base_(forward_trace(net, sample.left_clue, sample.right_clue)) {}

  struct Result {
    T loss;
    bool kink;
  };

  // Loss of net_ (already perturbed by the caller) with only `site` and its
  // dependents recomputed.
  Result evaluate(const Site& site) const {
    ForwardTrace<T> tr;
    tr.fused = base_.fused;
    bool kink = false;
    if (site.side < 2) {
      const auto& stages = site.side == 0 ? net_.left_encoder : net_.right_encoder;
      const auto& own = site.side == 0 ? base_.left : base_.right;
      const auto& other = site.side == 0 ? base_.right : base_.left;
      const Tensor<T>& clue = site.side == 0 ? sample_.left_clue : sample_.right_clue;
      Tensor<T> x = site.stage == 0 ? clue : own[static_cast<std::size_t>(site.stage - 1)].output;
      for (std::size_t s = static_cast<std::size_t>(site.stage); s < stages.size(); ++s) {
        EncoderTrace<T> e = encoder_stage_forward(stages[s], x);
        kink = kink || !same_signs(e.pre_a, own[s].pre_a) || !same_signs(e.pre_b, own[s].pre_b);
        tr.fused[s] = fuse_features(e.output, other[s].output);
        x = std::move(e.output);
      }
    }
    decode_into(net_, tr);
    for (std::size_t t = 0; t < tr.decoder.size(); ++t) {
      kink = kink || !same_signs(tr.decoder[t].pre_refine, base_.decoder[t].pre_refine);
    }
    for (std::size_t i = 0; i < tr.output.data.size(); ++i) {
      if (!sample_.valid[i]) continue;
      const T now = tr.output.data[i] - sample_.gt_disparity.data[i];
      const T was = base_.output.data[i] - sample_.gt_disparity.data[i];
      kink = kink || (now > T(0)) != (was > T(0));
    }
    return {masked_l1(tr.output, sample_.gt_disparity, sample_.valid), kink};
  }

 private:
  const DualNet<T>& net_;
  const StereogramSample<T>& sample_;
  ForwardTrace<T> base_;
};

template <typename T>
std::vector<T> flatten(const DualNet<T>& net) {
  std::vector<T> out;
  net.for_each_parameter([&](const std::string&, std::span<const T> v) { out.insert(out.end(), v.begin(), v.end()); });
  return out;
}

// Compares every parameter gradient (or every `stride`-th) with central differences.
template <typename T>
Report check(DualNet<T> net, const StereogramSample<T>& sample, const Options& opt = {}, std::size_t stride = 1) {
  const std::vector<T> analytic = flatten(loss_and_gradients(net, sample).gradients);
  const Evaluator<T> eval(net, sample);
  Report rep;
  std::size_t base = 0;
  net.for_each_parameter([&](const std::string& name, std::span<T> values) {
    const Site site = site_of(name);
    for (std::size_t j = 0; j < values.size(); j += stride) {
      const T original = values[j];
      double eps = opt.epsilon;
      double numeric = 0.0;
      bool shrunk = false;
      for (;;) {
        values[j] = original + static_cast<T>(eps);
        const auto plus = eval.evaluate(site);
        values[j] = original - static_cast<T>(eps);
        const auto minus = eval.evaluate(site);
        values[j] = original;
        // The step actually taken after rounding to T.
        const double step = static_cast<double>(static_cast<T>(original + static_cast<T>(eps))) -
                            static_cast<double>(static_cast<T>(original - static_cast<T>(eps)));
        numeric = (static_cast<double>(plus.loss) - static_cast<double>(minus.loss)) / step;
        if (!plus.kink && !minus.kink) break;
        shrunk = true;
        if (eps / 10.0 < opt.min_epsilon) {
          ++rep.unresolved;
          break;
        }
        eps /= 10.0;
      }
      if (shrunk) ++rep.shrunk;
      const double a = static_cast<double>(analytic[base + j]);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor});
      ++rep.checked;
      if (rel > rep.max_rel) {
        rep.max_rel = rel;
        rep.worst = name + "[" + std::to_string(j) + "]";
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
    base += values.size();
  });
  return rep;
}

}  // namespace gradcheck
