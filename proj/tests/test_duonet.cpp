#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "mestereo/duonet.hpp"
#include "mestereo/error.hpp"

using namespace mestereo;
using namespace mestereo::duonet;

namespace {

template <typename T>
Tensor<T> random_tensor(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<T> t(h, w, c);
  for (T& v : t.data) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
std::vector<T> flat(const DualNet<T>& net) {
  return gradcheck::flatten(net);
}

void zero_biases(std::vector<EncoderStage<double>>& enc) {
  for (auto& st : enc) {
    std::fill(st.first.bias.begin(), st.first.bias.end(), 0.0);
    std::fill(st.second.bias.begin(), st.second.bias.end(), 0.0);
  }
}

}  // namespace

TEST_CASE("bilinear upsampling matches a hand-built oracle") {
  Tensor<double> t(2, 2, 1);
  t.data = {0.0, 1.0, 2.0, 3.0};
  const Tensor<double> up = upsample_bilinear(t);
  REQUIRE(up.height == 4);
  REQUIRE(up.width == 4);
  // Half-pixel source coordinates (x + 0.5) / 2 - 0.5, clamped to [0, 1].
  const double src[4] = {0.0, 0.25, 0.75, 1.0};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) CHECK(up.at(y, x, 0) == doctest::Approx(2.0 * src[y] + src[x]).epsilon(1e-15));
  }
}

TEST_CASE("upsampling and pooling backward passes are adjoints") {
  const auto x = random_tensor<double>(3, 5, 2, 1);
  const auto g = random_tensor<double>(6, 10, 2, 2);
  const auto ux = upsample_bilinear(x);
  const auto bg = upsample_bilinear_backward(g, 3, 5);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < g.data.size(); ++i) lhs += ux.data[i] * g.data[i];
  for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * bg.data[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  const auto p = random_tensor<double>(6, 8, 3, 3);
  const auto q = random_tensor<double>(3, 4, 3, 4);
  const auto pp = avg_pool2(p);
  const auto bq = avg_pool2_backward(q);
  lhs = rhs = 0.0;
  for (std::size_t i = 0; i < q.data.size(); ++i) lhs += pp.data[i] * q.data[i];
  for (std::size_t i = 0; i < p.data.size(); ++i) rhs += p.data[i] * bq.data[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  CHECK_THROWS_AS(upsample_bilinear_backward(g, 4, 5), InvalidInput);
}

TEST_CASE("analytic gradients match central differences in float64") {
  const auto net = DualNet<double>::init(NetConfig{}, 11);
  const auto sample = make_stereogram<double>(5, 16, 16, 3);
  const gradcheck::Report r = gradcheck::check(net, sample, {}, 7);
  CAPTURE(r.worst);
  CAPTURE(r.worst_analytic);
  CAPTURE(r.worst_numeric);
  CHECK(r.checked > 5000);
  CHECK(r.unresolved == 0);
  CHECK(r.max_rel < 1e-4);
}

TEST_CASE("float32 gradients track the float64 gradients") {
  const auto net = DualNet<double>::init(NetConfig{}, 4);
  const auto sample = make_stereogram<double>(9, 16, 16, 3);
  const auto sample_f = make_stereogram<float>(9, 16, 16, 3);
  const auto gd = flat(loss_and_gradients(net, sample).gradients);
  const auto gf = flat(loss_and_gradients(net.cast<float>(), sample_f).gradients);
  REQUIRE(gd.size() == gf.size());
  double scale = 0.0;
  for (double v : gd) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < gd.size(); ++i) {
    worst = std::max(worst, std::abs(gd[i] - double(gf[i])) / std::max({std::abs(gd[i]), 1e-3 * scale}));
  }
  CHECK(worst < 1e-2);
}

TEST_CASE("swapping encoders and inputs leaves the output unchanged") {
  auto net = DualNet<double>::init(NetConfig{}, 3);
  const auto l = random_tensor<double>(16, 24, 1, 1), r = random_tensor<double>(16, 24, 1, 2);
  const Tensor<double> a = forward(net, l, r);
  net.swap_encoders();
  const Tensor<double> b = forward(net, r, l);
  CHECK(a == b);
}

TEST_CASE("a silent right encoder annihilates the left branch") {
  auto net = DualNet<double>::init(NetConfig{}, 8);
  for (auto& st : net.left_encoder) {
    for (double& b : st.first.bias) b = 0.1;
  }
  zero_biases(net.right_encoder);
  const Tensor<double> zero(16, 16, 1);
  const Tensor<double> a = forward(net, random_tensor<double>(16, 16, 1, 1), zero);
  const Tensor<double> b = forward(net, random_tensor<double>(16, 16, 1, 2), zero);
  CHECK(a == b);

  StereogramSample<double> s = make_stereogram<double>(2, 16, 16, 3);
  s.right_clue = zero;
  const auto grads = loss_and_gradients(net, s).gradients;
  grads.for_each_parameter([](const std::string& name, std::span<const double> v) {
    if (name.rfind("left.", 0) != 0) return;
    CAPTURE(name);
    for (double x : v) CHECK(x == 0.0);
  });
}

TEST_CASE("output resolution equals the input resolution") {
  const auto net = DualNet<double>::init(NetConfig{}, 1);
  for (auto [h, w] : {std::pair{8, 8}, std::pair{16, 40}, std::pair{24, 8}}) {
    const auto out = forward(net, random_tensor<double>(h, w, 1, 1), random_tensor<double>(h, w, 1, 2));
    CHECK(out.height == h);
    CHECK(out.width == w);
    CHECK(out.channels == 1);
    for (double v : out.data) CHECK(v > 0.0);
  }
  CHECK_THROWS_AS(forward(net, random_tensor<double>(12, 16, 1, 1), random_tensor<double>(12, 16, 1, 2)),
                  InvalidInput);
  CHECK_THROWS_AS(forward(net, random_tensor<double>(16, 16, 1, 1), random_tensor<double>(16, 8, 1, 2)),
                  InvalidInput);
}

TEST_CASE("a zero network outputs softplus of the head bias") {
  auto net = DualNet<double>::zeros(NetConfig{});
  net.head.bias[0] = 0.7;
  const auto out = forward(net, random_tensor<double>(8, 8, 1, 1), random_tensor<double>(8, 8, 1, 2));
  for (double v : out.data) CHECK(v == doctest::Approx(std::log1p(std::exp(0.7))).epsilon(1e-14));
}

TEST_CASE("initialization is deterministic and the encoders are independent") {
  const auto a = DualNet<double>::init(NetConfig{}, 42), b = DualNet<double>::init(NetConfig{}, 42);
  CHECK(flat(a) == flat(b));
  CHECK(flat(a) != flat(DualNet<double>::init(NetConfig{}, 43)));
  CHECK(a.left_encoder[0].first.weights != a.left_encoder[0].second.weights);
  CHECK(a.left_encoder[1].first.weights != a.right_encoder[1].first.weights);
  for (double v : a.head.bias) CHECK(v == 0.0);
  // He-normal: sample variance near 2 / fan_in.
  const auto& w = a.right_encoder[2].second.weights;
  double m2 = 0.0;
  for (double v : w) m2 += v * v;
  CHECK(m2 / double(w.size()) == doctest::Approx(2.0 / (9.0 * 32.0)).epsilon(0.1));
  std::size_t expected = 0;
  a.for_each_parameter([&](const std::string&, std::span<const double> v) { expected += v.size(); });
  CHECK(a.parameter_count() == expected);
}

TEST_CASE("network config validation") {
  NetConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.widths = {8, 16};
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg.widths = {8, 12, 32};
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg = {};
  cfg.scales = 0;
  cfg.widths = {};
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
}

TEST_CASE("stereogram construction") {
  const auto s = make_stereogram<double>(7, 32, 32, 4);
  int shifted = 0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const std::size_t i = s.gt_disparity.offset(y, x, 0);
      CHECK(s.valid[i] == 1);
      if (s.shifted[i]) {
        ++shifted;
        CHECK(s.gt_disparity.data[i] == 4.0);
        CHECK(s.right_clue.at(y, x, 0) == s.left_clue.at(y, std::max(0, x - 4), 0));
      } else {
        CHECK(s.gt_disparity.data[i] == 0.0);
        CHECK(s.right_clue.at(y, x, 0) == s.left_clue.at(y, x, 0));
      }
    }
  }
  CHECK(shifted >= 22 * 22);
  CHECK(shifted <= 30 * 30);

  const auto flat_pair = make_stereogram<double>(7, 32, 32, 0);
  CHECK(flat_pair.left_clue == flat_pair.right_clue);
  CHECK_THROWS_AS(make_stereogram<double>(1, 32, 32, 8), InvalidParameter);
  CHECK_THROWS_AS(make_stereogram<double>(1, 32, 32, -1), InvalidParameter);

  const auto d1 = make_dataset<double>(3, 5, 16, 16, 2), d2 = make_dataset<double>(3, 5, 16, 16, 2);
  for (std::size_t i = 0; i < 5; ++i) CHECK(d1[i].left_clue == d2[i].left_clue);
  CHECK_FALSE(d1[0].left_clue == d1[1].left_clue);
}

TEST_CASE("masked L1 loss and gradient") {
  Tensor<double> p(1, 4, 1), g(1, 4, 1), grad;
  p.data = {1.0, 2.0, 3.0, 10.0};
  g.data = {2.0, 2.0, 1.0, 0.0};
  const std::vector<std::uint8_t> valid = {1, 1, 1, 0};
  CHECK(masked_l1(p, g, valid, &grad) == doctest::Approx(1.0));
  CHECK(grad.data[0] == doctest::Approx(-1.0 / 3.0));
  CHECK(grad.data[2] == doctest::Approx(1.0 / 3.0));
  CHECK(grad.data[3] == 0.0);
  CHECK_THROWS_AS(masked_l1(p, g, std::vector<std::uint8_t>(4, 0)), EmptyMaskError);
}

TEST_CASE("training") {
  const auto data = make_dataset<double>(1, 6, 16, 16, 3);
  auto frozen = DualNet<double>::init(NetConfig{}, 2);
  TrainOptions opt;
  opt.epochs = 3;
  opt.learning_rate = 0.0;
  const TrainResult still = train_toy(frozen, data, opt);
  REQUIRE(still.epoch_losses.size() == 3);
  for (double l : still.epoch_losses) CHECK(l == still.initial_loss);

  auto a = DualNet<double>::init(NetConfig{}, 2), b = DualNet<double>::init(NetConfig{}, 2);
  opt.learning_rate = 1e-2;
  const TrainResult ra = train_toy(a, data, opt), rb = train_toy(b, data, opt);
  CHECK(ra.epoch_losses == rb.epoch_losses);
  CHECK(flat(a) == flat(b));

  const std::string csv = loss_curve_csv(ra);
  CHECK(csv.rfind("epoch,mean_l1_loss\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  opt.learning_rate = -1.0;
  CHECK_THROWS_AS(train_toy(a, data, opt), InvalidParameter);
  CHECK_THROWS_AS(train_toy(a, std::span<const StereogramSample<double>>{}, TrainOptions{}), InvalidInput);
  auto poisoned = data;
  poisoned[3].gt_disparity.data[0] = std::nan("");
  opt.learning_rate = 1e-2;
  CHECK_THROWS_AS(train_toy(a, poisoned, opt), TrainingDiverged);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "mestereo_duonet";
  std::filesystem::create_directories(dir);
  const auto net = DualNet<double>::init(NetConfig{}, 77);
  save_net(dir / "net.bin", net, R"({"note":"x"})");
  const auto back = load_net(dir / "net.bin");
  CHECK(back.config == net.config);
  CHECK(back.seed == 77);
  CHECK(flat(back) == flat(net));

  {
    std::ofstream f(dir / "bad.bin", std::ios::binary);
    f << "NOTDUONET-------";
  }
  CHECK_THROWS_AS(load_net(dir / "bad.bin"), FormatError);
  CHECK_THROWS_AS(load_net(dir / "missing.bin"), IoError);
  std::filesystem::remove_all(dir);
}
