#include "mestereo/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mestereo/duonet.hpp"
#include "mestereo/error.hpp"
#include "mestereo/fuse.hpp"
#include "mestereo/image_io.hpp"
#include "mestereo/metrics.hpp"

namespace mestereo::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Raised for command-line level validation failures (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw UsageError("config file '" + path + "' must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// Fills `field` from the config file unless the flag was given on the command line.
template <typename T>
void merge(const CLI::App& app, const json& file, const std::string& key, T& field) {
  const CLI::Option* opt = app.get_option_no_throw("--" + key);
  if (opt != nullptr && opt->count() > 0) return;
  if (!file.contains(key)) return;
  try {
    field = file.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config key '" + key + "' has the wrong type: " + e.what());
  }
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

DisparityMap read_disparity(const fs::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".pfm") return read_pfm(path);
  const ImageF img = read_image(path);
  if (img.channels() != 1) throw UsageError("disparity file '" + path.string() + "' must be single-channel");
  return DisparityMap(img);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

struct FuseArgs {
  std::vector<std::string> left;
  std::vector<std::string> disp;
  std::string out;
  double wc = 1.0;
  double we = 1.0;
  double sigma = 0.2;
  int median_window = 3;
  int levels = 0;  // 0 selects the default for the image extent
  bool naive = false;
  std::string dump_pyramids;
};

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::optional<double> baseline;
  std::optional<double> focal;
  std::string out;
  std::string log_base = "10";
};

struct TrainArgs {
  std::uint64_t seed = 0;
  int epochs = 30;
  double lr = 1e-2;
  int samples = 200;
  int size = 32;
  int shift = 4;
  std::string out;
  std::string curve;
};

struct ConvertArgs {
  std::string disp;
  double baseline = 0.0;
  double focal = 0.0;
  std::string out;
};

int cmd_fuse(FuseArgs a, std::ostream& out, std::ostream& err) {
  if (a.left.size() != a.disp.size()) {
    throw UsageError("expected equal counts of --left (" + std::to_string(a.left.size()) + ") and --disp (" +
                     std::to_string(a.disp.size()) + ")");
  }
  if (a.left.empty()) throw UsageError("fuse needs at least one --left/--disp pair");
  if (a.out.empty()) throw UsageError("fuse needs --out");

  json echo = {{"command", "fuse"}, {"left", a.left},   {"disp", a.disp},
               {"out", a.out},      {"wc", a.wc},       {"we", a.we},
               {"sigma", a.sigma},  {"median-window", a.median_window},
               {"levels", a.levels}, {"naive", a.naive}, {"dump-pyramids", a.dump_pyramids}};
  err << "resolved config: " << echo.dump() << "\n";

  FuseOptions options;
  options.quality.contrast_exponent = a.wc;
  options.quality.exposedness_exponent = a.we;
  options.quality.sigma = a.sigma;
  options.quality.median_window = a.median_window;
  options.quality.validate();
  if (a.levels != 0) options.levels = a.levels;
  options.naive = a.naive;
  if (!a.dump_pyramids.empty()) options.dump_dir = fs::path(a.dump_pyramids);

  ExposureStack stack;
  for (std::size_t k = 0; k < a.left.size(); ++k) {
    stack.left_images.push_back(read_image(a.left[k]));
    stack.disparities.push_back(read_disparity(a.disp[k]));
    stack.exposure_labels.push_back(a.left[k]);
  }
  const FuseResult result = fuse(stack, options);

  const fs::path out_path(a.out);
  write_pfm(out_path, result.refined);
  write_preview_png(sibling(out_path, "_preview.png"), result.refined);
  for (std::size_t k = 0; k < result.weights.size(); ++k) {
    write_image(sibling(out_path, "_weight" + std::to_string(k) + ".png"), result.weights.normalized[k]);
  }
  out << "fused " << stack.size() << " maps (" << (a.naive ? "single-scale" : std::to_string(result.levels) + "-level pyramid")
      << ") -> " << out_path.string() << "\n";
  return kExitOk;
}

int cmd_eval(EvalArgs a, std::ostream& out, std::ostream& err) {
  if (a.pred.empty() || a.gt.empty()) throw UsageError("eval needs --pred and --gt");
  if (a.baseline.has_value() != a.focal.has_value()) {
    throw UsageError("--baseline and --focal must be given together");
  }
  if (a.log_base != "10" && a.log_base != "e") throw UsageError("--log-base must be 10 or e");
  json echo = {{"command", "eval"}, {"pred", a.pred}, {"gt", a.gt}, {"out", a.out}, {"log-base", a.log_base}};
  echo["baseline"] = a.baseline ? json(*a.baseline) : json(nullptr);
  echo["focal"] = a.focal ? json(*a.focal) : json(nullptr);
  err << "resolved config: " << echo.dump() << "\n";

  std::optional<CameraCalib> calib;
  if (a.baseline) {
    calib = CameraCalib{*a.baseline, *a.focal};
    calib->validate();
  }
  const DisparityMap pred = read_disparity(a.pred);
  const DisparityMap gt = read_disparity(a.gt);
  const MetricReport report = evaluate(pred, gt, calib, a.log_base == "e" ? LogBase::natural : LogBase::ten);
  if (!a.out.empty()) write_text(a.out, report_csv_header() + "\n" + report_csv_row(report) + "\n");
  out << report_table(report);
  return kExitOk;
}

int cmd_toy_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  if (a.samples < 1) throw UsageError("--samples must be >= 1");
  json echo = {{"command", "toy-train"}, {"seed", a.seed},   {"epochs", a.epochs}, {"lr", a.lr},
               {"samples", a.samples},   {"size", a.size},   {"shift", a.shift},   {"out", a.out},
               {"curve", a.curve}};
  err << "resolved config: " << echo.dump() << "\n";

  const auto dataset = duonet::make_dataset<double>(a.seed, static_cast<std::size_t>(a.samples), a.size, a.size, a.shift);
  auto net = duonet::DualNet<double>::init(duonet::NetConfig{}, a.seed);
  duonet::TrainOptions options;
  options.epochs = a.epochs;
  options.learning_rate = a.lr;
  options.shuffle_seed = a.seed;
  const duonet::TrainResult result = duonet::train_toy(net, dataset, options);

  out << "initial loss " << result.initial_loss << "\n";
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    out << "epoch " << (e + 1) << " loss " << result.epoch_losses[e] << "\n";
  }
  if (!a.curve.empty()) write_text(a.curve, duonet::loss_curve_csv(result));
  if (!a.out.empty()) {
    json extra = {{"epochs", a.epochs}, {"lr", a.lr}, {"samples", a.samples},
                  {"size", a.size},     {"shift", a.shift}};
    duonet::save_net(a.out, net, extra.dump());
  }
  return kExitOk;
}

int cmd_convert(ConvertArgs a, std::ostream& out, std::ostream& err) {
  if (a.disp.empty() || a.out.empty()) throw UsageError("convert needs --disp and --out");
  json echo = {{"command", "convert"}, {"disp", a.disp}, {"baseline", a.baseline}, {"focal", a.focal}, {"out", a.out}};
  err << "resolved config: " << echo.dump() << "\n";
  const CameraCalib calib{a.baseline, a.focal};
  calib.validate();
  const DisparityMap depth = depth_from_disparity(read_disparity(a.disp), calib);
  write_pfm(a.out, depth);
  out << "wrote depth map " << a.out << " (" << depth.valid_count() << " valid pixels)\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-exposure disparity fusion, depth metrics and a toy dual-encoder network"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with default flag values (flags win)");

  FuseArgs fa;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse N disparity maps from differently exposed stereo pairs");
  fuse_cmd->add_option("--left", fa.left, "Left-view exposure images");
  fuse_cmd->add_option("--disp", fa.disp, "Disparity maps, one per exposure");
  fuse_cmd->add_option("--out", fa.out, "Refined disparity (PFM)");
  fuse_cmd->add_option("--wc", fa.wc, "Contrast exponent");
  fuse_cmd->add_option("--we", fa.we, "Well-exposedness exponent");
  fuse_cmd->add_option("--sigma", fa.sigma, "Well-exposedness width");
  fuse_cmd->add_option("--median-window", fa.median_window, "Median filter size (odd)");
  fuse_cmd->add_option("--levels", fa.levels, "Pyramid levels (0 = default)");
  fuse_cmd->add_flag("--naive", fa.naive, "Single-scale weighted average instead of the pyramid blend");
  fuse_cmd->add_option("--dump-pyramids", fa.dump_pyramids, "Directory receiving every pyramid level as PFM");

  EvalArgs ea;
  double baseline = 0.0, focal = 0.0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a prediction against ground truth");
  eval_cmd->add_option("--pred", ea.pred, "Predicted disparity (PFM)");
  eval_cmd->add_option("--gt", ea.gt, "Ground-truth disparity (PFM)");
  auto* baseline_opt = eval_cmd->add_option("--baseline", baseline, "Stereo baseline; enables depth-space evaluation");
  auto* focal_opt = eval_cmd->add_option("--focal", focal, "Focal length in pixels");
  eval_cmd->add_option("--out", ea.out, "CSV report");
  eval_cmd->add_option("--log-base", ea.log_base, "Base of the log error: 10 or e");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("toy-train", "Train the toy dual-encoder network on random-dot stereograms");
  train_cmd->add_option("--seed", ta.seed, "Seed for data, initialization and shuffling");
  train_cmd->add_option("--epochs", ta.epochs, "Epoch count");
  train_cmd->add_option("--lr", ta.lr, "SGD learning rate");
  train_cmd->add_option("--samples", ta.samples, "Number of stereograms");
  train_cmd->add_option("--size", ta.size, "Stereogram side length");
  train_cmd->add_option("--shift", ta.shift, "Disparity of the displaced region");
  train_cmd->add_option("--out", ta.out, "Trained network file");
  train_cmd->add_option("--curve", ta.curve, "Loss curve CSV");

  ConvertArgs ca;
  auto* convert_cmd = app.add_subcommand("convert", "Convert disparity to depth");
  convert_cmd->add_option("--disp", ca.disp, "Disparity (PFM)");
  convert_cmd->add_option("--baseline", ca.baseline, "Stereo baseline");
  convert_cmd->add_option("--focal", ca.focal, "Focal length in pixels");
  convert_cmd->add_option("--out", ca.out, "Depth map (PFM)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const json file = load_config_file(config_path);
    if (fuse_cmd->parsed()) {
      merge(*fuse_cmd, file, "left", fa.left);
      merge(*fuse_cmd, file, "disp", fa.disp);
      merge(*fuse_cmd, file, "out", fa.out);
      merge(*fuse_cmd, file, "wc", fa.wc);
      merge(*fuse_cmd, file, "we", fa.we);
      merge(*fuse_cmd, file, "sigma", fa.sigma);
      merge(*fuse_cmd, file, "median-window", fa.median_window);
      merge(*fuse_cmd, file, "levels", fa.levels);
      merge(*fuse_cmd, file, "naive", fa.naive);
      merge(*fuse_cmd, file, "dump-pyramids", fa.dump_pyramids);
      return cmd_fuse(std::move(fa), out, err);
    }
    if (eval_cmd->parsed()) {
      merge(*eval_cmd, file, "pred", ea.pred);
      merge(*eval_cmd, file, "gt", ea.gt);
      merge(*eval_cmd, file, "out", ea.out);
      merge(*eval_cmd, file, "log-base", ea.log_base);
      if (baseline_opt->count() > 0) ea.baseline = baseline;
      else if (file.contains("baseline")) ea.baseline = file["baseline"].get<double>();
      if (focal_opt->count() > 0) ea.focal = focal;
      else if (file.contains("focal")) ea.focal = file["focal"].get<double>();
      return cmd_eval(std::move(ea), out, err);
    }
    if (train_cmd->parsed()) {
      merge(*train_cmd, file, "seed", ta.seed);
      merge(*train_cmd, file, "epochs", ta.epochs);
      merge(*train_cmd, file, "lr", ta.lr);
      merge(*train_cmd, file, "samples", ta.samples);
      merge(*train_cmd, file, "size", ta.size);
      merge(*train_cmd, file, "shift", ta.shift);
      merge(*train_cmd, file, "out", ta.out);
      merge(*train_cmd, file, "curve", ta.curve);
      return cmd_toy_train(std::move(ta), out, err);
    }
    merge(*convert_cmd, file, "disp", ca.disp);
    merge(*convert_cmd, file, "baseline", ca.baseline);
    merge(*convert_cmd, file, "focal", ca.focal);
    merge(*convert_cmd, file, "out", ca.out);
    return cmd_convert(std::move(ca), out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace mestereo::cli
