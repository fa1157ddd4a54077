#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

#include "mestereo/duonet.hpp"
#include "mestereo/error.hpp"

namespace mestereo::duonet {
namespace {

constexpr char kMagic[8] = {'D', 'U', 'O', 'N', 'E', 'T', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= std::uint64_t{static_cast<unsigned char>(in[pos + static_cast<std::size_t>(k)])} << (8 * k);
  return v;
}

nlohmann::json layer_shape(const ConvLayer<double>& l) {
  return {{"kernel", l.kernel}, {"in", l.in_channels}, {"out", l.out_channels}};
}

}  // namespace

void save_net(const std::filesystem::path& path, const DualNet<double>& net, const std::string& extra_json) {
  nlohmann::json header;
  header["format"] = "duonet";
  header["version"] = 1;
  header["scalar"] = "float64";
  header["seed"] = net.seed;
  header["config"] = {{"scales", net.config.scales}, {"widths", net.config.widths}, {"in_channels", net.config.in_channels}};
  nlohmann::json tensors = nlohmann::json::array();
  net.for_each_parameter([&](const std::string& name, std::span<const double> v) {
    tensors.push_back({{"name", name}, {"count", v.size()}});
  });
  header["tensors"] = tensors;
  header["head"] = layer_shape(net.head);
  try {
    header["extra"] = nlohmann::json::parse(extra_json);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("extra header is not valid JSON: ") + e.what());
  }

  const std::string text = header.dump();
  std::string blob(kMagic, kMagic + 8);
  put_u64(blob, text.size());
  blob += text;
  net.for_each_parameter([&](const std::string&, std::span<const double> v) {
    for (double d : v) put_u64(blob, std::bit_cast<std::uint64_t>(d));
  });

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

DualNet<double> load_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, 8) != 0) {
    throw FormatError("'" + path.string() + "' is not a duonet file", 0);
  }
  const std::uint64_t header_len = get_u64(blob, 8);
  if (header_len > blob.size() - 16) throw FormatError("duonet header length exceeds file size", 8);

  nlohmann::json header;
  NetConfig config;
  try {
    header = nlohmann::json::parse(blob.substr(16, header_len));
    config.scales = header.at("config").at("scales").get<int>();
    config.widths = header.at("config").at("widths").get<std::vector<int>>();
    config.in_channels = header.at("config").at("in_channels").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad duonet header: ") + e.what(), 16);
  }
  DualNet<double> net = DualNet<double>::zeros(config);
  net.seed = header.value("seed", std::uint64_t{0});

  std::size_t pos = 16 + header_len;
  const std::size_t expected = net.parameter_count() * 8;
  if (blob.size() - pos != expected) {
    throw FormatError("duonet payload holds " + std::to_string(blob.size() - pos) + " bytes, expected " +
                          std::to_string(expected),
                      pos);
  }
  net.for_each_parameter([&](const std::string&, std::span<double> v) {
    for (double& d : v) {
      d = std::bit_cast<double>(get_u64(blob, pos));
      pos += 8;
    }
  });
  return net;
}

}  // namespace mestereo::duonet
