#include "ega/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "ega/errors.hpp"

namespace ega::io {

using nlohmann::json;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const json& config, const ParameterSet& params,
                     const std::string& rng_state) {
  json entries = json::array();
  std::size_t offset = 0;
  for (const auto& p : params.items()) {
    entries.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"trainable", p.trainable()}, {"offset", offset}});
    offset += p.value.numel() * 8;
  }
  const json manifest = {{"format", "EGAC"}, {"version", 1},     {"config", config},
                         {"params", entries}, {"rng_state", rng_state}};
  const std::string text = manifest.dump();
  std::string out = "EGAC";
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& p : params.items())
    for (double v : p.value.data()) put_f64(out, v);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || bytes.compare(0, 4, "EGAC") != 0)
    throw FormatError(path.string() + ": not an EGAC checkpoint");
  const auto len = static_cast<std::size_t>(get_u64(p + 4, 4));
  if (8 + len > bytes.size()) throw FormatError(path.string() + ": truncated manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(8, len));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad manifest: " + e.what());
  }
  Checkpoint ck;
  try {
    if (manifest.at("version").get<int>() != 1) throw FormatError(path.string() + ": unsupported EGAC version");
    ck.config = manifest.at("config");
    ck.rng_state = manifest.at("rng_state").get<std::string>();
    const std::size_t base = 8 + len;
    for (const auto& e : manifest.at("params")) {
      const auto shape = e.at("shape").get<ad::Shape>();
      const auto off = e.at("offset").get<std::size_t>();
      const std::size_t n = ad::numel_of(shape);
      if (base + off + n * 8 > bytes.size())
        throw FormatError(path.string() + ": buffer for " + e.at("name").get<std::string>() + " runs past the end");
      std::vector<double> data(n);
      for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_u64(p + base + off + 8 * i, 8));
      ck.params.add(e.at("name").get<std::string>(), ad::Tensor(shape, std::move(data)), e.at("trainable").get<bool>());
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad manifest field: " + e.what());
  }
  return ck;
}

}  // namespace ega::io
