#include "ega/eegb.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ega/errors.hpp"

namespace ega::io {

namespace {

using nlohmann::json;

constexpr std::array<char, 4> kMagic = {'E', 'E', 'G', 'B'};

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

signal::Recording read_eegb(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw FormatError(path.string() + ": not an EEGB file (bad magic)");
  const std::uint32_t header_len = read_u32_le(p + 4);
  if (8 + static_cast<std::size_t>(header_len) > bytes.size())
    throw FormatError(path.string() + ": header length exceeds file size");
  json h;
  try {
    h = json::parse(bytes.substr(8, header_len));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad JSON header: " + e.what());
  }
  signal::Recording rec;
  try {
    if (h.at("version").get<int>() != 1)
      throw FormatError(path.string() + ": unsupported EEGB version " + h.at("version").dump());
    rec.channel_names = h.at("channel_names").get<std::vector<std::string>>();
    rec.sample_rate_hz = h.at("sample_rate_hz").get<double>();
    rec.n_samples = h.at("n_samples").get<std::size_t>();
    rec.subject_id = h.value("subject_id", std::string{});
    if (h.contains("label") && !h.at("label").is_null()) rec.label = h.at("label").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad EEGB header field: " + e.what());
  }
  const std::size_t count = rec.channel_names.size() * rec.n_samples;
  const std::size_t offset = 8 + header_len;
  if (bytes.size() - offset != count * 4)
    throw FormatError(path.string() + ": expected " + std::to_string(count * 4) + " sample bytes, found " +
                      std::to_string(bytes.size() - offset));
  rec.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = read_u32_le(p + offset + 4 * i);
    rec.samples[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  rec.validate();
  return rec;
}

void write_eegb(const std::filesystem::path& path, const signal::Recording& rec) {
  rec.validate();
  json h = {{"version", 1},
            {"channel_names", rec.channel_names},
            {"sample_rate_hz", rec.sample_rate_hz},
            {"label", rec.label ? json(*rec.label) : json(nullptr)},
            {"subject_id", rec.subject_id},
            {"n_samples", rec.n_samples}};
  const std::string header = h.dump();
  std::string out(kMagic.begin(), kMagic.end());
  put_u32_le(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  out.reserve(out.size() + rec.samples.size() * 4);
  for (double v : rec.samples) put_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<std::filesystem::path> list_eegb(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".eegb") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

signal::Recording read_csv(const std::filesystem::path& path, double sample_rate_hz,
                           std::string subject_id) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      cells.push_back(cell);
    }
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV");
  const auto header = split(line);
  if (header.size() < 2) throw FormatError(path.string() + ": need a time column and at least one channel");
  signal::Recording rec;
  rec.channel_names.assign(header.begin() + 1, header.end());
  rec.subject_id = subject_id.empty() ? path.stem().string() : std::move(subject_id);
  const std::size_t nch = rec.channel_names.size();
  std::vector<std::vector<double>> cols(nch);
  std::vector<double> times;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != nch + 1)
      throw FormatError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(nch + 1));
    try {
      times.push_back(std::stod(cells[0]));
      for (std::size_t c = 0; c < nch; ++c) cols[c].push_back(std::stod(cells[c + 1]));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": non-numeric value in row " + std::to_string(row));
    }
  }
  if (times.empty()) throw FormatError(path.string() + ": no samples");
  if (sample_rate_hz <= 0.0) {
    if (times.size() < 2 || !(times[1] > times[0]))
      throw FormatError(path.string() + ": cannot infer sample rate from the time column");
    sample_rate_hz = 1.0 / (times[1] - times[0]);
  }
  rec.sample_rate_hz = sample_rate_hz;
  rec.n_samples = times.size();
  for (const auto& c : cols) rec.samples.insert(rec.samples.end(), c.begin(), c.end());
  rec.validate();
  return rec;
}

}  // namespace ega::io
