#include "relrl/checkpoint.hpp"

#include "relrl/error.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace relrl {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'E', 'L', 'R', 'L', 'C', 'K', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) fail(ErrorCode::io, "checkpoint: truncated archive");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_archive(std::ostream& out, const ParameterStore& store) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, e] : store.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(e.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(e.value.cols()));
    const float* p = e.value.data();
    for (Eigen::Index i = 0; i < e.value.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(p[i]));
  }
  if (!out) fail(ErrorCode::io, "checkpoint: write failed");
}

ParameterStore read_archive(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) fail(ErrorCode::parse, "checkpoint: bad magic");
  ParameterStore store;
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t len = get_u32(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) fail(ErrorCode::io, "checkpoint: truncated name");
    const std::uint32_t rank = get_u32(in);
    if (rank != 1 && rank != 2) fail(ErrorCode::parse, "checkpoint: unsupported rank for '" + name + "'");
    std::uint32_t rows = 1;
    std::uint32_t cols = get_u32(in);
    if (rank == 2) {
      rows = cols;
      cols = get_u32(in);
    }
    Matf value(rows, cols);
    float* p = value.data();
    for (Eigen::Index i = 0; i < value.size(); ++i) p[i] = std::bit_cast<float>(get_u32(in));
    store.add(name, std::move(value));
  }
  return store;
}

std::string format_manifest(const Manifest& manifest) {
  std::ostringstream out;
  for (const auto& [k, v] : manifest) out << k << '=' << v << '\n';
  return out.str();
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::parse, "manifest: expected key=value, got '" + line + "'");
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

void save_checkpoint(const std::filesystem::path& dir, const ParameterStore& store, const Manifest& manifest) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + (dir / "params.bin").string());
    write_archive(out, store);
  }
  Manifest m = manifest;
  m["step_count"] = std::to_string(store.step_count);
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + (dir / "manifest.txt").string());
  out << format_manifest(m);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  Checkpoint ck;
  {
    std::ifstream in(dir / "params.bin", std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot read " + (dir / "params.bin").string());
    ck.store = read_archive(in);
  }
  std::ifstream in(dir / "manifest.txt");
  if (!in) fail(ErrorCode::io, "cannot read " + (dir / "manifest.txt").string());
  std::stringstream buf;
  buf << in.rdbuf();
  ck.manifest = parse_manifest(buf.str());
  if (auto it = ck.manifest.find("step_count"); it != ck.manifest.end()) {
    ck.store.step_count = std::stoll(it->second);
  }
  return ck;
}

}  // namespace relrl
