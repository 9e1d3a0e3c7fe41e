#include "noisetrans/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace noisetrans {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'N', 'T'};

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error("checkpoint '" + path.string() + "': " + why);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_f32_le(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(out, bits);
}

float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw std::invalid_argument("checkpoint has no tensor named '" + name + "'");
}

Checkpoint make_checkpoint(const std::string& kind, nlohmann::json meta,
                           const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  Checkpoint ckpt;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [name, tensor] : tensors) {
    index.push_back({{"name", name}, {"shape", tensor->shape()}});
    ckpt.tensors.emplace_back(name, *tensor);
  }
  ckpt.manifest = {{"format", "NTNT"},
                   {"version", Checkpoint::kVersion},
                   {"kind", kind},
                   {"meta", std::move(meta)},
                   {"tensors", std::move(index)}};
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out.write(kMagic, 4);
  write_u32(out, Checkpoint::kVersion);
  const std::string manifest = ckpt.manifest.dump();
  write_u64(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    for (double v : tensor.data()) write_f32_le(out, static_cast<float>(v));
  }
  if (!out) fail(path, "write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) fail(path, "bad magic (expected NTNT)");
  const std::uint32_t version = read_u32(in);
  if (version != Checkpoint::kVersion) {
    fail(path, "unsupported format version " + std::to_string(version));
  }
  const std::uint64_t manifest_len = read_u64(in);
  std::string manifest_text(manifest_len, '\0');
  in.read(manifest_text.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) fail(path, "truncated manifest");

  Checkpoint ckpt;
  try {
    ckpt.manifest = nlohmann::json::parse(manifest_text);
  } catch (const std::exception& e) {
    fail(path, std::string("manifest parse error: ") + e.what());
  }
  if (!ckpt.manifest.contains("tensors") || !ckpt.manifest["tensors"].is_array()) {
    fail(path, "manifest has no tensor index");
  }
  for (const auto& entry : ckpt.manifest["tensors"]) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const std::int64_t numel = shape_numel(shape);
    std::vector<unsigned char> raw(static_cast<std::size_t>(numel) * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) fail(path, "truncated payload at tensor '" + name + "'");
    std::vector<double> values(static_cast<std::size_t>(numel));
    for (std::int64_t i = 0; i < numel; ++i) {
      values[static_cast<std::size_t>(i)] =
          static_cast<double>(read_f32_le(raw.data() + static_cast<std::size_t>(i) * 4));
    }
    ckpt.tensors.emplace_back(name, Tensor(shape, std::move(values)));
  }
  if (in.peek() != EOF) fail(path, "trailing bytes after payload");
  return ckpt;
}

}  // namespace noisetrans
