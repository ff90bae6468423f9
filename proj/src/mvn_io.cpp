#include "maven/mvn_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "maven/error.hpp"

namespace maven::io {

namespace {

constexpr std::array<char, 4> kTensorMagic{'M', 'V', 'N', '1'};
constexpr std::array<char, 4> kArchiveMagic{'M', 'V', 'N', 'A'};
constexpr std::uint8_t kDtypeF64 = 0;

template <typename U>
void put_le(std::ostream& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename U>
bool get_le(std::istream& in, U& value) {
  value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) return false;
    value |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return true;
}

[[noreturn]] void bad(const std::string& source, const std::string& what) {
  throw Error(ErrorCode::ShapeMismatch, source + ": " + what);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return in;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kTensorMagic.data(), kTensorMagic.size());
  put_le<std::uint8_t>(out, kDtypeF64);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.ndim()));
  for (std::size_t e : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

Tensor read_tensor(std::istream& in, const std::string& source) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kTensorMagic) bad(source, "missing MVN1 magic");
  std::uint8_t dtype = 0, ndim = 0;
  if (!get_le(in, dtype) || !get_le(in, ndim)) bad(source, "truncated MVN1 header");
  if (dtype != kDtypeF64) bad(source, "unsupported dtype tag " + std::to_string(dtype));
  if (ndim == 0) bad(source, "zero-rank tensor");
  Shape shape(ndim);
  for (auto& e : shape) {
    std::uint32_t v = 0;
    if (!get_le(in, v)) bad(source, "truncated MVN1 extents");
    if (v == 0) bad(source, "zero extent");
    e = v;
  }
  std::vector<double> data(shape_numel(shape));
  for (double& d : data) {
    std::uint64_t bits = 0;
    if (!get_le(in, bits)) bad(source, "payload shorter than " + shape_str(shape));
    d = std::bit_cast<double>(bits);
  }
  return Tensor::from(std::move(shape), std::move(data));
}

std::string encode_tensor(const Tensor& t) {
  std::ostringstream os(std::ios::binary);
  write_tensor(os, t);
  return os.str();
}

Tensor decode_tensor(const std::string& bytes, const std::string& source) {
  std::istringstream is(bytes, std::ios::binary);
  Tensor t = read_tensor(is, source);
  if (is.peek() != std::char_traits<char>::eof()) bad(source, "trailing bytes after payload");
  return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
  auto out = open_out(path);
  write_tensor(out, t);
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
  auto in = open_in(path);
  Tensor t = read_tensor(in, path);
  if (in.peek() != std::char_traits<char>::eof()) bad(path, "trailing bytes after payload");
  return t;
}

void save_archive(const std::string& path, const std::vector<NamedTensor>& tensors) {
  nlohmann::ordered_json manifest;
  manifest["format"] = "MVNA";
  manifest["version"] = 1;
  manifest["tensors"] = nlohmann::ordered_json::array();
  std::string payload;
  for (const auto& nt : tensors) {
    const std::string blob = encode_tensor(nt.tensor);
    manifest["tensors"].push_back({{"name", nt.name}, {"offset", payload.size()}, {"size", blob.size()}});
    payload += blob;
  }
  const std::string header = manifest.dump();
  auto out = open_out(path);
  out.write(kArchiveMagic.data(), kArchiveMagic.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

std::vector<NamedTensor> load_archive(const std::string& path) {
  auto in = open_in(path);
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kArchiveMagic) {
    throw Error(ErrorCode::CheckpointMismatch, path + ": missing MVNA magic");
  }
  std::uint32_t len = 0;
  if (!get_le(in, len)) throw Error(ErrorCode::CheckpointMismatch, path + ": truncated archive header");
  std::string header(len, '\0');
  if (!in.read(header.data(), len)) throw Error(ErrorCode::CheckpointMismatch, path + ": truncated manifest");
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CheckpointMismatch, path + ": bad manifest: " + e.what());
  }
  std::vector<NamedTensor> result;
  for (const auto& entry : manifest.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto size = entry.at("size").get<std::size_t>();
    if (offset + size > payload.size()) {
      throw Error(ErrorCode::CheckpointMismatch, path + ": tensor " + name + " extends past end of archive");
    }
    result.push_back({name, decode_tensor(payload.substr(offset, size), path + ":" + name)});
  }
  return result;
}

}  // namespace maven::io
