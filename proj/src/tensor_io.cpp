#include "hqs/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hqs/error.hpp"

namespace hqs::io {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'Q', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::filesystem::path& p) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("truncated tensor file " + p.string());
  return v;
}

}  // namespace

Tensor from_matrix(std::string name, const Eigen::MatrixXf& m) {
  Tensor t{std::move(name), {m.rows(), m.cols()}, {}};
  t.data.resize(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(t.data.data(), m.rows(), m.cols()) = m;
  return t;
}

Eigen::MatrixXf to_matrix(const Tensor& t) {
  if (t.shape.size() != 2) throw Error("tensor " + t.name + " is not a matrix");
  return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      t.data.data(), t.shape[0], t.shape[1]);
}

void write_tensors(const std::filesystem::path& path, const std::vector<Tensor>& tensors) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
      std::size_t n = 1;
      for (auto d : t.shape) n *= static_cast<std::size_t>(d);
      if (n != t.data.size()) throw Error("tensor " + t.name + " data does not match its shape");
      put(out, static_cast<std::uint32_t>(t.name.size()));
      out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put(out, static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) put(out, d);
      out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<Tensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError(path.string() + " is not a tensor file");
  if (auto v = get<std::uint32_t>(in, path); v != kVersion)
    throw IoError(path.string() + ": unsupported tensor file version " + std::to_string(v));
  const auto count = get<std::uint32_t>(in, path);
  std::vector<Tensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    t.name.resize(get<std::uint32_t>(in, path));
    in.read(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    const auto ndim = get<std::uint32_t>(in, path);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(get<std::int64_t>(in, path));
      if (t.shape.back() < 0) throw IoError(path.string() + ": negative dimension in " + t.name);
      n *= static_cast<std::size_t>(t.shape.back());
    }
    t.data.resize(n);
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw IoError("truncated tensor file " + path.string());
    out.push_back(std::move(t));
  }
  return out;
}

const Tensor& find_tensor(const std::vector<Tensor>& tensors, const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw Error("checkpoint is missing tensor " + name);
}

}  // namespace hqs::io
