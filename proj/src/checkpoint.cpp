#include "htm/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "htm/errors.hpp"

namespace htm {

namespace {

constexpr char kMagic[4] = {'H', 'T', 'M', 'C'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void get_bytes(std::istream& in, unsigned char* b, std::size_t n) {
  in.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw IoError("truncated checkpoint", "<stream>");
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  get_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  if (ckpt.kind.size() != 4) throw UsageError("checkpoint kind must be 4 characters");
  out.write(kMagic, 4);
  put_u32(out, Checkpoint::kVersion);
  out.write(ckpt.kind.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (double m : ckpt.meta) put_f64(out, m);
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const Matrix& t : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.cols()));
  }
  for (const Matrix& t : ckpt.tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i) put_f64(out, t.data()[i]);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  unsigned char magic[4];
  get_bytes(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("bad checkpoint magic", "<stream>");
  const std::uint32_t version = get_u32(in);
  if (version != Checkpoint::kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version), "<stream>");
  }
  Checkpoint ckpt;
  unsigned char kind[4];
  get_bytes(in, kind, 4);
  ckpt.kind.assign(reinterpret_cast<const char*>(kind), 4);
  const std::uint32_t n_meta = get_u32(in);
  if (n_meta > (1u << 20)) throw IoError("implausible checkpoint metadata size", "<stream>");
  for (std::uint32_t i = 0; i < n_meta; ++i) ckpt.meta.push_back(get_f64(in));
  const std::uint32_t n_tensors = get_u32(in);
  if (n_tensors > (1u << 16)) throw IoError("implausible checkpoint tensor count", "<stream>");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint32_t r = get_u32(in);
    const std::uint32_t c = get_u32(in);
    if (static_cast<std::uint64_t>(r) * c > (1ull << 28)) {
      throw IoError("implausible checkpoint tensor size", "<stream>");
    }
    dims.emplace_back(r, c);
  }
  for (const auto& [r, c] : dims) {
    Matrix t(r, c);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = get_f64(in);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  write_checkpoint(out, ckpt);
  if (!out) throw IoError("write failed", path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading", path.string());
  Checkpoint ckpt;
  try {
    ckpt = read_checkpoint(in);
  } catch (const IoError& e) {
    throw IoError(e.what(), path.string());
  }
  if (!expected_kind.empty() && ckpt.kind != expected_kind) {
    throw IoError("checkpoint kind '" + ckpt.kind + "' is not '" + expected_kind + "'", path.string());
  }
  return ckpt;
}

}  // namespace htm

namespace htm {

namespace {

double activation_code(Activation a) {
  switch (a) {
    case Activation::Relu: return 0.0;
    case Activation::Tanh: return 1.0;
    case Activation::Identity: return 2.0;
  }
  return 2.0;
}

Activation activation_from_code(double c) {
  if (c == 0.0) return Activation::Relu;
  if (c == 1.0) return Activation::Tanh;
  if (c == 2.0) return Activation::Identity;
  throw IoError("bad activation code in checkpoint", "<checkpoint>");
}

}  // namespace

void append_mlp(Checkpoint& ckpt, const MlpParams& mlp) {
  ckpt.meta.push_back(static_cast<double>(mlp.layers.size()));
  ckpt.meta.push_back(activation_code(mlp.hidden));
  ckpt.meta.push_back(activation_code(mlp.output));
  for (const auto& l : mlp.layers) {
    ckpt.tensors.push_back(l.weight);
    ckpt.tensors.push_back(l.bias);
  }
}

MlpParams read_mlp(const Checkpoint& ckpt, std::size_t& meta_cursor, std::size_t& tensor_cursor) {
  if (meta_cursor + 3 > ckpt.meta.size()) throw IoError("checkpoint metadata truncated", "<checkpoint>");
  const double layers = ckpt.meta[meta_cursor];
  if (layers < 1.0 || layers != std::floor(layers)) throw IoError("bad MLP layer count", "<checkpoint>");
  MlpParams mlp;
  mlp.hidden = activation_from_code(ckpt.meta[meta_cursor + 1]);
  mlp.output = activation_from_code(ckpt.meta[meta_cursor + 2]);
  meta_cursor += 3;
  const auto n = static_cast<std::size_t>(layers);
  if (tensor_cursor + 2 * n > ckpt.tensors.size()) throw IoError("checkpoint tensors truncated", "<checkpoint>");
  for (std::size_t i = 0; i < n; ++i) {
    DenseLayer l{ckpt.tensors[tensor_cursor], ckpt.tensors[tensor_cursor + 1]};
    tensor_cursor += 2;
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.rows()) {
      throw IoError("MLP bias shape does not match weight", "<checkpoint>");
    }
    if (!mlp.layers.empty() && mlp.layers.back().weight.rows() != l.weight.cols()) {
      throw IoError("MLP layer dimensions do not chain", "<checkpoint>");
    }
    mlp.layers.push_back(std::move(l));
  }
  return mlp;
}

}  // namespace htm
