#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "htm/tensor.hpp"

namespace htm {

/// Binary model checkpoint.
///
/// Layout (all integers u32 little-endian, all reals IEEE-754 binary64
/// little-endian):
///
///   "HTMC" | version | kind (4 ASCII bytes) | n_meta | meta[n_meta] (f64)
///   | n_tensors | (rows, cols)[n_tensors] | tensor data, row-major, in order
///
/// Tensor order is fixed per model kind: MLP layers input to output, each as
/// weight then bias, followed by any extra matrices of the model.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;
  std::vector<double> meta;
  std::vector<Matrix> tensors;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError on a missing file, bad magic/version or truncated data, and
/// when `expected_kind` is non-empty and differs from the stored kind.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind = {});

}  // namespace htm

#include "htm/nn.hpp"

namespace htm {

/// Appends an MLP as meta [layers, hidden activation, output activation] and
/// its weight/bias tensors.
void append_mlp(Checkpoint& ckpt, const MlpParams& mlp);

/// Reads an MLP written by append_mlp, advancing both cursors. Throws IoError
/// when the stored dimensions are inconsistent.
MlpParams read_mlp(const Checkpoint& ckpt, std::size_t& meta_cursor, std::size_t& tensor_cursor);

}  // namespace htm
