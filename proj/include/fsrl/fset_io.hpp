#pragma once

// FSET: self-describing little-endian container for one feature set.
//
//   offset  size  field
//   0       4     magic "FSET"
//   4       1     version (1)
//   5       1     dtype (0 = float32, 1 = float64)
//   6       2     reserved, zero
//   8       4     p  (u32 LE)
//   12      4     q  (u32 LE)
//   16      4     n  (u32 LE)
//   20      ...   n maps of p*q values, each map column-major, maps consecutive
//
// Vector-form sets are written with p = d, q = 1.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "fsrl/core_types.hpp"

namespace fsrl {

enum class Dtype : std::uint8_t
{
  f32 = 0,
  f64 = 1,
};

inline constexpr std::size_t fset_header_size = 20;
inline constexpr std::uint8_t fset_version = 1;

using AnyMatrixSet = std::variant<MatrixFeatureSet<float>, MatrixFeatureSet<double>>;

template<typename Scalar>
std::vector<std::byte> encode_fset(const MatrixFeatureSet<Scalar>& set);

template<typename Scalar>
std::vector<std::byte> encode_fset(const FeatureSet<Scalar>& set)
{
  return encode_fset(MatrixFeatureSet<Scalar>(set.dim(), 1, set.data()));
}

/// Parses a complete file image. Throws TruncatedHeaderError, BadMagicError,
/// UnsupportedVersionError, UnknownDtypeError, ReservedFieldError,
/// ZeroDimensionError, PayloadLengthError or NonFiniteError.
AnyMatrixSet decode_fset(std::span<const std::byte> bytes);

Dtype dtype_of(const AnyMatrixSet& set);

/// Widens float32 payloads to double (exact).
MatrixFeatureSet<double> to_double(const AnyMatrixSet& set);

AnyMatrixSet read_fset(const std::filesystem::path& path);
MatrixFeatureSet<double> read_fset_f64(const std::filesystem::path& path);

template<typename Scalar>
void write_fset(const MatrixFeatureSet<Scalar>& set, const std::filesystem::path& path);

template<typename Scalar>
void write_fset(const FeatureSet<Scalar>& set, const std::filesystem::path& path)
{
  write_fset(MatrixFeatureSet<Scalar>(set.dim(), 1, set.data()), path);
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(std::span<const std::byte> bytes, const std::filesystem::path& path);

extern template std::vector<std::byte> encode_fset(const MatrixFeatureSet<float>&);
extern template std::vector<std::byte> encode_fset(const MatrixFeatureSet<double>&);
extern template void write_fset(const MatrixFeatureSet<float>&, const std::filesystem::path&);
extern template void write_fset(const MatrixFeatureSet<double>&, const std::filesystem::path&);

} // namespace fsrl
