#include "fsrl/fset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace fsrl {

namespace {

constexpr std::byte magic[4] = { std::byte{ 'F' }, std::byte{ 'S' }, std::byte{ 'E' },
                                 std::byte{ 'T' } };

template<typename Uint>
void put_le(std::vector<std::byte>& out, Uint v)
{
  for (std::size_t i = 0; i < sizeof(Uint); ++i)
    out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

template<typename Uint>
Uint get_le(std::span<const std::byte> in, std::size_t offset)
{
  Uint v = 0;
  for (std::size_t i = 0; i < sizeof(Uint); ++i)
    v |= static_cast<Uint>(std::to_integer<std::uint8_t>(in[offset + i])) << (8 * i);
  return v;
}

template<typename Scalar>
using BitsOf = std::conditional_t<sizeof(Scalar) == 4, std::uint32_t, std::uint64_t>;

template<typename Scalar>
constexpr Dtype dtype_for()
{
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>,
                "FSET stores float32 or float64 only");
  return std::is_same_v<Scalar, float> ? Dtype::f32 : Dtype::f64;
}

std::uint32_t checked_u32(Index v, const char* what)
{
  if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<std::uint32_t>::max())
    throw DimensionMismatchError(std::string(what) + " does not fit the 32-bit FSET header");
  return static_cast<std::uint32_t>(v);
}

template<typename Scalar>
MatrixFeatureSet<Scalar> decode_payload(std::span<const std::byte> payload, std::uint32_t p,
                                        std::uint32_t q, std::uint32_t n)
{
  const Index d = static_cast<Index>(p) * static_cast<Index>(q);
  Matrix<Scalar> stack(d, static_cast<Index>(n));
  Scalar* dst = stack.data();
  for (Index i = 0; i < stack.size(); ++i)
    dst[i] = std::bit_cast<Scalar>(
      get_le<BitsOf<Scalar>>(payload, static_cast<std::size_t>(i) * sizeof(Scalar)));
  return MatrixFeatureSet<Scalar>(p, q, std::move(stack));
}

} // namespace

template<typename Scalar>
std::vector<std::byte> encode_fset(const MatrixFeatureSet<Scalar>& set)
{
  const std::uint32_t p = checked_u32(set.map_rows(), "p");
  const std::uint32_t q = checked_u32(set.map_cols(), "q");
  const std::uint32_t n = checked_u32(set.size(), "n");

  std::vector<std::byte> out;
  out.reserve(fset_header_size + static_cast<std::size_t>(set.stack().size()) * sizeof(Scalar));
  out.insert(out.end(), std::begin(magic), std::end(magic));
  out.push_back(std::byte{ fset_version });
  out.push_back(static_cast<std::byte>(dtype_for<Scalar>()));
  put_le<std::uint16_t>(out, 0);
  put_le(out, p);
  put_le(out, q);
  put_le(out, n);
  const Scalar* src = set.stack().data();
  for (Index i = 0; i < set.stack().size(); ++i)
    put_le(out, std::bit_cast<BitsOf<Scalar>>(src[i]));
  return out;
}

AnyMatrixSet decode_fset(std::span<const std::byte> bytes)
{
  if (bytes.size() < fset_header_size)
    throw TruncatedHeaderError("FSET header needs " + std::to_string(fset_header_size) +
                               " bytes, got " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), magic, 4) != 0)
    throw BadMagicError("not an FSET file (bad magic)");
  const auto version = std::to_integer<std::uint8_t>(bytes[4]);
  if (version != fset_version)
    throw UnsupportedVersionError("unsupported FSET version " + std::to_string(version));
  const auto dtype = std::to_integer<std::uint8_t>(bytes[5]);
  if (dtype > 1)
    throw UnknownDtypeError("unknown FSET dtype " + std::to_string(dtype));
  if (get_le<std::uint16_t>(bytes, 6) != 0)
    throw ReservedFieldError("FSET reserved bytes must be zero");

  const auto p = get_le<std::uint32_t>(bytes, 8);
  const auto q = get_le<std::uint32_t>(bytes, 12);
  const auto n = get_le<std::uint32_t>(bytes, 16);
  if (p == 0 || q == 0 || n == 0)
    throw ZeroDimensionError("FSET header has a zero dimension (p=" + std::to_string(p) +
                             ", q=" + std::to_string(q) + ", n=" + std::to_string(n) + ")");

  const std::size_t width = dtype == 0 ? 4 : 8;
  const std::uint64_t values = static_cast<std::uint64_t>(p) * q * n;
  if (values > (std::numeric_limits<std::uint64_t>::max() - fset_header_size) / width)
    throw PayloadLengthError("FSET header dimensions overflow");
  const std::uint64_t expected = fset_header_size + values * width;
  if (bytes.size() != expected)
    throw PayloadLengthError("FSET payload length mismatch: file has " +
                             std::to_string(bytes.size()) + " bytes, header implies " +
                             std::to_string(expected));

  const auto payload = bytes.subspan(fset_header_size);
  if (dtype == 0)
    return decode_payload<float>(payload, p, q, n);
  return decode_payload<double>(payload, p, q, n);
}

Dtype dtype_of(const AnyMatrixSet& set)
{
  return std::holds_alternative<MatrixFeatureSet<float>>(set) ? Dtype::f32 : Dtype::f64;
}

MatrixFeatureSet<double> to_double(const AnyMatrixSet& set)
{
  return std::visit(
    [](const auto& s) {
      return MatrixFeatureSet<double>(s.map_rows(), s.map_cols(), s.stack().template cast<double>());
    },
    set);
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<std::byte> bytes(size);
  in.seekg(0);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    throw IoError("failed reading '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(std::span<const std::byte> bytes, const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError("failed writing '" + path.string() + "'");
}

AnyMatrixSet read_fset(const std::filesystem::path& path)
{
  return decode_fset(read_file_bytes(path));
}

MatrixFeatureSet<double> read_fset_f64(const std::filesystem::path& path)
{
  return to_double(read_fset(path));
}

template<typename Scalar>
void write_fset(const MatrixFeatureSet<Scalar>& set, const std::filesystem::path& path)
{
  write_file_bytes(encode_fset(set), path);
}

template std::vector<std::byte> encode_fset(const MatrixFeatureSet<float>&);
template std::vector<std::byte> encode_fset(const MatrixFeatureSet<double>&);
template void write_fset(const MatrixFeatureSet<float>&, const std::filesystem::path&);
template void write_fset(const MatrixFeatureSet<double>&, const std::filesystem::path&);

} // namespace fsrl
