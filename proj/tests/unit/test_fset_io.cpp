#include "doctest.h"

#include <cstring>
#include <filesystem>

#include "fset_cases.hpp"
#include "test_support.hpp"

using namespace fsrl;

namespace {

template<typename Scalar>
bool bit_equal(const Matrix<Scalar>& a, const Matrix<Scalar>& b)
{
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(Scalar)) == 0;
}

MatrixFeatureSet<double> sample_set(std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  return MatrixFeatureSet<double>(3, 4, fsrl::testing::gaussian(rng, 12, 2));
}

} // namespace

TEST_CASE("round trip of a 3 x 4 x 2 set is bit exact in both dtypes")
{
  const auto set = sample_set(1);
  const auto bytes = encode_fset(set);
  CHECK(bytes.size() == fset_header_size + 24 * 8);
  const auto back = decode_fset(bytes);
  REQUIRE(dtype_of(back) == Dtype::f64);
  const auto& d = std::get<MatrixFeatureSet<double>>(back);
  CHECK(d.map_rows() == 3);
  CHECK(d.map_cols() == 4);
  CHECK(d.size() == 2);
  CHECK(bit_equal(d.stack(), set.stack()));

  const MatrixFeatureSet<float> fset(3, 4, set.stack().cast<float>());
  const auto fbytes = encode_fset(fset);
  CHECK(fbytes.size() == fset_header_size + 24 * 4);
  const auto fback = decode_fset(fbytes);
  REQUIRE(dtype_of(fback) == Dtype::f32);
  CHECK(bit_equal(std::get<MatrixFeatureSet<float>>(fback).stack(), fset.stack()));
  CHECK(bit_equal(to_double(fback).stack(), Matrix<double>(fset.stack().cast<double>())));
}

TEST_CASE("header layout")
{
  const auto bytes = encode_fset(sample_set(2));
  CHECK(std::memcmp(bytes.data(), "FSET", 4) == 0);
  CHECK(bytes[4] == std::byte{ 1 });
  CHECK(bytes[5] == std::byte{ 1 });
  CHECK(bytes[6] == std::byte{ 0 });
  CHECK(bytes[7] == std::byte{ 0 });
  CHECK(bytes[8] == std::byte{ 3 });
  CHECK(bytes[12] == std::byte{ 4 });
  CHECK(bytes[16] == std::byte{ 2 });
  // first payload value is map 0 entry (0, 0), little-endian
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 20, 8);
  CHECK(first == sample_set(2).stack()(0, 0));
}

TEST_CASE("every malformation raises its own error")
{
  const auto valid = encode_fset(sample_set(3));
  CHECK(fsrl::testing::decode_outcome(valid) == "ok");
  for (const auto& m : fsrl::testing::fset_malformations()) {
    auto bytes = valid;
    m.mutate(bytes);
    INFO(m.name);
    CHECK(fsrl::testing::decode_outcome(bytes) == m.expected);
  }
}

TEST_CASE("format errors map to the format category")
{
  auto bytes = encode_fset(sample_set(4));
  bytes.pop_back();
  try {
    decode_fset(bytes);
    FAIL("expected PayloadLengthError");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::format);
  }
}

TEST_CASE("random round trips")
{
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const Index p = fsrl::testing::uniform_int(rng, 1, 9);
    const Index q = fsrl::testing::uniform_int(rng, 1, 9);
    const Index n = fsrl::testing::uniform_int(rng, 1, 5);
    const MatrixFeatureSet<double> set(p, q, fsrl::testing::gaussian(rng, p * q, n, 1e3));
    CHECK(bit_equal(std::get<MatrixFeatureSet<double>>(decode_fset(encode_fset(set))).stack(), set.stack()));
  }
}

TEST_CASE("vector-form sets are stored with q = 1")
{
  std::mt19937_64 rng(6);
  const FeatureSet<double> v(fsrl::testing::gaussian(rng, 7, 3));
  const auto back = std::get<MatrixFeatureSet<double>>(decode_fset(encode_fset(v)));
  CHECK(back.map_rows() == 7);
  CHECK(back.map_cols() == 1);
  CHECK(back.as_vectors().data() == v.data());
}

TEST_CASE("file round trip and missing file")
{
  const auto dir = std::filesystem::temp_directory_path() / "fsrl_test_fset_io";
  std::filesystem::create_directories(dir);
  const auto set = sample_set(7);
  write_fset(set, dir / "a.fset");
  CHECK(bit_equal(read_fset_f64(dir / "a.fset").stack(), set.stack()));
  CHECK_THROWS_AS(read_fset(dir / "missing.fset"), IoError);
  std::filesystem::remove_all(dir);
}
