#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fsrl {

/// Broad failure classes. The CLI maps each to its own exit code.
enum class ErrorCategory : std::uint8_t
{
  invalid_input,
  solver,
  divergence,
  io,
  format,
  config,
};

class Error : public std::runtime_error
{
public:
  Error(ErrorCategory category, const std::string& what)
    : std::runtime_error(what)
    , category_(category)
  {
  }

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

#define FSRL_DEFINE_ERROR(Name, Category)                                      \
  class Name : public Error                                                    \
  {                                                                            \
  public:                                                                      \
    explicit Name(const std::string& what)                                     \
      : Error(ErrorCategory::Category, what)                                   \
    {                                                                          \
    }                                                                          \
  }

// core types
FSRL_DEFINE_ERROR(DimensionMismatchError, invalid_input);
FSRL_DEFINE_ERROR(ZeroDimensionError, invalid_input);
FSRL_DEFINE_ERROR(DuplicateLabelError, invalid_input);
FSRL_DEFINE_ERROR(EmptyClassError, invalid_input);
FSRL_DEFINE_ERROR(InvalidParameterError, invalid_input);

// solvers
FSRL_DEFINE_ERROR(SingularSystemError, solver);
FSRL_DEFINE_ERROR(DegenerateConstraintError, solver);
FSRL_DEFINE_ERROR(NoRepresentableClassError, solver);
FSRL_DEFINE_ERROR(DivergenceError, divergence);

// files
FSRL_DEFINE_ERROR(IoError, io);
FSRL_DEFINE_ERROR(BadMagicError, format);
FSRL_DEFINE_ERROR(UnsupportedVersionError, format);
FSRL_DEFINE_ERROR(UnknownDtypeError, format);
FSRL_DEFINE_ERROR(ReservedFieldError, format);
FSRL_DEFINE_ERROR(TruncatedHeaderError, format);
FSRL_DEFINE_ERROR(PayloadLengthError, format);
FSRL_DEFINE_ERROR(ManifestError, format);

// harness
FSRL_DEFINE_ERROR(ConfigError, config);
FSRL_DEFINE_ERROR(StageMismatchError, config);
FSRL_DEFINE_ERROR(MissingWeightsError, config);
FSRL_DEFINE_ERROR(LabelSetMismatchError, config);
FSRL_DEFINE_ERROR(EmptyValidationSetError, config);

#undef FSRL_DEFINE_ERROR

/// Raised when a feature set holds NaN or Inf. Carries the offending position.
class NonFiniteError : public Error
{
public:
  NonFiniteError(std::int64_t map, std::int64_t row, std::int64_t col)
    : Error(ErrorCategory::invalid_input,
            "non-finite entry in map " + std::to_string(map) + " at (" +
              std::to_string(row) + "," + std::to_string(col) + ")")
    , map_(map)
    , row_(row)
    , col_(col)
  {
  }

  std::int64_t map() const noexcept { return map_; }
  std::int64_t row() const noexcept { return row_; }
  std::int64_t col() const noexcept { return col_; }

private:
  std::int64_t map_;
  std::int64_t row_;
  std::int64_t col_;
};

} // namespace fsrl
