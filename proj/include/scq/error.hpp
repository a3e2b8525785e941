#pragma once

#include <stdexcept>
#include <string>

namespace scq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller-side mistakes: bad configuration, malformed files, invalid arguments.
/// The CLI maps these to exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Statistical or runtime failures that are not the caller's fault.
/// The CLI maps these to exit code 2.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

#define SCQ_DEFINE_ERROR(Name, Base) \
  class Name : public Base {         \
   public:                           \
    using Base::Base;                \
  }

SCQ_DEFINE_ERROR(InvalidArgument, UsageError);
SCQ_DEFINE_ERROR(ConfigError, UsageError);
SCQ_DEFINE_ERROR(InsufficientNulls, UsageError);
SCQ_DEFINE_ERROR(ParseError, UsageError);
SCQ_DEFINE_ERROR(SchemaMismatch, UsageError);
SCQ_DEFINE_ERROR(NonFiniteFeature, UsageError);
SCQ_DEFINE_ERROR(DimensionMismatch, UsageError);
SCQ_DEFINE_ERROR(VariantMismatch, UsageError);
SCQ_DEFINE_ERROR(NonPositiveWeight, UsageError);
SCQ_DEFINE_ERROR(PiOutOfRange, UsageError);
SCQ_DEFINE_ERROR(MissingOutliers, UsageError);

SCQ_DEFINE_ERROR(DegenerateFit, RuntimeFailure);
SCQ_DEFINE_ERROR(AllCandidatesFailed, RuntimeFailure);
SCQ_DEFINE_ERROR(TooManyFailures, RuntimeFailure);

#undef SCQ_DEFINE_ERROR

}  // namespace scq
