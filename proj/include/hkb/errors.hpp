#pragma once

#include <stdexcept>
#include <string>

namespace hkb {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HKB_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

HKB_DEFINE_ERROR(InputError);
HKB_DEFINE_ERROR(EvaluationError);
HKB_DEFINE_ERROR(ParameterError);
HKB_DEFINE_ERROR(CertificateError);
HKB_DEFINE_ERROR(RateError);
HKB_DEFINE_ERROR(TruncationError);
HKB_DEFINE_ERROR(TwistError);
HKB_DEFINE_ERROR(SimError);
HKB_DEFINE_ERROR(BandwidthError);

#undef HKB_DEFINE_ERROR

}  // namespace hkb
