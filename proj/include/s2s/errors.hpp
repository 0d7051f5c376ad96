#pragma once
// Error taxonomy shared across the toolkit. Every failure mode named in a
// module contract maps to one of these types.

#include <stdexcept>
#include <string>

namespace s2s {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define S2S_DEFINE_ERROR(Name)                  \
  struct Name : Error {                         \
    explicit Name(const std::string& m) : Error(#Name ": " + m) {} \
  }

S2S_DEFINE_ERROR(ShapeError);
S2S_DEFINE_ERROR(GeneNotFound);
S2S_DEFINE_ERROR(EmptyInput);
S2S_DEFINE_ERROR(InvalidCount);
S2S_DEFINE_ERROR(EmptyCorpus);
S2S_DEFINE_ERROR(InvalidFactor);
S2S_DEFINE_ERROR(ConfigError);
S2S_DEFINE_ERROR(EmptyRegion);
S2S_DEFINE_ERROR(DegenerateInput);
S2S_DEFINE_ERROR(NumericalError);
S2S_DEFINE_ERROR(IoError);
S2S_DEFINE_ERROR(VersionError);

#undef S2S_DEFINE_ERROR

}  // namespace s2s
