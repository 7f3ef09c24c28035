#pragma once

#include <stdexcept>
#include <string>

namespace smd {

struct Error : std::runtime_error {
  Error(std::string k, const std::string& msg) : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
  std::string kind;
};

#define SMD_DEFINE_ERROR(Name) \
  struct Name : Error {        \
    explicit Name(const std::string& m) : Error(#Name, m) {} \
  }

// skeleton
SMD_DEFINE_ERROR(CycleDetected);
SMD_DEFINE_ERROR(Disconnected);
SMD_DEFINE_ERROR(DuplicateEdge);
SMD_DEFINE_ERROR(SelfLoop);
// shared numeric contracts
SMD_DEFINE_ERROR(ShapeMismatch);
SMD_DEFINE_ERROR(IndexOutOfRange);
SMD_DEFINE_ERROR(InvalidSize);
SMD_DEFINE_ERROR(NonScalarLoss);
SMD_DEFINE_ERROR(StepOutOfRange);
// metrics
SMD_DEFINE_ERROR(TooFewSamples);
SMD_DEFINE_ERROR(EmptyMultimodalSet);
// data / io
SMD_DEFINE_ERROR(SequenceTooShort);
SMD_DEFINE_ERROR(BadMagic);
SMD_DEFINE_ERROR(TruncatedFile);
SMD_DEFINE_ERROR(VersionMismatch);
SMD_DEFINE_ERROR(ShapeInconsistent);
SMD_DEFINE_ERROR(IoError);
// configuration
SMD_DEFINE_ERROR(ConfigError);

#undef SMD_DEFINE_ERROR

// File-level failures map to CLI exit code 2, everything else to 1.
inline bool is_io_error(const Error& e) {
  return e.kind == "BadMagic" || e.kind == "TruncatedFile" || e.kind == "VersionMismatch" ||
         e.kind == "IoError";
}

}  // namespace smd
