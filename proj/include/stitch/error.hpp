#pragma once

#include <stdexcept>
#include <string>

namespace stitch {

/// Error categories surfaced by the library. The CLI maps each to a message
/// prefix and a nonzero exit code.
enum class Errc {
  NonPowerOfTwoLength,
  InvalidBand,
  InvalidWindow,
  InvalidArgument,
  UnknownClass,
  AllSilence,
  CorruptBank,
  MissingClass,
  CorruptDataset,
  ShapeMismatch,
  DivergedLoss,
  ConfigMismatch,
  CorruptCheckpoint,
  ZeroFloor,
  InvalidGeometry,
  InvalidConfig,
  NotFound,
  Io,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::NonPowerOfTwoLength: return "non-power-of-two length";
    case Errc::InvalidBand: return "invalid band";
    case Errc::InvalidWindow: return "invalid window";
    case Errc::InvalidArgument: return "invalid argument";
    case Errc::UnknownClass: return "unknown class";
    case Errc::AllSilence: return "all silence";
    case Errc::CorruptBank: return "corrupt bank";
    case Errc::MissingClass: return "missing class";
    case Errc::CorruptDataset: return "corrupt dataset";
    case Errc::ShapeMismatch: return "shape mismatch";
    case Errc::DivergedLoss: return "diverged loss";
    case Errc::ConfigMismatch: return "config mismatch";
    case Errc::CorruptCheckpoint: return "corrupt checkpoint";
    case Errc::ZeroFloor: return "zero floor";
    case Errc::InvalidGeometry: return "invalid geometry";
    case Errc::InvalidConfig: return "invalid config";
    case Errc::NotFound: return "not found";
    case Errc::Io: return "i/o error";
  }
  return "unknown error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace stitch
