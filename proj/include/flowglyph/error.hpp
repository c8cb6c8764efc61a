#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowglyph {

enum class ErrorKind {
  // packet_ingest
  BadMagic,
  Truncated,
  UnsupportedLinkType,
  PayloadTooLarge,
  // imaging
  EmptyFeatureSet,
  BadGlyphFile,
  // cnn
  ShapeMismatch,
  OddDimension,
  NonFiniteActivation,
  SizeMismatch,
  // synth
  InvalidProfile,
  IoFailure,
  // evalrun
  EmptyManifest,
  EmptyConfusion,
  InvalidArgument,
  MalformedInput,
};

std::string_view to_string(ErrorKind kind);

// Input-format errors map to CLI exit code 2, argument errors to 1, the rest to 3.
bool is_input_format_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace flowglyph
