#include "flowglyph/error.hpp"

namespace flowglyph {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::Truncated: return "Truncated";
    case ErrorKind::UnsupportedLinkType: return "UnsupportedLinkType";
    case ErrorKind::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorKind::EmptyFeatureSet: return "EmptyFeatureSet";
    case ErrorKind::BadGlyphFile: return "BadGlyphFile";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::OddDimension: return "OddDimension";
    case ErrorKind::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::InvalidProfile: return "InvalidProfile";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::EmptyManifest: return "EmptyManifest";
    case ErrorKind::EmptyConfusion: return "EmptyConfusion";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MalformedInput: return "MalformedInput";
  }
  return "Unknown";
}

bool is_input_format_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadMagic:
    case ErrorKind::Truncated:
    case ErrorKind::UnsupportedLinkType:
    case ErrorKind::BadGlyphFile:
    case ErrorKind::SizeMismatch:
    case ErrorKind::EmptyManifest:
    case ErrorKind::IoFailure:
    case ErrorKind::MalformedInput:
    case ErrorKind::InvalidProfile:
    case ErrorKind::EmptyFeatureSet:
      return true;
    default:
      return false;
  }
}

}  // namespace flowglyph
