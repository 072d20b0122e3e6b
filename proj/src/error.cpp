#include "stroketok/error.hpp"

namespace stroketok {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedSvg: return "MalformedSvg";
    case ErrorKind::EmptyGraphic: return "EmptyGraphic";
    case ErrorKind::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorKind::NotSimplified: return "NotSimplified";
    case ErrorKind::BrokenChain: return "BrokenChain";
    case ErrorKind::DomainViolation: return "DomainViolation";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::GraphCycle: return "GraphCycle";
    case ErrorKind::NoGradient: return "NoGradient";
    case ErrorKind::EmptyCodebook: return "EmptyCodebook";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::BadTokenId: return "BadTokenId";
    case ErrorKind::EmptyKeywords: return "EmptyKeywords";
    case ErrorKind::SequenceTooLong: return "SequenceTooLong";
    case ErrorKind::ZeroLength: return "ZeroLength";
    case ErrorKind::VocabMismatch: return "VocabMismatch";
    case ErrorKind::RenderFailure: return "RenderFailure";
    case ErrorKind::BadFormat: return "BadFormat";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

MalformedSvg::MalformedSvg(std::size_t byte_offset, const std::string& message)
    : Error(ErrorKind::MalformedSvg, message + " (at byte " + std::to_string(byte_offset) + ")"),
      byte_offset_(byte_offset) {}

}  // namespace stroketok
