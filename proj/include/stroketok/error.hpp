#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stroketok {

enum class ErrorKind {
  MalformedSvg,
  EmptyGraphic,
  UnsupportedFeature,
  NotSimplified,
  BrokenChain,
  DomainViolation,
  ShapeMismatch,
  GraphCycle,
  NoGradient,
  EmptyCodebook,
  Diverged,
  BadTokenId,
  EmptyKeywords,
  SequenceTooLong,
  ZeroLength,
  VocabMismatch,
  RenderFailure,
  BadFormat,
  Io,
  Config,
};

std::string_view to_string(ErrorKind kind);

// Domain error shared by every module. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class MalformedSvg : public Error {
 public:
  MalformedSvg(std::size_t byte_offset, const std::string& message);

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

}  // namespace stroketok
