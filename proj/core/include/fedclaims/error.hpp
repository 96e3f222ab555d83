#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fedclaims {

/// Error taxonomy. Kinds map onto CLI exit codes:
/// config/ingest/report -> 2, training-side math -> 3, protocol/transport -> 4.
enum class ErrorKind {
  Config,    // invalid configuration or plan
  Ingest,    // CSV / file ingestion problems
  Shape,     // dimension mismatch between tensors, params, datasets
  Input,     // non-finite or otherwise unusable numeric input
  Numeric,   // non-finite values produced mid-computation
  Training,  // orchestration-level training failure (divergence, dead channel mid-round)
  Decode,    // malformed wire frame
  Channel,   // endpoint failures: timeout, refused, peer closed
  Protocol,  // well-formed messages arriving out of contract
  Report,    // incompatible or incomplete evaluation logs
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::Config:
      case ErrorKind::Ingest:
      case ErrorKind::Report:
        return 2;
      case ErrorKind::Shape:
      case ErrorKind::Input:
      case ErrorKind::Numeric:
      case ErrorKind::Training:
        return 3;
      case ErrorKind::Decode:
      case ErrorKind::Channel:
      case ErrorKind::Protocol:
        return 4;
    }
    return 1;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace fedclaims
