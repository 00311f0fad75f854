// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tensorlm {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kResourceLimit,
  kUnseenContext,
  kNumerical,
  kIo,
  kFormat,
};

/// Single exception type for the library. The code is what the C API
/// reports; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Dense allocations (tensors built for verification) are capped at this many
/// entries.
inline constexpr std::size_t kMaxDenseEntries = 10'000'000;

}  // namespace tensorlm
