// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "tensorlm/error.hpp"

template <typename F>
std::optional<tensorlm::ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const tensorlm::Error& e) {
    return e.code();
  }
  return std::nullopt;
}
