// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensorlm/corpus.hpp"
#include "tensorlm/tslm_model.hpp"

namespace tensorlm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (all integers u32 little-endian, all reals f64 little-endian):
///   "TSLM" | version | m | r | |V|
///   embed | u_mat | w_mat | v_mat | h0_pre      (row-major)
///   token count | { byte length | UTF-8 bytes } per token
struct Checkpoint {
  TslmParams params;
  Vocab vocab;
};

std::vector<std::uint8_t> encode_checkpoint(const TslmParams& params, const Vocab& vocab);
/// Throws kFormat on bad magic, unknown version, truncation, trailing bytes
/// or a vocabulary that disagrees with |V|.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const TslmParams& params, const Vocab& vocab);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tensorlm
