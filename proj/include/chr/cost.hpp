#pragma once

#include <cstdint>
#include <string_view>

namespace chr {

struct CostEntry {
  std::uint64_t llm_calls = 0;
  std::uint64_t output_tokens = 0;
  std::int64_t wall_ms = 0;

  CostEntry& operator+=(const CostEntry& other) {
    llm_calls += other.llm_calls;
    output_tokens += other.output_tokens;
    wall_ms += other.wall_ms;
    return *this;
  }
  friend bool operator==(const CostEntry&, const CostEntry&) = default;
};

// ceil(characters / 4), counting UTF-8 code points.
std::uint64_t estimate_tokens(std::string_view text) noexcept;

}  // namespace chr
