// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#include "voxreg/parallel.hpp"

#include "voxreg/error.hpp"

#include <charconv>
#include <cstdlib>
#include <string>
#include <string_view>

namespace voxreg {

int resolve_threads(std::optional<int> requested) {
  if (requested) {
    if (*requested <= 0) throw InputError("--threads must be positive");
    return *requested;
  }
  const char* env = std::getenv("VOXREG_THREADS");
  if (!env || !*env) return 1;
  const std::string_view text(env);
  int n = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), n);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || n <= 0) {
    throw InputError("VOXREG_THREADS must be a positive integer, got '" + std::string(text) + "'");
  }
  return n;
}

}  // namespace voxreg
