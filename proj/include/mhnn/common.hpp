#pragma once

#include <stdexcept>
#include <string>

namespace mhnn {

enum class Mode { Train, Eval };

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace mhnn
