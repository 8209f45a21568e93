#pragma once

// Wall-clock stopwatch for suite timing.

#include <chrono>

namespace occlab {

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}

  double seconds() const {
    auto now = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(now - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace occlab
