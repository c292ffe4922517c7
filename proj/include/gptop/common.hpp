#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gptop {

// Structured error: `code` is a stable machine-readable tag, `what()` is prose.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool ok, const std::string& code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

// Draws are built on raw mt19937_64 output; std::*_distribution is
// implementation-defined and would break bit-reproducibility guarantees.
inline double unit_uniform(std::mt19937_64& g) {
  return double(g() >> 11) * 0x1.0p-53;  // [0,1)
}

inline double uniform(std::mt19937_64& g, double a, double b) {
  return a + (b - a) * unit_uniform(g);
}

inline int uniform_index(std::mt19937_64& g, int n) {
  return int(g() % std::uint64_t(n));
}

inline int round_half_up(double x) { return int(std::floor(x + 0.5)); }

}  // namespace gptop
