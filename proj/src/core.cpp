#include "semcom/core.hpp"

#include <cmath>
#include <cstdio>

namespace semcom {

const char* to_string(Norm norm) { return norm == Norm::L1 ? "l1" : "l2"; }

Norm norm_from_string(const std::string& s) {
  if (s == "l1") return Norm::L1;
  if (s == "l2") return Norm::L2;
  throw std::invalid_argument("unknown norm mode: " + s);
}

double norm_value(std::span<const double> v, Norm norm) {
  double acc = 0.0;
  if (norm == Norm::L1) {
    for (double x : v) acc += std::fabs(x);
    return acc;
  }
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

ParseError::ParseError(std::size_t line_, const std::string& what)
    : std::runtime_error("line " + std::to_string(line_) + ": " + what), line(line_) {}

DivergenceError::DivergenceError(int epoch_, const std::string& what)
    : std::runtime_error("epoch " + std::to_string(epoch_) + ": " + what), epoch(epoch_) {}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace semcom
