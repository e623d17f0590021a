#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace semcom {

using Vec = std::vector<double>;
using Rng = std::mt19937_64;

enum class Norm { L1, L2 };

const char* to_string(Norm norm);
Norm norm_from_string(const std::string& s);

// ||v|| under the chosen norm.
double norm_value(std::span<const double> v, Norm norm);

struct ParseError : std::runtime_error {
  std::size_t line;
  ParseError(std::size_t line_, const std::string& what);
};

struct DivergenceError : std::runtime_error {
  int epoch;
  DivergenceError(int epoch_, const std::string& what);
};

// %.17g: shortest text form that reloads bit-exactly.
std::string fmt_double(double v);

}  // namespace semcom
