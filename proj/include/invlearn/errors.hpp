#pragma once

#include <stdexcept>
#include <string>

namespace invlearn {

// Coin string handed to a sampler or inverter has the wrong length.
class CoinLengthError : public std::invalid_argument {
 public:
  explicit CoinLengthError(const std::string& what) : std::invalid_argument(what) {}
};

// An enumeration or table would exceed its configured cap.
class SizeError : public std::length_error {
 public:
  explicit SizeError(const std::string& what) : std::length_error(what) {}
};

// Mismatched arities, budgets that cannot be met, malformed configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace invlearn
