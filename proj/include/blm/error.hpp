#pragma once

// Error taxonomy shared by every module. The CLI maps each family onto a
// process exit code (see exit_code()).

#include <stdexcept>
#include <string>

namespace blm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API precondition (non-scalar backward, missing grad, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Zero-norm vector handed to a cosine-based routine.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dangling sentence ids, malformed episodes, wrong candidate counts.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Binary/text file does not follow its declared layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or activations during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace exit_codes {
inline constexpr int kOk = 0;
inline constexpr int kGeneric = 1;
inline constexpr int kConfig = 2;
inline constexpr int kData = 3;
inline constexpr int kNumeric = 4;
}  // namespace exit_codes

// Exit code for an exception raised anywhere below the CLI.
inline int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return exit_codes::kConfig;
  if (dynamic_cast<const IntegrityError*>(&e) != nullptr ||
      dynamic_cast<const FormatError*>(&e) != nullptr) {
    return exit_codes::kData;
  }
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return exit_codes::kNumeric;
  return exit_codes::kGeneric;
}

}  // namespace blm
