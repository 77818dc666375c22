#pragma once

#include <stdexcept>
#include <string>

namespace xrprobe {

// Exit codes of the command-line tool map onto these three families.
enum class ExitCode : int { Ok = 0, Config = 2, Data = 3, Numeric = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, unresolved ids, shape mismatches, insufficient data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Divergence, non-convergence, non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric that has no value for the given input (single-class AUROC, no positives for DicePos).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace xrprobe
