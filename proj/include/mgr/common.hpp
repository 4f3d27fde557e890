#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgr {

// Scalar type of the numeric core. The default training build uses 32-bit
// floats; defining MGR_REAL64 switches the whole library to doubles, which
// the gradient-check suite links against.
#ifdef MGR_REAL64
using real = double;
#else
using real = float;
#endif

using Shape = std::vector<size_t>;

std::string shape_str(const Shape& s);
size_t shape_numel(const Shape& s);

// Error taxonomy. The CLI maps `kind` onto exit codes and the single-line
// machine-parsable error format.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& msg)
    : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

private:
  std::string kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error("contract", m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format", m) {}
};
struct CorruptionError : Error {
  explicit CorruptionError(const std::string& m) : Error("corruption", m) {}
};
struct DataError : Error {
  explicit DataError(const std::string& m) : Error("data", m) {}
};
struct TrainError : Error {
  explicit TrainError(const std::string& m) : Error("train", m) {}
};

// Logging to stderr, controlled by MGR_LOG in {error, info, debug}.
enum class LogLevel { Error = 0, Info = 1, Debug = 2 };
LogLevel log_level();
void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

// Deterministic float formatting shared by every emitted artifact.
std::string fmt_real(double v);

}  // namespace mgr
