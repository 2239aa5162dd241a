#pragma once

#include <stdexcept>
#include <string>

namespace grczsl {

// Every failure raised by the library derives from Error and carries a
// category that the C API and the CLI map onto status codes / exit codes.
enum class ErrorKind {
  Config = 2,
  Data = 3,
  Numeric = 4,
  Io = 5,
  Dimension = 6,
  Index = 7,
  Sequencing = 8,
  Evaluation = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::Data, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::Numeric, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};
struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorKind::Dimension, w) {}
};
struct IndexError : Error {
  explicit IndexError(const std::string& w) : Error(ErrorKind::Index, w) {}
};
struct SequencingError : Error {
  explicit SequencingError(const std::string& w) : Error(ErrorKind::Sequencing, w) {}
};
struct EvaluationError : Error {
  explicit EvaluationError(const std::string& w) : Error(ErrorKind::Evaluation, w) {}
};

}  // namespace grczsl
