#pragma once

#include <stdexcept>
#include <string>

namespace voxclust {

// Error families. The CLI maps each family onto its own exit code.
enum class ErrorKind {
  Usage,
  Format,
  Io,
  Data,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// File does not start with the expected magic / unsupported version.
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::Format, w) {}
};

// Header fields decode but describe an impossible volume.
struct InvalidHeaderError : FormatError {
  explicit InvalidHeaderError(const std::string& w) : FormatError(w) {}
};

// Payload shorter than the header promises.
struct CorruptFileError : FormatError {
  explicit CorruptFileError(const std::string& w) : FormatError(w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::Usage, w) {}
};

struct OutOfRangeError : Error {
  explicit OutOfRangeError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct EmptyDataError : Error {
  explicit EmptyDataError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct InvalidRangeError : Error {
  explicit InvalidRangeError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct DimsMismatchError : Error {
  explicit DimsMismatchError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct MissingParameterError : Error {
  explicit MissingParameterError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct InvalidArgumentError : Error {
  explicit InvalidArgumentError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

}  // namespace voxclust
