#pragma once

#include <stdexcept>
#include <string>

namespace hsps {

/// Parameter outside its physical or mathematical domain.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Malformed or truncated event/config file.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Failure to open, read or write a file.
class IoError : public std::runtime_error {
public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw DomainError(message);
}

inline bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace detail
}  // namespace hsps
