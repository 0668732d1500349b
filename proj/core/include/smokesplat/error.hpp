#pragma once

#include <stdexcept>
#include <string>

namespace smokesplat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

enum class IoErrorKind {
    missing_file,
    unsupported_format,
    corrupt_header,
    corrupt_data,
    unwritable,
};

const char* to_string(IoErrorKind kind);

class IoError : public Error {
public:
    IoError(IoErrorKind kind, const std::string& path, const std::string& detail)
        : Error(std::string(to_string(kind)) + ": " + path + (detail.empty() ? "" : " (" + detail + ")")),
          kind_(kind),
          path_(path) {}

    IoErrorKind kind() const noexcept { return kind_; }
    const std::string& path() const noexcept { return path_; }

private:
    IoErrorKind kind_;
    std::string path_;
};

}  // namespace smokesplat
