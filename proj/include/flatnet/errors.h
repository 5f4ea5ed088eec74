#pragma once

#include <stdexcept>
#include <string>

namespace flatnet {

// Invalid arguments are reported with std::invalid_argument. The types below
// cover malformed inputs read from files or text.

/// A byte stream or text document does not follow its declared layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A weight file carries a version this reader does not understand.
class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Parsed content is well-formed but violates a semantic constraint.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input cannot produce a meaningful result (e.g. a ROC curve with one class).
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flatnet
