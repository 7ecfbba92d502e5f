#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace itlc {

/// Malformed formula text. `position` is a byte offset into the input.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// A JSON document does not follow the expected shape. The message names the
/// offending field path, e.g. `worlds[3].moment.label`.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Formula uses a modality the decision procedure does not handle.
class FragmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `graft` was given a root label and children that do not form a kit.
class KitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A search or enumeration would exceed its configured budget.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Something the library guarantees turned out false. Always a bug.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace itlc
