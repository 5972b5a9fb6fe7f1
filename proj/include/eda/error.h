#ifndef EDA_ERROR_H_
#define EDA_ERROR_H_

#include <stdexcept>
#include <string>

namespace eda {

// Base class for every error raised by the toolkit. Input-validation errors
// derive from InvalidInput so the CLI can map them to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Malformed CoNLL-U line; carries the 1-based line number.
class ParseError : public InvalidInput {
 public:
  ParseError(int line, const std::string& what)
      : InvalidInput("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Head graph is not a tree (cycle, several roots, out-of-range head).
class StructuralError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Utterance longer than the position-label capacity.
class CapacityError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Utterance outside the controlled grammar.
class UnparseableError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// No main-object noun could be found in the first sentence.
class DecoupleError : public InvalidInput {
 public:
  DecoupleError(const std::string& utterance_id, const std::string& what)
      : InvalidInput(utterance_id + ": " + what), utterance_id_(utterance_id) {}
  const std::string& utterance_id() const { return utterance_id_; }

 private:
  std::string utterance_id_;
};

class ShapeError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

}  // namespace eda

#endif  // EDA_ERROR_H_
