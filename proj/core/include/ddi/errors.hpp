#pragma once

#include <stdexcept>
#include <string>

namespace ddi {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// SMILES input uses a construct outside the supported subset.
class UnsupportedFeature : public Error {
 public:
  UnsupportedFeature(const std::string &what, std::size_t pos)
      : Error("unsupported SMILES feature at position " + std::to_string(pos) +
              ": " + what),
        position(pos) {}
  std::size_t position;
};

// SMILES input is syntactically broken (unbalanced brackets, ring closures...).
class MalformedSmiles : public Error {
 public:
  MalformedSmiles(const std::string &what, std::size_t pos)
      : Error("malformed SMILES at position " + std::to_string(pos) + ": " +
              what),
        position(pos) {}
  std::size_t position;
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string &msg)
      : Error("shape mismatch: " + msg) {}
};

class NotScalarLoss : public Error {
 public:
  explicit NotScalarLoss(const std::string &msg)
      : Error("backward requires a scalar loss: " + msg) {}
};

class LabelOutOfRange : public Error {
 public:
  explicit LabelOutOfRange(const std::string &msg)
      : Error("label out of range: " + msg) {}
};

class EmptyGraph : public Error {
 public:
  explicit EmptyGraph(const std::string &msg) : Error("empty graph: " + msg) {}
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string &msg) : Error("empty input: " + msg) {}
};

class SingleClassInput : public Error {
 public:
  explicit SingleClassInput(const std::string &msg)
      : Error("both classes required: " + msg) {}
};

class UnknownVariant : public Error {
 public:
  explicit UnknownVariant(const std::string &msg)
      : Error("unknown architecture variant: " + msg) {}
};

class VariantHasNoAttention : public Error {
 public:
  explicit VariantHasNoAttention(const std::string &msg)
      : Error("variant has no attention block: " + msg) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string &what, std::size_t line)
      : Error("parse error at line " + std::to_string(line) + ": " + what),
        line(line) {}
  std::size_t line;
};

class InvalidTypeCode : public Error {
 public:
  explicit InvalidTypeCode(const std::string &msg)
      : Error("invalid interaction type code: " + msg) {}
};

class MissingSmiles : public Error {
 public:
  explicit MissingSmiles(const std::string &msg)
      : Error("missing SMILES: " + msg) {}
};

class MissingReferenceData : public Error {
 public:
  explicit MissingReferenceData(const std::string &msg)
      : Error("missing reference data: " + msg) {}
};

class ConfigMismatch : public Error {
 public:
  explicit ConfigMismatch(const std::string &msg)
      : Error("config mismatch: " + msg) {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(const std::string &msg)
      : Error("non-finite loss: " + msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string &msg) : Error("i/o error: " + msg) {}
};

}  // namespace ddi
