#pragma once

#include <stdexcept>
#include <string>

namespace frag {

// Base for all domain errors so callers can catch one family.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error("parse error: " + what) {}
};

struct ValenceError : Error {
  explicit ValenceError(const std::string& what) : Error("valence error: " + what) {}
};

struct AttachmentMismatch : Error {
  explicit AttachmentMismatch(const std::string& what) : Error("attachment mismatch: " + what) {}
};

struct TokenizeError : Error {
  explicit TokenizeError(const std::string& what) : Error("tokenize error: " + what) {}
};

struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

struct IOError : Error {
  explicit IOError(const std::string& what) : Error("io error: " + what) {}
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& what) : Error("schema error: " + what) {}
};

struct EmptyVocabulary : Error {
  explicit EmptyVocabulary(const std::string& what) : Error("empty vocabulary: " + what) {}
};

struct EmptyPool : Error {
  explicit EmptyPool(const std::string& what) : Error("empty pool: " + what) {}
};

struct PoolTooSmall : Error {
  explicit PoolTooSmall(const std::string& what) : Error("pool too small: " + what) {}
};

struct EmptyPopulation : Error {
  explicit EmptyPopulation(const std::string& what) : Error("empty population: " + what) {}
};

struct BudgetExhausted : Error {
  explicit BudgetExhausted(const std::string& what) : Error("budget exhausted: " + what) {}
};

struct EmptyHistory : Error {
  explicit EmptyHistory(const std::string& what) : Error("empty history: " + what) {}
};

struct TooFewMolecules : Error {
  explicit TooFewMolecules(const std::string& what) : Error("too few molecules: " + what) {}
};

}  // namespace frag
