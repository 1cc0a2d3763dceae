#pragma once

#include <stdexcept>
#include <string>

namespace levelcg {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonFiniteInput : Error {
  explicit NonFiniteInput(const std::string& msg = "non-finite input") : Error(msg) {}
};

struct DimMismatch : Error {
  explicit DimMismatch(const std::string& msg = "dimension mismatch") : Error(msg) {}
};

struct DegenerateDual : Error {
  explicit DegenerateDual(const std::string& msg = "degenerate dual iterate") : Error(msg) {}
};

struct UnboundedSet : Error {
  explicit UnboundedSet(const std::string& msg = "set is unbounded") : Error(msg) {}
};

struct InvalidConstant : Error {
  explicit InvalidConstant(const std::string& msg = "invalid constant") : Error(msg) {}
};

struct GammaDegenerate : Error {
  explicit GammaDegenerate(const std::string& msg = "dual objective weight below floor")
      : Error(msg) {}
};

struct InfeasibleStart : Error {
  explicit InfeasibleStart(const std::string& msg = "start point violates constraints")
      : Error(msg) {}
};

struct GridTooLarge : Error {
  explicit GridTooLarge(const std::string& msg = "grid exceeds point budget") : Error(msg) {}
};

struct BadAlpha : Error {
  explicit BadAlpha(const std::string& msg = "alpha must lie in (0,1)") : Error(msg) {}
};

struct BadTheta : Error {
  explicit BadTheta(const std::string& msg = "theta must be positive") : Error(msg) {}
};

struct BadPsi : Error {
  explicit BadPsi(const std::string& msg = "psi must be >= 1") : Error(msg) {}
};

struct BadPhi : Error {
  explicit BadPhi(const std::string& msg = "phi must be positive") : Error(msg) {}
};

struct EmptyData : Error {
  explicit EmptyData(const std::string& msg = "empty dataset") : Error(msg) {}
};

// CSV parse failure with 1-based row/column location.
struct ParseError : Error {
  ParseError(int row, int col, const std::string& what)
      : Error("parse error at row " + std::to_string(row) + ", col " + std::to_string(col) +
              ": " + what),
        row(row),
        col(col) {}
  int row;
  int col;
};

}  // namespace levelcg
