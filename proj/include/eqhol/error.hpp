#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eqhol {

enum class ErrorKind {
  evaluation,
  domain,
  composition,
  resolution,
  consistency,
  not_in_c_phi,
  not_flat,
  inconsistency,
  precondition,
  invalid_character,
  conditioning,
  assumption_violation,
  locality_declaration,
  construction,
  syntax,
  semantic,
  usage,
};

inline std::string_view kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::evaluation: return "evaluation-error";
    case ErrorKind::domain: return "domain-error";
    case ErrorKind::composition: return "composition-error";
    case ErrorKind::resolution: return "resolution-error";
    case ErrorKind::consistency: return "consistency-error";
    case ErrorKind::not_in_c_phi: return "not-in-C-phi";
    case ErrorKind::not_flat: return "not-flat";
    case ErrorKind::inconsistency: return "inconsistency-error";
    case ErrorKind::precondition: return "precondition-error";
    case ErrorKind::invalid_character: return "invalid-character";
    case ErrorKind::conditioning: return "conditioning-error";
    case ErrorKind::assumption_violation: return "assumption-violation";
    case ErrorKind::locality_declaration: return "locality-declaration-error";
    case ErrorKind::construction: return "construction-error";
    case ErrorKind::syntax: return "syntax-error";
    case ErrorKind::semantic: return "semantic-error";
    case ErrorKind::usage: return "usage-error";
  }
  return "error";
}

/// Every failure raised by the library. `stage` is filled in by the verdict
/// pipeline and the CLI when an error crosses a stage boundary.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(kind_name(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const {
    Error e = *this;
    e.stage_ = std::move(stage);
    return e;
  }

 private:
  ErrorKind kind_;
  std::string detail_;
  std::string stage_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace eqhol
