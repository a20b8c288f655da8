#pragma once

#include <stdexcept>
#include <string>

namespace pkm {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Config,          // malformed geometry, bad arguments, dimension mismatch
  Units,           // mixed-unit Jacobian used without a characteristic length
  Unreachable,     // pose outside the reach of some leg
  JointLimit,      // solution exists but violates actuator limits
  Singular,        // parallel singularity or indeterminate assembly
  NoAssembly,      // forward kinematics has no real solution
  NoConvergence,   // orientation Newton stage failed from every seed
  Consistency,     // (pose, joints) does not close the loops
  EmptyWorkspace,  // nothing admissible under the requested bounds
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pkm
