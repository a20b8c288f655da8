#include "pkmkit/error.hpp"

namespace pkm {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Units: return "units";
    case ErrorKind::Unreachable: return "unreachable";
    case ErrorKind::JointLimit: return "joint-limit";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::NoAssembly: return "no-assembly";
    case ErrorKind::NoConvergence: return "no-convergence";
    case ErrorKind::Consistency: return "consistency";
    case ErrorKind::EmptyWorkspace: return "empty-workspace";
  }
  return "unknown";
}

}  // namespace pkm
