#include "scene/error.hpp"

namespace scene {

std::string_view kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_architecture: return "invalid-architecture";
    case ErrorKind::shape: return "shape";
    case ErrorKind::contract_violation: return "contract-violation";
    case ErrorKind::training_diverged: return "training-diverged";
    case ErrorKind::empty_dataset: return "empty-dataset";
    case ErrorKind::singular_curve: return "singular-curve";
    case ErrorKind::singular_survival: return "singular-survival";
    case ErrorKind::undefined_cindex: return "undefined-cindex";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::invalid_quantile: return "invalid-quantile";
    case ErrorKind::non_convergence: return "non-convergence";
    case ErrorKind::insufficient_support: return "insufficient-support";
    case ErrorKind::misaligned_curves: return "misaligned-curves";
    case ErrorKind::parse: return "parse";
    case ErrorKind::schema: return "schema";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace scene
