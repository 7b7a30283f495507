#pragma once

#include <stdexcept>
#include <string>

namespace wm {

// Every failure carries a short machine-readable kind ("dimension-error",
// "config-error", ...) so the CLI can print `wm-poet: <kind>: <message>`.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define WM_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  };

WM_DEFINE_ERROR(DimensionError, "dimension-error")
WM_DEFINE_ERROR(NumericError, "numeric-error")
WM_DEFINE_ERROR(ContractError, "contract-error")
WM_DEFINE_ERROR(ConfigError, "config-error")
WM_DEFINE_ERROR(DataError, "data-error")
WM_DEFINE_ERROR(VersionError, "version-error")
WM_DEFINE_ERROR(IntegrityError, "integrity-error")
WM_DEFINE_ERROR(ConstraintInfeasibleError, "constraint-infeasible")
WM_DEFINE_ERROR(IoError, "io-error")

#undef WM_DEFINE_ERROR

}  // namespace wm
