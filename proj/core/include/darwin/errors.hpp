#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace darwin {

// Process exit codes shared between the library's error types and the CLI.
enum class ExitCode : int {
  Ok = 0,
  InternalError = 1,
  ConfigError = 2,
  NothingToOptimize = 3,
  BaselineInfeasible = 4,
  AllInfeasible = 5,
  RunCorrupt = 6,
};

class Error : public std::runtime_error {
 public:
  explicit Error(std::string message, ExitCode code = ExitCode::InternalError)
      : std::runtime_error(std::move(message)), code_(code) {}

  ExitCode exit_code() const { return code_; }

 private:
  ExitCode code_;
};

#define DARWIN_ERROR(Name, Code)                      \
  struct Name : Error {                               \
    explicit Name(std::string message)                \
        : Error(std::move(message), ExitCode::Code) {} \
  }

// store
DARWIN_ERROR(ParseError, ConfigError);
DARWIN_ERROR(ValidationError, ConfigError);
DARWIN_ERROR(UnknownStoreId, ConfigError);

// extract
DARWIN_ERROR(IoError, InternalError);
DARWIN_ERROR(OverlapError, ConfigError);
DARWIN_ERROR(HotnessFileMissing, ConfigError);
DARWIN_ERROR(HotnessFileMalformed, ConfigError);
DARWIN_ERROR(GeneOutOfRange, InternalError);
DARWIN_ERROR(StaleManifest, ConfigError);

// stats
DARWIN_ERROR(EmptySamples, InternalError);
DARWIN_ERROR(TooFewSamples, InternalError);
DARWIN_ERROR(ZeroBaseline, InternalError);

// evaluate
DARWIN_ERROR(SandboxSetupError, ConfigError);
DARWIN_ERROR(BaselineInfeasibleError, BaselineInfeasible);

// search
DARWIN_ERROR(SchemaMismatch, InternalError);
DARWIN_ERROR(InvalidParams, ConfigError);
DARWIN_ERROR(AllInfeasibleError, AllInfeasible);

// cli / run directories
DARWIN_ERROR(ConfigFileError, ConfigError);
DARWIN_ERROR(NoRunFound, ConfigError);
DARWIN_ERROR(RunCorruptError, RunCorrupt);
DARWIN_ERROR(UnknownSolution, ConfigError);
DARWIN_ERROR(TargetNotEmpty, ConfigError);

#undef DARWIN_ERROR

}  // namespace darwin
