// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vnncomp {

// One error code per failure mode the harness distinguishes. Codes are part
// of the public contract: callers (and tests) branch on them.
enum class ErrorCode {
    // vnnlib tokenizer / parser
    UnterminatedToken,
    InvalidCharacter,
    UndeclaredVariable,
    NonlinearTerm,
    UnsupportedForm,
    EmptyDnf,
    CaseExplosion,
    ContradictoryBounds,
    DimensionMismatch,
    // onnx loader / engine
    UnsupportedOperator,
    ShapeInferenceFailure,
    MalformedModel,
    ShapeMismatch,
    // counterexample files
    DuplicateAssignment,
    MalformedPair,
    UnknownVariable,
    // runner
    CapExceeded,
    MissingFile,
    EmptyManifest,
    SpawnFailure,
    UnparsableResultFile,
    NoSuccessfulRun,
    // baseline verifier
    UnboundedInput,
    // generic
    IoError,
    BadConfig,
};

const char* error_code_name(ErrorCode code);

class HarnessError : public std::runtime_error {
public:
    HarnessError(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    // Parse errors carry a 1-based source position.
    HarnessError(ErrorCode code, const std::string& message, int line, int col)
        : std::runtime_error(std::string(error_code_name(code)) + " at " + std::to_string(line) +
                             ":" + std::to_string(col) + ": " + message),
          code_(code), line_(line), col_(col) {}

    ErrorCode code() const { return code_; }
    int line() const { return line_; }
    int col() const { return col_; }

private:
    ErrorCode code_;
    int line_ = 0;
    int col_ = 0;
};

}  // namespace vnncomp
