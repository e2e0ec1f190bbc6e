// SPDX-License-Identifier: Apache-2.0

#include "vnncomp/errors.hpp"

namespace vnncomp {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnterminatedToken: return "UnterminatedToken";
        case ErrorCode::InvalidCharacter: return "InvalidCharacter";
        case ErrorCode::UndeclaredVariable: return "UndeclaredVariable";
        case ErrorCode::NonlinearTerm: return "NonlinearTerm";
        case ErrorCode::UnsupportedForm: return "UnsupportedForm";
        case ErrorCode::EmptyDnf: return "EmptyDNF";
        case ErrorCode::CaseExplosion: return "CaseExplosion";
        case ErrorCode::ContradictoryBounds: return "ContradictoryBounds";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::UnsupportedOperator: return "UnsupportedOperator";
        case ErrorCode::ShapeInferenceFailure: return "ShapeInferenceFailure";
        case ErrorCode::MalformedModel: return "MalformedModel";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::DuplicateAssignment: return "DuplicateAssignment";
        case ErrorCode::MalformedPair: return "MalformedPair";
        case ErrorCode::UnknownVariable: return "UnknownVariable";
        case ErrorCode::CapExceeded: return "CapExceeded";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::EmptyManifest: return "EmptyManifest";
        case ErrorCode::SpawnFailure: return "SpawnFailure";
        case ErrorCode::UnparsableResultFile: return "UnparsableResultFile";
        case ErrorCode::NoSuccessfulRun: return "NoSuccessfulRun";
        case ErrorCode::UnboundedInput: return "UnboundedInput";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::BadConfig: return "BadConfig";
    }
    return "UnknownError";
}

}  // namespace vnncomp
