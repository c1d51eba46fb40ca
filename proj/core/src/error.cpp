// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cd/error.hpp"

namespace cd {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "InvalidInput";
    case ErrorKind::kDegenerateInput: return "DegenerateInput";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kSchemaError: return "SchemaError";
    case ErrorKind::kMissingEmbedding: return "MissingEmbedding";
    case ErrorKind::kEmptyClass: return "EmptyClass";
    case ErrorKind::kFormatError: return "FormatError";
    case ErrorKind::kTemplateError: return "TemplateError";
    case ErrorKind::kGenerationError: return "GenerationError";
    case ErrorKind::kFileError: return "FileError";
    case ErrorKind::kEmptyPool: return "EmptyPool";
    case ErrorKind::kShapeError: return "ShapeError";
    case ErrorKind::kTrainingError: return "TrainingError";
    case ErrorKind::kBudgetError: return "BudgetError";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace cd
