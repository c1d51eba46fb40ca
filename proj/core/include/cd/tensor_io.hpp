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

#ifndef CONCEPTDECOMP_CORE_TENSOR_IO_HPP_
#define CONCEPTDECOMP_CORE_TENSOR_IO_HPP_

#include <filesystem>

#include "cd/matrix.hpp"

namespace cd {

// CDEM tensor file: magic "CDEM", u32 LE version (=1), u32 LE rows,
// u32 LE cols, then rows*cols IEEE-754 binary32 LE values, row-major.
//
// Values are stored at binary32 precision. save followed by load is
// bit-exact whenever the matrix entries are representable in binary32
// (which holds for everything this library writes); saving a loaded
// matrix reproduces the file byte for byte.
void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

}  // namespace cd

#endif  // CONCEPTDECOMP_CORE_TENSOR_IO_HPP_
