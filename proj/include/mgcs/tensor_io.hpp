// SPDX-License-Identifier: Apache-2.0
//
// mgcs - multichannel group-sparse channel estimation for doubly selective MIMO-OFDM
// Copyright (C) 2026 The mgcs authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "mgcs/types.hpp"

namespace mgcs
{
    // Dense complex tensor, row-major over dims
    struct ComplexTensor
    {
        std::vector<std::size_t> dims;
        std::vector<cplx> data;

        std::size_t size() const;
    };

    // Header "MGCT", version, rank, dims as uint64, then (re, im) float64 pairs, little endian
    void write_tensor(const ComplexTensor &t, const std::filesystem::path &path);
    ComplexTensor read_tensor(const std::filesystem::path &path);

    // Per-channel L x K grids (theta = r * N_T + s) as an N_R x N_T x L x K tensor
    ComplexTensor pack_grids(const std::vector<CMat> &grids, int n_rx, int n_tx);
    std::vector<CMat> unpack_grids(const ComplexTensor &t);

    ComplexTensor pack_matrix(const CMat &A);
    CMat unpack_matrix(const ComplexTensor &t);
}
