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

#include "mgcs/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

namespace mgcs
{
    static_assert(std::endian::native == std::endian::little, "tensor files are written in little-endian byte order");

    namespace
    {
        constexpr char magic[4] = {'M', 'G', 'C', 'T'};
        constexpr std::uint32_t version = 1;
    }

    std::size_t ComplexTensor::size() const
    {
        return std::accumulate(dims.begin(), dims.end(), std::size_t(1), std::multiplies<>());
    }

    void write_tensor(const ComplexTensor &t, const std::filesystem::path &path)
    {
        if (t.size() != t.data.size())
            throw DomainError("write_tensor: data length does not match the dimensions");
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw FormatError("cannot open " + path.string() + " for writing");
        const auto rank = std::uint32_t(t.dims.size());
        f.write(magic, 4);
        f.write(reinterpret_cast<const char *>(&version), sizeof version);
        f.write(reinterpret_cast<const char *>(&rank), sizeof rank);
        for (std::size_t d : t.dims)
        {
            const auto v = std::uint64_t(d);
            f.write(reinterpret_cast<const char *>(&v), sizeof v);
        }
        // std::complex<double> is layout-compatible with double[2]
        f.write(reinterpret_cast<const char *>(t.data.data()), std::streamsize(t.data.size() * sizeof(cplx)));
        if (!f)
            throw FormatError("write to " + path.string() + " failed");
    }

    ComplexTensor read_tensor(const std::filesystem::path &path)
    {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw FormatError("cannot open " + path.string());
        char m[4];
        std::uint32_t ver = 0, rank = 0;
        f.read(m, 4);
        f.read(reinterpret_cast<char *>(&ver), sizeof ver);
        f.read(reinterpret_cast<char *>(&rank), sizeof rank);
        if (!f || std::memcmp(m, magic, 4) != 0 || ver != version || rank > 16)
            throw FormatError(path.string() + ": not a complex tensor file");
        ComplexTensor t;
        for (std::uint32_t k = 0; k < rank; ++k)
        {
            std::uint64_t d = 0;
            f.read(reinterpret_cast<char *>(&d), sizeof d);
            t.dims.push_back(std::size_t(d));
        }
        if (!f || t.size() > (std::size_t(1) << 34))
            throw FormatError(path.string() + ": corrupt header");
        t.data.resize(t.size());
        f.read(reinterpret_cast<char *>(t.data.data()), std::streamsize(t.data.size() * sizeof(cplx)));
        if (!f)
            throw FormatError(path.string() + ": truncated data");
        return t;
    }

    ComplexTensor pack_grids(const std::vector<CMat> &grids, int n_rx, int n_tx)
    {
        if (grids.size() != std::size_t(n_rx * n_tx) || grids.empty())
            throw DomainError("pack_grids: need N_R * N_T grids");
        const auto L = std::size_t(grids.front().rows()), K = std::size_t(grids.front().cols());
        ComplexTensor t;
        t.dims = {std::size_t(n_rx), std::size_t(n_tx), L, K};
        t.data.reserve(t.size());
        for (const auto &g : grids)
        {
            if (std::size_t(g.rows()) != L || std::size_t(g.cols()) != K)
                throw DomainError("pack_grids: grids differ in shape");
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t k = 0; k < K; ++k)
                    t.data.push_back(g(Eigen::Index(l), Eigen::Index(k)));
        }
        return t;
    }

    std::vector<CMat> unpack_grids(const ComplexTensor &t)
    {
        if (t.dims.size() != 4 || t.data.size() != t.size())
            throw FormatError("unpack_grids: expected an N_R x N_T x L x K tensor");
        const auto L = Eigen::Index(t.dims[2]), K = Eigen::Index(t.dims[3]);
        std::vector<CMat> out;
        std::size_t pos = 0;
        for (std::size_t g = 0; g < t.dims[0] * t.dims[1]; ++g)
        {
            CMat A(L, K);
            for (Eigen::Index l = 0; l < L; ++l)
                for (Eigen::Index k = 0; k < K; ++k)
                    A(l, k) = t.data[pos++];
            out.push_back(std::move(A));
        }
        return out;
    }

    ComplexTensor pack_matrix(const CMat &A)
    {
        ComplexTensor t;
        t.dims = {std::size_t(A.rows()), std::size_t(A.cols())};
        for (Eigen::Index r = 0; r < A.rows(); ++r)
            for (Eigen::Index c = 0; c < A.cols(); ++c)
                t.data.push_back(A(r, c));
        return t;
    }

    CMat unpack_matrix(const ComplexTensor &t)
    {
        if (t.dims.size() != 2 || t.data.size() != t.size())
            throw FormatError("unpack_matrix: expected a rank-2 tensor");
        CMat A(Eigen::Index(t.dims[0]), Eigen::Index(t.dims[1]));
        std::size_t pos = 0;
        for (Eigen::Index r = 0; r < A.rows(); ++r)
            for (Eigen::Index c = 0; c < A.cols(); ++c)
                A(r, c) = t.data[pos++];
        return A;
    }
}
