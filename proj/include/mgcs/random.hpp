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

#include <cstdint>
#include <random>

#include "mgcs/types.hpp"

namespace mgcs
{
    // All randomness comes from 64-bit Mersenne twisters seeded through splitmix64 mixing
    using Rng = std::mt19937_64;

    inline std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Independent stream seed for (master, a, b)
    inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0)
    {
        return splitmix64(splitmix64(splitmix64(master) ^ a) ^ b);
    }

    inline double uniform(Rng &rng, double lo, double hi)
    {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    }

    // Circularly symmetric Gaussian with E|z|^2 = variance
    inline cplx complex_normal(Rng &rng, double variance = 1.0)
    {
        std::normal_distribution<double> n(0.0, std::sqrt(0.5 * variance));
        const double re = n(rng);
        return {re, n(rng)};
    }

    inline CVec complex_normal_vector(Rng &rng, Eigen::Index n, double variance = 1.0)
    {
        CVec v(n);
        for (Eigen::Index k = 0; k < n; ++k)
            v[k] = complex_normal(rng, variance);
        return v;
    }

    inline CMat complex_normal_matrix(Rng &rng, Eigen::Index rows, Eigen::Index cols, double variance = 1.0)
    {
        CMat A(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r)
                A(r, c) = complex_normal(rng, variance);
        return A;
    }

    // Haar-distributed unitary matrix (QR of a Gaussian matrix with phase-corrected R)
    inline CMat random_unitary(Rng &rng, Eigen::Index n)
    {
        const CMat A = complex_normal_matrix(rng, n, n);
        Eigen::HouseholderQR<CMat> qr(A);
        CMat Q = qr.householderQ() * CMat::Identity(n, n);
        const CMat R = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Eigen::Index k = 0; k < n; ++k)
        {
            const double a = std::abs(R(k, k));
            if (a > 0.0)
                Q.col(k) *= R(k, k) / a;
        }
        return Q;
    }
}
