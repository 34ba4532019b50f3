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
#include <span>
#include <vector>

#include "mgcs/types.hpp"

namespace mgcs
{
    // Partition of the index set {0..M-1} into disjoint nonempty groups.
    // Indices are zero-based throughout the library.
    class Partition
    {
    public:
        Partition() = default;

        // Validates disjointness, coverage and nonemptiness
        static Partition from_groups(std::size_t total_length, std::vector<std::vector<std::size_t>> groups);
        static Partition uniform(std::size_t total_length, std::size_t group_size);
        static Partition singletons(std::size_t total_length);

        std::size_t total_length() const { return total_length_; }
        std::size_t group_count() const { return groups_.size(); }
        std::span<const std::size_t> group(std::size_t b) const { return groups_[b]; }
        const std::vector<std::vector<std::size_t>> &groups() const { return groups_; }

        std::size_t max_group_size() const;
        bool equal_sized() const;

        // Sum of the S largest group cardinalities
        std::size_t largest_sizes_sum(std::size_t S) const;

    private:
        std::size_t total_length_ = 0;
        std::vector<std::vector<std::size_t>> groups_;
    };

    struct DelayDopplerIndex
    {
        int m = 0;
        int i = 0;
        bool operator==(const DelayDopplerIndex &) const = default;
    };

    // Tiling of the fundamental rectangle {0..D-1} x {-J/2..J/2-1} into dm x di blocks
    struct BlockTiling
    {
        int D = 0;
        int J = 0;
        int dm = 1;
        int di = 1;
        std::vector<std::vector<DelayDopplerIndex>> blocks;

        int block_count() const { return int(blocks.size()); }
        int block_of(int m, int i) const;

        // The tiling as a partition of {0..JD-1} through the index map
        Partition partition() const;
    };

    BlockTiling make_block_tiling(int D, int J, int dm, int di);

    // One-based index m*J + i + J/2 + 1, bijective onto {1..JD}
    int index_map(int m, int i, int D, int J);
    DelayDopplerIndex index_unmap(int index, int D, int J);

    // Groups {j + xi*M : j in G_b, xi = 0..channels-1}
    Partition stack_partition(const Partition &P, std::size_t channels);

    double group_norm(const CVec &x, const Partition &P);
    RVec group_energies(const CVec &x, const Partition &P);

    double group_frobenius_norm(const CoefficientTensor &G, const BlockTiling &T);

    // Indices of the `count` largest scores, ties resolved towards lower indices
    std::vector<std::size_t> largest_groups(const RVec &scores, std::size_t count);

    CVec best_group_approx(const CVec &x, const Partition &P, std::size_t S);
}
