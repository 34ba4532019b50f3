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

#include "mgcs/partition.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace mgcs
{
    Partition Partition::from_groups(std::size_t total_length, std::vector<std::vector<std::size_t>> groups)
    {
        std::vector<char> seen(total_length, 0);
        std::size_t covered = 0;
        for (const auto &g : groups)
        {
            if (g.empty())
                throw ConfigError("Partition: empty group");
            for (std::size_t j : g)
            {
                if (j >= total_length)
                    throw ConfigError("Partition: index " + std::to_string(j) + " outside 0.." + std::to_string(total_length - 1));
                if (seen[j])
                    throw ConfigError("Partition: index " + std::to_string(j) + " appears in more than one group");
                seen[j] = 1;
                ++covered;
            }
        }
        if (covered != total_length)
            throw ConfigError("Partition: groups do not cover the index set");

        Partition p;
        p.total_length_ = total_length;
        p.groups_ = std::move(groups);
        return p;
    }

    Partition Partition::uniform(std::size_t total_length, std::size_t group_size)
    {
        if (group_size == 0 || total_length % group_size != 0)
            throw ConfigError("Partition::uniform: group size must divide the length");
        std::vector<std::vector<std::size_t>> groups(total_length / group_size);
        for (std::size_t b = 0; b < groups.size(); ++b)
        {
            groups[b].resize(group_size);
            std::iota(groups[b].begin(), groups[b].end(), b * group_size);
        }
        return from_groups(total_length, std::move(groups));
    }

    Partition Partition::singletons(std::size_t total_length)
    {
        return uniform(total_length, 1);
    }

    std::size_t Partition::max_group_size() const
    {
        std::size_t m = 0;
        for (const auto &g : groups_)
            m = std::max(m, g.size());
        return m;
    }

    bool Partition::equal_sized() const
    {
        return std::all_of(groups_.begin(), groups_.end(),
                           [&](const auto &g) { return g.size() == groups_.front().size(); });
    }

    std::size_t Partition::largest_sizes_sum(std::size_t S) const
    {
        std::vector<std::size_t> sizes;
        for (const auto &g : groups_)
            sizes.push_back(g.size());
        std::sort(sizes.begin(), sizes.end(), std::greater<>());
        S = std::min(S, sizes.size());
        return std::accumulate(sizes.begin(), sizes.begin() + std::ptrdiff_t(S), std::size_t(0));
    }

    int BlockTiling::block_of(int m, int i) const
    {
        if (m < 0 || m >= D || i < -J / 2 || i >= J / 2)
            throw DomainError("BlockTiling::block_of: index outside the rectangle");
        const int cols = J / di;
        const int col = (i + J / 2) / di;
        return (m / dm) * cols + col;
    }

    Partition BlockTiling::partition() const
    {
        std::vector<std::vector<std::size_t>> groups;
        groups.reserve(blocks.size());
        for (const auto &blk : blocks)
        {
            std::vector<std::size_t> g;
            g.reserve(blk.size());
            for (const auto &idx : blk)
                g.push_back(std::size_t(index_map(idx.m, idx.i, D, J) - 1));
            groups.push_back(std::move(g));
        }
        return Partition::from_groups(std::size_t(D) * std::size_t(J), std::move(groups));
    }

    BlockTiling make_block_tiling(int D, int J, int dm, int di)
    {
        if (D <= 0 || J <= 0 || dm <= 0 || di <= 0)
            throw ConfigError("make_block_tiling: sizes must be positive");
        if (J % 2 != 0)
            throw ConfigError("make_block_tiling: J must be even");
        if (D % dm != 0)
            throw ConfigError("make_block_tiling: dm must divide D");
        if ((J / 2) % di != 0)
            throw ConfigError("make_block_tiling: di must divide J/2");

        BlockTiling T;
        T.D = D;
        T.J = J;
        T.dm = dm;
        T.di = di;
        // Block columns start at -J/2 in steps of di; since di | J/2 the column starting at i = 0 exists
        for (int m0 = 0; m0 < D; m0 += dm)
            for (int i0 = -J / 2; i0 < J / 2; i0 += di)
            {
                std::vector<DelayDopplerIndex> blk;
                blk.reserve(std::size_t(dm * di));
                for (int m = m0; m < m0 + dm; ++m)
                    for (int i = i0; i < i0 + di; ++i)
                        blk.push_back({m, i});
                T.blocks.push_back(std::move(blk));
            }
        return T;
    }

    int index_map(int m, int i, int D, int J)
    {
        if (m < 0 || m >= D || i < -J / 2 || i >= J / 2)
            throw DomainError("index_map: (m, i) outside the fundamental rectangle");
        return m * J + i + J / 2 + 1;
    }

    DelayDopplerIndex index_unmap(int index, int D, int J)
    {
        if (index < 1 || index > D * J)
            throw DomainError("index_unmap: index outside 1..JD");
        const int z = index - 1;
        return {z / J, z % J - J / 2};
    }

    Partition stack_partition(const Partition &P, std::size_t channels)
    {
        if (channels == 0)
            throw ConfigError("stack_partition: at least one channel required");
        const std::size_t M = P.total_length();
        std::vector<std::vector<std::size_t>> groups;
        groups.reserve(P.group_count());
        for (const auto &g : P.groups())
        {
            std::vector<std::size_t> s;
            s.reserve(g.size() * channels);
            for (std::size_t xi = 0; xi < channels; ++xi)
                for (std::size_t j : g)
                    s.push_back(j + xi * M);
            groups.push_back(std::move(s));
        }
        return Partition::from_groups(M * channels, std::move(groups));
    }

    RVec group_energies(const CVec &x, const Partition &P)
    {
        if (std::size_t(x.size()) != P.total_length())
            throw DomainError("group_energies: vector length does not match the partition");
        RVec e(Eigen::Index(P.group_count()));
        for (std::size_t b = 0; b < P.group_count(); ++b)
        {
            double s = 0.0;
            for (std::size_t j : P.group(b))
                s += std::norm(x[Eigen::Index(j)]);
            e[Eigen::Index(b)] = s;
        }
        return e;
    }

    double group_norm(const CVec &x, const Partition &P)
    {
        return group_energies(x, P).cwiseSqrt().sum();
    }

    double group_frobenius_norm(const CoefficientTensor &G, const BlockTiling &T)
    {
        if (G.D != T.D || G.J != T.J || G.values.rows() != Eigen::Index(G.D) * G.J)
            throw DomainError("group_frobenius_norm: tensor shape does not match the tiling");
        double total = 0.0;
        for (const auto &blk : T.blocks)
        {
            double s = 0.0;
            for (const auto &idx : blk)
                s += G.values.row(G.row(idx.m, idx.i)).squaredNorm();
            total += std::sqrt(s);
        }
        return total;
    }

    std::vector<std::size_t> largest_groups(const RVec &scores, std::size_t count)
    {
        std::vector<std::size_t> order(std::size_t(scores.size()));
        std::iota(order.begin(), order.end(), 0);
        count = std::min(count, order.size());
        std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(count), order.end(),
                          [&](std::size_t a, std::size_t b)
                          {
                              if (scores[Eigen::Index(a)] != scores[Eigen::Index(b)])
                                  return scores[Eigen::Index(a)] > scores[Eigen::Index(b)];
                              return a < b;
                          });
        order.resize(count);
        return order;
    }

    CVec best_group_approx(const CVec &x, const Partition &P, std::size_t S)
    {
        if (S > P.group_count())
            throw DomainError("best_group_approx: S exceeds the number of groups");
        const auto keep = largest_groups(group_energies(x, P), S);
        CVec out = CVec::Zero(x.size());
        for (std::size_t b : keep)
            for (std::size_t j : P.group(b))
                out[Eigen::Index(j)] = x[Eigen::Index(j)];
        return out;
    }
}
