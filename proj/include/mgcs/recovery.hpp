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
#include <limits>
#include <vector>

#include "mgcs/partition.hpp"
#include "mgcs/types.hpp"

namespace mgcs
{
    // Measurement equations y(theta) = Phi(s) x(theta) + z(theta), one matrix per transmit antenna.
    // Channels are ordered theta = r * N_T + s, so channel theta uses matrix tx_of_channel[theta].
    struct MeasurementEnsemble
    {
        std::vector<CMat> phi;
        std::vector<CVec> y;
        std::vector<std::size_t> tx_of_channel;
        double noise_radius = 0.0;

        // Builds the (r, s) channel ordering for n_rx receive antennas
        static MeasurementEnsemble mimo(std::vector<CMat> phi, std::vector<CVec> y, std::size_t n_rx, double noise_radius = 0.0);

        std::size_t channels() const { return y.size(); }
        Eigen::Index rows() const { return phi.empty() ? 0 : phi.front().rows(); }
        Eigen::Index cols() const { return phi.empty() ? 0 : phi.front().cols(); }
        const CMat &matrix_of(std::size_t theta) const { return phi[tx_of_channel[theta]]; }
        void validate() const;
    };

    struct StopRule
    {
        std::size_t max_groups = std::numeric_limits<std::size_t>::max();
        double residual_tol = 0.0;
    };

    struct RecoveryResult
    {
        std::vector<CVec> estimates;
        std::vector<std::size_t> selected_groups;
        std::vector<double> residual_norms;
        std::vector<double> residual_history; // total residual after each iteration, starting with ||y||
        std::size_t iterations = 0;
        bool rank_deficient = false;
        bool converged = true;
    };

    class ConvergenceError : public std::runtime_error
    {
    public:
        ConvergenceError(const std::string &what, RecoveryResult best)
            : std::runtime_error(what), best_iterate(std::move(best)) {}
        RecoveryResult best_iterate;
    };

    RecoveryResult g_omp(const CMat &phi, const CVec &y, const Partition &P, const StopRule &stop);

    RecoveryResult g_cosamp(const CMat &phi, const CVec &y, const Partition &P, std::size_t S, std::size_t n_iters);

    struct BpdnOptions
    {
        double tol = 1e-4;              // relative tolerance on the residual constraint
        std::size_t max_outer = 100;    // root-finding steps on the penalty
        std::size_t max_inner = 20000;  // proximal-gradient iterations per penalty
        double inner_tol = 1e-11;       // relative step size that ends an inner solve
    };

    RecoveryResult g_bpdn(const CMat &phi, const CVec &y, const Partition &P, double eps, const BpdnOptions &opt = {});

    RecoveryResult g_dcs_somp(const MeasurementEnsemble &ens, const Partition &P, const StopRule &stop);

    struct StackedSystem
    {
        CMat phi;
        CVec y;
        Partition partition;
    };

    StackedSystem mgcs_stack(const MeasurementEnsemble &ens, const Partition &P);

    // Splits a stacked estimate back into per-channel vectors of length M
    std::vector<CVec> unstack(const CVec &x, std::size_t channels);

    // Group soft-thresholding, the proximal operator of t * ||.||_{2|P}
    CVec group_soft_threshold(const CVec &x, const Partition &P, double t);

    double group_ric(const CMat &phi, const Partition &P, std::size_t S, std::size_t budget = 100000);

    std::size_t sample_count_bound(std::size_t S_prime, std::size_t M, double gamma, double eta, double mu_U, double C = 1.0);

    struct StackedRic
    {
        double stacked = 0.0;
        std::vector<double> per_channel;
    };

    StackedRic delta_stacked_equals_max(const MeasurementEnsemble &ens, const Partition &P, std::size_t S, std::size_t budget = 100000);
}
