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
#include <string>
#include <vector>

#include "mgcs/partition.hpp"
#include "mgcs/recovery.hpp"
#include "mgcs/types.hpp"
#include "mgcs/waveform.hpp"

namespace mgcs
{
    // Position on the subsampled grid; the time-frequency position is (lambda * dL, kappa * dK)
    struct GridPosition
    {
        int lambda = 0;
        int kappa = 0;
        bool operator==(const GridPosition &) const = default;
    };

    struct PilotScheme
    {
        std::vector<std::vector<GridPosition>> positions; // one set per transmit antenna
        CMat pilot_matrix;                                // column s is the pilot vector p(s)
        std::vector<cplx> siso_values;                    // per-position pilots of the SISO variant

        int n_tx() const { return int(positions.size()); }
        int Q() const { return positions.empty() ? 0 : int(positions.front().size()); }
        void validate(const SystemConfig &cfg) const;
    };

    // Diagonal, one QPSK value with the power of N_T unit-power data symbols
    CMat default_pilot_matrix(int n_tx);

    PilotScheme draw_pilots(const SystemConfig &cfg, int Q, std::uint64_t seed, const CMat &pilot_matrix);

    // Orthonormal 2D basis from unitary J x J blocks V_m; [V_m](i + J/2, lambda) = conj(v_{m,i}[lambda])
    class BasisSpec
    {
    public:
        static BasisSpec dft(int D, int J);
        static BasisSpec from_blocks(std::vector<CMat> blocks, std::string id = "custom");

        bool is_dft() const { return dft_; }
        int D() const { return int(blocks_.size()); }
        int J() const { return blocks_.empty() ? 0 : int(blocks_.front().rows()); }
        const std::vector<CMat> &blocks() const { return blocks_; }
        const std::string &id() const { return id_; }

    private:
        bool dft_ = false;
        std::vector<CMat> blocks_;
        std::string id_;
    };

    // Unitary J x J DFT blocks, identical for every m
    std::vector<CMat> dft_blocks(int D, int J);

    bool is_unitary(const CMat &A, double tol = 1e-10);

    // U with rows lambda * D + kappa and columns m * J + i + J/2
    CMat assemble_2d_basis(const BasisSpec &basis);

    std::vector<CMat> build_phi(const PilotScheme &scheme, const CMat &U, const SystemConfig &cfg);
    std::vector<CMat> build_phi(const PilotScheme &scheme, const BasisSpec &basis, const SystemConfig &cfg);

    // y(theta) for theta = r * N_T + s gathered from receive grid r at the positions of set s
    MeasurementEnsemble collect_measurements(const AntennaGrid &y, const PilotScheme &scheme, double noise_radius,
                                             const SystemConfig &cfg, std::vector<CMat> phi);

    enum class Algorithm
    {
        g_bpdn,
        g_cosamp,
        g_omp,
        g_dcs_somp
    };

    enum class SolverMode
    {
        mgcs,       // joint recovery over all channels
        per_channel // every channel on its own
    };

    struct SolverConfig
    {
        Algorithm algorithm = Algorithm::g_dcs_somp;
        SolverMode mode = SolverMode::mgcs;
        int block_dm = 1;
        int block_di = 4;
        StopRule stop;                    // residual tolerance refers to all channels together
        std::size_t cosamp_sparsity = 0;  // zero selects the largest admissible value
        std::size_t cosamp_iters = 30;
        BpdnOptions bpdn;
    };

    struct ChannelEstimate
    {
        std::vector<CMat> H; // per channel, L x K
        CoefficientTensor G;
        CoefficientTensor F;
        RecoveryResult diagnostics;
    };

    ChannelEstimate estimate_mimo(const MeasurementEnsemble &ens, const PilotScheme &scheme, const BasisSpec &basis,
                                  const SolverConfig &solver, const SystemConfig &cfg);

    ChannelEstimate estimate_siso(const std::vector<cplx> &pilot_values, const CMat &y, const PilotScheme &scheme,
                                  const BasisSpec &basis, const SolverConfig &solver, const SystemConfig &cfg,
                                  double noise_radius = 0.0);

    // Subsampled grid values, rows lambda * D + kappa, one column per channel
    CMat subsample_grid(const std::vector<CMat> &H, const SystemConfig &cfg);

    // F from subsampled grid values by inverting the subsampled 2D DFT
    CoefficientTensor subsampled_to_delay_doppler(const CMat &h_sub, int D, int J);
    CMat delay_doppler_to_subsampled(const CoefficientTensor &F);

    // H_{l,k} on the full L x K grid from F on its rectangle
    std::vector<CMat> expand_delay_doppler(const CoefficientTensor &F, const SystemConfig &cfg);

    // G = U^H h_sub for the channel H (the coefficients the estimator targets)
    CoefficientTensor project_onto_basis(const std::vector<CMat> &H, const BasisSpec &basis, const SystemConfig &cfg);

    double rmse(const std::vector<CMat> &estimate, const std::vector<CMat> &truth);
    double normalized_mse(const std::vector<CMat> &estimate, const std::vector<CMat> &truth);

    // C_{G,S,P}: joint group energy outside the S strongest groups
    double leakage_constant(const CoefficientTensor &G, const BlockTiling &T, std::size_t S);

    enum class BoundVariant
    {
        g_bpdn,
        g_cosamp
    };

    struct TheoremInputs
    {
        BoundVariant variant = BoundVariant::g_bpdn;
        double delta = 0.0;        // delta_{2S|P} for G-BPDN, delta_{4S|P} for G-CoSaMP
        std::size_t S = 1;
        double eps = 0.0;
        double leakage = 0.0;      // C_{G,S,P}
        CMat pilot_matrix;
        int Q = 1;
        std::size_t n_iters = 0;   // G-CoSaMP iterations
        double g_energy = 0.0;     // sum of |G|^2 over all channels
    };

    struct BoundResult
    {
        double value = 0.0;
        bool applicable = false;
    };

    BoundResult theorem_bound(const TheoremInputs &in, const SystemConfig &cfg);
}
