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
#include <filesystem>
#include <string>
#include <vector>

#include "mgcs/channel.hpp"
#include "mgcs/estimator.hpp"
#include "mgcs/partition.hpp"
#include "mgcs/types.hpp"
#include "mgcs/waveform.hpp"

namespace mgcs
{
    // Relative rectangle of a conditional factor: tau = tau_1 + U[tau_lo, tau_hi], nu = nu_1 + U[nu_lo, nu_hi]
    struct OffsetRect
    {
        double tau_lo = 0.0;
        double tau_hi = 0.0;
        double nu_lo = 0.0;
        double nu_hi = 0.0;
    };

    // Factored prior over the single-scatterer delay and Doppler of every channel. The first channel
    // is uniform on [0, tau_max] x [-nu_max, nu_max]; channel xi > 0 draws offsets[xi - 1] relative to it.
    struct DelayDopplerPrior
    {
        double tau_max = 0.0;
        double nu_max = 0.0;
        std::vector<OffsetRect> offsets;

        int channels() const { return int(offsets.size()) + 1; }
        void validate() const;
        std::uint64_t hash() const;

        // Delays up to the cyclic prefix, Doppler up to 3% of the subcarrier spacing, and
        // channels that share the delay and differ by at most +-1.4 Hz in Doppler
        static DelayDopplerPrior from_system(const SystemConfig &cfg);
    };

    // Precomputed quantities for evaluating the basis-optimization kernel
    class KernelContext
    {
    public:
        KernelContext(const PulsePair &pulses, const SystemConfig &cfg, const LeakageFilter &filter);

        // C^(nu)[m, lambda] for lambda = 0..J-1
        CVec c_row(double nu, int m) const;
        // c(tau, nu), length JD, rows m * J + lambda
        CVec c_vector(double tau, double nu) const;

        const SystemConfig &config() const { return cfg_; }

    private:
        SystemConfig cfg_;
        LeakageFilter filter_;
        AmbiguityTable amb_;
    };

    cplx c_kernel(double nu, int m, int lambda, const PulsePair &pulses, const SystemConfig &cfg);

    struct ObjectiveSamples
    {
        RMat tau;             // R x channels, seconds
        RMat nu;              // R x channels, Hz
        std::vector<CMat> C;  // one JD x channels kernel matrix per sample

        int count() const { return int(tau.rows()); }
    };

    // R draws of the prior; kernel matrices are filled when a context is supplied
    ObjectiveSamples sample_prior(const DelayDopplerPrior &prior, int R, std::uint64_t seed,
                                  const KernelContext *ctx = nullptr);

    // Columns c(tau^(xi), nu^(xi)) for the per-channel delays and Doppler shifts of one sample
    CMat build_C_matrix(const RVec &tau, const RVec &nu, const KernelContext &ctx);

    // Sum over samples of ||V C_rho||_{F|P}
    double mc_objective(const std::vector<CMat> &blocks, const ObjectiveSamples &samples, const BlockTiling &tiling);

    // e^{jA} for Hermitian A
    CMat hermitian_unitary_exp(const CMat &A);

    struct ConvexStepInfo
    {
        int iterations = 0;
        bool converged = false;
        double value_at_zero = 0.0;
        double value = 0.0;
    };

    // Hermitian updates A_m (one per block in `blocks`, which are the V_m of one delay strip) that
    // approximately minimize the linearized objective over max |[A_m]_{ij}| < eps
    std::vector<CMat> convex_update_step(const std::vector<CMat> &blocks, int m_first, double eps,
                                         const ObjectiveSamples &samples, const BlockTiling &tiling,
                                         ConvexStepInfo *info = nullptr);

    struct OptimizeControls
    {
        double eps_init = 0.1;
        double eps_floor = 1e-4;
        int max_iters = 50;
        int convex_iters = 200;
    };

    struct StripDiagnostics
    {
        std::vector<double> objective; // Y after every outer iteration, starting with the initial value
        int accepted = 0;
        int rejected = 0;
        int unconverged_steps = 0;
    };

    struct OptimizeResult
    {
        BasisSpec basis;
        std::vector<StripDiagnostics> strips;
        double initial_objective = 0.0;
        double final_objective = 0.0;
    };

    OptimizeResult optimize_blocks(const ObjectiveSamples &samples, const BlockTiling &tiling, const SystemConfig &cfg,
                                   const OptimizeControls &controls = {});

    // Identifies the system a basis was optimized for
    std::uint64_t basis_fingerprint(const SystemConfig &cfg, const std::string &pulse_id, std::uint64_t prior_hash);

    struct BasisFile
    {
        BasisSpec basis;
        int dm = 1;
        std::uint64_t fingerprint = 0;
    };

    // Header "MGCB", version, J, D, dm, fingerprint and a DFT tag byte; untagged files continue with the
    // blocks row-major as float64 (re, im) pairs
    void save_basis(const BasisFile &file, const std::filesystem::path &path);
    // Throws FingerprintMismatch when `expected_fingerprint` is nonzero and differs from the file
    BasisFile load_basis(const std::filesystem::path &path, std::uint64_t expected_fingerprint = 0);
}
