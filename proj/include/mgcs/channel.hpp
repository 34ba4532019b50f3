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
#include <vector>

#include "mgcs/partition.hpp"
#include "mgcs/types.hpp"
#include "mgcs/waveform.hpp"

namespace mgcs
{
    struct Scatterer
    {
        Vec3 position = Vec3::Zero();
        Vec3 velocity_tx = Vec3::Zero();     // velocity relative to the transmitter
        Vec3 velocity_rx = Vec3::Zero();     // velocity relative to the receiver
        Vec3 acceleration_tx = Vec3::Zero();
        Vec3 acceleration_rx = Vec3::Zero();
        int cluster = 0;
    };

    struct ScattererGeometry
    {
        std::vector<Vec3> tx_antennas;
        std::vector<Vec3> rx_antennas;
        std::vector<Scatterer> scatterers;
        double carrier = 5e9;

        int n_tx() const { return int(tx_antennas.size()); }
        int n_rx() const { return int(rx_antennas.size()); }
        double tx_aperture() const; // largest distance between two transmit antennas
        double rx_aperture() const;
        void validate() const;
    };

    struct GeometryParams
    {
        int far_clusters = 7;
        int near_clusters = 3;
        int per_cluster = 10;
        double area_x = 2500.0;       // meters, centered between transmitter and receiver
        double area_y = 800.0;
        double separation = 1500.0;   // transmitter-receiver distance
        double near_radius = 100.0;   // radius of the receiver-local circle
        double cluster_spread = 10.0; // radius of a cluster around its center
        double scale = 1.0;           // multiplies every length above
        double speed_max = 50.0;      // m/s, clusters and receiver
        double accel_max = 7.0;       // m/s^2
        int n_tx = 1;
        int n_rx = 1;
        double carrier = 5e9;
        double antenna_spacing = 0.0; // zero selects half a wavelength
    };

    ScattererGeometry sample_geometry(std::uint64_t seed, const GeometryParams &params);

    // Per scatterer p and channel theta = r * N_T + s
    struct PathSet
    {
        int n_rx = 1;
        int n_tx = 1;
        CMat gain;    // P x channels
        RMat delay;   // seconds
        RMat doppler; // Hz

        int n_paths() const { return int(gain.rows()); }
        int channels() const { return int(gain.cols()); }

        // Subtracts the smallest delay and adds `offset` seconds (receiver timing on the first arrival)
        void align_delays(double offset);
    };

    // Uniform phase and magnitude 1/(w_T w_R) relative to the first antennas, normalized to unit total power
    std::vector<cplx> default_path_gains(const ScattererGeometry &geo, std::uint64_t seed);

    // Velocities are taken at `midpoint_time` seconds (v + a t). With carrier_phase, each channel's gain
    // carries the carrier rotation exp(-j 2 pi f_c tau) of its own propagation delay.
    PathSet path_params(const ScattererGeometry &geo, const std::vector<cplx> &gains,
                        double midpoint_time = 0.0, bool carrier_phase = true);

    struct CrossChannelBounds
    {
        double tau_b = 0.0;
        double nu_b = 0.0;
    };

    CrossChannelBounds cross_channel_bounds(const ScattererGeometry &geo, double midpoint_time = 0.0);

    struct FilterSpec
    {
        enum class Mode
        {
            kronecker,
            rrc
        };
        Mode mode = Mode::rrc;
        double rolloff = 0.25;
        int oversampling = 16;
        int span = 16; // truncation of each filter in samples
    };

    // The net discrete effect of the transmit and receive filters, phi^(nu)(x)
    class LeakageFilter
    {
    public:
        LeakageFilter(const FilterSpec &spec, double Ts);

        cplx phi(double nu, double x) const;
        // phi^(nu)(m - shift) for m = 0..count-1
        CVec phi_row(double nu, double shift, int count) const;
        const FilterSpec &spec() const { return spec_; }

    private:
        double rrc(double t) const;

        FilterSpec spec_;
        double Ts_;
        double norm_ = 1.0;
        RVec taps_; // weighted and normalized f(u_k) on the quadrature grid
    };

    // Dirichlet kernel sin(pi x) / (L_r sin(pi x / L_r))
    double psi(double x, int L_r);

    cplx leakage_kernel(const PathSet &paths, int p, int theta, int m, int i, const LeakageFilter &filter, const SystemConfig &cfg);

    // One n_delay x L_r matrix per channel
    std::vector<CMat> spreading_model(const PathSet &paths, const SystemConfig &cfg, const LeakageFilter &filter, int n_delay);

    // The defining DFT over n of H[n, m]
    std::vector<CMat> spreading_from_ir(const TimeVaryingIR &H, const SystemConfig &cfg);

    // F over {0..rows-1} x {-cols/2..cols/2-1}; the defaults give the D x J rectangle
    CoefficientTensor dft_coeffs(const std::vector<CMat> &S, const PulsePair &pulses, const SystemConfig &cfg,
                                 int rows = 0, int cols = 0);

    // H[n, m] for n in {0..L_r-1}, m in {0..n_delay-1}. Paths whose kernel reaches outside the delay
    // range are clipped; their count is stored in *clipped when given.
    TimeVaryingIR discrete_ir(const PathSet &paths, const LeakageFilter &filter, const SystemConfig &cfg,
                              int n_delay, int *clipped = nullptr);

    struct SparsityBudget
    {
        int n_single = 0; // blocks touched by one leakage kernel
        int n_joint = 0;  // blocks touched jointly across all channels
        long s_single = 0;
        long s_joint = 0;
    };

    SparsityBudget sparsity_budget(int dm_eff, int di_eff, double tau_b, double nu_b, const BlockTiling &tiling,
                                   int n_paths, const SystemConfig &cfg);

    struct SupportWidths
    {
        int delay = 1;
        int doppler = 1;
    };

    // Smallest numbers of consecutive delay and Doppler samples holding `fraction` of a half-sample
    // offset kernel's energy
    SupportWidths effective_support_widths(const LeakageFilter &filter, const SystemConfig &cfg, double fraction = 0.99);
}
