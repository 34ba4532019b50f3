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

#include "catch_amalgamated.hpp"

#include <algorithm>
#include <set>

#include "mgcs/channel.hpp"
#include "mgcs/random.hpp"

using namespace mgcs;
using Catch::Approx;

namespace
{
    SystemConfig small_cfg()
    {
        SystemConfig c;
        c.K = 8;
        c.N = 10;
        c.L = 4;
        c.D = 4;
        c.J = 2;
        c.n_tx = 1;
        c.n_rx = 1;
        return c;
    }

    PathSet single_path(cplx gain, double tau, double nu)
    {
        PathSet ps;
        ps.gain = CMat::Constant(1, 1, gain);
        ps.delay = RMat::Constant(1, 1, tau);
        ps.doppler = RMat::Constant(1, 1, nu);
        return ps;
    }

    // H_{l,k} = sum_{m,i} F_{m,i} exp(-j 2 pi (k m / K - l i / L)) over the full K x L rectangle
    CMat expand_full(const CoefficientTensor &F, int theta, const SystemConfig &c)
    {
        CMat H = CMat::Zero(c.L, c.K);
        for (int l = 0; l < c.L; ++l)
            for (int k = 0; k < c.K; ++k)
                for (int m = 0; m < F.D; ++m)
                    for (int i = -F.J / 2; i < F.J / 2; ++i)
                        H(l, k) += F.at(m, i, theta) * std::polar(1.0, -2 * pi * (double(k * m) / c.K - double(l * i) / c.L));
        return H;
    }

    GeometryParams mimo_params(int n_tx, int n_rx, int clusters, int per_cluster)
    {
        GeometryParams g;
        g.n_tx = n_tx;
        g.n_rx = n_rx;
        g.far_clusters = clusters;
        g.near_clusters = 0;
        g.per_cluster = per_cluster;
        return g;
    }
}

TEST_CASE("geometry sampling", "[channel]")
{
    const GeometryParams def;
    const ScattererGeometry a = sample_geometry(3, def), b = sample_geometry(3, def);
    REQUIRE(a.scatterers.size() == 100);
    for (std::size_t p = 0; p < a.scatterers.size(); ++p)
    {
        CHECK(a.scatterers[p].position == b.scatterers[p].position);
        CHECK(a.scatterers[p].velocity_rx == b.scatterers[p].velocity_rx);
    }
    CHECK(sample_geometry(4, def).scatterers.front().position != a.scatterers.front().position);

    GeometryParams still = def;
    still.speed_max = 0.0;
    still.accel_max = 0.0;
    const ScattererGeometry g = sample_geometry(5, still);
    const PathSet ps = path_params(g, default_path_gains(g, 5), 1e-3);
    CHECK(ps.doppler.cwiseAbs().maxCoeff() == 0.0);

    GeometryParams arr = def;
    arr.n_tx = 3;
    arr.n_rx = 2;
    const ScattererGeometry m = sample_geometry(6, arr);
    const double half = speed_of_light / (2.0 * 5e9);
    CHECK((m.tx_antennas[1] - m.tx_antennas[0]).norm() == Approx(half).epsilon(1e-12));
    CHECK(m.tx_aperture() == Approx(2 * half).epsilon(1e-9));
    CHECK(m.rx_aperture() == Approx(half).epsilon(1e-9));

    GeometryParams bad = def;
    bad.speed_max = -1.0;
    CHECK_THROWS_AS(sample_geometry(1, bad), ConfigError);
}

TEST_CASE("path parameters", "[channel]")
{
    ScattererGeometry g;
    g.tx_antennas = {Vec3::Zero()};
    g.rx_antennas = {Vec3::Zero()};
    Scatterer sc;
    sc.position = Vec3(150.0, 0.0, 0.0);
    g.scatterers = {sc};
    PathSet ps = path_params(g, {cplx(1.0)}, 0.0, false);
    CHECK(ps.delay(0, 0) == Approx(300.0 / 299792458.0).epsilon(1e-14));
    CHECK(ps.delay(0, 0) == Approx(1.0007e-6).epsilon(1e-4));
    CHECK(ps.gain(0, 0) == cplx(1.0));

    // Transmitter moving toward the scatterer: w points from the scatterer to the antenna
    g.scatterers[0].velocity_tx = Vec3(-50.0, 0.0, 0.0);
    g.rx_antennas = {Vec3(150.0, 100.0, 0.0)};
    ps = path_params(g, {cplx(1.0)}, 0.0, false);
    CHECK(ps.doppler(0, 0) == Approx(5e9 * 50.0 / 299792458.0).epsilon(1e-12));
    CHECK(ps.doppler(0, 0) == Approx(833.9).epsilon(1e-4));

    g.scatterers[0].velocity_tx = Vec3(0.0, 0.0, 7.0);
    ps = path_params(g, {cplx(1.0)}, 0.0, false);
    CHECK(ps.doppler(0, 0) == 0.0);

    // Receive Doppler uses the transmit-shifted frequency; here the scatterer recedes from the receiver
    g.scatterers[0].velocity_tx = Vec3(-50.0, 0.0, 0.0);
    g.scatterers[0].velocity_rx = Vec3(0.0, -30.0, 0.0);
    ps = path_params(g, {cplx(1.0)}, 0.0, false);
    const double nu_t = 5e9 * 50.0 / speed_of_light;
    CHECK(ps.doppler(0, 0) == Approx(nu_t - (5e9 + nu_t) * 30.0 / speed_of_light).epsilon(1e-12));

    // Carrier rotation
    ps = path_params(g, {cplx(1.0)}, 0.0, true);
    CHECK(std::abs(ps.gain(0, 0) - std::polar(1.0, -2 * pi * 5e9 * ps.delay(0, 0))) < 1e-6);

    g.scatterers[0].position = Vec3::Zero();
    g.rx_antennas = {Vec3(1.0, 0.0, 0.0)};
    CHECK_THROWS(path_params(g, {cplx(1.0)}));

    ps = single_path(1.0, 5e-6, 0.0);
    ps.align_delays(2e-7);
    CHECK(ps.delay(0, 0) == Approx(2e-7));
}

TEST_CASE("cross-channel bounds", "[channel]")
{
    ScattererGeometry siso = sample_geometry(1, mimo_params(1, 1, 2, 3));
    const auto b0 = cross_channel_bounds(siso);
    CHECK(b0.tau_b == 0.0);
    CHECK(b0.nu_b == 0.0);

    const ScattererGeometry two = sample_geometry(2, mimo_params(2, 2, 1, 1));
    CHECK(cross_channel_bounds(two).tau_b == Approx(2.0 * (speed_of_light / 1e10) / speed_of_light).epsilon(1e-9));
    CHECK(cross_channel_bounds(two).tau_b == Approx(2.0e-10).epsilon(1e-3));

    GeometryParams prm = mimo_params(3, 2, 2, 2);
    prm.scale = 0.05;
    for (std::uint64_t seed = 0; seed < 1000; ++seed)
    {
        const ScattererGeometry g = sample_geometry(seed, prm);
        const double t = 1e-3 * double(seed % 7);
        const auto b = cross_channel_bounds(g, t);
        const PathSet ps = path_params(g, std::vector<cplx>(g.scatterers.size(), cplx(1.0)), t);
        for (int p = 0; p < ps.n_paths(); ++p)
        {
            const double dt = ps.delay.row(p).maxCoeff() - ps.delay.row(p).minCoeff();
            const double dn = ps.doppler.row(p).maxCoeff() - ps.doppler.row(p).minCoeff();
            if (dt > b.tau_b * (1 + 1e-9) || dn > b.nu_b * (1 + 1e-9) + 1e-9)
            {
                FAIL("bound violated at seed " << seed);
            }
        }
    }
}

TEST_CASE("Dirichlet kernel and leakage kernels", "[channel]")
{
    const int Lr = 40;
    CHECK(psi(0.0, Lr) == Approx(1.0));
    CHECK(psi(1e-13, Lr) == Approx(1.0));
    for (int k : {1, 2, 7, 39, -3, 41})
        CHECK(std::abs(psi(double(k), Lr)) < 1e-12);
    // Antiperiodic for even L_r
    CHECK(psi(double(Lr), Lr) == Approx(-1.0));
    CHECK(psi(double(Lr) + 0.3, Lr) == Approx(-psi(0.3, Lr)));
    CHECK(psi(double(Lr + 1) + 0.3, Lr + 1) == Approx(psi(0.3, Lr + 1)));

    const SystemConfig c = small_cfg();
    const LeakageFilter kron({FilterSpec::Mode::kronecker}, c.Ts);
    const int m0 = 2, i0 = 3;
    const PathSet ps = single_path(1.0, m0 * c.Ts, i0 / (c.Ts * c.L_r()));
    for (int m = 0; m < c.K; ++m)
        for (int i = -5; i < 10; ++i)
            CHECK(std::abs(leakage_kernel(ps, 0, 0, m, i, kron, c) - (m == m0 ? psi(double(i - i0), c.L_r()) : 0.0)) < 1e-12);
}

TEST_CASE("RRC leakage filter", "[channel]")
{
    const double Ts = 2e-7;
    const LeakageFilter f(FilterSpec{}, Ts);
    CHECK(std::abs(f.phi(0.0, 0.0) - 1.0) < 1e-12);
    // A raised cosine vanishes at nonzero integers, up to quadrature and truncation error
    for (int m : {1, 2, 3, -1, -4})
        CHECK(std::abs(f.phi(0.0, double(m))) < 2e-3);
    CHECK(f.phi(0.0, 0.5).imag() == Approx(0.0).margin(1e-12));
    // phi_row reproduces pointwise evaluation
    const CVec row = f.phi_row(300.0, 2.3, 8);
    for (int m = 0; m < 8; ++m)
        CHECK(std::abs(row[m] - f.phi(300.0, double(m) - 2.3)) < 1e-12);
    CHECK_THROWS_AS(LeakageFilter(FilterSpec{FilterSpec::Mode::rrc, 1.5}, Ts), ConfigError);
}

TEST_CASE("spreading function", "[channel]")
{
    const SystemConfig c = small_cfg();
    const LeakageFilter kron({FilterSpec::Mode::kronecker}, c.Ts);

    PathSet none;
    none.gain.resize(0, 1);
    none.delay.resize(0, 1);
    none.doppler.resize(0, 1);
    CHECK(spreading_model(none, c, kron, c.K).front().isZero());

    const cplx eta = std::polar(0.7, 1.1);
    const PathSet on = single_path(eta, 3 * c.Ts, 5 / (c.Ts * c.L_r()));
    const CMat S = spreading_model(on, c, kron, c.K).front();
    CHECK(std::abs(S(3, 5)) == Approx(0.7).epsilon(1e-12));
    CHECK(S.cwiseAbs2().sum() == Approx(0.49).epsilon(1e-12));

    // Against the defining DFT of H[n, m], computed here by direct summation
    const LeakageFilter rrc(FilterSpec{}, c.Ts);
    PathSet ps;
    ps.gain.resize(2, 1);
    ps.delay.resize(2, 1);
    ps.doppler.resize(2, 1);
    ps.gain << cplx(1.0, 0.2), cplx(-0.3, 0.5);
    ps.delay << 1.3 * c.Ts, 2.6 * c.Ts;
    ps.doppler << 1234.5, -4321.0;
    for (const LeakageFilter *f : {&kron, &rrc})
    {
        PathSet p = ps;
        if (f == &kron)
            p.delay << 1 * c.Ts, 3 * c.Ts;
        const CMat model = spreading_model(p, c, *f, c.K).front();
        const CMat h = discrete_ir(p, *f, c, c.K).taps.front();
        const int Lr = c.L_r();
        CMat naive = CMat::Zero(c.K, Lr);
        for (int m = 0; m < c.K; ++m)
            for (int i = 0; i < Lr; ++i)
                for (int n = 0; n < Lr; ++n)
                    naive(m, i) += h(n, m) * std::polar(1.0 / Lr, -2 * pi * double(i) * n / Lr);
        CHECK((model - naive).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((spreading_from_ir(discrete_ir(p, *f, c, c.K), c).front() - naive).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("discrete impulse response", "[channel]")
{
    const SystemConfig c = small_cfg();
    const LeakageFilter kron({FilterSpec::Mode::kronecker}, c.Ts);
    const cplx eta(0.3, -0.4);
    const CMat h = discrete_ir(single_path(eta, 2 * c.Ts, 0.0), kron, c, c.K).taps.front();
    for (int n = 0; n < h.rows(); ++n)
        for (int m = 0; m < c.K; ++m)
            CHECK(h(n, m) == (m == 2 ? eta : cplx(0.0)));

    const LeakageFilter rrc(FilterSpec{}, c.Ts);
    const CMat hs = discrete_ir(single_path(eta, 2.4 * c.Ts, 0.0), rrc, c, c.K).taps.front();
    for (int n = 1; n < hs.rows(); ++n)
        CHECK((hs.row(n) - hs.row(0)).norm() < 1e-14);

    int clipped = 0;
    discrete_ir(single_path(eta, 20 * c.Ts, 0.0), kron, c, c.K, &clipped);
    CHECK(clipped == 1);
    CHECK_THROWS_AS(discrete_ir(single_path(eta, 0.0, 0.0), kron, c, c.K + 1), ConfigError);

    // The spreading function extends L_r-periodically in Doppler
    const CMat S = spreading_model(single_path(eta, 1.5 * c.Ts, 777.0), c, rrc, c.K).front();
    const int Lr = c.L_r();
    for (int m = 0; m < c.K; ++m)
        for (int i = 0; i < 5; ++i)
        {
            cplx shifted = 0.0;
            const CMat hh = discrete_ir(single_path(eta, 1.5 * c.Ts, 777.0), rrc, c, c.K).taps.front();
            for (int n = 0; n < Lr; ++n)
                shifted += hh(n, m) * std::polar(1.0 / Lr, -2 * pi * double(i + Lr) * n / Lr);
            CHECK(std::abs(shifted - S(m, i)) < 1e-10);
        }
}

TEST_CASE("delay-Doppler coefficients", "[channel]")
{
    const SystemConfig c = small_cfg();
    const PulsePair pulses = cp_ofdm_pulses(c.K, c.N);
    const LeakageFilter kron({FilterSpec::Mode::kronecker}, c.Ts);

    CHECK(dft_coeffs({CMat::Zero(c.K, c.L_r())}, pulses, c).values.isZero());
    const CoefficientTensor def = dft_coeffs({CMat::Zero(c.K, c.L_r())}, pulses, c);
    CHECK(def.D == c.D);
    CHECK(def.J == c.J);

    SECTION("expansion reproduces the effective channel")
    {
        PathSet ps;
        ps.gain.resize(3, 1);
        ps.delay.resize(3, 1);
        ps.doppler.resize(3, 1);
        ps.gain << cplx(1.0, 0.0), cplx(0.2, -0.6), cplx(-0.4, 0.1);
        ps.delay << 0.0, 1 * c.Ts, 2 * c.Ts;
        ps.doppler << 0.0, 0.0, 0.0;
        const TimeVaryingIR H = discrete_ir(ps, kron, c, c.K);
        const CoefficientTensor F = dft_coeffs(spreading_from_ir(H, c), pulses, c, c.K, c.L);
        const CMat direct = effective_coeffs(H, pulses, c).front();
        CHECK((expand_full(F, 0, c) - direct).norm() <= 1e-6 * direct.norm());

        // The model-side spreading function gives the same coefficients
        const CoefficientTensor Fm = dft_coeffs(spreading_model(ps, c, kron, c.K), pulses, c, c.K, c.L);
        CHECK((Fm.values - F.values).norm() < 1e-10);
    }

    SECTION("expansion is exact for time-varying CP-compliant channels")
    {
        const LeakageFilter rrc(FilterSpec{}, c.Ts);
        PathSet ps;
        ps.gain.resize(2, 1);
        ps.delay.resize(2, 1);
        ps.doppler.resize(2, 1);
        ps.gain << cplx(0.8, 0.1), cplx(0.2, 0.3);
        ps.delay << 0.0, 1.0 * c.Ts;
        ps.doppler << 3100.0, -12000.0;
        const TimeVaryingIR H = discrete_ir(ps, kron, c, c.N - c.K + 1);
        const CoefficientTensor F = dft_coeffs(spreading_from_ir(H, c), pulses, c, c.K, c.L);
        const CMat direct = effective_coeffs(H, pulses, c).front();
        CHECK((expand_full(F, 0, c) - direct).norm() <= 1e-6 * direct.norm());
    }

    SECTION("single channel is the SISO case")
    {
        SystemConfig mc = c;
        mc.n_tx = 2;
        const PathSet one = single_path(cplx(0.5, 0.5), c.Ts, 2000.0);
        PathSet two = one;
        two.n_tx = 2;
        two.gain = CMat::Constant(1, 2, cplx(0.5, 0.5));
        two.delay = RMat::Constant(1, 2, c.Ts);
        two.doppler = RMat::Constant(1, 2, 2000.0);
        const auto s1 = spreading_model(one, c, kron, c.K);
        const auto s2 = spreading_model(two, mc, kron, c.K);
        CHECK((dft_coeffs(s2, pulses, mc).values.col(1) - dft_coeffs(s1, pulses, c).values.col(0)).norm() < 1e-14);
    }
}

TEST_CASE("sparsity budget", "[channel]")
{
    const SystemConfig c = SystemConfig::desk();
    const BlockTiling T12 = make_block_tiling(c.D, c.J, 1, 2);
    CHECK(sparsity_budget(2, 4, 0.0, 0.0, T12, 1, c).n_single == 9);
    const BlockTiling T11 = make_block_tiling(c.D, c.J, 1, 1);
    CHECK(sparsity_budget(1, 1, 0.0, 0.0, T11, 1, c).n_single == 4);

    const auto siso = sparsity_budget(2, 4, 0.0, 0.0, T12, 5, c);
    CHECK(siso.n_joint == siso.n_single);
    CHECK(siso.s_single == 45);

    // tau_B of one sample adds one delay sample, nu_B of one Doppler bin adds one Doppler sample
    const auto mimo = sparsity_budget(2, 4, c.Ts, 1.0 / (c.Ts * c.L_r()), T12, 5, c);
    CHECK(mimo.n_joint == (3 + 1) * (3 + 1));
    CHECK(mimo.s_joint == 5 * 16);
    CHECK_THROWS_AS(sparsity_budget(0, 4, 0.0, 0.0, T12, 1, c), DomainError);

    const LeakageFilter kron({FilterSpec::Mode::kronecker}, c.Ts);
    const SupportWidths w = effective_support_widths(kron, c);
    CHECK(w.delay == 1);
    CHECK(w.doppler >= 2);
    const SupportWidths wr = effective_support_widths(LeakageFilter(FilterSpec{}, c.Ts), c);
    CHECK(wr.delay >= 2);
}

TEST_CASE("joint support is contained in the joint budget", "[channel]")
{
    SystemConfig c = SystemConfig::desk();
    const PulsePair pulses = cp_ofdm_pulses(c.K, c.N);
    const LeakageFilter rrc(FilterSpec{}, c.Ts);
    const BlockTiling T = make_block_tiling(c.D, c.J, 1, 4);
    const SupportWidths w = effective_support_widths(rrc, c);

    GeometryParams prm = mimo_params(2, 2, 1, 2);
    prm.scale = 0.05;
    for (std::uint64_t seed = 0; seed < 50; ++seed)
    {
        const ScattererGeometry g = sample_geometry(seed, prm);
        PathSet ps = path_params(g, default_path_gains(g, seed), 0.5 * c.L * c.N * c.Ts);
        ps.align_delays(2.0 * c.Ts);
        const auto bounds = cross_channel_bounds(g, 0.5 * c.L * c.N * c.Ts);
        const auto budget = sparsity_budget(w.delay, w.doppler, bounds.tau_b, bounds.nu_b, T, ps.n_paths(), c);

        const CoefficientTensor F = dft_coeffs(spreading_model(ps, c, rrc, c.K), pulses, c);
        std::set<int> joint;
        for (int theta = 0; theta < F.channels(); ++theta)
        {
            std::vector<std::pair<double, int>> e;
            double total = 0.0;
            for (int b = 0; b < T.block_count(); ++b)
            {
                double s = 0.0;
                for (const auto &idx : T.blocks[std::size_t(b)])
                    s += std::norm(F.at(idx.m, idx.i, theta));
                e.emplace_back(s, b);
                total += s;
            }
            std::sort(e.rbegin(), e.rend());
            double acc = 0.0;
            for (const auto &[s, b] : e)
            {
                if (acc >= 0.99 * total)
                    break;
                acc += s;
                joint.insert(b);
            }
        }
        CHECK(long(joint.size()) <= budget.s_joint);
    }
}

TEST_CASE("normalized difference inequality", "[channel]")
{
    Rng rng(11);
    for (int t = 0; t < 10000; ++t)
    {
        const Eigen::Index n = 1 + t % 6;
        const CVec a = complex_normal_vector(rng, n), b = complex_normal_vector(rng, n, t % 3 == 0 ? 0.01 : 1.0);
        const double lhs = (a / a.norm() - b / b.norm()).norm();
        const double rhs = (a - b).norm() / std::min(a.norm(), b.norm());
        if (lhs > rhs * (1 + 1e-12))
            FAIL("inequality violated at trial " << t);
    }
}
