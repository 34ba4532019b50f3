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

#include <filesystem>
#include <fstream>

#include "mgcs/basisopt.hpp"
#include "mgcs/random.hpp"

using namespace mgcs;
using Catch::Approx;

namespace
{
    // Small system where the D x J rectangle is the whole delay-Doppler grid
    SystemConfig full_rect()
    {
        SystemConfig c;
        c.K = 8;
        c.N = 10;
        c.L = 4;
        c.D = 8;
        c.J = 4;
        c.n_tx = 1;
        c.n_rx = 2;
        return c;
    }

    SystemConfig desk8()
    {
        SystemConfig c;
        c.K = 64;
        c.N = 80;
        c.L = 16;
        c.D = 8;
        c.J = 8;
        c.n_tx = 1;
        c.n_rx = 2;
        return c;
    }

    // psi^(nu)(x) and the inner q-sum, written out from their definitions
    cplx psi_nu(double nu, double x, const SystemConfig &c)
    {
        const int Lr = c.L_r();
        return std::polar(1.0, pi * (nu * c.Ts - x / Lr) * (Lr - 1)) * psi(x - nu * c.Ts * Lr, Lr);
    }

    cplx inner_sum(double nu, int m, int i, const PulsePair &p, const SystemConfig &c)
    {
        cplx acc = 0.0;
        for (int q = 0; q < c.N; ++q)
            acc += psi_nu(nu, double(i + q * c.L), c) * std::conj(cross_ambiguity(p, m, double(i + q * c.L) / c.L_r()));
        return acc;
    }

    cplx naive_kernel(double nu, int m, int lambda, const PulsePair &p, const SystemConfig &c, int i_lo)
    {
        cplx acc = 0.0;
        for (int i = i_lo; i < i_lo + c.J; ++i)
            acc += inner_sum(nu, m, i, p, c) * std::polar(1.0, 2 * pi * double(lambda * i) / c.J);
        return acc;
    }

    // Matrix exponential by a long Taylor series with scaling and squaring
    CMat series_exp(const CMat &X)
    {
        const CMat Y = X / 16.0;
        CMat term = CMat::Identity(X.rows(), X.cols()), sum = term;
        for (int k = 1; k < 30; ++k)
        {
            term = term * Y / double(k);
            sum += term;
        }
        for (int s = 0; s < 4; ++s)
            sum = sum * sum;
        return sum;
    }

    PathSet one_path(const RVec &tau, const RVec &nu, int n_rx)
    {
        PathSet ps;
        ps.n_rx = n_rx;
        ps.n_tx = int(tau.size()) / n_rx;
        ps.gain = CMat::Ones(1, tau.size());
        ps.delay = tau.transpose();
        ps.doppler = nu.transpose();
        return ps;
    }

    std::vector<CMat> random_blocks(Rng &rng, int D, int J)
    {
        std::vector<CMat> v;
        for (int m = 0; m < D; ++m)
            v.push_back(random_unitary(rng, J));
        return v;
    }

    // Linearized strip objective for one block V and one sample C restricted to the strip rows
    double linearized(const CMat &A, const CMat &V, const CMat &C, const BlockTiling &T, int m)
    {
        const CMat G = (CMat::Identity(V.rows(), V.cols()) + cplx(0, 1) * A) * V * C;
        double total = 0.0;
        for (const auto &blk : T.blocks)
        {
            double e = 0.0;
            bool in_strip = false;
            for (const auto &idx : blk)
                if (idx.m == m)
                {
                    in_strip = true;
                    e += G.row(idx.i + T.J / 2).squaredNorm();
                }
            if (in_strip)
                total += std::sqrt(e);
        }
        return total;
    }
}

TEST_CASE("delay-Doppler prior", "[basisopt]")
{
    const DelayDopplerPrior standard = DelayDopplerPrior::from_system([] {
        SystemConfig c = SystemConfig::paper_scale();
        c.n_tx = c.n_rx = 2;
        return c;
    }());
    CHECK(standard.tau_max == Approx(25.6e-6).epsilon(1e-12));
    CHECK(standard.nu_max == Approx(293.0).epsilon(2e-3));
    REQUIRE(standard.offsets.size() == 3);
    CHECK(standard.offsets[0].tau_lo == 0.0);
    CHECK(standard.offsets[0].tau_hi == 0.0);
    CHECK(standard.offsets[0].nu_lo == -1.4);
    CHECK(standard.offsets[0].nu_hi == 1.4);

    const ObjectiveSamples a = sample_prior(standard, 100, 3), b = sample_prior(standard, 100, 3);
    CHECK(a.tau == b.tau);
    CHECK(a.nu == b.nu);
    CHECK(a.C.empty());
    for (int r = 0; r < 100; ++r)
    {
        CHECK(a.tau(r, 0) >= 0.0);
        CHECK(a.tau(r, 0) <= standard.tau_max);
        CHECK(std::abs(a.nu(r, 0)) <= standard.nu_max);
        for (int x = 1; x < 4; ++x)
        {
            CHECK(a.tau(r, x) == a.tau(r, 0));
            CHECK(std::abs(a.nu(r, x) - a.nu(r, 0)) <= 1.4);
        }
    }

    DelayDopplerPrior point;
    point.tau_max = 0.0;
    point.nu_max = 0.0;
    point.offsets = {OffsetRect{}};
    const ObjectiveSamples d = sample_prior(point, 5, 1);
    CHECK(d.tau.isZero());
    CHECK(d.nu.isZero());

    CHECK(standard.hash() != point.hash());
    DelayDopplerPrior neg = point;
    neg.offsets[0].tau_lo = 1.0;
    neg.offsets[0].tau_hi = 0.0;
    CHECK_THROWS(neg.validate());
}

TEST_CASE("kernel values", "[basisopt]")
{
    const SystemConfig c = full_rect();
    const PulsePair p = cp_ofdm_pulses(c.K, c.N);
    for (double nu : {0.0, 2345.6, -9876.5})
        for (int m : {0, 3})
            for (int lambda : {0, 1, 3})
                CHECK(std::abs(c_kernel(nu, m, lambda, p, c) - naive_kernel(nu, m, lambda, p, c, -c.J / 2)) < 1e-10);

    // On-grid Doppler: a single psi term survives in the whole double sum
    const int i0 = 1;
    const double nu0 = i0 / (c.Ts * c.L_r());
    for (int m : {0, 2})
        for (int lambda = 0; lambda < c.J; ++lambda)
        {
            const cplx single = std::conj(cross_ambiguity(p, m, double(i0) / c.L_r())) *
                                std::polar(1.0, 2 * pi * double(lambda * i0) / c.J);
            CHECK(std::abs(c_kernel(nu0, m, lambda, p, c) - single) < 1e-10);
        }

    // nu -> -nu conjugates the kernel after mirroring the Doppler window
    for (double nu : {1500.0, -4200.0})
        for (int lambda = 0; lambda < c.J; ++lambda)
            CHECK(std::abs(std::conj(c_kernel(-nu, 1, lambda, p, c)) - naive_kernel(nu, 1, lambda, p, c, -c.J / 2 + 1)) < 1e-10);

    const LeakageFilter filter(FilterSpec{}, c.Ts);
    const KernelContext ctx(p, c, filter);
    const CVec row = ctx.c_row(777.0, 2);
    for (int lambda = 0; lambda < c.J; ++lambda)
        CHECK(std::abs(row[lambda] - c_kernel(777.0, 2, lambda, p, c)) < 1e-10);
    CHECK(std::isfinite(row.cwiseAbs().sum()));
}

TEST_CASE("kernel matrices reproduce basis coefficients", "[basisopt]")
{
    const SystemConfig c = full_rect();
    const PulsePair p = cp_ofdm_pulses(c.K, c.N);
    Rng rng(5);
    for (FilterSpec::Mode mode : {FilterSpec::Mode::kronecker, FilterSpec::Mode::rrc})
    {
        const LeakageFilter filter(FilterSpec{mode}, c.Ts);
        const KernelContext ctx(p, c, filter);
        for (int t = 0; t < 5; ++t)
        {
            const double tau = mode == FilterSpec::Mode::kronecker ? double(t % 3) * c.Ts : uniform(rng, 0.0, 2.0) * c.Ts;
            const RVec taus = RVec::Constant(2, tau);
            RVec nus(2);
            nus << uniform(rng, -9000.0, 9000.0), uniform(rng, -9000.0, 9000.0);
            const CMat C = build_C_matrix(taus, nus, ctx);
            REQUIRE(C.rows() == c.JD());
            REQUIRE(C.cols() == 2);

            const PathSet ps = one_path(taus, nus, 2);
            const auto truth = effective_coeffs(discrete_ir(ps, filter, c, c.K), p, c);
            for (const BasisSpec &basis : {BasisSpec::dft(c.D, c.J), BasisSpec::from_blocks(random_blocks(rng, c.D, c.J))})
            {
                const CoefficientTensor G = project_onto_basis(truth, basis, c);
                const std::vector<CMat> V = basis.is_dft() ? dft_blocks(c.D, c.J) : basis.blocks();
                CMat model(c.JD(), 2);
                for (int m = 0; m < c.D; ++m)
                    model.middleRows(Eigen::Index(m) * c.J, c.J) = V[std::size_t(m)] * C.middleRows(Eigen::Index(m) * c.J, c.J);
                CHECK((model - G.values).norm() <= 1e-8 * G.values.norm());
            }
        }
    }

    // Delay far outside the filter support
    const LeakageFilter kron(FilterSpec{FilterSpec::Mode::kronecker}, c.Ts);
    const KernelContext kctx(p, c, kron);
    CHECK(build_C_matrix(RVec::Constant(1, 50.0 * c.Ts), RVec::Zero(1), kctx).norm() < 1e-12);
    CHECK(build_C_matrix(RVec::Constant(1, 0.0), RVec::Zero(1), kctx).cols() == 1);
}

TEST_CASE("Monte-Carlo objective", "[basisopt]")
{
    const SystemConfig c = desk8();
    const PulsePair p = cp_ofdm_pulses(c.K, c.N);
    const LeakageFilter filter(FilterSpec{}, c.Ts);
    const KernelContext ctx(p, c, filter);
    const BlockTiling T = make_block_tiling(c.D, c.J, 1, 4);
    const ObjectiveSamples s = sample_prior(DelayDopplerPrior::from_system(c), 6, 7, &ctx);
    REQUIRE(s.C.size() == 6);

    std::vector<CMat> id(static_cast<std::size_t>(c.D), CMat::Identity(c.J, c.J));
    double direct = 0.0;
    for (const auto &C : s.C)
    {
        CoefficientTensor t = CoefficientTensor::zeros(c.D, c.J, 2, CoefficientDomain::basis);
        for (int m = 0; m < c.D; ++m)
            for (int i = -c.J / 2; i < c.J / 2; ++i)
                for (int x = 0; x < 2; ++x)
                    t.at(m, i, x) = C(m * c.J + i + c.J / 2, x);
        direct += group_frobenius_norm(t, T);
    }
    CHECK(mc_objective(id, s, T) == Approx(direct).epsilon(1e-12));

    // DFT blocks on a single sample equal sqrt(JD) times the grouped norm of F
    ObjectiveSamples one = s;
    one.tau = s.tau.topRows(1);
    one.nu = s.nu.topRows(1);
    one.C = {s.C.front()};
    const PathSet ps = one_path(s.tau.row(0).transpose(), s.nu.row(0).transpose(), 2);
    const CoefficientTensor F = dft_coeffs(spreading_model(ps, c, filter, c.K), p, c);
    CHECK(mc_objective(dft_blocks(c.D, c.J), one, T) == Approx(std::sqrt(double(c.JD())) * group_frobenius_norm(F, T)).epsilon(1e-10));

    // Column permutations and per-vector phase rotations leave the objective unchanged
    ObjectiveSamples swapped = s;
    for (auto &C : swapped.C)
        C.col(0).swap(C.col(1));
    CHECK(mc_objective(dft_blocks(c.D, c.J), swapped, T) == Approx(mc_objective(dft_blocks(c.D, c.J), s, T)).epsilon(1e-12));
    std::vector<CMat> rotated = dft_blocks(c.D, c.J);
    rotated[3].row(5) *= std::polar(1.0, 0.7);
    CHECK(mc_objective(rotated, s, T) == Approx(mc_objective(dft_blocks(c.D, c.J), s, T)).epsilon(1e-12));

    std::vector<CMat> bad = dft_blocks(c.D, c.J);
    bad[0] *= 1.1;
    CHECK_THROWS(mc_objective(bad, s, T));
}

TEST_CASE("Hermitian exponential", "[basisopt]")
{
    CHECK(hermitian_unitary_exp(CMat::Zero(3, 3)).isIdentity(1e-15));
    CMat A = CMat::Zero(2, 2);
    A(0, 0) = pi;
    const CMat E = hermitian_unitary_exp(A);
    CHECK(std::abs(E(0, 0) + 1.0) < 1e-12);
    CHECK(std::abs(E(1, 1) - 1.0) < 1e-12);
    CHECK(std::abs(E(0, 1)) < 1e-12);

    Rng rng(3);
    for (double scale : {1e-1, 1e-2, 1e-3})
    {
        const CMat X = complex_normal_matrix(rng, 4, 4);
        const CMat H = scale * (X + X.adjoint()) / 2.0;
        const CMat U = hermitian_unitary_exp(H);
        CHECK((U.adjoint() * U - CMat::Identity(4, 4)).norm() < 1e-12);
        CHECK((U - series_exp(cplx(0, 1) * H)).norm() < 1e-12);
        // First-order remainder is quadratic: ||e^{jA} - (I + jA) + A^2/2|| = O(||A||^3)
        const CMat lin = CMat::Identity(4, 4) + cplx(0, 1) * H;
        CHECK((U - lin).norm() <= 0.5 * (H * H).norm() + std::pow(H.norm(), 3));
    }
    CHECK_THROWS_AS(hermitian_unitary_exp(complex_normal_matrix(rng, 3, 3)), DomainError);
}

TEST_CASE("convex update step", "[basisopt]")
{
    Rng rng(4);
    const int D = 2, J = 2;
    const BlockTiling T = make_block_tiling(D, J, 1, 1);
    ObjectiveSamples s;
    s.tau = RMat::Zero(1, 2);
    s.nu = RMat::Zero(1, 2);
    s.C = {complex_normal_matrix(rng, D * J, 2)};
    const std::vector<CMat> V = {random_unitary(rng, J)};
    const CMat Cm = s.C[0].topRows(J);

    SECTION("matches a grid search over the box")
    {
        const double eps = 0.3;
        ConvexStepInfo info;
        const std::vector<CMat> A = convex_update_step(V, 0, eps, s, T, &info);
        REQUIRE(A.size() == 1);
        CHECK((A[0] - A[0].adjoint()).norm() == 0.0);
        CHECK(A[0].cwiseAbs().maxCoeff() < eps);
        const double got = linearized(A[0], V[0], Cm, T, 0);
        CHECK(got <= linearized(CMat::Zero(J, J), V[0], Cm, T, 0) + 1e-12);

        // Free parameters: two real diagonal entries and one complex off-diagonal entry
        double best = 1e300;
        const int n = 24, na = 24;
        for (int a = 0; a <= n; ++a)
            for (int d = 0; d <= n; ++d)
                for (int r = 0; r <= n; ++r)
                    for (int ph = 0; ph < (r == 0 ? 1 : na); ++ph)
                    {
                        CMat X(2, 2);
                        const double scale = eps * (1 - 1e-9);
                        const cplx b = std::polar(scale * r / n, 2 * pi * ph / na);
                        X << scale * (2.0 * a / n - 1.0), b, std::conj(b), scale * (2.0 * d / n - 1.0);
                        best = std::min(best, linearized(X, V[0], Cm, T, 0));
                    }
        CHECK(got <= best + 1e-3);
        CHECK(got >= best - 1e-3 * std::max(1.0, best));
    }

    SECTION("vanishing box")
    {
        const std::vector<CMat> A = convex_update_step(V, 0, 1e-12, s, T);
        CHECK(A[0].cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("block optimization", "[basisopt]")
{
    const SystemConfig c = desk8();
    const PulsePair p = cp_ofdm_pulses(c.K, c.N);
    const LeakageFilter filter(FilterSpec{}, c.Ts);
    const KernelContext ctx(p, c, filter);
    const BlockTiling T = make_block_tiling(c.D, c.J, 1, 4);
    const DelayDopplerPrior prior = DelayDopplerPrior::from_system(c);
    const ObjectiveSamples s = sample_prior(prior, 64, 11, &ctx);

    OptimizeControls none;
    none.max_iters = 0;
    const OptimizeResult unchanged = optimize_blocks(s, T, c, none);
    CHECK(unchanged.basis.is_dft());
    CHECK(unchanged.final_objective == unchanged.initial_objective);

    OptimizeControls ctl;
    ctl.max_iters = 20;
    const OptimizeResult res = optimize_blocks(s, T, c, ctl);
    CHECK(res.final_objective < res.initial_objective);
    CHECK(res.initial_objective == Approx(mc_objective(dft_blocks(c.D, c.J), s, T)).epsilon(1e-10));
    REQUIRE_FALSE(res.basis.is_dft());
    CHECK(res.final_objective == Approx(mc_objective(res.basis.blocks(), s, T)).epsilon(1e-10));
    for (const CMat &V : res.basis.blocks())
        CHECK(is_unitary(V, 1e-10));
    for (const auto &strip : res.strips)
        for (std::size_t k = 1; k < strip.objective.size(); ++k)
            CHECK(strip.objective[k] <= strip.objective[k - 1]);

    // Fresh in-prior samples see the improvement too
    const ObjectiveSamples fresh = sample_prior(prior, 64, 12, &ctx);
    CHECK(mc_objective(res.basis.blocks(), fresh, T) < mc_objective(dft_blocks(c.D, c.J), fresh, T));
}

TEST_CASE("basis files", "[basisopt]")
{
    const auto dir = std::filesystem::temp_directory_path() / "mgcs_basis_test";
    std::filesystem::create_directories(dir);
    Rng rng(9);
    const SystemConfig c = desk8();
    const std::uint64_t fp = basis_fingerprint(c, "cp-ofdm", 42);

    BasisFile f{BasisSpec::from_blocks(random_blocks(rng, c.D, c.J), "r"), 1, fp};
    save_basis(f, dir / "b.mgcb");
    const BasisFile back = load_basis(dir / "b.mgcb", fp);
    REQUIRE(back.basis.D() == c.D);
    for (int m = 0; m < c.D; ++m)
        CHECK(back.basis.blocks()[std::size_t(m)] == f.basis.blocks()[std::size_t(m)]);
    CHECK(back.fingerprint == fp);
    CHECK(back.dm == 1);

    SystemConfig other = c;
    other.J = 16;
    CHECK(basis_fingerprint(other, "cp-ofdm", 42) != fp);
    CHECK(basis_fingerprint(c, "cp-ofdm", 43) != fp);
    CHECK_THROWS_AS(load_basis(dir / "b.mgcb", basis_fingerprint(other, "cp-ofdm", 42)), FingerprintMismatch);

    save_basis(BasisFile{BasisSpec::dft(c.D, c.J), 1, fp}, dir / "dft.mgcb");
    CHECK(std::filesystem::file_size(dir / "dft.mgcb") < 64);
    CHECK(load_basis(dir / "dft.mgcb", fp).basis.is_dft());

    {
        std::ofstream bad(dir / "bad.mgcb", std::ios::binary);
        bad << "NOPE0000";
    }
    CHECK_THROWS_AS(load_basis(dir / "bad.mgcb"), FormatError);
    std::filesystem::remove_all(dir);
}
