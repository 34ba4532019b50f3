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

#include "mgcs/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "mgcs/random.hpp"

namespace mgcs
{
    namespace
    {
        cplx expj(double phase) { return std::polar(1.0, phase); }

        bool on_grid(const GridPosition &p, const SystemConfig &cfg)
        {
            return p.lambda >= 0 && p.lambda < cfg.J && p.kappa >= 0 && p.kappa < cfg.D;
        }

        // W[lambda, m] = (1/sqrt(D)) sum_kappa h[lambda, kappa] e^{+j 2 pi kappa m / D}
        CMat kappa_analysis(const CVec &h, int D, int J)
        {
            CMat E(D, D);
            for (int k = 0; k < D; ++k)
                for (int m = 0; m < D; ++m)
                    E(k, m) = expj(2.0 * pi * double((long(k) * m) % D) / D) / std::sqrt(double(D));
            const Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> H(h.data(), J, D);
            return H * E;
        }

        // h[lambda, kappa] = (1/sqrt(D)) sum_m W[lambda, m] e^{-j 2 pi kappa m / D}
        CVec kappa_synthesis(const CMat &W, int D, int J)
        {
            CMat E(D, D);
            for (int m = 0; m < D; ++m)
                for (int k = 0; k < D; ++k)
                    E(m, k) = expj(-2.0 * pi * double((long(k) * m) % D) / D) / std::sqrt(double(D));
            const CMat H = W * E; // J x D
            CVec h(Eigen::Index(J) * D);
            for (int l = 0; l < J; ++l)
                for (int k = 0; k < D; ++k)
                    h[Eigen::Index(l) * D + k] = H(l, k);
            return h;
        }

        // U^H h for one channel without forming U
        CVec basis_analysis(const CVec &h, const BasisSpec &basis)
        {
            const int D = basis.D(), J = basis.J();
            const CMat W = kappa_analysis(h, D, J);
            CVec g(Eigen::Index(J) * D);
            for (int m = 0; m < D; ++m)
                g.segment(Eigen::Index(m) * J, J) = basis.blocks()[std::size_t(m)] * W.col(m);
            return g;
        }

        // U g for one channel
        CVec basis_synthesis(const CVec &g, const BasisSpec &basis)
        {
            const int D = basis.D(), J = basis.J();
            CMat W(J, D);
            for (int m = 0; m < D; ++m)
                W.col(m) = basis.blocks()[std::size_t(m)].adjoint() * g.segment(Eigen::Index(m) * J, J);
            return kappa_synthesis(W, D, J);
        }

        std::size_t default_cosamp_sparsity(const Partition &P)
        {
            return std::max<std::size_t>(1, P.group_count() / 4);
        }

        RecoveryResult solve_single(Algorithm alg, const CMat &phi, const CVec &y, const Partition &P,
                                    const SolverConfig &solver, const StopRule &stop, double eps)
        {
            switch (alg)
            {
            case Algorithm::g_omp:
            case Algorithm::g_dcs_somp:
                return g_omp(phi, y, P, stop);
            case Algorithm::g_cosamp:
                return g_cosamp(phi, y, P, solver.cosamp_sparsity ? solver.cosamp_sparsity : default_cosamp_sparsity(P),
                                solver.cosamp_iters);
            case Algorithm::g_bpdn:
                return g_bpdn(phi, y, P, eps, solver.bpdn);
            }
            throw ConfigError("unknown algorithm");
        }

        RecoveryResult solve_joint(const MeasurementEnsemble &ens, const Partition &P, const SolverConfig &solver)
        {
            const std::size_t n_ch = ens.channels();
            if (solver.algorithm == Algorithm::g_dcs_somp)
                return g_dcs_somp(ens, P, solver.stop);

            const StackedSystem st = mgcs_stack(ens, P);
            // The sparsity of the stacked problem counts stacked groups, which match the per-channel groups
            SolverConfig s = solver;
            if (s.algorithm == Algorithm::g_cosamp && s.cosamp_sparsity == 0)
                s.cosamp_sparsity = default_cosamp_sparsity(P);
            RecoveryResult res = solve_single(s.algorithm, st.phi, st.y, st.partition, s, s.stop, ens.noise_radius);
            res.estimates = unstack(res.estimates.front(), n_ch);
            res.residual_norms.clear();
            for (std::size_t t = 0; t < n_ch; ++t)
                res.residual_norms.push_back((ens.y[t] - ens.matrix_of(t) * res.estimates[t]).norm());
            return res;
        }

        RecoveryResult solve_per_channel(const MeasurementEnsemble &ens, const Partition &P, const SolverConfig &solver)
        {
            const std::size_t n_ch = ens.channels();
            const double share = 1.0 / std::sqrt(double(n_ch));
            StopRule stop = solver.stop;
            stop.residual_tol *= share;

            RecoveryResult out;
            out.residual_history.assign(1, 0.0);
            std::set<std::size_t> groups;
            for (std::size_t t = 0; t < n_ch; ++t)
            {
                RecoveryResult r = solve_single(solver.algorithm, ens.matrix_of(t), ens.y[t], P, solver, stop,
                                                ens.noise_radius * share);
                out.estimates.push_back(r.estimates.front());
                out.residual_norms.push_back(r.residual_norms.front());
                groups.insert(r.selected_groups.begin(), r.selected_groups.end());
                out.iterations = std::max(out.iterations, r.iterations);
                out.rank_deficient = out.rank_deficient || r.rank_deficient;
                out.converged = out.converged && r.converged;
            }
            out.selected_groups.assign(groups.begin(), groups.end());
            double total = 0.0;
            for (double r : out.residual_norms)
                total += r * r;
            out.residual_history.back() = std::sqrt(total);
            return out;
        }

        RecoveryResult run_solver(const MeasurementEnsemble &ens, const SolverConfig &solver, const SystemConfig &cfg)
        {
            const Partition P = make_block_tiling(cfg.D, cfg.J, solver.block_dm, solver.block_di).partition();
            if (solver.mode == SolverMode::per_channel)
                return solve_per_channel(ens, P, solver);
            return solve_joint(ens, P, solver);
        }

        // Steps 4 to 6 once G is known
        void finish_estimate(ChannelEstimate &est, const BasisSpec &basis, const SystemConfig &cfg)
        {
            const int JD = cfg.JD();
            if (basis.is_dft())
            {
                est.F = est.G;
                est.F.values /= std::sqrt(double(JD));
            }
            else
            {
                CMat h_sub(JD, est.G.channels());
                for (int t = 0; t < est.G.channels(); ++t)
                    h_sub.col(t) = basis_synthesis(est.G.values.col(t), basis);
                est.F = subsampled_to_delay_doppler(h_sub, cfg.D, cfg.J);
            }
            est.F.domain = CoefficientDomain::delay_doppler;
            est.F.basis_id = "dft";
            est.H = expand_delay_doppler(est.F, cfg);
        }

        void check_basis(const BasisSpec &basis, const SystemConfig &cfg)
        {
            if (basis.D() != cfg.D || basis.J() != cfg.J)
                throw ConfigError("basis dimensions do not match the configuration");
        }
    }

    void PilotScheme::validate(const SystemConfig &cfg) const
    {
        if (positions.empty())
            throw ConfigError("pilot scheme without position sets");
        const std::size_t q = positions.front().size();
        std::set<std::pair<int, int>> seen;
        for (const auto &set : positions)
        {
            if (set.size() != q)
                throw ConfigError("pilot position sets differ in size");
            for (const auto &p : set)
            {
                if (!on_grid(p, cfg))
                    throw DomainError("pilot position off the subsampled grid");
                if (!seen.insert({p.lambda, p.kappa}).second)
                    throw ConfigError("pilot position sets are not disjoint");
            }
        }
        const int nt = n_tx();
        if (pilot_matrix.rows() != nt || pilot_matrix.cols() != nt)
            throw ConfigError("pilot matrix must be N_T x N_T");
        Eigen::JacobiSVD<CMat> svd(pilot_matrix);
        const RVec sv = svd.singularValues();
        if (!(sv.minCoeff() > 0.0) || !std::isfinite(sv.maxCoeff() / sv.minCoeff()) || sv.maxCoeff() / sv.minCoeff() > 1e12)
            throw ConfigError("pilot matrix is singular");
    }

    CMat default_pilot_matrix(int n_tx)
    {
        if (n_tx < 1)
            throw ConfigError("need at least one transmit antenna");
        const cplx value = std::sqrt(double(n_tx)) * expj(pi / 4.0);
        return CMat::Identity(n_tx, n_tx) * value;
    }

    PilotScheme draw_pilots(const SystemConfig &cfg, int Q, std::uint64_t seed, const CMat &pilot_matrix)
    {
        const int JD = cfg.JD();
        if (Q < 1)
            throw ConfigError("Q must be positive");
        if (long(cfg.n_tx) * Q > JD)
            throw ConfigError("N_T * Q pilot positions exceed the subsampled grid");

        std::vector<int> cells(static_cast<std::size_t>(JD));
        std::iota(cells.begin(), cells.end(), 0);
        Rng rng(seed);
        // Partial Fisher-Yates: the first N_T * Q cells are a uniform draw without replacement
        for (int k = 0; k < cfg.n_tx * Q; ++k)
        {
            std::uniform_int_distribution<int> pick(k, JD - 1);
            std::swap(cells[std::size_t(k)], cells[std::size_t(pick(rng))]);
        }

        PilotScheme scheme;
        scheme.positions.resize(std::size_t(cfg.n_tx));
        for (int s = 0; s < cfg.n_tx; ++s)
            for (int q = 0; q < Q; ++q)
            {
                const int c = cells[std::size_t(s * Q + q)];
                scheme.positions[std::size_t(s)].push_back({c / cfg.D, c % cfg.D});
            }
        scheme.pilot_matrix = pilot_matrix;
        scheme.siso_values.assign(std::size_t(Q), pilot_matrix(0, 0));
        scheme.validate(cfg);
        return scheme;
    }

    BasisSpec BasisSpec::dft(int D, int J)
    {
        BasisSpec b;
        b.dft_ = true;
        b.blocks_ = dft_blocks(D, J);
        b.id_ = "dft";
        return b;
    }

    BasisSpec BasisSpec::from_blocks(std::vector<CMat> blocks, std::string id)
    {
        if (blocks.empty())
            throw ConfigError("basis needs at least one block");
        const Eigen::Index J = blocks.front().rows();
        for (const CMat &V : blocks)
        {
            if (V.rows() != J || V.cols() != J)
                throw ConfigError("basis blocks must all be J x J");
            if (!is_unitary(V))
                throw ConfigError("basis block is not unitary");
        }
        BasisSpec b;
        b.blocks_ = std::move(blocks);
        b.id_ = std::move(id);
        return b;
    }

    std::vector<CMat> dft_blocks(int D, int J)
    {
        CMat V(J, J);
        for (int i = -J / 2; i < J / 2; ++i)
            for (int l = 0; l < J; ++l)
                V(i + J / 2, l) = expj(-2.0 * pi * double(((long(l) * i) % J + J) % J) / J) / std::sqrt(double(J));
        return std::vector<CMat>(std::size_t(D), V);
    }

    bool is_unitary(const CMat &A, double tol)
    {
        if (A.rows() != A.cols())
            return false;
        return (A.adjoint() * A - CMat::Identity(A.rows(), A.cols())).cwiseAbs().maxCoeff() <= tol;
    }

    CMat assemble_2d_basis(const BasisSpec &basis)
    {
        const int D = basis.D(), J = basis.J();
        const Eigen::Index JD = Eigen::Index(J) * D;
        CMat U(JD, JD);
        for (int m = 0; m < D; ++m)
        {
            const CMat &V = basis.blocks()[std::size_t(m)];
            for (int k = 0; k < D; ++k)
            {
                const cplx e = expj(-2.0 * pi * double((long(k) * m) % D) / D) / std::sqrt(double(D));
                for (int l = 0; l < J; ++l)
                    for (int c = 0; c < J; ++c)
                        U(Eigen::Index(l) * D + k, Eigen::Index(m) * J + c) = std::conj(V(c, l)) * e;
            }
        }
        return U;
    }

    std::vector<CMat> build_phi(const PilotScheme &scheme, const CMat &U, const SystemConfig &cfg)
    {
        const int JD = cfg.JD();
        if (U.rows() != JD || U.cols() != JD)
            throw ConfigError("basis matrix must be JD x JD");
        const int Q = scheme.Q();
        const double scale = std::sqrt(double(JD) / Q);
        std::vector<CMat> phi;
        for (const auto &set : scheme.positions)
        {
            CMat A(Q, JD);
            for (int q = 0; q < Q; ++q)
            {
                const GridPosition &p = set[std::size_t(q)];
                if (!on_grid(p, cfg))
                    throw DomainError("pilot position off the subsampled grid");
                A.row(q) = scale * U.row(Eigen::Index(p.lambda) * cfg.D + p.kappa);
            }
            phi.push_back(std::move(A));
        }
        return phi;
    }

    std::vector<CMat> build_phi(const PilotScheme &scheme, const BasisSpec &basis, const SystemConfig &cfg)
    {
        check_basis(basis, cfg);
        const int D = cfg.D, J = cfg.J, JD = cfg.JD();
        const int Q = scheme.Q();
        const double scale = std::sqrt(double(JD) / Q) / std::sqrt(double(D));
        std::vector<CMat> phi;
        for (const auto &set : scheme.positions)
        {
            CMat A(Q, JD);
            for (int q = 0; q < Q; ++q)
            {
                const GridPosition &p = set[std::size_t(q)];
                if (!on_grid(p, cfg))
                    throw DomainError("pilot position off the subsampled grid");
                for (int m = 0; m < D; ++m)
                {
                    const cplx e = scale * expj(-2.0 * pi * double((long(p.kappa) * m) % D) / D);
                    A.block(q, Eigen::Index(m) * J, 1, J) =
                        e * basis.blocks()[std::size_t(m)].col(p.lambda).conjugate().transpose();
                }
            }
            phi.push_back(std::move(A));
        }
        return phi;
    }

    MeasurementEnsemble collect_measurements(const AntennaGrid &y, const PilotScheme &scheme, double noise_radius,
                                             const SystemConfig &cfg, std::vector<CMat> phi)
    {
        const int n_rx = int(y.size());
        const int n_tx = scheme.n_tx();
        const int Q = scheme.Q();
        std::vector<CVec> ys;
        for (int r = 0; r < n_rx; ++r)
            for (int s = 0; s < n_tx; ++s)
            {
                CVec v(Q);
                for (int q = 0; q < Q; ++q)
                {
                    const GridPosition &p = scheme.positions[std::size_t(s)][std::size_t(q)];
                    const long l = long(p.lambda) * cfg.delta_L(), k = long(p.kappa) * cfg.delta_K();
                    if (!on_grid(p, cfg) || l >= y[std::size_t(r)].rows() || k >= y[std::size_t(r)].cols())
                        throw DomainError("pilot position missing from the demodulated grid");
                    v[q] = y[std::size_t(r)](l, k);
                }
                ys.push_back(std::move(v));
            }
        MeasurementEnsemble ens = MeasurementEnsemble::mimo(std::move(phi), std::move(ys), std::size_t(n_rx), noise_radius);
        ens.validate();
        return ens;
    }

    ChannelEstimate estimate_mimo(const MeasurementEnsemble &ens, const PilotScheme &scheme, const BasisSpec &basis,
                                  const SolverConfig &solver, const SystemConfig &cfg)
    {
        check_basis(basis, cfg);
        scheme.validate(cfg);
        const int n_tx = scheme.n_tx();
        const int n_ch = int(ens.channels());
        if (n_ch % n_tx != 0)
            throw ConfigError("channel count is not a multiple of N_T");

        ChannelEstimate est;
        est.diagnostics = run_solver(ens, solver, cfg);

        // Step 2: undo the measurement scaling
        const double up = std::sqrt(double(cfg.JD()) / scheme.Q());
        CMat Gt(cfg.JD(), n_ch);
        for (int t = 0; t < n_ch; ++t)
            Gt.col(t) = up * est.diagnostics.estimates[std::size_t(t)];

        // Step 3: G_r = Gt_r P^{-1} for every receive antenna, with one factorization of P^T
        const Eigen::PartialPivLU<CMat> lu(scheme.pilot_matrix.transpose());
        est.G = CoefficientTensor::zeros(cfg.D, cfg.J, n_ch, CoefficientDomain::basis);
        est.G.basis_id = basis.id();
        for (int r = 0; r < n_ch / n_tx; ++r)
        {
            const CMat block = Gt.middleCols(Eigen::Index(r) * n_tx, n_tx);
            est.G.values.middleCols(Eigen::Index(r) * n_tx, n_tx) = lu.solve(block.transpose()).transpose();
        }

        finish_estimate(est, basis, cfg);
        return est;
    }

    ChannelEstimate estimate_siso(const std::vector<cplx> &pilot_values, const CMat &y, const PilotScheme &scheme,
                                  const BasisSpec &basis, const SolverConfig &solver, const SystemConfig &cfg,
                                  double noise_radius)
    {
        check_basis(basis, cfg);
        if (scheme.n_tx() != 1)
            throw ConfigError("the SISO estimator takes a single pilot set");
        const int Q = scheme.Q();
        if (int(pilot_values.size()) != Q)
            throw ConfigError("one pilot value per position is required");
        for (const cplx &p : pilot_values)
            if (p == cplx(0.0))
                throw DomainError("zero pilot value");

        PilotScheme unit = scheme;
        unit.pilot_matrix = CMat::Identity(1, 1);
        MeasurementEnsemble ens = collect_measurements({y}, unit, noise_radius, cfg, build_phi(unit, basis, cfg));
        for (int q = 0; q < Q; ++q)
            ens.y[0][q] /= pilot_values[std::size_t(q)];
        return estimate_mimo(ens, unit, basis, solver, cfg);
    }

    CMat subsample_grid(const std::vector<CMat> &H, const SystemConfig &cfg)
    {
        const int D = cfg.D, J = cfg.J;
        CMat h(cfg.JD(), Eigen::Index(H.size()));
        for (std::size_t t = 0; t < H.size(); ++t)
        {
            if (H[t].rows() != cfg.L || H[t].cols() != cfg.K)
                throw ConfigError("grid must be L x K");
            for (int l = 0; l < J; ++l)
                for (int k = 0; k < D; ++k)
                    h(Eigen::Index(l) * D + k, Eigen::Index(t)) = H[t](l * cfg.delta_L(), k * cfg.delta_K());
        }
        return h;
    }

    CoefficientTensor subsampled_to_delay_doppler(const CMat &h_sub, int D, int J)
    {
        if (h_sub.rows() != Eigen::Index(J) * D)
            throw ConfigError("subsampled grid must have JD rows");
        // F = (1/JD) sum_{lambda,kappa} H e^{+j 2 pi kappa m / D} e^{-j 2 pi lambda i / J}
        CMat A(J, J), B(D, D);
        for (int i = -J / 2; i < J / 2; ++i)
            for (int l = 0; l < J; ++l)
                A(i + J / 2, l) = expj(-2.0 * pi * double(((long(l) * i) % J + J) % J) / J);
        for (int k = 0; k < D; ++k)
            for (int m = 0; m < D; ++m)
                B(k, m) = expj(2.0 * pi * double((long(k) * m) % D) / D);

        CoefficientTensor F = CoefficientTensor::zeros(D, J, int(h_sub.cols()), CoefficientDomain::delay_doppler);
        for (Eigen::Index t = 0; t < h_sub.cols(); ++t)
        {
            const CVec col = h_sub.col(t);
            const Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> H(col.data(), J, D);
            const CMat Fij = A * H * B / double(J * D); // (i, m)
            for (int m = 0; m < D; ++m)
                F.values.col(t).segment(Eigen::Index(m) * J, J) = Fij.col(m);
        }
        return F;
    }

    CMat delay_doppler_to_subsampled(const CoefficientTensor &F)
    {
        const int D = F.D, J = F.J;
        CMat A(J, J), B(D, D);
        for (int l = 0; l < J; ++l)
            for (int i = -J / 2; i < J / 2; ++i)
                A(l, i + J / 2) = expj(2.0 * pi * double(((long(l) * i) % J + J) % J) / J);
        for (int m = 0; m < D; ++m)
            for (int k = 0; k < D; ++k)
                B(m, k) = expj(-2.0 * pi * double((long(k) * m) % D) / D);

        CMat h(Eigen::Index(J) * D, F.channels());
        for (int t = 0; t < F.channels(); ++t)
        {
            CMat Fij(J, D);
            for (int m = 0; m < D; ++m)
                Fij.col(m) = F.values.col(t).segment(Eigen::Index(m) * J, J);
            const CMat H = A * Fij * B; // (lambda, kappa)
            for (int l = 0; l < J; ++l)
                h.col(t).segment(Eigen::Index(l) * D, D) = H.row(l).transpose();
        }
        return h;
    }

    std::vector<CMat> expand_delay_doppler(const CoefficientTensor &F, const SystemConfig &cfg)
    {
        const int D = F.D, J = F.J, L = cfg.L, K = cfg.K;
        if (D > K || J > L)
            throw ConfigError("coefficient rectangle exceeds the time-frequency grid");
        CMat E1(J, L), E2(D, K);
        for (int i = -J / 2; i < J / 2; ++i)
            for (int l = 0; l < L; ++l)
                E1(i + J / 2, l) = expj(2.0 * pi * double(((long(l) * i) % L + L) % L) / L);
        for (int m = 0; m < D; ++m)
            for (int k = 0; k < K; ++k)
                E2(m, k) = expj(-2.0 * pi * double((long(k) * m) % K) / K);

        std::vector<CMat> H;
        for (int t = 0; t < F.channels(); ++t)
        {
            CMat Fmi(D, J);
            for (int m = 0; m < D; ++m)
                Fmi.row(m) = F.values.col(t).segment(Eigen::Index(m) * J, J).transpose();
            const CMat T = Fmi * E1; // D x L
            H.push_back(T.transpose() * E2);
        }
        return H;
    }

    CoefficientTensor project_onto_basis(const std::vector<CMat> &H, const BasisSpec &basis, const SystemConfig &cfg)
    {
        check_basis(basis, cfg);
        const CMat h = subsample_grid(H, cfg);
        CoefficientTensor G = CoefficientTensor::zeros(cfg.D, cfg.J, int(H.size()), CoefficientDomain::basis);
        G.basis_id = basis.id();
        for (Eigen::Index t = 0; t < h.cols(); ++t)
            G.values.col(t) = basis_analysis(h.col(t), basis);
        return G;
    }

    double rmse(const std::vector<CMat> &estimate, const std::vector<CMat> &truth)
    {
        if (estimate.size() != truth.size())
            throw ConfigError("channel counts differ");
        double acc = 0.0;
        for (std::size_t t = 0; t < truth.size(); ++t)
        {
            if (estimate[t].rows() != truth[t].rows() || estimate[t].cols() != truth[t].cols())
                throw ConfigError("grid shapes differ");
            acc += (estimate[t] - truth[t]).squaredNorm();
        }
        return std::sqrt(acc);
    }

    double normalized_mse(const std::vector<CMat> &estimate, const std::vector<CMat> &truth)
    {
        const double e = rmse(estimate, truth);
        double energy = 0.0;
        for (const CMat &H : truth)
            energy += H.squaredNorm();
        if (energy == 0.0)
            throw DomainError("normalized error of a zero channel");
        return e * e / energy;
    }

    double leakage_constant(const CoefficientTensor &G, const BlockTiling &T, std::size_t S)
    {
        if (G.D != T.D || G.J != T.J)
            throw ConfigError("tiling does not match the tensor");
        RVec energy = RVec::Zero(T.block_count());
        for (int b = 0; b < T.block_count(); ++b)
            for (const auto &idx : T.blocks[std::size_t(b)])
                energy[b] += G.values.row(G.row(idx.m, idx.i)).squaredNorm();
        const auto keep = largest_groups(energy, std::min<std::size_t>(S, std::size_t(T.block_count())));
        std::vector<bool> kept(static_cast<std::size_t>(T.block_count()), false);
        for (std::size_t b : keep)
            kept[b] = true;
        double c = 0.0;
        for (int b = 0; b < T.block_count(); ++b)
            if (!kept[std::size_t(b)])
                c += std::sqrt(energy[b]);
        return c;
    }

    BoundResult theorem_bound(const TheoremInputs &in, const SystemConfig &cfg)
    {
        if (in.S < 1 || in.Q < 1)
            throw ConfigError("S and Q must be positive");
        const Eigen::JacobiSVD<CMat> svd(in.pilot_matrix);
        const RVec sv = svd.singularValues();
        const double p_norm = sv.maxCoeff();
        const double p_inv_norm = 1.0 / sv.minCoeff();
        const double c_p = p_norm * p_inv_norm;
        const double kl = double(cfg.K) * cfg.L;
        const double rect = std::sqrt(kl / cfg.JD());
        const double meas = std::sqrt(kl / in.Q);
        const double d = in.delta;

        BoundResult out;
        if (in.variant == BoundVariant::g_bpdn)
        {
            out.applicable = d < std::sqrt(2.0) - 1.0;
            const double den = 1.0 - (1.0 + std::sqrt(2.0)) * d;
            const double c0 = 2.0 * (1.0 - d) / den;
            const double c1 = 4.0 * std::sqrt(1.0 + d) / den;
            out.value = den > 0.0 ? c0 * rect * c_p * in.leakage / std::sqrt(double(in.S)) + c1 * meas * p_inv_norm * in.eps
                                  : std::numeric_limits<double>::infinity();
        }
        else
        {
            out.applicable = d <= 0.1;
            const double c2 = std::ldexp(1.0, -int(in.n_iters)) * c_p * std::sqrt(kl / cfg.JD() * in.g_energy);
            out.value = 20.0 * rect * c_p * (1.0 + 1.0 / std::sqrt(double(in.S))) * in.leakage +
                        20.0 * meas * p_inv_norm * in.eps + c2;
        }
        return out;
    }
}
