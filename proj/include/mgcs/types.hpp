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

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mgcs
{
    using cplx = std::complex<double>;
    using CVec = Eigen::VectorXcd;
    using CMat = Eigen::MatrixXcd;
    using RVec = Eigen::VectorXd;
    using RMat = Eigen::MatrixXd;
    using Vec3 = Eigen::Vector3d;

    inline constexpr double pi = std::numbers::pi;
    inline constexpr double speed_of_light = 299792458.0;
    inline constexpr cplx I1{0.0, 1.0};

    // Raised for inconsistent sizes, divisibility violations and other invalid configurations
    class ConfigError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // Raised when an argument lies outside the domain of an operation
    class DomainError : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    // Raised when a brute-force computation would exceed its combinatorial budget
    class RefusalError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Raised for unreadable, corrupt or mismatching files
    class FormatError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class FingerprintMismatch : public FormatError
    {
    public:
        using FormatError::FormatError;
    };

    // Which coefficients a tensor holds: the 2D-DFT delay-Doppler coefficients F, or
    // the coefficients G with respect to an orthonormal 2D basis
    enum class CoefficientDomain
    {
        delay_doppler,
        basis
    };

    // Coefficients over the rectangle {0..D-1} x {-J/2..J/2-1} for every channel.
    // Rows follow the 2D->1D index map (m*J + i + J/2), columns are channels theta = r*N_T + s.
    struct CoefficientTensor
    {
        int D = 0;
        int J = 0;
        CMat values;
        CoefficientDomain domain = CoefficientDomain::delay_doppler;
        std::string basis_id = "dft";

        static CoefficientTensor zeros(int D, int J, int channels, CoefficientDomain domain)
        {
            CoefficientTensor t;
            t.D = D;
            t.J = J;
            t.values = CMat::Zero(Eigen::Index(D) * J, channels);
            t.domain = domain;
            return t;
        }

        int channels() const { return int(values.cols()); }
        Eigen::Index row(int m, int i) const { return Eigen::Index(m) * J + i + J / 2; }
        cplx &at(int m, int i, int theta) { return values(row(m, i), theta); }
        cplx at(int m, int i, int theta) const { return values(row(m, i), theta); }
    };
}
