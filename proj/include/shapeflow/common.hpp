// Copyright 2026 The shapeflow authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace shapeflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;

enum class ErrorCode {
    ZeroMass,
    EmptySupport,
    ResolutionTooCoarse,
    ResolutionMismatch,
    MassMismatch,
    SizeGuardExceeded,
    NonConvergence,
    DegenerateNeighborhood,
    TangencyViolated,
    BlowupGuard,
    ChainBroken,
    StallError,
    QuadratureMismatch,
    InvalidInput,
};

/// All recoverable failures are thrown as Error; code() maps onto the CLI
/// exit-code contract (4 = bad input, 3 = numerical non-convergence).
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

    const char* code_name() const;
    int exit_code() const;

  private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

/// Deterministic RNG. Distributions are hand-rolled on top of mt19937_64 so
/// that a fixed seed gives identical streams regardless of libstdc++ version.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via the polar method.
    double normal();

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Volume of the unit ball in R^d, d <= 3.
double unit_ball_volume(int dim);

inline double sqr(double x) { return x * x; }

}  // namespace shapeflow
