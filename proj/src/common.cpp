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

#include "shapeflow/common.hpp"

#include <cmath>

namespace shapeflow {

const char* Error::code_name() const {
    switch (code_) {
        case ErrorCode::ZeroMass: return "ZeroMass";
        case ErrorCode::EmptySupport: return "EmptySupport";
        case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
        case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
        case ErrorCode::MassMismatch: return "MassMismatch";
        case ErrorCode::SizeGuardExceeded: return "SizeGuardExceeded";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::DegenerateNeighborhood: return "DegenerateNeighborhood";
        case ErrorCode::TangencyViolated: return "TangencyViolated";
        case ErrorCode::BlowupGuard: return "BlowupGuard";
        case ErrorCode::ChainBroken: return "ChainBroken";
        case ErrorCode::StallError: return "StallError";
        case ErrorCode::QuadratureMismatch: return "QuadratureMismatch";
        case ErrorCode::InvalidInput: return "InvalidInput";
    }
    return "Unknown";
}

int Error::exit_code() const {
    switch (code_) {
        case ErrorCode::NonConvergence:
        case ErrorCode::TangencyViolated:
        case ErrorCode::BlowupGuard:
        case ErrorCode::ChainBroken:
        case ErrorCode::StallError:
            return 3;
        default:
            return 4;
    }
}

void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t u;
    do {
        u = engine_();
    } while (u >= limit);
    return lo + static_cast<std::int64_t>(u % span);
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    have_spare_ = true;
    return u * scale;
}

double unit_ball_volume(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return M_PI;
        case 3: return 4.0 * M_PI / 3.0;
        default:
            fail(ErrorCode::InvalidInput,
                 "unit_ball_volume: dimension must be 1, 2 or 3");
    }
}

}  // namespace shapeflow
