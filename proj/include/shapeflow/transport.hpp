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

#include "shapeflow/geometry.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace shapeflow {

struct TransportPlan {
    struct Entry {
        int i = 0;
        int j = 0;
        double mass = 0.0;
    };

    DiscreteMeasure source;
    DiscreteMeasure target;
    std::vector<Entry> couplings;
    double cost = 0.0;  // total quadratic cost

    // Filled by the entropic solver only.
    double marginal_error = 0.0;
    double duality_gap = 0.0;

    bool is_permutation() const;
    /// sigma[i] = matched target index; requires a permutation plan.
    std::vector<int> permutation() const;
    double max_marginal_error() const;
};

/// Exact optimal plan for quadratic cost. Assignment (shortest augmenting
/// path) when the inputs are equal-count equal-weight, transportation
/// simplex otherwise. Guard: n*m <= 2e7.
TransportPlan solve_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                          int cost_exponent = 2);

/// Exact plan for an arbitrary dense cost matrix (no size guard).
TransportPlan solve_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                         const Mat& cost);

struct SinkhornOptions {
    std::vector<double> epsilon_schedule;  // empty = automatic geometric
    double marginal_tol = 1e-7;
    int max_iterations = 20000;
};

TransportPlan solve_entropic(const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu,
                             const SinkhornOptions& options = {});

double wasserstein_distance(const DiscreteMeasure& mu,
                            const DiscreteMeasure& nu);

/// Bottleneck (L-infinity) transport distance: binary search over the
/// threshold, feasibility by matching/max-flow.
double linf_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Bottleneck value for an arbitrary cost matrix (used by TL^infinity).
double bottleneck_cost(const Vec& mu_weights, const Vec& nu_weights,
                       const Mat& cost);

/// Sampled Brenier map with local Jacobian data.
struct BrenierField {
    Mat samples;        // n x d source points
    Mat map_values;     // n x d, T(x_i)
    Vec source_weights; // n
    std::vector<Mat> jacobians;   // symmetric PSD after clamping
    std::vector<Mat> frames;      // eigenvector frames R_i (columns)
    Vec lambda_min, lambda_max;   // per-sample eigenvalue range
    Vec det_jacobian;             // diagnostic: near 1 for equal volumes
    Vec d3_surrogate;             // finite-difference |D^3 psi| estimate

    int size() const { return static_cast<int>(samples.rows()); }
    int dim() const { return static_cast<int>(samples.cols()); }

    Vec map_at(int i) const { return map_values.row(i).transpose(); }
    Vec sample_at(int i) const { return samples.row(i).transpose(); }
    Vec displacement(int i) const { return (map_values.row(i) - samples.row(i)).transpose(); }

    /// Translate both source and target coordinates by `shift`.
    BrenierField translated(const Vec& shift) const;

    /// Quadratic transport cost carried by the samples.
    double sampled_cost() const;

    /// Field with exact map values/Jacobians from a callable; for analytic
    /// maps in tests and figures.
    static BrenierField from_map(const DiscreteMeasure& mu,
                                 const std::function<Vec(const Vec&)>& map,
                                 const std::function<Mat(const Vec&)>& jacobian,
                                 double d3_norm = 0.0);
};

/// Map samples from the exact plan (barycentric projection when the plan is
/// not a permutation), Jacobians by weighted least-squares over k matched
/// neighbours, symmetrized and eigenvalue-clamped at 1e-6.
BrenierField estimate_brenier_field(const DiscreteMeasure& mu,
                                    const DiscreteMeasure& nu,
                                    int k_neighbors);

/// Composed-coupling stability costs (one per k): the optimal coupling
/// between plans (id x T) and (id x T_k) viewed as clouds in R^{2d}.
std::vector<double> plan_stability_experiment(
    const std::vector<DiscreteMeasure>& mu_seq,
    const std::vector<DiscreteMeasure>& nu_seq, const DiscreteMeasure& mu,
    const DiscreteMeasure& nu);

}  // namespace shapeflow
