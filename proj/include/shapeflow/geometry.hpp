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

#include "shapeflow/common.hpp"

#include <vector>

namespace shapeflow {

/// Values below this are treated as exact zero when deciding support.
inline constexpr double kSupportTol = 1e-12;

struct Ball {
    Vec center;
    double radius = 0.0;

    int dim() const { return static_cast<int>(center.size()); }
};

/// Axis lengths in the frame given by `rotation` (columns = principal axes).
struct Ellipsoid {
    Vec center;
    Vec semi_axes;
    Mat rotation;

    int dim() const { return static_cast<int>(center.size()); }
    /// Max |y - center| over the ellipsoid.
    double bounding_radius() const { return semi_axes.maxCoeff(); }
    bool contains(const Vec& x, double tol = 0.0) const;
};

/// Raster density on a uniform grid. Cell (i0,..,i_{d-1}) has center
/// origin + h*(i+1/2) and the flat index is row-major with axis 0 slowest.
struct GridDensity {
    Vec origin;
    double cell_size = 0.0;
    IVec dims;
    std::vector<double> values;

    GridDensity() = default;
    GridDensity(Vec origin_, double cell_size_, IVec dims_);

    int dim() const { return static_cast<int>(dims.size()); }
    std::size_t cell_count() const;
    double cell_volume() const;
    double mass() const;

    std::size_t flat_index(const IVec& idx) const;
    IVec multi_index(std::size_t flat) const;
    Vec cell_center(std::size_t flat) const;

    double& at(const IVec& idx) { return values[flat_index(idx)]; }
    double at(const IVec& idx) const { return values[flat_index(idx)]; }

    /// Cell containing x, or -1 if x is outside the grid box.
    std::int64_t locate(const Vec& x) const;

    /// Flat indices of cells with value > kSupportTol.
    std::vector<std::size_t> support_cells() const;
};

struct DiscreteMeasure {
    Mat points;   // n x d, one point per row
    Vec weights;  // n, all positive

    int size() const { return static_cast<int>(points.rows()); }
    int dim() const { return static_cast<int>(points.cols()); }
    double mass() const { return weights.sum(); }

    void validate() const;
    DiscreteMeasure translated(const Vec& shift) const;
};

double volume(const Ball& ball);
double volume(const Ellipsoid& ellipsoid);
double volume(const GridDensity& density);

/// n equal-weight points drawn proportionally to the density. Deterministic
/// per seed.
DiscreteMeasure sample_uniform(const GridDensity& density, int n,
                               std::uint64_t seed);

struct QuantizeResult {
    GridDensity indicator;
    /// Conservative transport bound between input and output: every moved
    /// bit of mass stays within its rectangle, whose diameter is below this.
    double dinf_bound = 0.0;
};

/// Indicator built by shrinking each rectangle of a `cell_diam`-grid about
/// its center until it holds exactly the rectangle's share of the mass.
QuantizeResult rectangle_quantize(const GridDensity& rho, double cell_diam);

double diam(const Ball& ball);
double diam(const Ellipsoid& ellipsoid);
/// Over occupied cell centers, inflated by h*sqrt(d).
double diam(const GridDensity& density);
double diam(const DiscreteMeasure& measure);

double dist_sets(const GridDensity& a, const GridDensity& b);

/// Euclidean distance between two (closed) ellipsoids, 0 if they intersect.
/// Alternating projections; accurate to ~1e-12 of the length scale.
double ellipsoid_distance(const Ellipsoid& a, const Ellipsoid& b);

/// Projection of x onto the closed ellipsoid.
Vec project_to_ellipsoid(const Ellipsoid& e, const Vec& x);

}  // namespace shapeflow
