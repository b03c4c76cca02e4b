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

#include "shapeflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shapeflow {

bool Ellipsoid::contains(const Vec& x, double tol) const {
    const Vec local = rotation.transpose() * (x - center);
    double s = 0.0;
    for (int j = 0; j < dim(); ++j) s += sqr(local[j] / semi_axes[j]);
    return s <= 1.0 + tol;
}

GridDensity::GridDensity(Vec origin_, double cell_size_, IVec dims_)
    : origin(std::move(origin_)), cell_size(cell_size_), dims(std::move(dims_)) {
    if (cell_size <= 0.0)
        fail(ErrorCode::InvalidInput, "GridDensity: cell_size must be positive");
    values.assign(cell_count(), 0.0);
}

std::size_t GridDensity::cell_count() const {
    std::size_t n = 1;
    for (int k = 0; k < dims.size(); ++k) n *= static_cast<std::size_t>(dims[k]);
    return n;
}

double GridDensity::cell_volume() const {
    return std::pow(cell_size, dim());
}

double GridDensity::mass() const {
    return cell_volume() * std::accumulate(values.begin(), values.end(), 0.0);
}

std::size_t GridDensity::flat_index(const IVec& idx) const {
    std::size_t flat = 0;
    for (int k = 0; k < dims.size(); ++k)
        flat = flat * static_cast<std::size_t>(dims[k]) +
               static_cast<std::size_t>(idx[k]);
    return flat;
}

IVec GridDensity::multi_index(std::size_t flat) const {
    IVec idx(dims.size());
    for (int k = dims.size() - 1; k >= 0; --k) {
        idx[k] = static_cast<int>(flat % static_cast<std::size_t>(dims[k]));
        flat /= static_cast<std::size_t>(dims[k]);
    }
    return idx;
}

Vec GridDensity::cell_center(std::size_t flat) const {
    const IVec idx = multi_index(flat);
    Vec x(dims.size());
    for (int k = 0; k < dims.size(); ++k)
        x[k] = origin[k] + cell_size * (idx[k] + 0.5);
    return x;
}

std::int64_t GridDensity::locate(const Vec& x) const {
    std::size_t flat = 0;
    for (int k = 0; k < dims.size(); ++k) {
        const double s = (x[k] - origin[k]) / cell_size;
        if (s < 0.0 || s >= static_cast<double>(dims[k])) return -1;
        flat = flat * static_cast<std::size_t>(dims[k]) +
               static_cast<std::size_t>(s);
    }
    return static_cast<std::int64_t>(flat);
}

std::vector<std::size_t> GridDensity::support_cells() const {
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] > kSupportTol) cells.push_back(i);
    return cells;
}

void DiscreteMeasure::validate() const {
    if (points.rows() != weights.size())
        fail(ErrorCode::InvalidInput, "DiscreteMeasure: points/weights size gap");
    for (int i = 0; i < weights.size(); ++i)
        if (!(weights[i] > 0.0))
            fail(ErrorCode::InvalidInput, "DiscreteMeasure: weights must be > 0");
}

DiscreteMeasure DiscreteMeasure::translated(const Vec& shift) const {
    DiscreteMeasure out = *this;
    out.points.rowwise() += shift.transpose();
    return out;
}

double volume(const Ball& ball) {
    return unit_ball_volume(ball.dim()) * std::pow(ball.radius, ball.dim());
}

double volume(const Ellipsoid& ellipsoid) {
    return unit_ball_volume(ellipsoid.dim()) * ellipsoid.semi_axes.prod();
}

double volume(const GridDensity& density) { return density.mass(); }

DiscreteMeasure sample_uniform(const GridDensity& density, int n,
                               std::uint64_t seed) {
    if (n < 1) fail(ErrorCode::InvalidInput, "sample_uniform: n must be >= 1");
    const double total = density.mass();
    if (total <= 0.0) fail(ErrorCode::ZeroMass, "sample_uniform: zero mass");

    const auto cells = density.support_cells();
    std::vector<double> cdf(cells.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        acc += density.values[cells[i]];
        cdf[i] = acc;
    }

    Rng rng(seed);
    const int d = density.dim();
    DiscreteMeasure out;
    out.points.resize(n, d);
    out.weights = Vec::Constant(n, total / n);
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const std::size_t pick =
            cells[std::min<std::size_t>(it - cdf.begin(), cells.size() - 1)];
        const Vec c = density.cell_center(pick);
        for (int k = 0; k < d; ++k)
            out.points(i, k) =
                c[k] + density.cell_size * (rng.uniform() - 0.5);
    }
    return out;
}

QuantizeResult rectangle_quantize(const GridDensity& rho, double cell_diam) {
    const int d = rho.dim();
    const double h = rho.cell_size;
    // Side of the macro rectangles, in cells, so that their diameter
    // stays below cell_diam.
    const int side = static_cast<int>(std::floor(cell_diam / (h * std::sqrt(d))));
    if (side < 1)
        fail(ErrorCode::ResolutionTooCoarse,
             "rectangle_quantize: cell_diam below one grid cell");

    GridDensity out(rho.origin, h, rho.dims);
    const double cell_vol = rho.cell_volume();
    // Running remainder so per-rectangle rounding cancels globally.
    double carry = 0.0;

    IVec blocks(d);
    for (int k = 0; k < d; ++k) blocks[k] = (rho.dims[k] + side - 1) / side;
    std::size_t n_blocks = 1;
    for (int k = 0; k < d; ++k) n_blocks *= static_cast<std::size_t>(blocks[k]);

    for (std::size_t b = 0; b < n_blocks; ++b) {
        // Multi-index of the block.
        IVec bi(d);
        std::size_t rem = b;
        for (int k = d - 1; k >= 0; --k) {
            bi[k] = static_cast<int>(rem % static_cast<std::size_t>(blocks[k]));
            rem /= static_cast<std::size_t>(blocks[k]);
        }
        IVec lo(d), hi(d);
        for (int k = 0; k < d; ++k) {
            lo[k] = bi[k] * side;
            hi[k] = std::min(rho.dims[k], lo[k] + side);
        }

        // Collect the block's cells and mass.
        std::vector<std::size_t> cells;
        double block_mass = 0.0;
        IVec idx = lo;
        while (true) {
            const std::size_t flat = rho.flat_index(idx);
            cells.push_back(flat);
            block_mass += rho.values[flat] * cell_vol;
            int k = d - 1;
            while (k >= 0 && ++idx[k] == hi[k]) idx[k] = lo[k], --k;
            if (k < 0) break;
        }
        if (block_mass <= kSupportTol) continue;

        const double want = block_mass / cell_vol + carry;
        auto n_keep = static_cast<std::size_t>(
            std::max<long long>(0, std::llround(want)));
        n_keep = std::min(n_keep, cells.size());
        carry = want - static_cast<double>(n_keep);
        if (n_keep == 0) continue;

        // Center-out order approximates the homothetic shrink about the
        // block center; ties broken by flat index for determinism.
        Vec center = Vec::Zero(d);
        for (int k = 0; k < d; ++k) center[k] = 0.5 * (lo[k] + hi[k]);
        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(cells.size());
        for (const std::size_t flat : cells) {
            const IVec ci = rho.multi_index(flat);
            double score = 0.0;
            for (int k = 0; k < d; ++k)
                score = std::max(score, std::abs(ci[k] + 0.5 - center[k]) /
                                            (0.5 * (hi[k] - lo[k])));
            order.emplace_back(score, flat);
        }
        std::sort(order.begin(), order.end());
        for (std::size_t i = 0; i < n_keep; ++i)
            out.values[order[i].second] = 1.0;
    }

    QuantizeResult result;
    result.indicator = std::move(out);
    result.dinf_bound = side * h * std::sqrt(d);
    return result;
}

double diam(const Ball& ball) { return 2.0 * ball.radius; }

double diam(const Ellipsoid& ellipsoid) {
    return 2.0 * ellipsoid.semi_axes.maxCoeff();
}

namespace {

std::vector<Vec> occupied_centers(const GridDensity& density) {
    std::vector<Vec> pts;
    for (const std::size_t flat : density.support_cells())
        pts.push_back(density.cell_center(flat));
    return pts;
}

// 2D convex hull (monotone chain). Points need not be distinct.
std::vector<Vec> hull2d(std::vector<Vec> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) {
        return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
    });
    const auto cross = [](const Vec& o, const Vec& a, const Vec& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<Vec> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
        hull[k++] = *it;
    }
    hull.resize(k > 1 ? k - 1 : k);
    return hull;
}

double max_pairwise(const std::vector<Vec>& pts) {
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            best = std::max(best, (pts[i] - pts[j]).norm());
    return best;
}

// Extreme points over a fixed set of directions; exact enough for d=1,3
// since the result is inflated by the cell diagonal anyway.
std::vector<Vec> extremal_subset(const std::vector<Vec>& pts, int d) {
    std::vector<Vec> dirs;
    if (d == 1) {
        dirs.push_back(Vec::Constant(1, 1.0));
        dirs.push_back(Vec::Constant(1, -1.0));
    } else {
        Rng rng(12345);
        for (int i = 0; i < 512; ++i) {
            Vec u(d);
            for (int k = 0; k < d; ++k) u[k] = rng.normal();
            if (u.norm() > 1e-12) dirs.push_back(u.normalized());
        }
    }
    std::vector<Vec> ext;
    for (const auto& u : dirs) {
        double best = -1e300;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double s = u.dot(pts[i]);
            if (s > best) best = s, arg = i;
        }
        ext.push_back(pts[arg]);
    }
    return ext;
}

}  // namespace

double diam(const GridDensity& density) {
    auto pts = occupied_centers(density);
    if (pts.empty()) fail(ErrorCode::EmptySupport, "diam: empty support");
    const int d = density.dim();
    double core;
    if (pts.size() <= 2) {
        core = max_pairwise(pts);
    } else if (d == 2) {
        core = max_pairwise(hull2d(std::move(pts)));
    } else {
        core = max_pairwise(extremal_subset(pts, d));
    }
    return core + density.cell_size * std::sqrt(d);
}

double diam(const DiscreteMeasure& measure) {
    if (measure.size() == 0) fail(ErrorCode::EmptySupport, "diam: no points");
    std::vector<Vec> pts;
    pts.reserve(measure.size());
    for (int i = 0; i < measure.size(); ++i)
        pts.push_back(measure.points.row(i).transpose());
    if (measure.dim() == 2 && pts.size() > 3) return max_pairwise(hull2d(pts));
    if (pts.size() > 4000) return max_pairwise(extremal_subset(pts, measure.dim()));
    return max_pairwise(pts);
}

double dist_sets(const GridDensity& a, const GridDensity& b) {
    const auto pa = occupied_centers(a);
    const auto pb = occupied_centers(b);
    if (pa.empty() || pb.empty())
        fail(ErrorCode::EmptySupport, "dist_sets: empty support");
    double best = 1e300;
    for (const auto& x : pa)
        for (const auto& y : pb) best = std::min(best, (x - y).norm());
    const double slack =
        0.5 * (a.cell_size * std::sqrt(a.dim()) + b.cell_size * std::sqrt(b.dim()));
    return std::max(0.0, best - slack);
}

Vec project_to_ellipsoid(const Ellipsoid& e, const Vec& x) {
    const int d = e.dim();
    const Vec local = e.rotation.transpose() * (x - e.center);
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += sqr(local[j] / e.semi_axes[j]);
    if (s <= 1.0) return x;

    // Solve sum_j (a_j^2 y_j / (a_j^2 + nu))^2 / a_j^2 = 1 for nu > 0.
    const auto residual = [&](double nu) {
        double r = -1.0;
        for (int j = 0; j < d; ++j) {
            const double aj2 = sqr(e.semi_axes[j]);
            r += aj2 * sqr(local[j] / (aj2 + nu));
        }
        return r;
    };
    double lo = 0.0;
    double hi = e.semi_axes.maxCoeff() * local.norm() + 1.0;
    while (residual(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (residual(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * (1.0 + hi)) break;
    }
    const double nu = 0.5 * (lo + hi);
    Vec proj(d);
    for (int j = 0; j < d; ++j) {
        const double aj2 = sqr(e.semi_axes[j]);
        proj[j] = aj2 * local[j] / (aj2 + nu);
    }
    return e.center + e.rotation * proj;
}

double ellipsoid_distance(const Ellipsoid& a, const Ellipsoid& b) {
    // Quick reject: bounding spheres already apart.
    const double center_gap = (a.center - b.center).norm();
    const double lb = center_gap - a.bounding_radius() - b.bounding_radius();

    Vec p = a.center;
    Vec q = b.center;
    double dist = (p - q).norm();
    for (int it = 0; it < 2000; ++it) {
        q = project_to_ellipsoid(b, p);
        p = project_to_ellipsoid(a, q);
        const double next = (p - q).norm();
        if (dist - next < 1e-15 * (1.0 + dist) && it > 2) {
            dist = next;
            break;
        }
        dist = next;
    }
    if (dist < 1e-12) return 0.0;
    return std::max(dist, lb);
}

}  // namespace shapeflow
