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
#include "shapeflow/io.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace shapeflow;

TEST_CASE("volume of balls and ellipsoids") {
    Ball disk{Vec::Zero(2), 1.0};
    CHECK(volume(disk) == doctest::Approx(M_PI).epsilon(1e-14));

    Ellipsoid stretched{Vec::Zero(2), Vec(2), Mat::Identity(2, 2)};
    stretched.semi_axes << 2.0, 0.5;
    CHECK(volume(stretched) == doctest::Approx(M_PI).epsilon(1e-14));

    Ball b3{Vec::Zero(3), 2.0};
    CHECK(volume(b3) == doctest::Approx(4.0 * M_PI / 3.0 * 8.0).epsilon(1e-14));
}

TEST_CASE("grid density volume is h^d times the value sum") {
    GridDensity g(Vec::Zero(2), 0.1, (IVec(2) << 16, 16).finished());
    // Tick-shaped pattern, 10 occupied cells.
    for (int i = 0; i < 10; ++i)
        g.values[g.flat_index((IVec(2) << i, std::min(i, 15 - i)).finished())] =
            1.0;
    CHECK(volume(g) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("sample_uniform: containment, determinism, disk second moment") {
    const GridDensity disk = test_support::disk_density(1.0, 128);

    auto m1 = sample_uniform(disk, 4, 1);
    CHECK(m1.size() == 4);
    for (int i = 0; i < 4; ++i)
        CHECK(m1.points.row(i).norm() < 1.0 + disk.cell_size * 2);
    CHECK(m1.weights[0] == doctest::Approx(disk.mass() / 4));

    auto m2 = sample_uniform(disk, 4, 1);
    CHECK((m1.points - m2.points).cwiseAbs().maxCoeff() == 0.0);

    // E|x|^2 = 1/2 for the uniform unit disk.
    auto big = sample_uniform(disk, 100000, 7);
    double second_moment = 0.0;
    for (int i = 0; i < big.size(); ++i)
        second_moment += big.points.row(i).squaredNorm();
    second_moment /= big.size();
    CHECK(second_moment == doctest::Approx(0.5).epsilon(0.02));

    GridDensity empty(Vec::Zero(2), 0.1, (IVec(2) << 4, 4).finished());
    CHECK_THROWS_AS(sample_uniform(empty, 3, 0), Error);
}

TEST_CASE("rectangle_quantize") {
    SUBCASE("grid-aligned indicator is a fixed point") {
        GridDensity g(Vec::Zero(2), 1.0 / 32, (IVec(2) << 32, 32).finished());
        // Box occupying the left half; blocks of 8 cells tile it exactly.
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 32; ++j)
                g.at((IVec(2) << i, j).finished()) = 1.0;
        auto result = rectangle_quantize(g, 8.0 / 32 * std::sqrt(2.0) * 1.01);
        CHECK(result.indicator.values == g.values);
    }

    SUBCASE("uniform half density keeps its mass") {
        GridDensity g(Vec::Zero(2), 1.0 / 50, (IVec(2) << 50, 50).finished());
        for (auto& v : g.values) v = 0.5;
        auto result = rectangle_quantize(g, 0.2);
        // Mass bookkeeping: within one cell volume globally.
        CHECK(std::abs(result.indicator.mass() - 0.5) <= g.cell_volume());
        for (const double v : result.indicator.values)
            CHECK((v == 0.0 || v == 1.0));
    }

    SUBCASE("weak-star convergence against polynomial test functions") {
        const auto poly = [](int which, const Vec& x) {
            switch (which) {
                case 0: return 1.0;
                case 1: return x[0];
                case 2: return x[1];
                case 3: return x[0] * x[1];
                default: return x[0] * x[0] - x[1];
            }
        };
        double prev_worst = 1e9;
        // The grid refines along with the rectangles (the continuum limit
        // needs h << cell_diam).
        for (const double scale : {0.5, 0.25, 0.125}) {
            const int n = static_cast<int>(std::lround(64 / scale));
            GridDensity fine(Vec::Zero(2), 1.0 / n,
                             (IVec(2) << n, n).finished());
            for (auto& v : fine.values) v = 0.25;
            auto result = rectangle_quantize(fine, scale);
            double worst = 0.0;
            for (int which = 0; which < 5; ++which) {
                double a = 0.0, b = 0.0;
                for (std::size_t c = 0; c < fine.values.size(); ++c) {
                    a += fine.values[c] * poly(which, fine.cell_center(c));
                    b += result.indicator.values[c] *
                         poly(which, result.indicator.cell_center(c));
                }
                worst = std::max(worst,
                                 std::abs(a - b) * fine.cell_volume());
            }
            CHECK(worst < prev_worst);
            prev_worst = worst;
        }
        CHECK(prev_worst < 5e-3);
    }

    SUBCASE("coarse request fails cleanly") {
        GridDensity g(Vec::Zero(2), 0.5, (IVec(2) << 4, 4).finished());
        g.values[0] = 1.0;
        CHECK_THROWS_AS(rectangle_quantize(g, 0.1), Error);
    }
}

TEST_CASE("diam and dist_sets") {
    Ball b{Vec::Zero(2), 1.0};
    CHECK(diam(b) == 2.0);

    Ellipsoid e{Vec::Zero(2), Vec(2), Mat::Identity(2, 2)};
    e.semi_axes << 2.0, 0.5;
    CHECK(diam(e) == 4.0);

    // Two unit squares three apart.
    GridDensity a(Vec::Zero(2), 0.05, (IVec(2) << 20, 20).finished());
    for (auto& v : a.values) v = 1.0;
    GridDensity c = a;
    c.origin[0] += 4.0;  // gap of 3 between [0,1] and [4,5]
    const double gap = dist_sets(a, c);
    CHECK(gap == doctest::Approx(3.0).epsilon(0.05));
    CHECK(gap <= 3.0 + 1e-12);

    GridDensity empty(Vec::Zero(2), 0.1, (IVec(2) << 4, 4).finished());
    CHECK_THROWS_AS(diam(empty), Error);
}

TEST_CASE("ellipsoid distance") {
    Ellipsoid a{Vec::Zero(2), Vec::Constant(2, 1.0), Mat::Identity(2, 2)};
    Ellipsoid b = a;
    b.center = (Vec(2) << 5.0, 0.0).finished();
    CHECK(ellipsoid_distance(a, b) == doctest::Approx(3.0).epsilon(1e-9));

    b.center = (Vec(2) << 1.5, 0.0).finished();
    CHECK(ellipsoid_distance(a, b) == 0.0);

    // Anisotropic pair: gap along the x axis is 4 - 2 - 0.5 = 1.5.
    Ellipsoid c{(Vec(2) << 4.0, 0.0).finished(), Vec(2), Mat::Identity(2, 2)};
    c.semi_axes << 0.5, 2.0;
    Ellipsoid d{Vec::Zero(2), Vec(2), Mat::Identity(2, 2)};
    d.semi_axes << 2.0, 0.5;
    CHECK(ellipsoid_distance(c, d) == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("grid density and measure round-trip through files") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "shapeflow_io_test";
    fs::create_directories(dir);

    const GridDensity disk = test_support::disk_density(1.0, 32);
    write_grid_density(disk, (dir / "disk").string());
    const GridDensity back = read_grid_density((dir / "disk.json").string());
    CHECK(back.values == disk.values);
    CHECK(back.cell_size == disk.cell_size);

    const auto measure = sample_uniform(disk, 17, 3);
    write_discrete_measure(measure, (dir / "m.csv").string());
    const auto m2 = read_discrete_measure((dir / "m.csv").string());
    CHECK(m2.size() == 17);
    CHECK((m2.points - measure.points).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m2.weights - measure.weights).cwiseAbs().maxCoeff() == 0.0);
}
