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

#include "shapeflow/transport.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace shapeflow;
using test_support::random_cloud;

TEST_CASE("solve_exact: identity, 1D monotone, brute force") {
    SUBCASE("identical point sets give the identity plan") {
        auto m = random_cloud(12, 2, 42);
        auto plan = solve_exact(m, m);
        CHECK(plan.cost == 0.0);
        for (const auto& e : plan.couplings) CHECK(e.i == e.j);
    }

    SUBCASE("1D pairs match monotonically") {
        DiscreteMeasure mu, nu;
        mu.points.resize(2, 1);
        mu.points << 0.0, 1.0;
        mu.weights = Vec::Constant(2, 0.5);
        nu.points.resize(2, 1);
        nu.points << 2.0, 3.0;
        nu.weights = Vec::Constant(2, 0.5);
        auto plan = solve_exact(mu, nu);
        // Monotone rearrangement: 0->2, 1->3, total cost 4 for unit mass.
        auto sigma = plan.permutation();
        CHECK(sigma[0] == 0);
        CHECK(sigma[1] == 1);
        CHECK(plan.cost == doctest::Approx(4.0).epsilon(1e-15));
    }

    SUBCASE("matches the 720-permutation enumeration at n=6") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto mu = random_cloud(6, 2, 100 + seed);
            auto nu = random_cloud(6, 2, 200 + seed);
            auto plan = solve_exact(mu, nu);
            const double brute = test_support::brute_force_assignment_cost(
                test_support::quadratic_cost(mu, nu), mu.weights[0]);
            CHECK(plan.cost == brute);
        }
    }

    SUBCASE("guards") {
        auto mu = random_cloud(4, 2, 1);
        auto nu = random_cloud(4, 2, 2, 2.0);
        CHECK_THROWS_AS(solve_exact(mu, nu), Error);  // mass mismatch
        CHECK_THROWS_AS(solve_exact(mu, nu, 1), Error);
    }
}

TEST_CASE("weighted transportation simplex") {
    SUBCASE("1D weighted monotone oracle") {
        // Mass can always be rearranged monotonically in 1D; compare the
        // simplex cost against the quantile-coupling cost.
        Rng rng(7);
        for (int trial = 0; trial < 8; ++trial) {
            const int n = 3 + static_cast<int>(rng.uniform_int(0, 4));
            const int m = 3 + static_cast<int>(rng.uniform_int(0, 4));
            DiscreteMeasure mu, nu;
            mu.points.resize(n, 1);
            nu.points.resize(m, 1);
            mu.weights.resize(n);
            nu.weights.resize(m);
            for (int i = 0; i < n; ++i) {
                mu.points(i, 0) = i + 0.3 * rng.uniform();
                mu.weights[i] = 0.2 + rng.uniform();
            }
            for (int j = 0; j < m; ++j) {
                nu.points(j, 0) = j + 2.0 + 0.3 * rng.uniform();
                nu.weights[j] = 0.2 + rng.uniform();
            }
            nu.weights *= mu.mass() / nu.mass();

            auto plan = solve_exact(mu, nu);
            CHECK(plan.max_marginal_error() < 1e-9);

            // Quantile coupling (inputs are already sorted by position).
            double oracle = 0.0;
            {
                int j = 0;
                double need = nu.weights[0];
                for (int i = 0; i < n; ++i) {
                    double have = mu.weights[i];
                    while (have > 1e-15) {
                        const double f =
                            (j + 1 == m) ? have : std::min(have, need);
                        oracle +=
                            f * sqr(mu.points(i, 0) - nu.points(j, 0));
                        have -= f;
                        need -= f;
                        if (need <= 1e-15 && j + 1 < m) need = nu.weights[++j];
                    }
                }
            }
            CHECK(plan.cost == doctest::Approx(oracle).epsilon(1e-10));
        }
    }

    SUBCASE("agrees with the assignment path on equal weights") {
        auto mu = random_cloud(40, 2, 11);
        auto nu = random_cloud(40, 2, 12);
        auto assignment = solve_exact(mu, nu);
        // Force the simplex by perturbing one weight pair consistently.
        DiscreteMeasure mu2 = mu, nu2 = nu;
        mu2.weights[0] *= 1.0 + 1e-13;
        nu2.weights[0] *= 1.0 + 1e-13;
        auto simplex = solve_cost(mu2, nu2,
                                  test_support::quadratic_cost(mu2, nu2));
        CHECK(simplex.cost ==
              doctest::Approx(assignment.cost).epsilon(1e-10));
        CHECK(simplex.max_marginal_error() < 1e-9);
    }
}

TEST_CASE("cyclical monotonicity spot-check") {
    auto mu = random_cloud(120, 2, 31);
    auto nu = random_cloud(120, 2, 32);
    auto plan = solve_exact(mu, nu);
    auto sigma = plan.permutation();
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const int i = static_cast<int>(rng.uniform_int(0, 119));
        const int j = static_cast<int>(rng.uniform_int(0, 119));
        const Vec xi = mu.points.row(i), xj = mu.points.row(j);
        const Vec yi = nu.points.row(sigma[i]), yj = nu.points.row(sigma[j]);
        CHECK((xi - yi).squaredNorm() + (xj - yj).squaredNorm() <=
              (xi - yj).squaredNorm() + (xj - yi).squaredNorm() + 1e-12);
    }
}

TEST_CASE("wasserstein distance basics") {
    SUBCASE("zero for identical measures") {
        auto m = random_cloud(30, 2, 77);
        CHECK(wasserstein_distance(m, m) == 0.0);
    }

    SUBCASE("translation oracle, exact for small n by brute force") {
        const Vec b = (Vec(2) << 0.35, -0.2).finished();
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            auto mu = random_cloud(7, 2, 300 + seed);
            auto nu = mu.translated(b);
            const double dw = wasserstein_distance(mu, nu);
            const double expected = std::sqrt(mu.mass()) * b.norm();
            CHECK(dw == doctest::Approx(expected).epsilon(1e-12));
            const double brute = test_support::brute_force_assignment_cost(
                test_support::quadratic_cost(mu, nu), mu.weights[0]);
            CHECK(dw * dw == doctest::Approx(brute).epsilon(1e-12));
        }
    }

    SUBCASE("symmetry and triangle inequality on random triples") {
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            auto a = random_cloud(25, 2, 400 + seed);
            auto b = random_cloud(25, 2, 500 + seed);
            auto c = random_cloud(25, 2, 600 + seed);
            const double ab = wasserstein_distance(a, b);
            const double ba = wasserstein_distance(b, a);
            CHECK(ab == doctest::Approx(ba).epsilon(1e-8));
            const double ac = wasserstein_distance(a, c);
            const double cb = wasserstein_distance(c, b);
            CHECK(ab <= ac + cb + 1e-8);
        }
    }

    SUBCASE("disk to ellipse quadrature oracle") {
        // For the diagonal map (x1,x2) -> (2 x1, x2/2) on the unit disk,
        // int |T - id|^2 / |B| = ((2-1)^2 + (1/2-1)^2)/4 = 5/16 at unit mass.
        const double exact = 5.0 / 16.0;
        const auto disk = test_support::disk_density(1.0, 192);
        auto mu = sample_uniform(disk, 1500, 21);
        mu.weights = Vec::Constant(1500, 1.0 / 1500);  // unit mass
        // Image samples are uniform on the ellipse (the map is
        // volume-preserving), and keep the quadrature unbiased.
        DiscreteMeasure nu = mu;
        nu.points.col(0) *= 2.0;
        nu.points.col(1) *= 0.5;
        const double dw2 = sqr(wasserstein_distance(mu, nu));
        CHECK(dw2 == doctest::Approx(exact).epsilon(0.03));
    }
}

TEST_CASE("linf distance") {
    auto mu = random_cloud(40, 2, 800);
    SUBCASE("zero for identical") { CHECK(linf_distance(mu, mu) == 0.0); }

    SUBCASE("translation gives |b| and dominates d_W/sqrt(mass)") {
        const Vec b = (Vec(2) << 0.3, 0.4).finished();
        auto nu = mu.translated(b);
        const double dinf = linf_distance(mu, nu);
        CHECK(dinf == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(wasserstein_distance(mu, nu) <=
              std::sqrt(mu.mass()) * dinf + 1e-9);
    }

    SUBCASE("weighted flow path agrees on a small instance") {
        DiscreteMeasure mu1, nu1;
        mu1.points.resize(2, 1);
        mu1.points << 0.0, 1.0;
        mu1.weights = (Vec(2) << 0.75, 0.25).finished();
        nu1.points.resize(2, 1);
        nu1.points << 0.0, 1.0;
        nu1.weights = (Vec(2) << 0.25, 0.75).finished();
        // Half the mass must hop distance 1.
        CHECK(linf_distance(mu1, nu1) == doctest::Approx(1.0));
    }
}

TEST_CASE("entropic solver") {
    SUBCASE("near-identity for identical measures") {
        auto m = random_cloud(60, 2, 900);
        auto plan = solve_entropic(m, m);
        CHECK(plan.max_marginal_error() < 1e-6);
        CHECK(plan.cost < 1e-3);
        CHECK(plan.duality_gap >= -1e-12);
    }

    SUBCASE("within 1% of the exact cost at n=300") {
        auto mu = random_cloud(300, 2, 901);
        auto nu = random_cloud(300, 2, 902);
        auto exact = solve_exact(mu, nu);
        auto approx = solve_entropic(mu, nu);
        CHECK(std::abs(approx.cost - exact.cost) <= 0.01 * exact.cost);
    }

    SUBCASE("mass mismatch is rejected") {
        auto mu = random_cloud(10, 2, 903);
        auto nu = random_cloud(10, 2, 904, 3.0);
        CHECK_THROWS_AS(solve_entropic(mu, nu), Error);
    }
}

TEST_CASE("brenier field estimation") {
    const auto disk = test_support::disk_density(1.0, 160);

    SUBCASE("rigid translation") {
        auto mu = sample_uniform(disk, 400, 50);
        const Vec b = (Vec(2) << 1.5, -0.7).finished();
        auto nu = mu.translated(b);
        auto field = estimate_brenier_field(mu, nu, 8);
        for (int i = 0; i < field.size(); ++i) {
            CHECK((field.map_at(i) - (field.sample_at(i) + b)).norm() < 1e-12);
            CHECK(field.lambda_min[i] == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(field.lambda_max[i] == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(field.d3_surrogate[i] < 1e-6);
        }
    }

    SUBCASE("diagonal stretch recovered at interior samples") {
        auto mu = sample_uniform(disk, 1200, 51);
        DiscreteMeasure nu = mu;
        nu.points.col(0) *= 2.0;
        nu.points.col(1) *= 0.5;
        auto field = estimate_brenier_field(mu, nu, 10);
        int checked = 0;
        for (int i = 0; i < field.size(); ++i) {
            if (field.sample_at(i).norm() > 0.7) continue;  // interior only
            ++checked;
            CHECK(field.lambda_max[i] == doctest::Approx(2.0).epsilon(0.05));
            CHECK(field.lambda_min[i] == doctest::Approx(0.5).epsilon(0.05));
        }
        CHECK(checked > 100);
        // Monotonicity of the sampled map.
        auto sigma = solve_exact(mu, nu).permutation();
        for (int i = 0; i < mu.size(); i += 7)
            for (int j = i + 1; j < mu.size(); j += 97) {
                const Vec dx = mu.points.row(i) - mu.points.row(j);
                const Vec dy =
                    nu.points.row(sigma[i]) - nu.points.row(sigma[j]);
                CHECK(dy.dot(dx) >= -1e-6 * dx.squaredNorm());
            }
        // Equal-volume diagnostic.
        CHECK(field.det_jacobian.mean() > 0.8);
        CHECK(field.det_jacobian.mean() < 1.25);
    }

    SUBCASE("cubic potential third derivative surrogate") {
        // psi(x) = |x|^2/2 + 0.1 x1^3 on a region where psi is convex;
        // D^3 psi has norm 0.6.
        GridDensity box(Vec::Constant(2, 0.1), 0.8 / 96,
                        (IVec(2) << 96, 96).finished());
        for (auto& v : box.values) v = 1.0;
        auto mu = sample_uniform(box, 900, 52);
        DiscreteMeasure nu = mu;
        for (int i = 0; i < nu.size(); ++i)
            nu.points(i, 0) += 0.3 * sqr(mu.points(i, 0));
        auto field = estimate_brenier_field(mu, nu, 12);
        double median_d3;
        {
            std::vector<double> d3(field.d3_surrogate.data(),
                                   field.d3_surrogate.data() + field.size());
            std::sort(d3.begin(), d3.end());
            median_d3 = d3[d3.size() / 2];
        }
        CHECK(median_d3 > 0.3);
        CHECK(median_d3 < 1.2);
    }

    SUBCASE("k below the quadratic-fit floor is rejected") {
        auto mu = sample_uniform(disk, 50, 53);
        CHECK_THROWS_AS(estimate_brenier_field(mu, mu, 4), Error);
    }
}

TEST_CASE("plan stability experiment") {
    const auto disk = test_support::disk_density(1.0, 96);
    auto mu = sample_uniform(disk, 150, 60);
    auto nu = sample_uniform(disk, 150, 61).translated(
        (Vec(2) << 2.5, 0.0).finished());

    SUBCASE("constant sequence reports zeros") {
        std::vector<DiscreteMeasure> mus{mu, mu}, nus{nu, nu};
        for (const double c : plan_stability_experiment(mus, nus, mu, nu))
            CHECK(c < 1e-9);
    }

    SUBCASE("b/k translations decay like 1/k^2") {
        const Vec b = (Vec(2) << 0.8, 0.3).finished();
        std::vector<DiscreteMeasure> mus, nus;
        std::vector<double> inv_k2;
        for (int k = 1; k <= 6; ++k) {
            mus.push_back(mu);
            nus.push_back(nu.translated(b / k));
            inv_k2.push_back(1.0 / (k * k));
        }
        const auto costs = plan_stability_experiment(mus, nus, mu, nu);
        const auto fit = test_support::linear_fit(inv_k2, costs);
        CHECK(fit[2] > 0.99);
        for (std::size_t k = 1; k < costs.size(); ++k)
            CHECK(costs[k] <= costs[k - 1] + 1e-9);
    }
}
