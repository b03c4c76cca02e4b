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

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace shapeflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat quadratic_cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const int n = mu.size(), m = nu.size();
    Mat cost(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            cost(i, j) = (mu.points.row(i) - nu.points.row(j)).squaredNorm();
    return cost;
}

void check_masses(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const double ma = mu.mass(), mb = nu.mass();
    if (std::abs(ma - mb) > 1e-9 * std::max({ma, mb, 1.0}))
        fail(ErrorCode::MassMismatch, "transport: source mass " +
                                          std::to_string(ma) +
                                          " != target mass " +
                                          std::to_string(mb));
}

bool equal_weights(const DiscreteMeasure& m) {
    for (int i = 1; i < m.size(); ++i)
        if (std::abs(m.weights[i] - m.weights[0]) >
            1e-12 * std::abs(m.weights[0]))
            return false;
    return true;
}

// ---------------------------------------------------------------------------
// Shortest-augmenting-path assignment (square, dense). Deterministic scans;
// ties prefer the unassigned column and then the lowest index.
// ---------------------------------------------------------------------------
std::vector<int> assignment_solve(const Mat& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(n, 0.0), v(n, 0.0), shortest(n);
    std::vector<int> path(n), remaining(n), row4col(n, -1), col4row(n, -1);
    std::vector<char> SR(n), SC(n);

    for (int cur_row = 0; cur_row < n; ++cur_row) {
        std::fill(SR.begin(), SR.end(), 0);
        std::fill(SC.begin(), SC.end(), 0);
        std::fill(shortest.begin(), shortest.end(), kInf);
        for (int it = 0; it < n; ++it) remaining[it] = it;
        int num_remaining = n;

        double min_val = 0.0;
        int sink = -1;
        int i = cur_row;
        while (sink == -1) {
            SR[i] = 1;
            int index = -1;
            double lowest = kInf;
            for (int it = 0; it < num_remaining; ++it) {
                const int j = remaining[it];
                const double r = min_val + cost(i, j) - u[i] - v[j];
                if (r < shortest[j]) {
                    path[j] = i;
                    shortest[j] = r;
                }
                if (shortest[j] < lowest ||
                    (shortest[j] == lowest && row4col[j] == -1)) {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            if (!(min_val < kInf))
                fail(ErrorCode::NonConvergence, "assignment: infeasible");
            const int j = remaining[index];
            if (row4col[j] == -1)
                sink = j;
            else
                i = row4col[j];
            SC[j] = 1;
            remaining[index] = remaining[--num_remaining];
        }

        u[cur_row] += min_val;
        for (int k = 0; k < n; ++k)
            if (SR[k] && k != cur_row) u[k] += min_val - shortest[col4row[k]];
        for (int j = 0; j < n; ++j)
            if (SC[j]) v[j] -= min_val - shortest[j];

        int j = sink;
        while (true) {
            const int k = path[j];
            row4col[j] = k;
            std::swap(col4row[k], j);
            if (k == cur_row) break;
        }
    }
    return col4row;
}

// ---------------------------------------------------------------------------
// Transportation simplex for general nonnegative weights. Dense costs,
// spanning-tree basis, block pricing, deterministic tie-breaks.
// ---------------------------------------------------------------------------
struct SimplexResult {
    std::vector<TransportPlan::Entry> entries;
    bool converged = false;
};

SimplexResult transport_simplex(const Mat& cost, Vec supply, Vec demand) {
    const int n = static_cast<int>(supply.size());
    const int m = static_cast<int>(demand.size());
    // Exact balance for the pivot arithmetic.
    demand *= supply.sum() / demand.sum();

    struct Arc {
        int i, j;
        double flow;
    };
    std::vector<Arc> basis;
    basis.reserve(n + m - 1);

    // Northwest-corner start.
    {
        Vec a = supply, b = demand;
        int i = 0, j = 0;
        while (i < n && j < m) {
            const double f = std::min(a[i], b[j]);
            basis.push_back({i, j, f});
            a[i] -= f;
            b[j] -= f;
            if (static_cast<int>(basis.size()) == n + m - 1) break;
            if (a[i] <= b[j])
                ++i;
            else
                ++j;
        }
    }

    const int nodes = n + m;
    std::vector<std::vector<int>> adj(nodes);
    const auto rebuild_adj = [&]() {
        for (auto& lst : adj) lst.clear();
        for (int a = 0; a < static_cast<int>(basis.size()); ++a) {
            adj[basis[a].i].push_back(a);
            adj[n + basis[a].j].push_back(a);
        }
    };
    rebuild_adj();

    std::vector<double> u(n), v(m);
    std::vector<char> seen(nodes);
    std::deque<int> queue;
    const auto compute_duals = [&]() {
        std::fill(seen.begin(), seen.end(), 0);
        u[0] = 0.0;
        seen[0] = 1;
        queue.clear();
        queue.push_back(0);
        while (!queue.empty()) {
            const int node = queue.front();
            queue.pop_front();
            for (const int a : adj[node]) {
                const Arc& arc = basis[a];
                const int other = (node < n) ? n + arc.j : arc.i;
                if (seen[other]) continue;
                seen[other] = 1;
                if (other >= n)
                    v[arc.j] = cost(arc.i, arc.j) - u[arc.i];
                else
                    u[arc.i] = cost(arc.i, arc.j) - v[arc.j];
                queue.push_back(other);
            }
        }
    };

    const double enter_tol = -1e-11 * (1.0 + cost.cwiseAbs().maxCoeff());
    const long max_pivots = 200L * (n + m) + 20000;
    std::vector<int> parent_arc(nodes), parent_node(nodes);

    int block_start = 0;
    const int block_rows = std::max(8, n / 16);
    SimplexResult result;

    for (long pivot = 0; pivot < max_pivots; ++pivot) {
        compute_duals();

        // Entering arc: most negative reduced cost within a rotating block
        // of rows, whole matrix as fallback.
        int best_i = -1, best_j = -1;
        double best_r = enter_tol;
        for (int pass = 0; pass < 2 && best_i < 0; ++pass) {
            const int lo = (pass == 0) ? block_start : 0;
            const int hi = (pass == 0) ? std::min(n, block_start + block_rows) : n;
            for (int i = lo; i < hi; ++i) {
                for (int j = 0; j < m; ++j) {
                    const double r = cost(i, j) - u[i] - v[j];
                    if (r < best_r) {
                        best_r = r;
                        best_i = i;
                        best_j = j;
                    }
                }
            }
            if (pass == 0 && best_i < 0) block_start = (block_start + block_rows) % std::max(1, n);
        }
        if (best_i < 0) {
            result.converged = true;
            break;
        }

        // Tree path from row best_i to col best_j (BFS).
        std::fill(seen.begin(), seen.end(), 0);
        std::fill(parent_arc.begin(), parent_arc.end(), -1);
        queue.clear();
        queue.push_back(best_i);
        seen[best_i] = 1;
        while (!queue.empty()) {
            const int node = queue.front();
            queue.pop_front();
            if (node == n + best_j) break;
            for (const int a : adj[node]) {
                const Arc& arc = basis[a];
                const int other = (node < n) ? n + arc.j : arc.i;
                if (seen[other]) continue;
                seen[other] = 1;
                parent_arc[other] = a;
                parent_node[other] = node;
                queue.push_back(other);
            }
        }

        // Walk back: arcs at odd positions along the cycle lose flow.
        double theta = kInf;
        int leave = -1;
        {
            int node = n + best_j;
            bool minus = true;  // first tree arc reached from the col side
            while (node != best_i) {
                const int a = parent_arc[node];
                if (minus && basis[a].flow < theta) {
                    theta = basis[a].flow;
                    leave = a;
                }
                minus = !minus;
                node = parent_node[node];
            }
        }
        if (leave < 0)
            fail(ErrorCode::NonConvergence, "transport simplex: broken basis");

        {
            int node = n + best_j;
            bool minus = true;
            while (node != best_i) {
                const int a = parent_arc[node];
                basis[a].flow += minus ? -theta : theta;
                minus = !minus;
                node = parent_node[node];
            }
        }
        basis[leave] = {best_i, best_j, theta};
        rebuild_adj();
    }

    if (!result.converged) return result;
    for (const Arc& arc : basis)
        if (arc.flow > 0.0) result.entries.push_back({arc.i, arc.j, arc.flow});
    return result;
}

double plan_cost(const Mat& cost, const std::vector<TransportPlan::Entry>& e) {
    double total = 0.0;
    for (const auto& entry : e) total += entry.mass * cost(entry.i, entry.j);
    return total;
}

}  // namespace

bool TransportPlan::is_permutation() const {
    if (static_cast<int>(couplings.size()) != source.size()) return false;
    if (source.size() != target.size()) return false;
    std::vector<char> used(target.size(), 0);
    for (const auto& e : couplings) {
        if (used[e.j]) return false;
        used[e.j] = 1;
    }
    return true;
}

std::vector<int> TransportPlan::permutation() const {
    if (!is_permutation())
        fail(ErrorCode::InvalidInput, "plan is not a permutation");
    std::vector<int> sigma(source.size(), -1);
    for (const auto& e : couplings) sigma[e.i] = e.j;
    return sigma;
}

double TransportPlan::max_marginal_error() const {
    Vec row = Vec::Zero(source.size());
    Vec col = Vec::Zero(target.size());
    for (const auto& e : couplings) {
        row[e.i] += e.mass;
        col[e.j] += e.mass;
    }
    const double scale = std::max(1e-300, source.weights.maxCoeff());
    double err = 0.0;
    for (int i = 0; i < source.size(); ++i)
        err = std::max(err, std::abs(row[i] - source.weights[i]) / scale);
    for (int j = 0; j < target.size(); ++j)
        err = std::max(err, std::abs(col[j] - target.weights[j]) / scale);
    return err;
}

TransportPlan solve_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                         const Mat& cost) {
    mu.validate();
    nu.validate();
    check_masses(mu, nu);

    TransportPlan plan;
    plan.source = mu;
    plan.target = nu;

    if (mu.size() == nu.size() && equal_weights(mu) && equal_weights(nu) &&
        std::abs(mu.weights[0] - nu.weights[0]) <= 1e-12 * mu.weights[0]) {
        const auto col4row = assignment_solve(cost);
        for (int i = 0; i < mu.size(); ++i)
            plan.couplings.push_back({i, col4row[i], mu.weights[i]});
    } else {
        SimplexResult result = transport_simplex(cost, mu.weights, nu.weights);
        if (!result.converged) {
            // Perturb-and-retry guards against degenerate cycling.
            Vec supply = mu.weights;
            const double xi = 1e-12 * supply.mean();
            double added = 0.0;
            for (int i = 0; i < supply.size(); ++i) {
                supply[i] += xi * (i + 1);
                added += xi * (i + 1);
            }
            Vec demand = nu.weights;
            demand[demand.size() - 1] += added;
            result = transport_simplex(cost, supply, demand);
            if (!result.converged)
                fail(ErrorCode::NonConvergence,
                     "transport simplex: pivot budget exhausted");
        }
        plan.couplings = std::move(result.entries);
    }
    plan.cost = plan_cost(cost, plan.couplings);
    return plan;
}

TransportPlan solve_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                          int cost_exponent) {
    if (cost_exponent != 2)
        fail(ErrorCode::InvalidInput, "solve_exact: only cost exponent 2");
    const double nm = static_cast<double>(mu.size()) * nu.size();
    if (nm > 2e7)
        fail(ErrorCode::SizeGuardExceeded,
             "solve_exact: n*m exceeds 2e7; use solve_entropic");
    return solve_cost(mu, nu, quadratic_cost_matrix(mu, nu));
}

TransportPlan solve_entropic(const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu,
                             const SinkhornOptions& options) {
    mu.validate();
    nu.validate();
    check_masses(mu, nu);

    const int n = mu.size(), m = nu.size();
    const Mat cost = quadratic_cost_matrix(mu, nu);
    const double total = mu.mass();
    const Vec a = mu.weights / total;
    const Vec b = nu.weights / total;

    std::vector<double> schedule = options.epsilon_schedule;
    if (schedule.empty()) {
        const double cmax = std::max(cost.maxCoeff(), 1e-12);
        for (double eps = 0.25 * cmax; eps > 1e-6 * cmax; eps *= 0.5)
            schedule.push_back(eps);
        if (schedule.empty()) schedule.push_back(0.25 * cmax);
    }

    Vec f = Vec::Zero(n), g = Vec::Zero(m), f_new(n);
    Mat work(n, m);
    double pre_round_err = kInf;
    int iterations = 0;

    for (std::size_t lvl = 0; lvl < schedule.size(); ++lvl) {
        const double eps = schedule[lvl];
        // Warm starts keep per-level work small; the final feasibility gap
        // is closed by rounding, not by grinding at tiny eps.
        const int level_cap =
            std::min(options.max_iterations,
                     lvl + 1 == schedule.size() ? 600 : 120);
        for (int it = 0; it < level_cap; ++it) {
            ++iterations;
            // f-update makes rows exact; the increment measures how far the
            // previous iterate was from row feasibility.
            work = ((-cost).rowwise() + g.transpose()) / eps;
            for (int i = 0; i < n; ++i) {
                const double zmax = work.row(i).maxCoeff();
                const double lse =
                    zmax +
                    std::log((work.row(i).array() - zmax).exp().sum());
                f_new[i] = eps * std::log(a[i]) - eps * lse;
            }
            pre_round_err = 0.0;
            for (int i = 0; i < n; ++i)
                pre_round_err = std::max(
                    pre_round_err,
                    a[i] * std::abs(std::exp((f[i] - f_new[i]) / eps) - 1.0));
            f = f_new;
            work = ((-cost).colwise() + f) / eps;
            for (int j = 0; j < m; ++j) {
                const double zmax = work.col(j).maxCoeff();
                const double lse =
                    zmax +
                    std::log((work.col(j).array() - zmax).exp().sum());
                g[j] = eps * std::log(b[j]) - eps * lse;
            }
            if (it >= 1 && pre_round_err < 1e-8) break;
        }
    }
    if (pre_round_err > 1e-4)
        fail(ErrorCode::NonConvergence,
             "sinkhorn: " + std::to_string(iterations) +
                 " iterations, marginal residual " +
                 std::to_string(pre_round_err));
    work = (((-cost).colwise() + f).rowwise() + g.transpose()) /
           schedule.back();

    // Round onto the transport polytope: rescale rows and columns, then a
    // rank-one correction carries the residual mass.
    Mat plan_matrix = work.array().exp();
    for (int i = 0; i < n; ++i) {
        const double row = plan_matrix.row(i).sum();
        if (row > 0.0) plan_matrix.row(i) *= std::min(1.0, a[i] / row);
    }
    for (int j = 0; j < m; ++j) {
        const double col = plan_matrix.col(j).sum();
        if (col > 0.0) plan_matrix.col(j) *= std::min(1.0, b[j] / col);
    }
    const Vec err_a = a - plan_matrix.rowwise().sum();
    const Vec err_b = b - plan_matrix.colwise().sum().transpose();
    const double residual = err_a.sum();
    if (residual > 1e-300)
        plan_matrix += err_a * err_b.transpose() / residual;

    TransportPlan plan;
    plan.source = mu;
    plan.target = nu;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double mass = total * plan_matrix(i, j);
            if (mass > 1e-16 * total) plan.couplings.push_back({i, j, mass});
        }
    plan.cost = plan_cost(cost, plan.couplings);
    plan.marginal_error = plan.max_marginal_error();

    // LP-feasible dual pair gives a valid lower bound and hence a gap.
    Vec f_lp(n);
    for (int i = 0; i < n; ++i)
        f_lp[i] = (cost.row(i).transpose() - g).minCoeff();
    const double dual = total * (f_lp.dot(a) + g.dot(b));
    plan.duality_gap = plan.cost - dual;
    return plan;
}

double wasserstein_distance(const DiscreteMeasure& mu,
                            const DiscreteMeasure& nu) {
    return std::sqrt(std::max(0.0, solve_exact(mu, nu).cost));
}

namespace {

// Hopcroft-Karp maximum matching on the threshold graph.
int max_matching_under(const Mat& cost, double threshold) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    std::vector<std::vector<int>> edges(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            if (cost(i, j) <= threshold) edges[i].push_back(j);

    std::vector<int> match_l(n, -1), match_r(m, -1), dist(n);
    const int INF = std::numeric_limits<int>::max();

    const auto bfs = [&]() {
        std::deque<int> q;
        bool found = false;
        for (int i = 0; i < n; ++i) {
            if (match_l[i] == -1) {
                dist[i] = 0;
                q.push_back(i);
            } else {
                dist[i] = INF;
            }
        }
        while (!q.empty()) {
            const int i = q.front();
            q.pop_front();
            for (const int j : edges[i]) {
                const int k = match_r[j];
                if (k == -1) {
                    found = true;
                } else if (dist[k] == INF) {
                    dist[k] = dist[i] + 1;
                    q.push_back(k);
                }
            }
        }
        return found;
    };
    std::function<bool(int)> dfs = [&](int i) {
        for (const int j : edges[i]) {
            const int k = match_r[j];
            if (k == -1 || (dist[k] == dist[i] + 1 && dfs(k))) {
                match_l[i] = j;
                match_r[j] = i;
                return true;
            }
        }
        dist[i] = INF;
        return false;
    };

    int matched = 0;
    while (bfs())
        for (int i = 0; i < n; ++i)
            if (match_l[i] == -1 && dfs(i)) ++matched;
    return matched;
}

// Dinic max-flow with double capacities, for the weighted bottleneck.
struct Dinic {
    struct Edge {
        int to;
        double cap;
        int rev;
    };
    std::vector<std::vector<Edge>> graph;
    std::vector<int> level, iter;

    explicit Dinic(int n) : graph(n), level(n), iter(n) {}

    void add_edge(int from, int to, double cap) {
        graph[from].push_back({to, cap, static_cast<int>(graph[to].size())});
        graph[to].push_back({from, 0.0, static_cast<int>(graph[from].size()) - 1});
    }

    bool bfs(int s, int t) {
        std::fill(level.begin(), level.end(), -1);
        std::deque<int> q;
        level[s] = 0;
        q.push_back(s);
        while (!q.empty()) {
            const int v = q.front();
            q.pop_front();
            for (const Edge& e : graph[v])
                if (e.cap > 1e-15 && level[e.to] < 0) {
                    level[e.to] = level[v] + 1;
                    q.push_back(e.to);
                }
        }
        return level[t] >= 0;
    }

    double dfs(int v, int t, double f) {
        if (v == t) return f;
        for (int& i = iter[v]; i < static_cast<int>(graph[v].size()); ++i) {
            Edge& e = graph[v][i];
            if (e.cap > 1e-15 && level[v] < level[e.to]) {
                const double d = dfs(e.to, t, std::min(f, e.cap));
                if (d > 0) {
                    e.cap -= d;
                    graph[e.to][e.rev].cap += d;
                    return d;
                }
            }
        }
        return 0.0;
    }

    double max_flow(int s, int t) {
        double flow = 0.0;
        while (bfs(s, t)) {
            std::fill(iter.begin(), iter.end(), 0);
            double f;
            while ((f = dfs(s, t, kInf)) > 0) flow += f;
        }
        return flow;
    }
};

bool flow_feasible_under(const Vec& wa, const Vec& wb, const Mat& cost,
                         double threshold) {
    const int n = static_cast<int>(wa.size());
    const int m = static_cast<int>(wb.size());
    Dinic dinic(n + m + 2);
    const int s = n + m, t = n + m + 1;
    for (int i = 0; i < n; ++i) dinic.add_edge(s, i, wa[i]);
    for (int j = 0; j < m; ++j) dinic.add_edge(n + j, t, wb[j]);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            if (cost(i, j) <= threshold) dinic.add_edge(i, n + j, wa[i]);
    const double total = wa.sum();
    return dinic.max_flow(s, t) >= total * (1.0 - 1e-9);
}

}  // namespace

double bottleneck_cost(const Vec& mu_weights, const Vec& nu_weights,
                       const Mat& cost) {
    std::vector<double> thresholds(cost.data(), cost.data() + cost.size());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                     thresholds.end());

    const bool unit_case =
        mu_weights.size() == nu_weights.size() &&
        (mu_weights.array() - mu_weights[0]).abs().maxCoeff() <=
            1e-12 * std::abs(mu_weights[0]) &&
        (nu_weights.array() - mu_weights[0]).abs().maxCoeff() <=
            1e-12 * std::abs(mu_weights[0]);
    const int n = static_cast<int>(mu_weights.size());

    const auto feasible = [&](double threshold) {
        if (unit_case) return max_matching_under(cost, threshold) == n;
        return flow_feasible_under(mu_weights, nu_weights, cost, threshold);
    };

    std::size_t lo = 0, hi = thresholds.size() - 1;
    if (feasible(thresholds[lo])) return thresholds[lo];
    if (!feasible(thresholds[hi]))
        fail(ErrorCode::NonConvergence, "bottleneck: infeasible at max cost");
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (feasible(thresholds[mid]))
            hi = mid;
        else
            lo = mid;
    }
    return thresholds[hi];
}

double linf_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    mu.validate();
    nu.validate();
    check_masses(mu, nu);
    const int n = mu.size(), m = nu.size();
    Mat cost(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            cost(i, j) = (mu.points.row(i) - nu.points.row(j)).norm();
    return bottleneck_cost(mu.weights, nu.weights, cost);
}

BrenierField BrenierField::translated(const Vec& shift) const {
    BrenierField out = *this;
    out.samples.rowwise() += shift.transpose();
    out.map_values.rowwise() += shift.transpose();
    return out;
}

double BrenierField::sampled_cost() const {
    double total = 0.0;
    for (int i = 0; i < size(); ++i)
        total += source_weights[i] * displacement(i).squaredNorm();
    return total;
}

BrenierField BrenierField::from_map(
    const DiscreteMeasure& mu, const std::function<Vec(const Vec&)>& map,
    const std::function<Mat(const Vec&)>& jacobian, double d3_norm) {
    const int n = mu.size(), d = mu.dim();
    BrenierField field;
    field.samples = mu.points;
    field.source_weights = mu.weights;
    field.map_values.resize(n, d);
    field.jacobians.resize(n);
    field.frames.resize(n);
    field.lambda_min.resize(n);
    field.lambda_max.resize(n);
    field.det_jacobian.resize(n);
    field.d3_surrogate = Vec::Constant(n, d3_norm);
    for (int i = 0; i < n; ++i) {
        const Vec x = mu.points.row(i).transpose();
        field.map_values.row(i) = map(x).transpose();
        Mat J = jacobian(x);
        J = 0.5 * (J + J.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> eig(J);
        field.jacobians[i] = J;
        field.frames[i] = eig.eigenvectors();
        field.lambda_min[i] = eig.eigenvalues().minCoeff();
        field.lambda_max[i] = eig.eigenvalues().maxCoeff();
        field.det_jacobian[i] = eig.eigenvalues().prod();
    }
    return field;
}

BrenierField estimate_brenier_field(const DiscreteMeasure& mu,
                                    const DiscreteMeasure& nu,
                                    int k_neighbors) {
    const int d = mu.dim();
    const int min_k = d * (d + 3) / 2;
    if (k_neighbors < min_k)
        fail(ErrorCode::InvalidInput,
             "estimate_brenier_field: k_neighbors must be >= d(d+3)/2");

    const TransportPlan plan = solve_exact(mu, nu);
    const int n = mu.size();

    BrenierField field;
    field.samples = mu.points;
    field.source_weights = mu.weights;
    field.map_values = Mat::Zero(n, d);
    if (plan.is_permutation()) {
        const auto sigma = plan.permutation();
        for (int i = 0; i < n; ++i)
            field.map_values.row(i) = nu.points.row(sigma[i]);
    } else {
        // Barycentric projection of the plan.
        Vec row_mass = Vec::Zero(n);
        for (const auto& e : plan.couplings) {
            field.map_values.row(e.i) += e.mass * nu.points.row(e.j);
            row_mass[e.i] += e.mass;
        }
        for (int i = 0; i < n; ++i) field.map_values.row(i) /= row_mass[i];
    }

    // k nearest neighbours (brute force; n is desk scale).
    const int k = std::min(k_neighbors, n - 1);
    std::vector<std::vector<int>> neighbors(n);
    {
        std::vector<std::pair<double, int>> dist(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                dist[j] = {(mu.points.row(i) - mu.points.row(j)).squaredNorm(),
                           j};
            std::partial_sort(dist.begin(), dist.begin() + k + 1, dist.end());
            for (int j = 0; j < k + 1; ++j)
                if (dist[j].second != i) neighbors[i].push_back(dist[j].second);
        }
    }

    field.jacobians.resize(n);
    field.frames.resize(n);
    field.lambda_min.resize(n);
    field.lambda_max.resize(n);
    field.det_jacobian.resize(n);
    field.d3_surrogate = Vec::Zero(n);

    for (int i = 0; i < n; ++i) {
        const auto& nb = neighbors[i];
        const Vec xi = mu.points.row(i).transpose();
        const Vec ti = field.map_values.row(i).transpose();

        // Weighted least-squares affine fit over the matched pairs.
        double radius = 0.0;
        for (const int j : nb)
            radius = std::max(radius, (mu.points.row(j).transpose() - xi).norm());
        Mat xtx = Mat::Zero(d, d);
        Mat xty = Mat::Zero(d, d);
        for (const int j : nb) {
            const Vec dx = mu.points.row(j).transpose() - xi;
            const Vec dy = field.map_values.row(j).transpose() - ti;
            const double w = std::exp(-sqr(dx.norm() / radius));
            xtx += w * dx * dx.transpose();
            xty += w * dx * dy.transpose();
        }
        Eigen::FullPivLU<Mat> lu(xtx);
        if (!lu.isInvertible() ||
            lu.rcond() < 1e-12)
            fail(ErrorCode::DegenerateNeighborhood,
                 "estimate_brenier_field: rank-deficient fit at sample " +
                     std::to_string(i));
        Mat gradient = (lu.solve(xty)).transpose();  // dy ~ gradient * dx

        Mat sym = 0.5 * (gradient + gradient.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
        Vec lam = eig.eigenvalues().cwiseMax(1e-6);
        field.jacobians[i] =
            eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
        field.frames[i] = eig.eigenvectors();
        field.lambda_min[i] = lam.minCoeff();
        field.lambda_max[i] = lam.maxCoeff();
        field.det_jacobian[i] = lam.prod();
    }

    // First difference of Jacobians over neighbour pairs as a |D^3 psi|
    // stand-in; any consistent overestimate is safe for the radius rule.
    for (int i = 0; i < n; ++i) {
        std::vector<int> cluster = neighbors[i];
        cluster.push_back(i);
        double worst = 0.0;
        for (std::size_t a = 0; a < cluster.size(); ++a)
            for (std::size_t b = a + 1; b < cluster.size(); ++b) {
                const int ja = cluster[a], jb = cluster[b];
                const double gap =
                    (mu.points.row(ja) - mu.points.row(jb)).norm();
                if (gap < 1e-12) continue;
                Eigen::SelfAdjointEigenSolver<Mat> eig(
                    field.jacobians[ja] - field.jacobians[jb]);
                const double opnorm =
                    eig.eigenvalues().cwiseAbs().maxCoeff();
                worst = std::max(worst, opnorm / gap);
            }
        field.d3_surrogate[i] = worst;
    }
    return field;
}

std::vector<double> plan_stability_experiment(
    const std::vector<DiscreteMeasure>& mu_seq,
    const std::vector<DiscreteMeasure>& nu_seq, const DiscreteMeasure& mu,
    const DiscreteMeasure& nu) {
    if (mu_seq.size() != nu_seq.size())
        fail(ErrorCode::InvalidInput, "plan_stability: sequence length gap");

    const TransportPlan plan = solve_exact(mu, nu);
    const int d = mu.dim();

    // The plan as a weighted cloud in R^{2d}.
    const auto lift = [d](const TransportPlan& p) {
        DiscreteMeasure cloud;
        cloud.points.resize(static_cast<int>(p.couplings.size()), 2 * d);
        cloud.weights.resize(static_cast<int>(p.couplings.size()));
        for (std::size_t e = 0; e < p.couplings.size(); ++e) {
            const auto& entry = p.couplings[e];
            cloud.points.row(static_cast<int>(e))
                << p.source.points.row(entry.i),
                p.target.points.row(entry.j);
            cloud.weights[static_cast<int>(e)] = entry.mass;
        }
        return cloud;
    };
    const DiscreteMeasure base = lift(plan);

    std::vector<double> costs;
    costs.reserve(mu_seq.size());
    for (std::size_t k = 0; k < mu_seq.size(); ++k) {
        const TransportPlan plan_k = solve_exact(mu_seq[k], nu_seq[k]);
        const DiscreteMeasure other = lift(plan_k);
        costs.push_back(solve_exact(base, other).cost);
    }
    return costs;
}

}  // namespace shapeflow
