#pragma once

// Exact optimal transport on finitely supported measures: a dense
// transportation simplex (MODI / u-v method) for general ground costs, and
// the quantile-coupling fast path for real-line supports.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ergodiag/distribution.hpp"
#include "ergodiag/state.hpp"

namespace ergodiag {

inline constexpr double kMarginalTolerance = 1e-9;
inline constexpr std::size_t kDefaultSupportCap = 2000;

struct TransportEntry {
    std::size_t source = 0;
    std::size_t target = 0;
    double mass = 0.0;
};

struct TransportPlan {
    std::vector<State> sources;
    std::vector<State> targets;
    std::vector<TransportEntry> entries;

    std::vector<double> row_sums() const {
        std::vector<double> r(sources.size(), 0.0);
        for (const auto& e : entries) r[e.source] += e.mass;
        return r;
    }
    std::vector<double> col_sums() const {
        std::vector<double> c(targets.size(), 0.0);
        for (const auto& e : entries) c[e.target] += e.mass;
        return c;
    }
};

namespace detail {

// Min-cost solution of the balanced transportation problem by the
// transportation simplex. supplies and demands must have equal totals.
// Returns basic cells with their allocations.
class TransportSimplex {
public:
    TransportSimplex(std::vector<double> supply, std::vector<double> demand,
                     const std::vector<double>& cost)
        : a_(std::move(supply)), b_(std::move(demand)), c_(cost),
          m_(a_.size()), n_(b_.size()) {
        if (c_.size() != m_ * n_) throw std::invalid_argument("TransportSimplex: cost shape");
        northwest_corner();
    }

    void solve() {
        const std::size_t max_iters = 10000 * (m_ + n_);
        double scale = 1.0;
        for (double c : c_) scale = std::max(scale, std::fabs(c));
        const double tol = 1e-12 * scale;
        for (std::size_t iter = 0; iter < max_iters; ++iter) {
            compute_potentials();
            std::size_t ei = 0, ej = 0;
            double best = -tol;
            bool found = false;
            for (std::size_t i = 0; i < m_; ++i)
                for (std::size_t j = 0; j < n_; ++j) {
                    if (in_basis(i, j)) continue;
                    double red = c_[i * n_ + j] - u_[i] - v_[j];
                    if (red < best) {
                        best = red;
                        ei = i;
                        ej = j;
                        found = true;
                    }
                }
            if (!found) return;
            pivot(ei, ej);
        }
        throw std::runtime_error("TransportSimplex: iteration cap exceeded");
    }

    double cost() const {
        double total = 0.0;
        for (const auto& cell : basis_) total += cell.alloc * c_[cell.i * n_ + cell.j];
        return total;
    }

    std::vector<TransportEntry> entries() const {
        std::vector<TransportEntry> out;
        for (const auto& cell : basis_)
            if (cell.alloc > 0.0) out.push_back({cell.i, cell.j, cell.alloc});
        return out;
    }

private:
    struct Cell {
        std::size_t i, j;
        double alloc;
    };

    void northwest_corner() {
        std::vector<double> a = a_, b = b_;
        std::size_t i = 0, j = 0;
        // Exactly m + n - 1 basic cells; ties keep a zero-allocation cell.
        while (basis_.size() < m_ + n_ - 1) {
            double q = std::min(a[i], b[j]);
            basis_.push_back({i, j, q});
            a[i] -= q;
            b[j] -= q;
            if (i + 1 < m_ && (a[i] <= b[j] || j + 1 == n_))
                ++i;
            else
                ++j;
        }
    }

    bool in_basis(std::size_t i, std::size_t j) const {
        for (const auto& cell : basis_)
            if (cell.i == i && cell.j == j) return true;
        return false;
    }

    // Dual potentials from the basis tree; nodes are rows [0, m) and columns
    // [m, m+n).
    void compute_potentials() {
        u_.assign(m_, 0.0);
        v_.assign(n_, 0.0);
        std::vector<std::vector<std::size_t>> adj(m_ + n_);
        for (std::size_t k = 0; k < basis_.size(); ++k) {
            adj[basis_[k].i].push_back(k);
            adj[m_ + basis_[k].j].push_back(k);
        }
        std::vector<char> seen(m_ + n_, 0);
        std::queue<std::size_t> q;
        q.push(0);
        seen[0] = 1;
        while (!q.empty()) {
            std::size_t node = q.front();
            q.pop();
            for (std::size_t k : adj[node]) {
                const auto& cell = basis_[k];
                std::size_t other = node < m_ ? m_ + cell.j : cell.i;
                if (seen[other]) continue;
                seen[other] = 1;
                if (node < m_)
                    v_[cell.j] = c_[cell.i * n_ + cell.j] - u_[cell.i];
                else
                    u_[cell.i] = c_[cell.i * n_ + cell.j] - v_[cell.j];
                q.push(other);
            }
        }
    }

    // Brings (ei, ej) into the basis along the unique alternating cycle.
    void pivot(std::size_t ei, std::size_t ej) {
        // Path from row node ei to column node m_+ej through the basis tree.
        std::vector<std::vector<std::size_t>> adj(m_ + n_);
        for (std::size_t k = 0; k < basis_.size(); ++k) {
            adj[basis_[k].i].push_back(k);
            adj[m_ + basis_[k].j].push_back(k);
        }
        std::vector<std::ptrdiff_t> via(m_ + n_, -1), parent(m_ + n_, -1);
        std::queue<std::size_t> q;
        q.push(ei);
        parent[ei] = static_cast<std::ptrdiff_t>(ei);
        while (!q.empty()) {
            std::size_t node = q.front();
            q.pop();
            if (node == m_ + ej) break;
            for (std::size_t k : adj[node]) {
                const auto& cell = basis_[k];
                std::size_t other = node < m_ ? m_ + cell.j : cell.i;
                if (parent[other] != -1) continue;
                parent[other] = static_cast<std::ptrdiff_t>(node);
                via[other] = static_cast<std::ptrdiff_t>(k);
                q.push(other);
            }
        }
        if (parent[m_ + ej] == -1)
            throw std::logic_error("TransportSimplex: basis is not connected");

        // Walk back collecting basis cells; cells entered from a column node
        // are the minus cells of the cycle.
        std::vector<std::size_t> minus_cells, plus_cells;
        std::size_t node = m_ + ej;
        bool minus = true;  // the edge adjacent to the entering cell's column
        while (node != ei) {
            std::size_t k = static_cast<std::size_t>(via[node]);
            (minus ? minus_cells : plus_cells).push_back(k);
            node = static_cast<std::size_t>(parent[node]);
            minus = !minus;
        }

        double theta = std::numeric_limits<double>::infinity();
        std::size_t leaving = minus_cells.front();
        for (std::size_t k : minus_cells)
            if (basis_[k].alloc < theta) {
                theta = basis_[k].alloc;
                leaving = k;
            }
        for (std::size_t k : minus_cells) basis_[k].alloc -= theta;
        for (std::size_t k : plus_cells) basis_[k].alloc += theta;
        basis_[leaving] = {ei, ej, theta};
    }

    std::vector<double> a_, b_;
    const std::vector<double>& c_;
    std::size_t m_, n_;
    std::vector<Cell> basis_;
    std::vector<double> u_, v_;
};

inline std::pair<std::vector<State>, std::vector<double>> support_of(
    const SparseDistribution& d) {
    std::vector<State> s;
    std::vector<double> w;
    for (const auto& [st, wt] : d.atoms()) {
        s.push_back(st);
        w.push_back(wt);
    }
    return {std::move(s), std::move(w)};
}

inline std::pair<std::vector<State>, std::vector<double>> support_of(const EmpiricalMeasure& d) {
    std::vector<State> s;
    std::vector<double> w;
    for (const auto& [st, wt] : d.points) {
        s.push_back(st);
        w.push_back(wt);
    }
    return {std::move(s), std::move(w)};
}

}  // namespace detail

struct WassersteinResult {
    double value = 0.0;
    TransportPlan plan;
};

// W_{p,d}(mu, nu) via the exact simplex solve; the plan attains the infimum
// and satisfies the marginal constraints to 1e-9.
template <typename MeasureA, typename MeasureB>
WassersteinResult wasserstein_exact(const MeasureA& mu, const MeasureB& nu, double p,
                                    const Metric& d,
                                    std::size_t support_cap = kDefaultSupportCap) {
    if (!(p >= 1.0)) throw std::invalid_argument("wasserstein_exact: p must be >= 1");
    auto [src, a] = detail::support_of(mu);
    auto [tgt, b] = detail::support_of(nu);
    if (src.size() + tgt.size() > support_cap)
        throw std::length_error(
            "wasserstein_exact: combined support " + std::to_string(src.size() + tgt.size()) +
            " exceeds cap " + std::to_string(support_cap) +
            "; use wasserstein_1d for line-embeddable supports or subsample");

    // Balance totals exactly; both are 1 within 1e-12 by construction.
    double sa = std::accumulate(a.begin(), a.end(), 0.0);
    double sb = std::accumulate(b.begin(), b.end(), 0.0);
    for (auto& x : b) x *= sa / sb;

    std::vector<double> cost(src.size() * tgt.size());
    for (std::size_t i = 0; i < src.size(); ++i)
        for (std::size_t j = 0; j < tgt.size(); ++j)
            cost[i * tgt.size() + j] = std::pow(d(src[i], tgt[j]), p);

    detail::TransportSimplex simplex(a, b, cost);
    simplex.solve();

    WassersteinResult res;
    res.value = std::pow(std::max(simplex.cost(), 0.0), 1.0 / p);
    res.plan.sources = std::move(src);
    res.plan.targets = std::move(tgt);
    res.plan.entries = simplex.entries();
    return res;
}

// Quantile-coupling W_p for measures supported on the real line.
template <typename MeasureA, typename MeasureB>
double wasserstein_1d(const MeasureA& mu, const MeasureB& nu, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("wasserstein_1d: p must be >= 1");
    auto embed = [](const auto& measure) {
        auto [states, weights] = detail::support_of(measure);
        std::vector<std::pair<double, double>> pts;
        pts.reserve(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) {
            double x;
            if (!real_embedding(states[i], x))
                throw std::invalid_argument("wasserstein_1d: state " + states[i].to_string() +
                                            " has no real-line embedding");
            pts.emplace_back(x, weights[i]);
        }
        std::sort(pts.begin(), pts.end());
        double total = 0.0;
        for (auto& [x, w] : pts) total += w;
        for (auto& [x, w] : pts) w /= total;
        return pts;
    };
    auto f = embed(mu), g = embed(nu);
    std::size_t i = 0, j = 0;
    double cost = 0.0, wi = f[0].second, wj = g[0].second;
    while (i < f.size() && j < g.size()) {
        double q = std::min(wi, wj);
        cost += q * std::pow(std::fabs(f[i].first - g[j].first), p);
        wi -= q;
        wj -= q;
        if (wi <= 1e-16) wi = (++i < f.size()) ? f[i].second : 0.0;
        if (wj <= 1e-16) wj = (++j < g.size()) ? g[j].second : 0.0;
    }
    return std::pow(cost, 1.0 / p);
}

}  // namespace ergodiag
