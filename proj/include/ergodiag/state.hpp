#pragma once

// State spaces for the model zoo: dyadic levels {0} u {2^i}, the half-line x
// torus cylinder, lattice triples embedded via (i, 0...0, 2^-k), plain reals,
// and pairs for coupled chains.

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>

namespace ergodiag {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// {0} u {2^i : i >= 1}, stored as the exponent. exp == kZeroMarker is the
// absorbing state 0; otherwise exp >= 1.
struct DyadicState {
    static constexpr int kZeroMarker = -1;
    int exp = kZeroMarker;

    bool is_zero() const { return exp == kZeroMarker; }
    double value() const { return is_zero() ? 0.0 : std::ldexp(1.0, exp); }
    static DyadicState zero() { return DyadicState{kZeroMarker}; }
    static DyadicState level(int i) {
        if (i < 1) throw std::invalid_argument("DyadicState: exponent must be >= 1");
        return DyadicState{i};
    }
    auto operator<=>(const DyadicState&) const = default;
};

// Point on R+ x T; angle kept normalized into [0, 2*pi).
struct TorusPoint {
    double radial = 0.0;
    double angle = 0.0;

    static double wrap(double a) {
        double r = std::fmod(a, kTwoPi);
        if (r < 0.0) r += kTwoPi;
        return r;
    }
    static TorusPoint make(double radial, double angle) {
        if (!(radial >= 0.0)) throw std::invalid_argument("TorusPoint: radial must be >= 0");
        return TorusPoint{radial, wrap(angle)};
    }
    auto operator<=>(const TorusPoint&) const = default;
};

// Index triple (i, j, k) of the lattice counterexample; scale == kInf encodes
// k = infinity, where 2^-k is exactly 0.
struct LatticeSite {
    static constexpr int kInf = std::numeric_limits<int>::max();
    int layer = 1;  // i >= 1
    int depth = 0;  // j >= 0
    int scale = 1;  // k >= 1 or kInf

    double scale_value() const { return scale == kInf ? 0.0 : std::ldexp(1.0, -scale); }
    static LatticeSite make(int i, int j, int k) {
        if (i < 1 || j < 0 || k < 1) throw std::invalid_argument("LatticeSite: bad indices");
        return LatticeSite{i, j, k};
    }
    auto operator<=>(const LatticeSite&) const = default;
};

// Plain point on the real line, used by the generic distance routines.
struct RealPoint {
    double x = 0.0;
    auto operator<=>(const RealPoint&) const = default;
};

class State;

// Two component states of a coupled chain. Components are immutable and
// shared; a StatePair never nests further in practice but nothing forbids it.
struct StatePair {
    std::shared_ptr<const State> first;
    std::shared_ptr<const State> second;
};

class State {
public:
    using Rep = std::variant<DyadicState, TorusPoint, LatticeSite, RealPoint, StatePair>;

    State() : rep_(DyadicState::zero()) {}
    State(DyadicState s) : rep_(s) {}
    State(TorusPoint s) : rep_(s) {}
    State(LatticeSite s) : rep_(s) {}
    State(RealPoint s) : rep_(s) {}
    State(const State& a, const State& b)
        : rep_(StatePair{std::make_shared<State>(a), std::make_shared<State>(b)}) {}

    const Rep& rep() const { return rep_; }

    template <typename T>
    bool is() const { return std::holds_alternative<T>(rep_); }
    template <typename T>
    const T& as() const { return std::get<T>(rep_); }

    const State& pair_first() const { return *as<StatePair>().first; }
    const State& pair_second() const { return *as<StatePair>().second; }

    friend bool operator==(const State& a, const State& b) { return compare(a, b) == 0; }
    friend bool operator<(const State& a, const State& b) { return compare(a, b) < 0; }

    static int compare(const State& a, const State& b);

    std::string to_string() const;

private:
    Rep rep_;
};

inline int State::compare(const State& a, const State& b) {
    if (a.rep_.index() != b.rep_.index())
        return a.rep_.index() < b.rep_.index() ? -1 : 1;
    auto cmp3 = [](auto x, auto y) { return x < y ? -1 : (y < x ? 1 : 0); };
    switch (a.rep_.index()) {
        case 0: {
            return cmp3(a.as<DyadicState>().exp, b.as<DyadicState>().exp);
        }
        case 1: {
            const auto &x = a.as<TorusPoint>(), &y = b.as<TorusPoint>();
            if (int c = cmp3(x.radial, y.radial)) return c;
            return cmp3(x.angle, y.angle);
        }
        case 2: {
            const auto &x = a.as<LatticeSite>(), &y = b.as<LatticeSite>();
            if (int c = cmp3(x.layer, y.layer)) return c;
            if (int c = cmp3(x.depth, y.depth)) return c;
            return cmp3(x.scale, y.scale);
        }
        case 3: {
            return cmp3(a.as<RealPoint>().x, b.as<RealPoint>().x);
        }
        default: {
            if (int c = compare(a.pair_first(), b.pair_first())) return c;
            return compare(a.pair_second(), b.pair_second());
        }
    }
}

inline std::string State::to_string() const {
    switch (rep_.index()) {
        case 0: {
            const auto& d = as<DyadicState>();
            return d.is_zero() ? "0" : "2^" + std::to_string(d.exp);
        }
        case 1: {
            const auto& t = as<TorusPoint>();
            return "(" + std::to_string(t.radial) + "," + std::to_string(t.angle) + ")";
        }
        case 2: {
            const auto& l = as<LatticeSite>();
            std::string k = l.scale == LatticeSite::kInf ? "inf" : std::to_string(l.scale);
            return "h(" + std::to_string(l.layer) + "," + std::to_string(l.depth) + "," + k + ")";
        }
        case 3:
            return std::to_string(as<RealPoint>().x);
        default:
            return "(" + pair_first().to_string() + " | " + pair_second().to_string() + ")";
    }
}

// A metric on states. Symmetry, nonnegativity and the triangle inequality are
// checked by property tests on random triples, not at call time.
struct Metric {
    std::string name;
    std::function<double(const State&, const State&)> distance;

    double operator()(const State& a, const State& b) const { return distance(a, b); }
};

inline double arc_distance(double a, double b) {
    double d = std::fabs(TorusPoint::wrap(a) - TorusPoint::wrap(b));
    return std::min(d, kTwoPi - d);
}

// |x - y| on dyadic values and real points.
inline Metric absolute_metric() {
    return Metric{"abs", [](const State& a, const State& b) {
        auto val = [](const State& s) {
            if (s.is<DyadicState>()) return s.as<DyadicState>().value();
            if (s.is<RealPoint>()) return s.as<RealPoint>().x;
            throw std::invalid_argument("absolute_metric: state has no real-line embedding");
        };
        return std::fabs(val(a) - val(b));
    }};
}

// |x - x'| + arc(y, y') on the cylinder. The additive form keeps W_1
// decomposable across the two components.
inline Metric cylinder_metric() {
    return Metric{"cylinder", [](const State& a, const State& b) {
        const auto &p = a.as<TorusPoint>(), &q = b.as<TorusPoint>();
        return std::fabs(p.radial - q.radial) + arc_distance(p.angle, q.angle);
    }};
}

// |i-i'| + |j-j'| + |2^-k - 2^-k'| on lattice sites. The depth term makes the
// escape of mass from any fixed ball exact.
inline Metric lattice_metric() {
    return Metric{"lattice", [](const State& a, const State& b) {
        const auto &p = a.as<LatticeSite>(), &q = b.as<LatticeSite>();
        return std::abs(p.layer - q.layer) + std::abs(p.depth - q.depth) +
               std::fabs(p.scale_value() - q.scale_value());
    }};
}

// Real-line embedding where one exists (dyadic values and real points).
inline bool real_embedding(const State& s, double& out) {
    if (s.is<DyadicState>()) {
        out = s.as<DyadicState>().value();
        return true;
    }
    if (s.is<RealPoint>()) {
        out = s.as<RealPoint>().x;
        return true;
    }
    return false;
}

}  // namespace ergodiag
