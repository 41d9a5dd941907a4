#pragma once

// JSON schemas:
//   measure  {"dim": d, "atoms": [[[z...], w], ...], "support": "bounded"|"unbounded"}
//   grid     {"times": [...], "horizon": t_k,
//             "slices": [{"b": [...], "c": [[...]], "nu": measure, "dG": g}]}
//   lattice  {"dim": d, "S0": [...],
//             "root": {"branches": [{"p": q, "dx": [...], "child": node}], "dG": 1}}
// Lattice probabilities may be given as "a/b" strings; those are checked to
// sum to one exactly.

#include "nupbr/lattice.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

namespace nupbr::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

class SchemaError : public Error {
public:
    SchemaError(const std::string& pointer, const std::string& what)
        : Error(ErrorKind::InvalidInput, "schema violation at " + (pointer.empty() ? std::string("/") : pointer) +
                                             ": " + what),
          pointer_(pointer) {}

    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

/// Non-fatal ingestion notes (e.g. symmetrized covariation matrices).
struct IngestLog {
    std::vector<std::string> warnings;
};

namespace detail {

inline const json& field(const json& j, const std::string& ptr, const char* key) {
    if (!j.is_object()) throw SchemaError(ptr, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(ptr + "/" + key, "missing field");
    return *it;
}

inline double number(const json& j, const std::string& ptr) {
    if (!j.is_number()) throw SchemaError(ptr, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw SchemaError(ptr, "number must be finite");
    return v;
}

inline Vector vector(const json& j, const std::string& ptr, Eigen::Index expected = -1) {
    if (!j.is_array()) throw SchemaError(ptr, "expected an array of numbers");
    if (expected >= 0 && static_cast<Eigen::Index>(j.size()) != expected)
        throw SchemaError(ptr, "expected length " + std::to_string(expected));
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = number(j[i], ptr + "/" + std::to_string(i));
    return v;
}

inline Matrix matrix(const json& j, const std::string& ptr, Eigen::Index d) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != d)
        throw SchemaError(ptr, "expected " + std::to_string(d) + " rows");
    Matrix m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        m.row(r) = vector(j[r], ptr + "/" + std::to_string(r), d).transpose();
    return m;
}

struct Rational {
    long long num = 0, den = 1;
};

inline std::optional<Rational> parse_rational(const std::string& s) {
    const auto slash = s.find('/');
    try {
        std::size_t used = 0;
        Rational r;
        if (slash == std::string::npos) {
            r.num = std::stoll(s, &used);
            if (used != s.size()) return std::nullopt;
            return r;
        }
        r.num = std::stoll(s.substr(0, slash), &used);
        if (used != slash) return std::nullopt;
        const std::string rest = s.substr(slash + 1);
        r.den = std::stoll(rest, &used);
        if (used != rest.size() || r.den <= 0) return std::nullopt;
        return r;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline json vector_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

} // namespace detail

inline json to_json(const Vector& v) { return detail::vector_json(v); }

inline json to_json(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(detail::vector_json(m.row(r).transpose()));
    return a;
}

inline DiscreteMeasure measure_from_json(const json& j, const std::string& ptr = "",
                                         int expected_dim = -1) {
    const int dim = static_cast<int>(detail::number(detail::field(j, ptr, "dim"), ptr + "/dim"));
    if (dim <= 0) throw SchemaError(ptr + "/dim", "dimension must be positive");
    if (expected_dim > 0 && dim != expected_dim)
        throw SchemaError(ptr + "/dim", "expected dimension " + std::to_string(expected_dim));
    SupportEnvelope env = SupportEnvelope::Bounded;
    if (auto it = j.find("support"); it != j.end()) {
        if (*it == "bounded") env = SupportEnvelope::Bounded;
        else if (*it == "unbounded") env = SupportEnvelope::UnboundedAllDirections;
        else throw SchemaError(ptr + "/support", "expected \"bounded\" or \"unbounded\"");
    }
    const json& atoms = detail::field(j, ptr, "atoms");
    if (!atoms.is_array()) throw SchemaError(ptr + "/atoms", "expected an array");
    std::vector<Atom> out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const std::string ap = ptr + "/atoms/" + std::to_string(i);
        const json& a = atoms[i];
        if (!a.is_array() || a.size() != 2) throw SchemaError(ap, "expected [point, weight]");
        Vector point = a[0].is_number() && dim == 1 ? Vector::Constant(1, detail::number(a[0], ap + "/0"))
                                                    : detail::vector(a[0], ap + "/0", dim);
        const double w = detail::number(a[1], ap + "/1");
        if (!(w > 0.0)) throw SchemaError(ap + "/1", "weight must be strictly positive");
        for (const auto& prev : out)
            if (same_point(prev.point, point)) throw SchemaError(ap + "/0", "duplicate atom point");
        out.push_back({std::move(point), w});
    }
    return DiscreteMeasure(dim, std::move(out), env);
}

inline json to_json(const DiscreteMeasure& m) {
    json atoms = json::array();
    for (const auto& a : m.atoms()) atoms.push_back(json::array({detail::vector_json(a.point), a.weight}));
    return json{{"dim", m.dim()},
                {"atoms", std::move(atoms)},
                {"support", m.envelope() == SupportEnvelope::Bounded ? "bounded" : "unbounded"}};
}

inline LocalCharacteristic characteristic_from_json(const json& j, const std::string& ptr,
                                                    IngestLog* log = nullptr, int expected_dim = -1) {
    Vector b = detail::vector(detail::field(j, ptr, "b"), ptr + "/b");
    const int d = static_cast<int>(b.size());
    if (d == 0) throw SchemaError(ptr + "/b", "empty drift vector");
    if (expected_dim > 0 && d != expected_dim)
        throw SchemaError(ptr + "/b", "expected dimension " + std::to_string(expected_dim));
    Matrix c = detail::matrix(detail::field(j, ptr, "c"), ptr + "/c", d);
    DiscreteMeasure nu = measure_from_json(detail::field(j, ptr, "nu"), ptr + "/nu", d);
    double dG = 1.0;
    if (auto it = j.find("dG"); it != j.end()) dG = detail::number(*it, ptr + "/dG");
    if (!(dG > 0.0)) throw SchemaError(ptr + "/dG", "dG must be strictly positive");
    LocalCharacteristic lc{std::move(b), std::move(c), std::move(nu), dG};
    const double asym = symmetrize(lc);
    if (asym > 0.0 && log)
        log->warnings.push_back(ptr + "/c: asymmetric by " + std::to_string(asym) +
                                ", replaced by (c + c^T)/2");
    return lc;
}

inline json to_json(const LocalCharacteristic& lc) {
    return json{{"b", to_json(lc.b)}, {"c", to_json(lc.c)}, {"nu", to_json(lc.nu)}, {"dG", lc.dG}};
}

inline CharacteristicGrid grid_from_json(const json& j, IngestLog* log = nullptr) {
    CharacteristicGrid grid;
    const json& times = detail::field(j, "", "times");
    grid.times.clear();
    const Vector t = detail::vector(times, "/times");
    grid.times.assign(t.data(), t.data() + t.size());
    const json& slices = detail::field(j, "", "slices");
    if (!slices.is_array() || slices.empty()) throw SchemaError("/slices", "expected a nonempty array");
    if (slices.size() != grid.times.size()) throw SchemaError("/slices", "one slice per time required");
    for (std::size_t i = 0; i < grid.times.size(); ++i) {
        if (i == 0 && grid.times[0] < 0.0) throw SchemaError("/times/0", "times must start at >= 0");
        if (i > 0 && !(grid.times[i] > grid.times[i - 1]))
            throw SchemaError("/times/" + std::to_string(i), "times must be strictly increasing");
    }
    for (std::size_t i = 0; i < slices.size(); ++i)
        grid.slices.push_back(characteristic_from_json(slices[i], "/slices/" + std::to_string(i), log,
                                                       i == 0 ? -1 : grid.slices.front().dim()));
    const double horizon = detail::number(detail::field(j, "", "horizon"), "/horizon");
    bool found = false;
    for (std::size_t i = 0; i < grid.times.size(); ++i)
        if (grid.times[i] == horizon) { grid.horizon_index = i; found = true; }
    if (!found) throw SchemaError("/horizon", "horizon must equal one of the grid times");
    return grid;
}

inline json to_json(const CharacteristicGrid& grid) {
    json slices = json::array();
    for (const auto& s : grid.slices) slices.push_back(to_json(s));
    json times = json::array();
    for (double t : grid.times) times.push_back(t);
    return json{{"times", std::move(times)},
                {"horizon", grid.times.at(grid.horizon_index)},
                {"slices", std::move(slices)}};
}

namespace detail {

inline void read_lattice_node(const json& j, const std::string& ptr, LatticeModel& model,
                              std::size_t id) {
    if (!j.is_object()) throw SchemaError(ptr, "expected a node object");
    if (auto it = j.find("dG"); it != j.end()) {
        const double dG = number(*it, ptr + "/dG");
        if (!(dG > 0.0)) throw SchemaError(ptr + "/dG", "dG must be strictly positive");
        model.set_dG(id, dG);
    }
    auto it = j.find("branches");
    if (it == j.end()) return;
    if (!it->is_array()) throw SchemaError(ptr + "/branches", "expected an array");
    if (it->size() > kMaxLatticeBranching)
        throw SchemaError(ptr + "/branches", "branching exceeds cap " + std::to_string(kMaxLatticeBranching));
    if (model.node(id).depth >= kMaxLatticeDepth && !it->empty())
        throw SchemaError(ptr, "depth exceeds cap " + std::to_string(kMaxLatticeDepth));

    // Exact check when every probability is rational.
    bool all_rational = !it->empty();
    long long num = 0, den = 1;
    std::vector<std::pair<std::size_t, const json*>> children;
    for (std::size_t k = 0; k < it->size(); ++k) {
        const std::string bp = ptr + "/branches/" + std::to_string(k);
        const json& br = (*it)[k];
        const json& pj = field(br, bp, "p");
        double p = 0.0;
        if (pj.is_string()) {
            const auto r = parse_rational(pj.get<std::string>());
            if (!r) throw SchemaError(bp + "/p", "expected a number or an \"a/b\" rational");
            p = static_cast<double>(r->num) / static_cast<double>(r->den);
            if (all_rational) {
                const long long g = std::gcd(den, r->den);
                num = num * (r->den / g) + r->num * (den / g);
                den = den / g * r->den;
                const long long h = std::gcd(num < 0 ? -num : num, den);
                if (h > 1) { num /= h; den /= h; }
            }
        } else {
            p = number(pj, bp + "/p");
            all_rational = false;
        }
        if (!(p > 0.0)) throw SchemaError(bp + "/p", "probability must be strictly positive");
        Vector dx = vector(field(br, bp, "dx"), bp + "/dx", model.dim());
        if ((dx.array() <= -1.0).any()) throw SchemaError(bp + "/dx", "jumps must exceed -1");
        const std::size_t child = model.add_branch(id, p, std::move(dx));
        auto cit = br.find("child");
        if (cit != br.end() && !cit->is_null()) children.emplace_back(child, &*cit);
    }
    if (all_rational && num != den)
        throw SchemaError(ptr + "/branches", "rational probabilities do not sum to 1");
    for (auto& [child, cj] : children) {
        std::size_t k = 0;
        for (; k < model.node(id).branches.size(); ++k)
            if (model.node(id).branches[k].child == child) break;
        read_lattice_node(*cj, ptr + "/branches/" + std::to_string(k) + "/child", model, child);
    }
}

} // namespace detail

/// Node ids: the root is 0; the children of a node get consecutive ids
/// before any of their subtrees are read.
inline LatticeModel lattice_from_json(const json& j) {
    const int dim = static_cast<int>(detail::number(detail::field(j, "", "dim"), "/dim"));
    if (dim <= 0) throw SchemaError("/dim", "dimension must be positive");
    Vector S0 = detail::vector(detail::field(j, "", "S0"), "/S0", dim);
    if ((S0.array() <= 0.0).any()) throw SchemaError("/S0", "prices must be strictly positive");
    LatticeModel model(dim, std::move(S0));
    detail::read_lattice_node(detail::field(j, "", "root"), "/root", model, 0);
    const auto issues = validate_lattice(model);
    if (!issues.empty()) throw SchemaError("/root", issues.front());
    return model;
}

namespace detail {

inline json lattice_node_json(const LatticeModel& model, std::size_t id) {
    const auto& n = model.node(id);
    json node = json::object();
    if (!n.is_leaf()) {
        json branches = json::array();
        for (const auto& br : n.branches) {
            json b{{"p", br.prob}, {"dx", vector_json(br.jump)}};
            if (!model.node(br.child).is_leaf() || model.node(br.child).dG != 1.0)
                b["child"] = lattice_node_json(model, br.child);
            branches.push_back(std::move(b));
        }
        node["branches"] = std::move(branches);
    }
    node["dG"] = n.dG;
    return node;
}

} // namespace detail

inline json to_json(const LatticeModel& model) {
    return json{{"dim", model.dim()},
                {"S0", to_json(model.S0())},
                {"root", detail::lattice_node_json(model, 0)}};
}

/// Serializes with every floating-point value printed to 17 significant
/// digits; objects keep insertion order. Non-finite numbers become null.
inline void dump17(const json& j, std::string& out, int indent = 2, int level = 0) {
    auto newline = [&](int lvl) {
        out += '\n';
        out.append(static_cast<std::size_t>(indent * lvl), ' ');
    };
    auto scalar = [](const json& v) { return !v.is_array() && !v.is_object(); };
    switch (j.type()) {
    case json::value_t::number_float: {
        const double v = j.get<double>();
        if (!std::isfinite(v)) { out += "null"; break; }
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
        break;
    }
    case json::value_t::array: {
        if (j.empty()) { out += "[]"; break; }
        bool flat = true;
        for (const auto& e : j) flat = flat && scalar(e);
        out += '[';
        bool first = true;
        for (const auto& e : j) {
            if (!first) out += flat ? ", " : ",";
            first = false;
            if (!flat) newline(level + 1);
            dump17(e, out, indent, level + 1);
        }
        if (!flat) newline(level);
        out += ']';
        break;
    }
    case json::value_t::object: {
        if (j.empty()) { out += "{}"; break; }
        out += '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ',';
            first = false;
            newline(level + 1);
            out += json(it.key()).dump();
            out += ": ";
            dump17(it.value(), out, indent, level + 1);
        }
        newline(level);
        out += '}';
        break;
    }
    default:
        out += j.dump();
    }
}

inline std::string dump17(const json& j) {
    std::string out;
    dump17(j, out);
    out += '\n';
    return out;
}

} // namespace nupbr::io
