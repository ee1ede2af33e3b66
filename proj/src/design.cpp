#include "survmct/design.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <stdexcept>

namespace survmct {

WeightSpec WeightSpec::fleming_harrington(int r, int g) {
    if (r < 0 || g < 0) {
        throw std::invalid_argument("fleming_harrington: exponents must be >= 0");
    }
    return WeightSpec(FlemingHarrington{r, g},
                      "fh:" + std::to_string(r) + ":" + std::to_string(g));
}

WeightSpec WeightSpec::crossing() {
    return WeightSpec(Crossing{}, "cross");
}

WeightSpec WeightSpec::tabulated(std::vector<std::pair<double, double>> nodes,
                                 std::string label) {
    if (nodes.size() < 2) {
        throw std::invalid_argument("tabulated weight: need at least two nodes");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!std::isfinite(nodes[i].first) || !std::isfinite(nodes[i].second) ||
            nodes[i].first < 0.0 || nodes[i].first > 1.0) {
            throw std::invalid_argument("tabulated weight: nodes must be finite with u in [0,1]");
        }
        if (i > 0 && !(nodes[i].first > nodes[i - 1].first)) {
            throw std::invalid_argument("tabulated weight: node abscissae must be strictly increasing");
        }
    }
    return WeightSpec(Tabulated{std::move(nodes)}, std::move(label));
}

double WeightSpec::operator()(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) {
        throw std::invalid_argument("weight evaluation: u must lie in [0,1]");
    }
    if (const auto* fh = std::get_if<FlemingHarrington>(&kind_)) {
        // pow(0,0) == 1, so r = 0 or g = 0 behaves as the constant factor 1.
        return std::pow(u, fh->r) * std::pow(1.0 - u, fh->g);
    }
    if (std::holds_alternative<Crossing>(kind_)) {
        return 1.0 - 2.0 * u;
    }
    const auto& tab = std::get<Tabulated>(kind_);
    const auto& nodes = tab.nodes;
    if (u <= nodes.front().first) return nodes.front().second;
    if (u >= nodes.back().first) return nodes.back().second;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), u,
                               [](double x, const auto& node) { return x < node.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double s = (u - lo.first) / (hi.first - lo.first);
    return lo.second + s * (hi.second - lo.second);
}

std::vector<WeightSpec> default_weights() {
    std::vector<WeightSpec> w;
    w.push_back(WeightSpec::fleming_harrington(0, 0));
    w.push_back(WeightSpec::crossing());
    return w;
}

namespace {

int parse_int(std::string_view tok, std::string_view what) {
    int value = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw std::invalid_argument(std::string(what) + ": cannot parse integer '" +
                                    std::string(tok) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace

std::vector<WeightSpec> parse_weights(std::string_view spec) {
    std::vector<WeightSpec> out;
    for (auto tok : split(spec, ',')) {
        if (tok.empty()) {
            throw std::invalid_argument("weight list: empty token");
        }
        if (tok == "cross") {
            out.push_back(WeightSpec::crossing());
            continue;
        }
        auto parts = split(tok, ':');
        if (parts.size() == 3 && parts[0] == "fh") {
            const int r = parse_int(parts[1], "weight list");
            const int g = parse_int(parts[2], "weight list");
            if (r < 0 || g < 0) {
                throw std::invalid_argument("weight list: fh exponents must be >= 0");
            }
            out.push_back(WeightSpec::fleming_harrington(r, g));
            continue;
        }
        throw std::invalid_argument("weight list: unknown token '" + std::string(tok) +
                                    "' (expected fh:<r>:<g> or cross)");
    }
    if (out.empty()) {
        throw std::invalid_argument("weight list: no weights given");
    }
    return out;
}

bool weights_linearly_independent(std::span<const WeightSpec> weights, double tol) {
    if (weights.empty()) return false;
    const int m = static_cast<int>(weights.size());
    constexpr int grid = 201;
    Eigen::MatrixXd vals(grid, m);
    for (int i = 0; i < grid; ++i) {
        const double u = static_cast<double>(i) / (grid - 1);
        for (int a = 0; a < m; ++a) vals(i, a) = weights[static_cast<std::size_t>(a)](u);
    }
    const Eigen::MatrixXd gram = vals.transpose() * vals;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(lmax > 0.0)) return false;
    int rank = 0;
    for (int i = 0; i < m; ++i) {
        if (es.eigenvalues()[i] > tol * lmax) ++rank;
    }
    return rank == m;
}

std::vector<double> ContrastMatrix::row(int i) const {
    const auto& p = pairs.at(static_cast<std::size_t>(i));
    std::vector<double> r(static_cast<std::size_t>(k), 0.0);
    r[static_cast<std::size_t>(p.first)] = -1.0;
    r[static_cast<std::size_t>(p.second)] = 1.0;
    return r;
}

ContrastMatrix dunnett(int k) {
    if (k < 2) {
        throw std::invalid_argument("dunnett: need at least two groups");
    }
    ContrastMatrix cm;
    cm.k = k;
    for (int j = 1; j < k; ++j) cm.pairs.emplace_back(0, j);
    return cm;
}

ContrastMatrix tukey(int k) {
    if (k < 2) {
        throw std::invalid_argument("tukey: need at least two groups");
    }
    ContrastMatrix cm;
    cm.k = k;
    for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) cm.pairs.emplace_back(a, b);
    }
    // Reorder so the many-to-one block comes first: (0,1)..(0,k-1), then
    // (1,2)...  That is already the natural order of the loops above.
    return cm;
}

ContrastMatrix custom_contrasts(int k, std::span<const std::pair<int, int>> pairs) {
    if (k < 2) {
        throw std::invalid_argument("contrasts: need at least two groups");
    }
    if (pairs.empty()) {
        throw std::invalid_argument("contrasts: empty pair list");
    }
    ContrastMatrix cm;
    cm.k = k;
    for (auto [a, b] : pairs) {
        if (a < 0 || b < 0 || a >= k || b >= k) {
            throw std::invalid_argument("contrasts: group index out of range");
        }
        if (a >= b) {
            throw std::invalid_argument("contrasts: pairs must be ordered with j1 < j2");
        }
        if (std::find(cm.pairs.begin(), cm.pairs.end(), std::pair<int, int>{a, b}) !=
            cm.pairs.end()) {
            throw std::invalid_argument("contrasts: duplicate pair");
        }
        cm.pairs.emplace_back(a, b);
    }
    return cm;
}

ContrastMatrix parse_contrasts(std::string_view spec, int k) {
    if (spec == "dunnett") return dunnett(k);
    if (spec == "tukey") return tukey(k);
    constexpr std::string_view prefix = "pairs:";
    if (spec.substr(0, prefix.size()) == prefix) {
        std::vector<std::pair<int, int>> pairs;
        for (auto tok : split(spec.substr(prefix.size()), ',')) {
            auto parts = split(tok, '-');
            if (parts.size() != 2) {
                throw std::invalid_argument("contrasts: expected '<a>-<b>' pair, got '" +
                                            std::string(tok) + "'");
            }
            const int a = parse_int(parts[0], "contrasts");
            const int b = parse_int(parts[1], "contrasts");
            if (a < 1 || b < 1 || a > k || b > k) {
                throw std::invalid_argument("contrasts: group indices are 1-based and must be <= " +
                                            std::to_string(k));
            }
            if (a >= b) {
                throw std::invalid_argument("contrasts: write pairs with the smaller index first");
            }
            pairs.emplace_back(a - 1, b - 1);
        }
        return custom_contrasts(k, pairs);
    }
    throw std::invalid_argument("contrasts: unknown specification '" + std::string(spec) +
                                "' (expected dunnett, tukey or pairs:...)");
}

std::string contrast_label(std::pair<int, int> pair, std::span<const std::string> labels) {
    return labels[static_cast<std::size_t>(pair.second)] + " - " +
           labels[static_cast<std::size_t>(pair.first)];
}

} // namespace survmct
