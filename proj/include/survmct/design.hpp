#pragma once

// Test design: weight functions on [0,1] and pairwise contrast sets.

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace survmct {

// A weight function w : [0,1] -> R evaluated at Kaplan-Meier left limits.
class WeightSpec {
public:
    // rho/gamma family u^r (1-u)^g; r = g = 0 is the plain log-rank weight.
    static WeightSpec fleming_harrington(int r, int g);
    // 1 - 2u, sensitive to crossing hazards.
    static WeightSpec crossing();
    // Piecewise-linear interpolation through (u, w) nodes with strictly
    // increasing u in [0,1]; constant extrapolation outside the node range.
    static WeightSpec tabulated(std::vector<std::pair<double, double>> nodes,
                                std::string label = "table");

    // Throws std::invalid_argument unless 0 <= u <= 1.
    [[nodiscard]] double operator()(double u) const;
    [[nodiscard]] const std::string& label() const { return label_; }

private:
    struct FlemingHarrington {
        int r = 0;
        int g = 0;
    };
    struct Crossing {};
    struct Tabulated {
        std::vector<std::pair<double, double>> nodes;
    };

    WeightSpec(std::variant<FlemingHarrington, Crossing, Tabulated> kind, std::string label)
        : kind_(std::move(kind)), label_(std::move(label)) {}

    std::variant<FlemingHarrington, Crossing, Tabulated> kind_;
    std::string label_;
};

// The default direction set: constant weight plus the crossing weight.
std::vector<WeightSpec> default_weights();

// Comma-separated weight list, tokens "fh:<r>:<g>" or "cross",
// e.g. "fh:0:0,fh:1:0,cross".
std::vector<WeightSpec> parse_weights(std::string_view spec);

// Linear independence as functions on [0,1], decided by the rank of the Gram
// matrix on a fixed 201-point grid relative to its largest eigenvalue.
bool weights_linearly_independent(std::span<const WeightSpec> weights, double tol = 1e-10);

// A set of pairwise group contrasts over k groups.  Pair (j1, j2) with
// 0 <= j1 < j2 < k tests hazard(j2) versus hazard(j1); the corresponding
// contrast row carries -1 at j1 and +1 at j2.
struct ContrastMatrix {
    int k = 0;
    std::vector<std::pair<int, int>> pairs;

    [[nodiscard]] int q() const { return static_cast<int>(pairs.size()); }
    [[nodiscard]] std::vector<double> row(int i) const;
};

// Many-to-one comparisons against group 0: (0,1), ..., (0,k-1).
ContrastMatrix dunnett(int k);
// All pairwise comparisons ordered by first index, then second; the Dunnett
// set is a prefix of this ordering.
ContrastMatrix tukey(int k);
// Explicit pair list (zero-based, each pair ordered and distinct).
ContrastMatrix custom_contrasts(int k, std::span<const std::pair<int, int>> pairs);

// "dunnett", "tukey", or "pairs:1-2,1-3" with one-based group indices.
ContrastMatrix parse_contrasts(std::string_view spec, int k);

// Display label for pair (j1, j2): "<label j2> - <label j1>".
std::string contrast_label(std::pair<int, int> pair, std::span<const std::string> labels);

} // namespace survmct
