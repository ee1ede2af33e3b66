#pragma once

// Shared numerical kernels: reproducible random streams, the normal
// quantile/CDF pair used for inversion sampling, Moore-Penrose inverses,
// chi-square tail areas and equicoordinate quantiles of |MVN| maxima.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace survmct {

// A named position in a reproducible tree of random streams.  Spawning child
// i of {seed, stream} yields {mix(seed, stream), i}; two distinct paths from
// the same master seed never collide.  Copyable, trivially serializable.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    RngStream() = default;
    explicit RngStream(std::uint64_t s, std::uint64_t t = 0) : seed(s), stream(t) {}

    [[nodiscard]] RngStream spawn(std::uint64_t child) const;
};

// Deterministic generator over a stream.  All continuous draws go through
// u01() + explicit inversion so the produced bit pattern is identical on
// every platform with IEEE doubles.
class RngEngine {
public:
    explicit RngEngine(RngStream s);

    // Uniform on the open interval (0,1): ((x >> 11) + 0.5) * 2^-53.
    double u01();
    // Standard normal via the AS241 quantile applied to u01(); consumes
    // exactly one uniform per draw.
    double normal();
    std::uint64_t bits();

private:
    std::mt19937_64 gen_;
};

// Inverse standard normal CDF (Wichura's AS241, PPND16 accuracy).
// Throws std::invalid_argument unless 0 < p < 1.
double normal_quantile(double p);

// Standard normal CDF, accurate in both tails (erfc based).
double normal_cdf(double x);

struct Pseudoinverse {
    Eigen::MatrixXd inverse;
    int rank = 0;
};

// Moore-Penrose inverse of a symmetric matrix via its spectral decomposition.
// Eigenvalues with |lambda| <= tol are treated as zero; tol < 0 selects
// max|lambda| * dim * eps * 10.  Throws std::invalid_argument for non-square
// or non-finite input.
Pseudoinverse moore_penrose(const Eigen::MatrixXd& m, double tol = -1.0);

// Nearest-PSD projection by flooring: negative eigenvalues of the symmetric
// input are clamped to zero.  Input that is already PSD is returned with its
// bits untouched.
Eigen::MatrixXd psd_floor(const Eigen::MatrixXd& m);

// P(X > x) for X ~ chi-square(df).  df == 0 is the point mass at zero and
// returns 1 for any x >= 0.  Throws std::invalid_argument for x < 0, df < 0
// or non-finite x.
double chi_square_upper_tail(double x, int df);

// x with P(X > x) = alpha for X ~ chi-square(df), df >= 1, 0 < alpha < 1.
double chi_square_upper_quantile(double alpha, int df);

// Equicoordinate quantile of the max statistic of a centered multivariate
// normal with the given correlation matrix: the empirical (1-alpha)-quantile
// (type-1, order statistic at index ceil((1-alpha)*samples)) of
// max_i |Z_i| over `samples` Monte Carlo draws (max_i Z_i if !two_sided).
// The draw path is fully determined by `rng`; max_abs_mvn_pvalues with the
// same arguments consumes the identical draws, so quantile and p-values are
// mutually consistent.
double equicoordinate_quantile(const Eigen::MatrixXd& corr, double alpha,
                               long samples, RngStream rng, bool two_sided = true);

// Monte Carlo P(max_i |Z_i| >= observed) under the given correlation.
double max_abs_mvn_pvalue(const Eigen::MatrixXd& corr, double observed,
                          long samples, RngStream rng, bool two_sided = true);

// Batch version sharing one draw pass across all thresholds.
std::vector<double> max_abs_mvn_pvalues(const Eigen::MatrixXd& corr,
                                        std::span<const double> observed,
                                        long samples, RngStream rng,
                                        bool two_sided = true);

// Shortest decimal representation that round-trips to the same double; used
// by every text/CSV writer so output bytes are reproducible.
std::string format_double(double x);

} // namespace survmct
