#include "survmct/numerics.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace survmct {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Collapse a (seed, stream) pair into one well-mixed 64-bit word.
std::uint64_t mix_pair(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ (stream * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL));
}

} // namespace

RngStream RngStream::spawn(std::uint64_t child) const {
    return RngStream(mix_pair(seed, stream), child);
}

RngEngine::RngEngine(RngStream s) : gen_(mix_pair(s.seed, s.stream)) {}

double RngEngine::u01() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngEngine::normal() {
    return normal_quantile(u01());
}

std::uint64_t RngEngine::bits() {
    return gen_();
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("normal_quantile: p must lie strictly between 0 and 1");
    }
    // Wichura (1988), algorithm AS241, PPND16 coefficient set.
    static const double a[8] = {
        3.3871328727963666080e0,  1.3314166789178437745e2,  1.9715909503065514427e3,
        1.3731693765509461125e4,  4.5921953931549871457e4,  6.7265770927008700853e4,
        3.3430575583588128105e4,  2.5090809287301226727e3};
    static const double b[8] = {
        1.0,                      4.2313330701600911252e1,  6.8718700749205790830e2,
        5.3941960214247511077e3,  2.1213794301586595867e4,  3.9307895800092710610e4,
        2.8729085735721942674e4,  5.2264952788528545610e3};
    static const double c[8] = {
        1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
        3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
        2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static const double d[8] = {
        1.0,                      2.05319162663775882187e0, 1.67638483018380384940e0,
        6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
        5.47593808499534494600e-4, 1.05075007164441684324e-9};
    static const double e[8] = {
        6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
        2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
        2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static const double f[8] = {
        1.0,                      5.99832206555887937690e-1, 1.36929880922735805310e-1,
        1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
        1.42151175831644588870e-7, 2.04426310338993978564e-15};

    auto poly = [](const double (&coef)[8], double x) {
        double s = coef[7];
        for (int i = 6; i >= 0; --i) s = s * x + coef[i];
        return s;
    };

    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * poly(a, r) / poly(b, r);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = poly(c, r) / poly(d, r);
    } else {
        r -= 5.0;
        val = poly(e, r) / poly(f, r);
    }
    return q < 0.0 ? -val : val;
}

double normal_cdf(double x) {
    return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2);
}

Pseudoinverse moore_penrose(const Eigen::MatrixXd& m, double tol) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("moore_penrose: matrix must be square");
    }
    if (!m.allFinite()) {
        throw std::invalid_argument("moore_penrose: matrix has non-finite entries");
    }
    const auto dim = m.rows();
    Pseudoinverse out;
    if (dim == 0) {
        out.inverse = Eigen::MatrixXd(0, 0);
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("moore_penrose: eigendecomposition failed");
    }
    const Eigen::VectorXd& lam = es.eigenvalues();
    const Eigen::MatrixXd& u = es.eigenvectors();
    const double lmax = lam.cwiseAbs().maxCoeff();
    if (tol < 0.0) {
        tol = lmax * static_cast<double>(dim) * std::numeric_limits<double>::epsilon() * 10.0;
    }
    Eigen::VectorXd inv_lam = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (std::fabs(lam[i]) > tol) {
            inv_lam[i] = 1.0 / lam[i];
            ++out.rank;
        }
    }
    out.inverse = u * inv_lam.asDiagonal() * u.transpose();
    return out;
}

Eigen::MatrixXd psd_floor(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("psd_floor: matrix must be square");
    }
    if (m.rows() == 0) return m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("psd_floor: eigendecomposition failed");
    }
    if (es.eigenvalues().minCoeff() >= 0.0) {
        return m;
    }
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd floored =
        es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    floored = 0.5 * (floored + floored.transpose()).eval();
    return floored;
}

double chi_square_upper_tail(double x, int df) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
        throw std::invalid_argument("chi_square_upper_tail: x must be finite and >= 0");
    }
    if (df < 0) {
        throw std::invalid_argument("chi_square_upper_tail: df must be >= 0");
    }
    if (df == 0) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double chi_square_upper_quantile(double alpha, int df) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("chi_square_upper_quantile: alpha must lie in (0,1)");
    }
    if (df < 1) {
        throw std::invalid_argument("chi_square_upper_quantile: df must be >= 1");
    }
    return 2.0 * boost::math::gamma_q_inv(0.5 * df, alpha);
}

namespace {

// Factor corr = A A' through the spectral decomposition with negative
// eigenvalues floored at zero, then stream `samples` draws of the max
// statistic to `visit`.
template <typename Visitor>
void sample_max_statistic(const Eigen::MatrixXd& corr, long samples, RngStream rng,
                          bool two_sided, Visitor&& visit) {
    const auto d = corr.rows();
    if (corr.cols() != d || d == 0) {
        throw std::invalid_argument("mvn sampling: correlation matrix must be square and non-empty");
    }
    if (!corr.allFinite()) {
        throw std::invalid_argument("mvn sampling: correlation matrix has non-finite entries");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (std::fabs(corr(i, i) - 1.0) > 1e-8) {
            throw std::invalid_argument("mvn sampling: diagonal must be 1");
        }
    }
    if (samples < 1) {
        throw std::invalid_argument("mvn sampling: samples must be >= 1");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("mvn sampling: eigendecomposition failed");
    }
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd a = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();

    RngEngine eng(rng);
    Eigen::VectorXd xi(d);
    Eigen::VectorXd z(d);
    for (long s = 0; s < samples; ++s) {
        for (Eigen::Index i = 0; i < d; ++i) xi[i] = eng.normal();
        z.noalias() = a * xi;
        double m = two_sided ? z.cwiseAbs().maxCoeff() : z.maxCoeff();
        visit(m);
    }
}

} // namespace

double equicoordinate_quantile(const Eigen::MatrixXd& corr, double alpha,
                               long samples, RngStream rng, bool two_sided) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("equicoordinate_quantile: alpha must lie in (0,1)");
    }
    std::vector<double> maxima;
    maxima.reserve(static_cast<std::size_t>(samples));
    sample_max_statistic(corr, samples, rng, two_sided,
                         [&](double m) { maxima.push_back(m); });
    const auto r = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(samples)));
    const std::size_t idx = std::clamp<std::size_t>(r, 1, maxima.size()) - 1;
    std::nth_element(maxima.begin(), maxima.begin() + static_cast<std::ptrdiff_t>(idx), maxima.end());
    return maxima[idx];
}

double max_abs_mvn_pvalue(const Eigen::MatrixXd& corr, double observed,
                          long samples, RngStream rng, bool two_sided) {
    const double thr[1] = {observed};
    return max_abs_mvn_pvalues(corr, thr, samples, rng, two_sided)[0];
}

std::vector<double> max_abs_mvn_pvalues(const Eigen::MatrixXd& corr,
                                        std::span<const double> observed,
                                        long samples, RngStream rng, bool two_sided) {
    std::vector<long> counts(observed.size(), 0);
    sample_max_statistic(corr, samples, rng, two_sided, [&](double m) {
        for (std::size_t i = 0; i < observed.size(); ++i) {
            if (m >= observed[i]) ++counts[i];
        }
    });
    std::vector<double> out(observed.size());
    for (std::size_t i = 0; i < observed.size(); ++i) {
        out[i] = static_cast<double>(counts[i]) / static_cast<double>(samples);
    }
    return out;
}

std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

} // namespace survmct
