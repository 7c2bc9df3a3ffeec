#include "sqbox/envs/generators.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sqbox/errors.hpp"
#include "sqbox/rng.hpp"

namespace sqbox {

namespace {
constexpr std::uint64_t kGaussianSalt = 0x67617573ull;
constexpr std::uint64_t kT1Salt = 0x743100ull;
}  // namespace

PointSet gen_gaussian(long n, long d, double rho, std::uint64_t seed) {
    if (n < 2) throw InsufficientData("gen_gaussian: n must be >= 2");
    if (d < 1) throw DimensionMismatch("gen_gaussian: d must be >= 1");
    const double lo = d > 1 ? -1.0 / static_cast<double>(d - 1) : -1.0;
    if (std::isnan(rho) || rho <= lo || rho >= 1.0)
        throw InvalidCorrelation(
            "gen_gaussian: rho must lie in (-1/(d-1), 1), got " +
            std::to_string(rho));
    std::vector<double> data(n * d);
    Rng rng(mix_seed(seed, kGaussianSalt), 0);
    if (rho >= 0.0) {
        const double a = std::sqrt(rho);
        const double b = std::sqrt(1.0 - rho);
        for (long i = 0; i < n; ++i) {
            double z0 = rng.normal();
            for (long j = 0; j < d; ++j)
                data[i * d + j] = a * z0 + b * rng.normal();
        }
    } else {
        // Rank-one correction keeps unit variances with negative rho.
        const double a = std::sqrt(1.0 - rho);
        const double b =
            (std::sqrt(1.0 + (d - 1) * rho) - a) / static_cast<double>(d);
        std::vector<double> z(d);
        for (long i = 0; i < n; ++i) {
            double sum = 0.0;
            for (long j = 0; j < d; ++j) {
                z[j] = rng.normal();
                sum += z[j];
            }
            for (long j = 0; j < d; ++j)
                data[i * d + j] = a * z[j] + b * sum;
        }
    }
    return PointSet(std::move(data), n, d);
}

ScoreList gen_t1(long n, std::uint64_t seed) {
    if (n < 1) throw InsufficientData("gen_t1: n must be >= 1");
    std::vector<double> values(n);
    Rng rng(mix_seed(seed, kT1Salt), 0);
    for (long i = 0; i < n; ++i) values[i] = rng.cauchy();
    return ScoreList(std::move(values));
}

double true_t1_quantile(double p) {
    if (std::isnan(p) || p <= 0.0 || p >= 1.0)
        throw Error("true_t1_quantile: p must lie in (0, 1)");
    return std::tan(std::numbers::pi * (p - 0.5));
}

}  // namespace sqbox
