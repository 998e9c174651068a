#include "covsteer/random.hpp"

#include <cmath>
#include <numbers>

namespace covsteer {

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

Vector Rng::normal(Eigen::Index n) {
    Vector out(n);
    fill_normal(out);
    return out;
}

void Rng::fill_normal(Eigen::Ref<Vector> out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out(i) = normal();
    }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Vector sample_gaussian(const Vector& mean, const Matrix& factor, Rng& rng) {
    if (factor.cols() != mean.size()) {
        throw DimensionError("sample_gaussian: factor columns must match the mean");
    }
    return mean + factor.transpose() * rng.normal(factor.rows());
}

}  // namespace covsteer
