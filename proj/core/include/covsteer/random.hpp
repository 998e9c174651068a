#pragma once

#include <cstdint>
#include <random>

#include "covsteer/linalg.hpp"

namespace covsteer {

/// std::mt19937_64 with 53-bit uniforms and Box–Muller normals.  The engine
/// sequence is fixed by the C++ standard; normals additionally depend on the
/// platform's log/sin/cos.
class Rng {
public:
    static constexpr const char* kName = "mt19937_64+box-muller/1";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform();
    double normal();
    Vector normal(Eigen::Index n);
    void fill_normal(Eigen::Ref<Vector> out);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// SplitMix64 mix of (seed, stream); used for per-batch sub-seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// mean + factor' z with z ~ N(0, I); factor is any R with R'R = Σ.
Vector sample_gaussian(const Vector& mean, const Matrix& factor, Rng& rng);

}  // namespace covsteer
