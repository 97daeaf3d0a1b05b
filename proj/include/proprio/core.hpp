#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace proprio {

// Exceptions carry a stable machine-readable code alongside the human
// message; the CLI maps codes onto exit status and stderr lines.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define PROPRIO_ERROR_TYPE(TypeName, code_string)                             \
    class TypeName : public Error {                                           \
    public:                                                                   \
        explicit TypeName(const std::string& message)                         \
            : Error(code_string, message) {}                                  \
    };

PROPRIO_ERROR_TYPE(PointOutsideMesh, "point_outside_mesh")
PROPRIO_ERROR_TYPE(DegenerateElement, "degenerate_element")
PROPRIO_ERROR_TYPE(DegenerateSegment, "degenerate_segment")
PROPRIO_ERROR_TYPE(NonConvergence, "non_convergence")
PROPRIO_ERROR_TYPE(SingularSystem, "singular_system")
PROPRIO_ERROR_TYPE(ShapeMismatch, "shape_mismatch")
PROPRIO_ERROR_TYPE(Diverged, "diverged")
PROPRIO_ERROR_TYPE(NoMinimumInInterval, "no_minimum_in_interval")
PROPRIO_ERROR_TYPE(ConfigError, "config_error")

#undef PROPRIO_ERROR_TYPE

/// Deterministic splitmix64 generator. Every stochastic piece of the toolkit
/// draws from one of these so a run is reproducible from a single seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0x853c49e6748fea9bULL) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return double(next_u64() >> 11) * (1.0 / 9007199254740992.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Box-Muller; draws a fresh pair of uniforms every call.
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586 * u2);
    }

    /// Uniform index in [0, n). n must be positive.
    std::size_t index(std::size_t n) { return std::size_t(next_u64() % n); }

    /// Derive an independent stream without disturbing this generator.
    Rng fork(std::uint64_t stream) const {
        Rng child(state_ ^ (0x9e3779b97f4a7c15ULL * (stream + 0x51ed2701ULL)));
        child.next_u64();
        return child;
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& s) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[std::size_t(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace proprio
