#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace fractop {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Error taxonomy shared by the library and the CLI. Codes in the Validation
// band mean the input violates a structural precondition; Internal means a
// self-check failed on data we produced ourselves.
enum class Errc {
    Io,
    Parse,
    InvalidSpec,
    NotPcf,
    RewriteOverflow,
    SicViolation,
    MissingIdentification,
    NotConnected,
    NotDendrite,
    NotAGasket,
    CornerMapMissing,
    TriangleIdError,
    SBoundViolation,
    AssignmentInfeasible,
    SystemExtractionFailure,
    GeometryMismatch,
    DecompositionError,
    DomainError,
    Internal,
};

const char* errc_name(Errc c);

// CLI exit code bands: 1 = I/O or parse, 2 = validation, 3 = internal.
int errc_exit_code(Errc c);

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

  private:
    Errc code_;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }
inline double dist(const Vec2& a, const Vec2& b) { return norm(a - b); }

// Orientation-preserving or reflecting planar similitude
//   f(z) = ratio * rot(theta) * (reflect ? conj(z) : z) + translation,
// with ratio in (0,1). Linear part as a 2x2 matrix:
//   no reflection: [a -b; b a], reflection: [a b; b -a], a = r cos t, b = r sin t.
struct Similitude {
    double ratio = 0.5;
    double rotation = 0.0; // radians
    bool reflect = false;
    Vec2 translation{0.0, 0.0};

    Vec2 apply(const Vec2& p) const {
        double a = ratio * std::cos(rotation);
        double b = ratio * std::sin(rotation);
        double px = p.x, py = reflect ? -p.y : p.y;
        return {a * px - b * py + translation.x, b * px + a * py + translation.y};
    }

    Vec2 apply_inverse(const Vec2& p) const {
        double a = ratio * std::cos(rotation);
        double b = ratio * std::sin(rotation);
        double det = a * a + b * b;
        double qx = p.x - translation.x, qy = p.y - translation.y;
        double px = (a * qx + b * qy) / det;
        double py = (-b * qx + a * qy) / det;
        return {px, reflect ? -py : py};
    }

    // Composition (this ∘ g): apply g first, then this.
    Similitude compose(const Similitude& g) const {
        Similitude h;
        h.ratio = ratio * g.ratio;
        h.reflect = reflect != g.reflect;
        h.rotation = reflect ? rotation - g.rotation : rotation + g.rotation;
        h.translation = apply(g.translation);
        return h;
    }

    // Fixed point of f, well defined because ratio < 1.
    Vec2 fixed_point() const {
        double a = ratio * std::cos(rotation);
        double b = ratio * std::sin(rotation);
        // Solve (I - L) z = translation for the 2x2 linear part L.
        double l00 = a, l01 = reflect ? b : -b;
        double l10 = b, l11 = reflect ? -a : a;
        double m00 = 1.0 - l00, m01 = -l01, m10 = -l10, m11 = 1.0 - l11;
        double det = m00 * m11 - m01 * m10;
        return {(m11 * translation.x - m01 * translation.y) / det,
                (-m10 * translation.x + m00 * translation.y) / det};
    }
};

// Reconstructs p/q from a double, used where inputs are known to be rational
// (graph weights, gasket data in triangle coordinates). Returns false when no
// denominator <= max_den reproduces x within tol.
bool rational_from_double(double x, Rational& out, std::int64_t max_den = 1000000000LL,
                          double tol = 1e-12);

double to_double(const Rational& q);

} // namespace fractop
