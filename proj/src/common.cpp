#include "fractop/common.hpp"

#include <cstdlib>

namespace fractop {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::Io: return "Io";
        case Errc::Parse: return "Parse";
        case Errc::InvalidSpec: return "InvalidSpec";
        case Errc::NotPcf: return "NotPcf";
        case Errc::RewriteOverflow: return "RewriteOverflow";
        case Errc::SicViolation: return "SicViolation";
        case Errc::MissingIdentification: return "MissingIdentification";
        case Errc::NotConnected: return "NotConnected";
        case Errc::NotDendrite: return "NotDendrite";
        case Errc::NotAGasket: return "NotAGasket";
        case Errc::CornerMapMissing: return "CornerMapMissing";
        case Errc::TriangleIdError: return "TriangleIdError";
        case Errc::SBoundViolation: return "SBoundViolation";
        case Errc::AssignmentInfeasible: return "AssignmentInfeasible";
        case Errc::SystemExtractionFailure: return "SystemExtractionFailure";
        case Errc::GeometryMismatch: return "GeometryMismatch";
        case Errc::DecompositionError: return "DecompositionError";
        case Errc::DomainError: return "DomainError";
        case Errc::Internal: return "Internal";
    }
    return "Unknown";
}

int errc_exit_code(Errc c) {
    switch (c) {
        case Errc::Io:
        case Errc::Parse:
            return 1;
        case Errc::Internal:
            return 3;
        default:
            return 2;
    }
}

bool rational_from_double(double x, Rational& out, std::int64_t max_den, double tol) {
    if (!std::isfinite(x)) return false;
    // Continued fraction expansion with convergent denominators capped.
    double v = x;
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    for (int iter = 0; iter < 64; ++iter) {
        double fl = std::floor(v);
        if (fl > 9.2e18 || fl < -9.2e18) return false;
        std::int64_t a = static_cast<std::int64_t>(fl);
        std::int64_t p2 = a * p1 + p0;
        std::int64_t q2 = a * q1 + q0;
        if (q2 > max_den || q2 < 0) break;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        double approx = static_cast<double>(p1) / static_cast<double>(q1);
        if (std::abs(approx - x) <= tol * std::max(1.0, std::abs(x))) {
            out = Rational(BigInt(p1), BigInt(q1));
            return true;
        }
        double frac = v - fl;
        if (frac < 1e-15) break;
        v = 1.0 / frac;
    }
    if (q1 > 0) {
        double approx = static_cast<double>(p1) / static_cast<double>(q1);
        if (std::abs(approx - x) <= tol * std::max(1.0, std::abs(x))) {
            out = Rational(BigInt(p1), BigInt(q1));
            return true;
        }
    }
    return false;
}

double to_double(const Rational& q) {
    return q.convert_to<double>();
}

} // namespace fractop
