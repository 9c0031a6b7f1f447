#include "fractop/words.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fractop {

std::string word_str(const FiniteWord& w) {
    std::ostringstream os;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) os << '.';
        os << w[i];
    }
    return os.str();
}

namespace {

// Smallest d dividing n such that the word is d-periodic.
std::size_t primitive_period(const FiniteWord& per) {
    std::size_t n = per.size();
    for (std::size_t d = 1; d < n; ++d) {
        if (n % d != 0) continue;
        bool ok = true;
        for (std::size_t k = d; k < n && ok; ++k)
            ok = per[k] == per[k - d];
        if (ok) return d;
    }
    return n;
}

} // namespace

EvPeriodicWord EvPeriodicWord::make(FiniteWord pre, FiniteWord per) {
    if (per.empty()) throw std::invalid_argument("EvPeriodicWord: empty period");
    std::size_t d = primitive_period(per);
    per.resize(d);
    // Roll the preperiod back while its last symbol matches the period's last
    // symbol: pre' s (per)^inf equals pre' (rot per)^inf when s is per.back().
    while (!pre.empty() && pre.back() == per.back()) {
        std::rotate(per.begin(), per.end() - 1, per.end());
        pre.pop_back();
    }
    EvPeriodicWord w;
    w.pre = std::move(pre);
    w.per = std::move(per);
    return w;
}

FiniteWord EvPeriodicWord::prefix(std::size_t n) const {
    FiniteWord out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(at(k));
    return out;
}

EvPeriodicWord EvPeriodicWord::suffix(std::size_t n) const {
    FiniteWord p = pre, q = per;
    std::size_t drop = std::min(n, p.size());
    p.erase(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(drop));
    n -= drop;
    if (n > 0) {
        std::size_t r = n % q.size();
        std::rotate(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(r), q.end());
    }
    return make(std::move(p), std::move(q));
}

EvPeriodicWord EvPeriodicWord::with_prefix(const FiniteWord& head) const {
    FiniteWord p = head;
    p.insert(p.end(), pre.begin(), pre.end());
    return make(std::move(p), per);
}

std::string EvPeriodicWord::str() const {
    std::ostringstream os;
    for (Symbol s : pre) os << s;
    os << '(';
    for (Symbol s : per) os << s;
    os << ')';
    return os.str();
}

bool lex_less(const EvPeriodicWord& a, const EvPeriodicWord& b) {
    // Distinct normalized words differ within |pre_a|+|pre_b|+|per_a|*|per_b|
    // symbols; beyond that both expansions are jointly periodic.
    std::size_t bound = a.pre.size() + b.pre.size() + a.per.size() * b.per.size();
    for (std::size_t k = 0; k <= bound; ++k) {
        Symbol x = a.at(k), y = b.at(k);
        if (x != y) return x < y;
    }
    return false;
}

std::size_t common_prefix_length(const EvPeriodicWord& a, const EvPeriodicWord& b) {
    std::size_t bound = a.pre.size() + b.pre.size() + a.per.size() * b.per.size();
    for (std::size_t k = 0; k <= bound; ++k)
        if (a.at(k) != b.at(k)) return k;
    return EvPeriodicWord::npos;
}

std::size_t common_prefix_length(const FiniteWord& a, const EvPeriodicWord& b) {
    std::size_t k = 0;
    while (k < a.size() && a[k] == b.at(k)) ++k;
    return k;
}

std::size_t EvPeriodicWordHash::operator()(const EvPeriodicWord& w) const {
    std::size_t h = 1469598103934665603ULL;
    auto mix = [&h](std::size_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(w.pre.size());
    for (Symbol s : w.pre) mix(static_cast<std::size_t>(s));
    mix(0xffffULL);
    for (Symbol s : w.per) mix(static_cast<std::size_t>(s));
    return h;
}

} // namespace fractop
