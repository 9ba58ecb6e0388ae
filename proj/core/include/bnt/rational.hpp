#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>

#include "bnt/errors.hpp"

namespace bnt {

using Rational = mpq_class;

inline Rational rat(long num, long den = 1) {
    if (den == 0) throw ContractError("rational with zero denominator");
    Rational r(num, den);
    r.canonicalize();
    return r;
}

// Exact square root if q is a perfect square of a rational, else returns false.
inline bool rational_sqrt(const Rational& q, Rational& out) {
    if (sgn(q) < 0) return false;
    const mpz_class& num = q.get_num();
    const mpz_class& den = q.get_den();
    if (mpz_perfect_square_p(num.get_mpz_t()) == 0) return false;
    if (mpz_perfect_square_p(den.get_mpz_t()) == 0) return false;
    mpz_class rn, rd;
    mpz_sqrt(rn.get_mpz_t(), num.get_mpz_t());
    mpz_sqrt(rd.get_mpz_t(), den.get_mpz_t());
    out = Rational(rn, rd);
    out.canonicalize();
    return true;
}

// Parses "n", "n/d", or a decimal string like "-1.25" into an exact rational.
inline Rational parse_rational(const std::string& text) {
    if (text.empty()) throw ParseError("empty numeric literal");
    auto slash = text.find('/');
    if (slash != std::string::npos) {
        try {
            Rational r(text);
            r.canonicalize();
            if (r.get_den() == 0) throw ParseError("zero denominator in '" + text + "'");
            return r;
        } catch (const std::invalid_argument&) {
            throw ParseError("bad rational literal '" + text + "'");
        }
    }
    auto dot = text.find('.');
    std::string digits = text;
    long shift = 0;
    if (dot != std::string::npos) {
        digits = text.substr(0, dot) + text.substr(dot + 1);
        shift = static_cast<long>(text.size() - dot - 1);
    }
    if (digits.empty() || digits == "-" || digits == "+") throw ParseError("bad numeric literal '" + text + "'");
    for (size_t i = 0; i < digits.size(); ++i) {
        char c = digits[i];
        bool sign_ok = (i == 0 && (c == '-' || c == '+'));
        if (!sign_ok && (c < '0' || c > '9')) throw ParseError("bad numeric literal '" + text + "'");
    }
    mpz_class num(digits);
    mpz_class den(1);
    for (long i = 0; i < shift; ++i) den *= 10;
    Rational r(num, den);
    r.canonicalize();
    return r;
}

inline std::string rational_str(const Rational& q) {
    return q.get_str();
}

}  // namespace bnt
