#pragma once

// Exact scalar arithmetic: arbitrary-precision rationals, p-adic valuation,
// and prime-field reduction. Everything downstream (diagram coefficients,
// projector scalars) is built on these; there is no floating point anywhere.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tiltlab {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------- errors --

/// A rational with negative p-adic valuation was asked to reduce mod p.
class NotPAdmissible : public std::runtime_error {
 public:
  explicit NotPAdmissible(const std::string& what) : std::runtime_error(what) {}
};

/// A digit set failed a down/up-admissibility condition. `condition` is one
/// of "d1", "d2", "u1", "u2" so tests can pinpoint the violated clause.
class AdmissibilityError : public std::runtime_error {
 public:
  AdmissibilityError(const std::string& what, std::string cond)
      : std::runtime_error(what + " [" + cond + "]"), condition(std::move(cond)) {}
  std::string condition;
};

class CompositionError : public std::runtime_error {
 public:
  explicit CompositionError(const std::string& what) : std::runtime_error(what) {}
};

class StrandLimitError : public std::runtime_error {
 public:
  explicit StrandLimitError(const std::string& what) : std::runtime_error(what) {}
};

/// Rewriting ran out of fuel or met a generator pattern no relation covers.
class RewriteError : public std::runtime_error {
 public:
  RewriteError(const std::string& what, std::string stuck)
      : std::runtime_error(what + (stuck.empty() ? "" : ": " + stuck)),
        stuck_term(std::move(stuck)) {}
  std::string stuck_term;
};

/// An identity the implementation relies on failed; indicates a bug.
class InternalInconsistency : public std::logic_error {
 public:
  explicit InternalInconsistency(const std::string& what) : std::logic_error(what) {}
};

// -------------------------------------------------------------- Rational --

inline bool is_prime(long long p) {
  if (p < 2) return false;
  for (long long d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

/// Exact rational, always in lowest terms with positive denominator.
/// Serialized as "num/den".
class Rational {
 public:
  Rational() : x_(0) {}
  Rational(long long n) : x_(n) {}  // NOLINT: implicit by design
  Rational(const BigInt& n) : x_(n) {}
  Rational(const BigInt& num, const BigInt& den) {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    x_ = den < 0 ? BigRat(-num, -den) : BigRat(num, den);
  }
  explicit Rational(const BigRat& q) : x_(q) {}

  /// Parses "num/den" or a bare integer string.
  static Rational parse(const std::string& s) {
    auto slash = s.find('/');
    if (slash == std::string::npos) return Rational(BigInt(s));
    return Rational(BigInt(s.substr(0, slash)), BigInt(s.substr(slash + 1)));
  }

  BigInt numerator() const { return boost::multiprecision::numerator(x_); }
  BigInt denominator() const { return boost::multiprecision::denominator(x_); }
  bool is_zero() const { return x_ == 0; }

  Rational operator-() const { return Rational(BigRat(-x_)); }
  Rational& operator+=(const Rational& o) { x_ += o.x_; return *this; }
  Rational& operator-=(const Rational& o) { x_ -= o.x_; return *this; }
  Rational& operator*=(const Rational& o) { x_ *= o.x_; return *this; }
  Rational& operator/=(const Rational& o) {
    if (o.is_zero()) throw std::invalid_argument("Rational: division by zero");
    x_ /= o.x_;
    return *this;
  }
  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }
  friend bool operator==(const Rational& a, const Rational& b) { return a.x_ == b.x_; }
  friend bool operator!=(const Rational& a, const Rational& b) { return a.x_ != b.x_; }

  std::string to_string() const {
    return numerator().str() + "/" + denominator().str();
  }

 private:
  BigRat x_;
};

// ------------------------------------------------------------ valuation --

/// Value of ord_p; infinite exactly for the zero rational.
struct PValuation {
  bool infinite = false;
  long long v = 0;

  static PValuation inf() { return PValuation{true, 0}; }
  static PValuation finite(long long k) { return PValuation{false, k}; }

  friend bool operator==(const PValuation& a, const PValuation& b) {
    return a.infinite == b.infinite && (a.infinite || a.v == b.v);
  }
  friend bool operator<(const PValuation& a, const PValuation& b) {
    if (a.infinite) return false;
    if (b.infinite) return true;
    return a.v < b.v;
  }
  bool nonnegative() const { return infinite || v >= 0; }
  std::string to_string() const { return infinite ? "inf" : std::to_string(v); }
};

inline long long bigint_ord(BigInt n, long long p) {
  if (n == 0) throw std::invalid_argument("bigint_ord: zero");
  long long k = 0;
  if (n < 0) n = -n;
  while (n % p == 0) {
    n /= p;
    ++k;
  }
  return k;
}

/// ord_p of a rational: max power of p dividing the numerator minus that of
/// the denominator; infinity for zero.
inline PValuation pval(const Rational& q, long long p) {
  if (!is_prime(p)) throw std::invalid_argument("pval: p must be prime");
  if (q.is_zero()) return PValuation::inf();
  return PValuation::finite(bigint_ord(q.numerator(), p) - bigint_ord(q.denominator(), p));
}

// ------------------------------------------------------------------- Fp --

/// Element of the prime field F_p, residue in [0, p).
struct Fp {
  long long r = 0;
  long long p = 0;

  Fp() = default;
  Fp(long long residue, long long prime) : r(((residue % prime) + prime) % prime), p(prime) {}

  static Fp zero(long long prime) { return Fp(0, prime); }
  static Fp one(long long prime) { return Fp(1, prime); }

  bool is_zero() const { return r == 0; }

  Fp operator-() const { return Fp(p - r, p); }
  Fp& operator+=(const Fp& o) { check(o); r = (r + o.r) % p; return *this; }
  Fp& operator-=(const Fp& o) { check(o); r = (r - o.r + p) % p; return *this; }
  Fp& operator*=(const Fp& o) { check(o); r = (r * o.r) % p; return *this; }
  Fp& operator/=(const Fp& o) { check(o); return *this *= o.inv(); }
  friend Fp operator+(Fp a, const Fp& b) { return a += b; }
  friend Fp operator-(Fp a, const Fp& b) { return a -= b; }
  friend Fp operator*(Fp a, const Fp& b) { return a *= b; }
  friend Fp operator/(Fp a, const Fp& b) { return a /= b; }
  friend bool operator==(const Fp& a, const Fp& b) { return a.r == b.r && a.p == b.p; }
  friend bool operator!=(const Fp& a, const Fp& b) { return !(a == b); }

  Fp inv() const {
    if (r == 0) throw std::invalid_argument("Fp: division by zero residue");
    // extended Euclid
    long long a = r, b = p, x0 = 1, x1 = 0;
    while (b != 0) {
      long long q = a / b;
      long long t = a - q * b; a = b; b = t;
      t = x0 - q * x1; x0 = x1; x1 = t;
    }
    return Fp(x0, p);
  }

  std::string to_string() const { return std::to_string(r); }

 private:
  void check(const Fp& o) const {
    if (p != o.p) throw std::invalid_argument("Fp: mixed characteristics");
  }
};

/// Image of q in F_p (denominator inverted mod p). Requires pval(q, p) >= 0.
inline Fp reduce_mod_p(const Rational& q, long long p) {
  if (!is_prime(p)) throw std::invalid_argument("reduce_mod_p: p must be prime");
  if (q.is_zero()) return Fp::zero(p);
  if (!pval(q, p).nonnegative())
    throw NotPAdmissible("reduce_mod_p: negative valuation of " + q.to_string());
  BigInt bp = p;
  long long num = static_cast<long long>(q.numerator() % bp);
  long long den = static_cast<long long>(q.denominator() % bp);
  return Fp(num, p) / Fp(den, p);
}

}  // namespace tiltlab
