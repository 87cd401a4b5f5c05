#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "tiltlab/rational.hpp"

using namespace tiltlab;

TEST_CASE("pval basics") {
  CHECK(pval(Rational::parse("485105/689087"), 7) == PValuation::finite(-5));
  CHECK(pval(Rational(0), 3) == PValuation::inf());
  CHECK(pval(Rational(18), 3) == PValuation::finite(2));
  CHECK(pval(Rational(1, 3), 3) == PValuation::finite(-1));
  CHECK_THROWS_AS(pval(Rational(1), 4), std::invalid_argument);
  CHECK_THROWS_AS(pval(Rational(1), 1), std::invalid_argument);
}

TEST_CASE("reduce_mod_p basics") {
  CHECK(reduce_mod_p(Rational(1, 2), 3) == Fp(2, 3));
  CHECK(reduce_mod_p(Rational(3), 3) == Fp(0, 3));
  CHECK_THROWS_AS(reduce_mod_p(Rational(1, 3), 3), NotPAdmissible);
  CHECK(reduce_mod_p(Rational(-1, 2), 5) == Fp(2, 5));
}

TEST_CASE("rational serialization is num/den in lowest terms") {
  CHECK(Rational(2, 4).to_string() == "1/2");
  CHECK(Rational(-2, 4).to_string() == "-1/2");
  CHECK(Rational(2, -4).to_string() == "-1/2");
  CHECK(Rational(7).to_string() == "7/1");
  CHECK(Rational::parse("-1/2") == Rational(-1, 2));
  CHECK(Rational::parse("7") == Rational(7));
}

TEST_CASE("valuation is additive in products and ultrametric in sums") {
  std::mt19937_64 rng(20240401);
  std::uniform_int_distribution<long long> d(-500, 500);
  auto rnd = [&]() {
    long long num = d(rng);
    long long den = d(rng);
    if (den == 0) den = 1;
    return Rational(num, den);
  };
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    Rational a = rnd(), b = rnd();
    for (long long p : {2ll, 3ll, 5ll, 7ll}) {
      auto va = pval(a, p), vb = pval(b, p);
      auto vprod = pval(a * b, p);
      if (!va.infinite && !vb.infinite) {
        CHECK(vprod == PValuation::finite(va.v + vb.v));
      } else {
        CHECK(vprod.infinite);
      }
      auto vsum = pval(a + b, p);
      PValuation lo = va < vb ? va : vb;
      CHECK_FALSE(vsum < lo);
      ++checked;
    }
  }
  CHECK(checked >= 10000);
}

TEST_CASE("reduction is a ring homomorphism on valuation >= 0") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<long long> d(-60, 60);
  for (long long p : {2ll, 3ll, 5ll}) {
    int done = 0;
    while (done < 500) {
      long long an = d(rng), ad = d(rng), bn = d(rng), bd = d(rng);
      if (ad == 0 || bd == 0 || ad % p == 0 || bd % p == 0) continue;
      Rational a(an, ad), b(bn, bd);
      CHECK(reduce_mod_p(a + b, p) == reduce_mod_p(a, p) + reduce_mod_p(b, p));
      CHECK(reduce_mod_p(a * b, p) == reduce_mod_p(a, p) * reduce_mod_p(b, p));
      ++done;
    }
  }
}

TEST_CASE("Fp field operations") {
  Fp a(2, 5), b(4, 5);
  CHECK((a * b).r == 3);
  CHECK((a / b) * b == a);
  CHECK_THROWS_AS(a / Fp(0, 5), std::invalid_argument);
  CHECK((-Fp(0, 5)).r == 0);
}
