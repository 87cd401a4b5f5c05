#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "tiltlab/tl.hpp"

using namespace tiltlab;
using namespace tiltlab::tl;

namespace {

// Brute-force oracle: all fixed-point-free involutions on m+n points,
// filtered by the circular noncrossing test. Independent of the Catalan
// recursion used by enumerate_matchings.
void all_pairings(std::vector<int16_t>& pr, int next, std::vector<std::vector<int16_t>>& out) {
  int tot = static_cast<int>(pr.size());
  while (next < tot && pr[static_cast<size_t>(next)] >= 0) ++next;
  if (next == tot) {
    out.push_back(pr);
    return;
  }
  for (int j = next + 1; j < tot; ++j) {
    if (pr[static_cast<size_t>(j)] >= 0) continue;
    pr[static_cast<size_t>(next)] = static_cast<int16_t>(j);
    pr[static_cast<size_t>(j)] = static_cast<int16_t>(next);
    all_pairings(pr, next + 1, out);
    pr[static_cast<size_t>(next)] = -1;
    pr[static_cast<size_t>(j)] = -1;
  }
}

size_t brute_count(int m, int n) {
  if ((m + n) % 2 != 0) return 0;
  std::vector<int16_t> pr(static_cast<size_t>(m + n), -1);
  std::vector<std::vector<int16_t>> all;
  all_pairings(pr, 0, all);
  size_t cnt = 0;
  for (auto& cand : all) {
    Matching x;
    x.m = static_cast<int16_t>(m);
    x.n = static_cast<int16_t>(n);
    x.pr = cand;
    if (is_noncrossing(x)) ++cnt;
  }
  return cnt;
}

Matching cap2() {
  Matching c;
  c.m = 2;
  c.n = 0;
  c.pr = {1, 0};
  return c;
}

MorQ rand_morphism(int m, int n, std::mt19937_64& rng) {
  auto basis = enumerate_matchings(m, n);
  std::uniform_int_distribution<long long> d(-4, 4);
  MorQ f(m, n, 0);
  for (const auto& x : basis) f.add_term(x, Rational(d(rng)));
  return f;
}

}  // namespace

TEST_CASE("matching enumeration counts") {
  CHECK(enumerate_matchings(3, 3).size() == 5);
  CHECK(enumerate_matchings(2, 0).size() == 1);
  CHECK(enumerate_matchings(1, 2).empty());
  CHECK(enumerate_matchings(0, 0).size() == 1);
  for (int m = 0; m <= 6; ++m)
    for (int n = 0; n <= 6; ++n) {
      if (m + n > 12 || (m + n) % 2) continue;
      auto mine = enumerate_matchings(m, n);
      for (const auto& x : mine) CHECK(is_noncrossing(x));
      CHECK(mine.size() == brute_count(m, n));
    }
}

TEST_CASE("circle evaluates to -2") {
  MorQ cap = MorQ::from_diagram(cap2());
  MorQ cup = reflect(cap);
  MorQ closed = compose(cap, cup);  // 0 -> 0
  CHECK(closed.m == 0);
  CHECK(closed.coeff(Matching{0, 0, {}}) == Rational(-2));
}

TEST_CASE("identity, e, and double e") {
  MorQ cap = MorQ::from_diagram(cap2());
  MorQ e = compose(reflect(cap), cap);  // 2 -> 2
  MorQ ee = compose(e, e);
  CHECK(ee == e.scaled(Rational(-2)));
  std::mt19937_64 rng(5);
  MorQ f = rand_morphism(2, 2, rng);
  CHECK(compose(MorQ::identity(2), f) == f);
  CHECK(compose(f, MorQ::identity(2)) == f);
}

TEST_CASE("tensor and interchange") {
  CHECK(tensor(MorQ::identity(1), MorQ::identity(1)) == MorQ::identity(2));
  std::mt19937_64 rng(11);
  MorQ f = rand_morphism(2, 2, rng), g = rand_morphism(2, 2, rng);
  // (1 (x) g)(f (x) 1) = (f (x) 1)(1 (x) g)
  auto lhs = compose(tensor(MorQ::identity(2), g), tensor(f, MorQ::identity(2)));
  auto rhs = compose(tensor(f, MorQ::identity(2)), tensor(MorQ::identity(2), g));
  CHECK(lhs == rhs);
}

TEST_CASE("reflection is a contravariant involution") {
  std::mt19937_64 rng(23);
  MorQ cap = MorQ::from_diagram(cap2());
  CHECK(reflect(cap).m == 0);
  CHECK(reflect(reflect(cap)) == cap);
  MorQ f = rand_morphism(2, 4, rng), g = rand_morphism(4, 2, rng);
  CHECK(reflect(compose(g, f)) == compose(reflect(f), reflect(g)));
  CHECK(reflect(reflect(f)) == f);
}

TEST_CASE("isotopy: zigzags straighten to the identity") {
  MorQ cap = MorQ::from_diagram(cap2());
  MorQ cup = reflect(cap);
  // (cap (x) 1)(1 (x) cup) = id_1, both bendings
  auto z1 = compose(tensor(cap, MorQ::identity(1)), tensor(MorQ::identity(1), cup));
  CHECK(z1 == MorQ::identity(1));
  auto z2 = compose(tensor(MorQ::identity(1), cap), tensor(cup, MorQ::identity(1)));
  CHECK(z2 == MorQ::identity(1));
}

TEST_CASE("through degree") {
  CHECK(through_degree(MorQ::identity(4)) == 4);
  MorQ cap = MorQ::from_diagram(cap2());
  MorQ e = compose(reflect(cap), cap);
  CHECK(through_degree(e) == 0);
  CHECK_THROWS_AS(through_degree(MorQ::zero(2, 2)), std::invalid_argument);
}

TEST_CASE("associativity and through-degree bound on random triples") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 30; ++rep) {
    MorQ f = rand_morphism(4, 2, rng), g = rand_morphism(6, 4, rng), h = rand_morphism(2, 6, rng);
    CHECK(compose(compose(f, g), h) == compose(f, compose(g, h)));
    MorQ fg = compose(f, g);
    if (!fg.is_zero() && !f.is_zero() && !g.is_zero())
      CHECK(through_degree(fg) <= std::min(through_degree(f), through_degree(g)));
  }
}

TEST_CASE("partial trace closes left strands") {
  // tracing one strand of id_2 gives -2 times id_1
  auto t = partial_trace(MorQ::identity(2), 1);
  CHECK(t == MorQ::identity(1).scaled(Rational(-2)));
  // full trace of e on 2 strands: cap-cup closes to a single circle
  MorQ cap = MorQ::from_diagram(cap2());
  MorQ e = compose(reflect(cap), cap);
  auto full = partial_trace(e, 2);
  CHECK(full.coeff(Matching{0, 0, {}}) == Rational(-2));
}

TEST_CASE("ord and specialization") {
  MorQ cap = MorQ::from_diagram(cap2());
  MorQ e = compose(reflect(cap), cap);
  MorQ f = MorQ::identity(2) + e.scaled(Rational(1, 2));
  CHECK(ord_morphism(f, 2) == PValuation::finite(-1));
  CHECK(ord_morphism(f, 3) == PValuation::finite(0));
  CHECK_THROWS_AS(specialize(f, 2), NotPAdmissible);
  auto g = specialize(f, 3);
  CHECK(g.coeff(identity_matching(2)) == Fp(1, 3));
  CHECK(ord_morphism(MorQ::zero(1, 1), 5).infinite);
}

TEST_CASE("morphism json round trip") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    MorQ f = rand_morphism(3, 3, rng);
    auto j = to_json(f);
    CHECK(from_json<Rational>(j) == f);
  }
  MorP g(2, 2, 3);
  g.add_term(identity_matching(2), Fp(2, 3));
  CHECK(from_json<Fp>(to_json(g)) == g);
  CHECK(to_json(g)["ring"] == "F3");
}
