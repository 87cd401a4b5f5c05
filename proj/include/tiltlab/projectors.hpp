#pragma once

// Jones-Wenzl and p-Jones-Wenzl projectors, the lambda scalars, cap/cup
// bundles, trapezes and standard loops, partial traces along digit
// stretches, p-morphisms, and the unitriangular expansion of morphisms
// between p-JW projectors.
//
// Strand positions are 1-based from the LEFT, and the left edge corresponds
// to the least significant digit block: the cap bundle of digit position i
// occupies positions x+1 .. x+2*a_i*p^i where x = v mod p^i. Partial traces
// close strands on that same (left) side.

#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <vector>

#include "tiltlab/padic.hpp"
#include "tiltlab/rational.hpp"
#include "tiltlab/tl.hpp"

namespace tiltlab::proj {

using padic::Context;
using padic::DigitSet;
using padic::Direction;

// --------------------------------------------------------------- JW memo --

namespace detail {

inline tl::MorQ e1_generator(int n) {
  // cup over cap on strands 1,2 tensored with n-2 identity strands
  tl::Matching cap;
  cap.m = 2;
  cap.n = 0;
  cap.pr = {1, 0};
  tl::Matching cup = tl::reflect_matching(cap);
  auto e = tl::compose(tl::MorQ::from_diagram(cup), tl::MorQ::from_diagram(cap));
  return tl::tensor(e, tl::MorQ::identity(n - 2));
}

struct JwCache {
  std::mutex mu;
  std::map<int, tl::MorQ> done;
};
inline JwCache& jw_cache() {
  static JwCache c;
  return c;
}

}  // namespace detail

namespace detail {

/// G composed on top of F where G = 1_off (x) J (x) 1_rest and J is a sum of
/// diagrams killed by any cap from below (a Jones-Wenzl box). Terms of F
/// with a top arc lying entirely inside the box range are dropped first.
inline tl::MorQ mult_boxed_above(const tl::MorQ& G, int off, int n, const tl::MorQ& F) {
  tl::MorQ out(F.m, G.n, 0);
  for (const auto& [X, cx] : F.terms) {
    bool killed = false;
    for (int i = X.m; i < X.total() && !killed; ++i) {
      int j = X.pr[static_cast<size_t>(i)];
      if (j > i && j >= X.m) {
        int a = i - X.m, b = j - X.m;
        if (a >= off && b < off + n) killed = true;
      }
    }
    if (killed) continue;
    for (const auto& [Y, cy] : G.terms) {
      auto [Z, loops] = tl::compose_single(Y, X);
      out.add_term(Z, cx * cy * tl::loop_factor<Rational>(loops, 0));
    }
  }
  return out;
}

}  // namespace detail

/// Jones-Wenzl projector on n strands over Q (memoized). jw(0) is the empty
/// diagram, jw(1) the single strand, and for n >= 2
///   jw(n) = 1 (x) jw(n-1) + ((n-1)/n) * (1 (x) jw(n-1)) e_1 (1 (x) jw(n-1)).
inline const tl::MorQ& jw(int n) {
  if (n < 0) throw std::invalid_argument("jw: negative strand count");
  tl::check_strands(n, "jw");
  auto& cache = detail::jw_cache();
  {
    std::lock_guard<std::mutex> lk(cache.mu);
    auto it = cache.done.find(n);
    if (it != cache.done.end()) return it->second;
  }
  // build levels bottom-up outside the lock; racing builders agree
  const tl::MorQ* prev = nullptr;
  {
    std::lock_guard<std::mutex> lk(cache.mu);
    if (cache.done.empty()) {
      cache.done.emplace(0, tl::MorQ::identity(0));
      cache.done.emplace(1, tl::MorQ::identity(1));
    }
    prev = &cache.done.rbegin()->second;
  }
  for (int k = prev->m + 1; k <= n; ++k) {
    tl::MorQ top = tl::tensor(tl::MorQ::identity(1), *prev);
    tl::MorQ mid = tl::compose(detail::e1_generator(k), top);
    tl::MorQ cur =
        top + detail::mult_boxed_above(top, 1, k - 1, mid).scaled(Rational(k - 1) / Rational(k));
    std::lock_guard<std::mutex> lk(cache.mu);
    prev = &cache.done.emplace(k, std::move(cur)).first->second;
  }
  std::lock_guard<std::mutex> lk(cache.mu);
  return cache.done.at(n);
}

// ------------------------------------------------- fast jw multiplication --

/// jw(n) composed on top of F. Terms of F with a top-to-top arc die against
/// the projector (cap-kill) and are skipped before multiplying.
inline tl::MorQ mult_jw_above(int n, const tl::MorQ& F) {
  if (F.n != n) throw CompositionError("mult_jw_above: boundary mismatch");
  const tl::MorQ& J = jw(n);
  tl::MorQ out(F.m, n, 0);
  for (const auto& [X, cx] : F.terms) {
    if (X.has_top_arc()) continue;
    for (const auto& [Y, cy] : J.terms) {
      auto [Z, loops] = tl::compose_single(Y, X);
      out.add_term(Z, cx * cy * tl::loop_factor<Rational>(loops, 0));
    }
  }
  return out;
}

/// F composed on top of jw(n); terms of F with a bottom-to-bottom arc die.
inline tl::MorQ mult_jw_below(const tl::MorQ& F, int n) {
  if (F.m != n) throw CompositionError("mult_jw_below: boundary mismatch");
  const tl::MorQ& J = jw(n);
  tl::MorQ out(n, F.n, 0);
  for (const auto& [X, cx] : F.terms) {
    if (X.has_bottom_arc()) continue;
    for (const auto& [Y, cy] : J.terms) {
      auto [Z, loops] = tl::compose_single(X, Y);
      out.add_term(Z, cx * cy * tl::loop_factor<Rational>(loops, 0));
    }
  }
  return out;
}

// -------------------------------------------------------------- bundles --

namespace detail {

inline long long pow_ll(long long p, int e) {
  long long r = 1;
  for (int i = 0; i < e; ++i) r *= p;
  return r;
}

/// Single-index cap bundle at digit position i of the current value v:
/// x straight strands, then a_i p^i nested caps, then the rest straight.
inline tl::Matching single_cap(const Context& c, int i) {
  long long x = c.v % pow_ll(c.p, i);
  long long caps = static_cast<long long>(c.digit(i)) * pow_ll(c.p, i);
  long long m = c.v - 1, n = m - 2 * caps;
  tl::Matching Z;
  Z.m = static_cast<int16_t>(m);
  Z.n = static_cast<int16_t>(n);
  Z.pr.assign(static_cast<size_t>(m + n), -1);
  auto link = [&](long long a, long long b) {
    Z.pr[static_cast<size_t>(a)] = static_cast<int16_t>(b);
    Z.pr[static_cast<size_t>(b)] = static_cast<int16_t>(a);
  };
  for (long long j = 0; j < x; ++j) link(j, m + j);                    // left throughs
  for (long long j = 0; j < caps; ++j) link(x + j, x + 2 * caps - 1 - j);  // nested caps
  for (long long j = x + 2 * caps; j < m; ++j) link(j, m + j - 2 * caps);  // right throughs
  return Z;
}

}  // namespace detail

/// Formal digit negation: value of `base` with the digits at positions in S
/// negated (even where they are zero).
inline long long formal_negation(long long base, const DigitSet& S, long long p) {
  Context bc = padic::expand(base, p);
  long long acc = 0;
  for (int s : S) acc += static_cast<long long>(bc.digit(s)) * detail::pow_ll(p, s);
  return base - 2 * acc;
}

/// Composite of single-index caps d_{s_0} ... d_{s_k}, largest position
/// first so that consecutive positions produce nested caps. Defined for any
/// digit position set (single-index caps are identity on zero digits); no
/// set-level admissibility is required here.
inline tl::Matching cap_bundle_formal(const Context& c, const DigitSet& S) {
  tl::check_strands(static_cast<int>(c.v - 1), "cap_bundle");
  tl::Matching acc = tl::identity_matching(static_cast<int>(c.v - 1));
  Context cur = c;
  for (size_t i = S.size(); i-- > 0;) {
    auto [z, loops] = tl::compose_single(detail::single_cap(cur, S[i]), acc);
    if (loops != 0) throw InternalInconsistency("cap_bundle: unexpected loop");
    acc = std::move(z);
    long long next = cur.v - 2 * static_cast<long long>(cur.digit(S[i])) *
                                 detail::pow_ll(c.p, S[i]);
    if (next < 1) throw InternalInconsistency("cap_bundle: value dropped below 1");
    cur = padic::expand(next, c.p);
  }
  return acc;
}

/// d_S : (v-1) -> (v[S]-1) for a down-admissible S. Always a single diagram.
inline tl::Matching cap_bundle_diagram(const Context& c, const DigitSet& S) {
  padic::check_admissible(c, S, Direction::down);
  return cap_bundle_formal(c, S);
}

/// u_S for S down-admissible at w: (w[S]-1) -> (w-1), the reflection of d_S.
inline tl::Matching cup_bundle_of_down(const Context& w, const DigitSet& S) {
  return tl::reflect_matching(cap_bundle_diagram(w, S));
}

inline tl::MorQ cap_bundle(const Context& c, const DigitSet& S) {
  return tl::MorQ::from_diagram(cap_bundle_diagram(c, S));
}

/// Cup bundle for S UP-admissible at v, (v-1) -> (v(S)-1).
inline tl::MorQ cup_bundle(const Context& c, const DigitSet& S) {
  padic::check_admissible(c, S, Direction::up);
  Context w = padic::expand(padic::reflect_up(c, S), c.p);
  return tl::MorQ::from_diagram(cup_bundle_of_down(w, S));
}

// ------------------------------------------------- embedded jw products --

/// (1_off (x) jw(b) (x) 1_rest) composed on top of F. Terms of F with a top
/// arc lying entirely inside the box range die by cap-kill and are skipped.
inline tl::MorQ mult_embedded_jw_above(const tl::MorQ& F, int off, int b) {
  if (b == 0) return F;
  int rest = F.n - off - b;
  if (rest < 0 || off < 0) throw CompositionError("mult_embedded_jw_above: bad box range");
  tl::MorQ T = tl::tensor(tl::tensor(tl::MorQ::identity(off), jw(b)), tl::MorQ::identity(rest));
  tl::MorQ out(F.m, F.n, 0);
  for (const auto& [X, cx] : F.terms) {
    bool killed = false;
    for (int i = X.m; i < X.total() && !killed; ++i) {
      int j = X.pr[static_cast<size_t>(i)];
      if (j > i && j >= X.m) {
        int a = i - X.m, bb = j - X.m;
        if (a >= off && bb < off + b) killed = true;
      }
    }
    if (killed) continue;
    for (const auto& [Y, cy] : T.terms) {
      auto [Z, loops] = tl::compose_single(Y, X);
      out.add_term(Z, cx * cy * tl::loop_factor<Rational>(loops, 0));
    }
  }
  return out;
}

/// F composed on top of (1_off (x) jw(b) (x) 1_rest); bottom arcs inside the
/// box range die.
inline tl::MorQ mult_embedded_jw_below(const tl::MorQ& F, int off, int b) {
  if (b == 0) return F;
  int rest = F.m - off - b;
  if (rest < 0 || off < 0) throw CompositionError("mult_embedded_jw_below: bad box range");
  tl::MorQ T = tl::tensor(tl::tensor(tl::MorQ::identity(off), jw(b)), tl::MorQ::identity(rest));
  tl::MorQ out(F.m, F.n, 0);
  for (const auto& [X, cx] : F.terms) {
    bool killed = false;
    for (int i = 0; i < X.m && !killed; ++i) {
      int j = X.pr[static_cast<size_t>(i)];
      if (j > i && j < X.m && i >= off && j < off + b) killed = true;
    }
    if (killed) continue;
    for (const auto& [Y, cy] : T.terms) {
      auto [Z, loops] = tl::compose_single(X, Y);
      out.add_term(Z, cx * cy * tl::loop_factor<Rational>(loops, 0));
    }
  }
  return out;
}

// ------------------------------------------------------- trapeze chains --

namespace detail {

/// One factor of a trapeze chain at digit position `pos` of `value`: the cap
/// over positions x+1 .. x+2*caps together with an internal JW box of size
/// `box` on the strands to the right of position x + caps.
struct ChainStep {
  long long value = 0;
  int pos = 0;
  long long x = 0;     // strands left of the cap bundle
  long long caps = 0;  // a_pos * p^pos
  long long box = 0;   // internal JW box size = value - x - caps - 1
};

/// Steps of the chain along S, largest position first, values descending by
/// formal single-digit negation.
inline std::vector<ChainStep> chain_steps(const Context& c, const DigitSet& S) {
  std::vector<ChainStep> out;
  Context cur = c;
  for (size_t i = S.size(); i-- > 0;) {
    ChainStep st;
    st.value = cur.v;
    st.pos = S[i];
    st.x = cur.v % pow_ll(c.p, S[i]);
    st.caps = static_cast<long long>(cur.digit(S[i])) * pow_ll(c.p, S[i]);
    st.box = cur.v - st.x - st.caps - 1;
    if (st.box < st.caps)
      throw InternalInconsistency("chain_steps: box narrower than cap bundle");
    out.push_back(st);
    long long next = cur.v - 2 * st.caps;
    if (next < 1) throw InternalInconsistency("chain_steps: value dropped below 1");
    cur = padic::expand(next, c.p);
  }
  return out;
}

inline tl::Matching step_cap(const ChainStep& st, long long p) {
  return single_cap(padic::expand(st.value, p), st.pos);
}

}  // namespace detail

/// Applies the down-trapeze chain of S on top of F (internal boxes included,
/// outer jw(v[S]-1) not included).
inline tl::MorQ downo_chain_above(const Context& c, const DigitSet& S, tl::MorQ F) {
  for (const auto& st : detail::chain_steps(c, S)) {
    F = mult_embedded_jw_above(F, static_cast<int>(st.x + st.caps), static_cast<int>(st.box));
    F = tl::compose(tl::MorQ::from_diagram(detail::step_cap(st, c.p)), F);
  }
  return F;
}

/// Applies the up-trapeze chain of S (the reflection of the down chain) on
/// top of G; G must end at v[S]-1 strands.
inline tl::MorQ upo_chain_above(const Context& c, const DigitSet& S, tl::MorQ G) {
  auto steps = detail::chain_steps(c, S);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    G = tl::compose(tl::MorQ::from_diagram(tl::reflect_matching(detail::step_cap(*it, c.p))), G);
    G = mult_embedded_jw_above(G, static_cast<int>(it->x + it->caps), static_cast<int>(it->box));
  }
  return G;
}

/// F composed on top of the up-trapeze chain of S (F ends above v-1 strands).
inline tl::MorQ upo_chain_below(tl::MorQ F, const Context& c, const DigitSet& S) {
  for (const auto& st : detail::chain_steps(c, S)) {
    F = mult_embedded_jw_below(F, static_cast<int>(st.x + st.caps), static_cast<int>(st.box));
    F = tl::compose(F, tl::MorQ::from_diagram(tl::reflect_matching(detail::step_cap(st, c.p))));
  }
  return F;
}

/// G composed on top of the down-trapeze chain of S.
inline tl::MorQ downo_chain_below(tl::MorQ G, const Context& c, const DigitSet& S) {
  auto steps = detail::chain_steps(c, S);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    G = tl::compose(G, tl::MorQ::from_diagram(detail::step_cap(*it, c.p)));
    G = mult_embedded_jw_below(G, static_cast<int>(it->x + it->caps), static_cast<int>(it->box));
  }
  return G;
}

// ------------------------------------------------------- lambda scalars --

/// lambda_{v,S} for S down-admissible: product over s in S of
/// (-1)^(a_s p^s) * fancest(v,s-1)[S] / fancest(v,s)[S], with [S] the formal
/// negation above applied to the ancestors. ord_p(lambda_{v,S}) = -|S|.
inline Rational lambda_scalar(long long v, const DigitSet& S, long long p) {
  Context c = padic::expand(v, p);
  padic::check_admissible(c, S, Direction::down);
  Rational out(1);
  for (int s : S) {
    long long above = padic::fancest(c, s - 1);
    long long below = padic::fancest(c, s);
    Rational factor(formal_negation(above, S, p), formal_negation(below, S, p));
    long long exponent = static_cast<long long>(c.digit(s)) * detail::pow_ll(p, s);
    if (exponent % 2 != 0) factor = -factor;
    out *= factor;
  }
  return out;
}

// --------------------------------------------- trapezes & standard loops --

/// downo_S : (v-1) -> (v[S]-1), the chain of boxed cap factors capped by the
/// outer jw(v[S]-1).
inline tl::MorQ trapeze_down(const Context& c, const DigitSet& S) {
  padic::check_admissible(c, S, Direction::down);
  long long t = padic::reflect_down(c, S);
  return mult_jw_above(static_cast<int>(t - 1),
                       downo_chain_above(c, S, tl::MorQ::identity(static_cast<int>(c.v - 1))));
}

/// upo_S = reflection of downo_S : (v[S]-1) -> (v-1).
inline tl::MorQ trapeze_up(const Context& c, const DigitSet& S) {
  padic::check_admissible(c, S, Direction::down);
  long long t = padic::reflect_down(c, S);
  return upo_chain_above(c, S, jw(static_cast<int>(t - 1)));
}

/// Loop through the formal value v - 2 sum a_s p^s, defined for any position
/// set (the mother recursion needs inadmissible intermediate sets).
inline tl::MorQ standard_loop_formal(const Context& c, const DigitSet& S) {
  long long t = formal_negation(c.v, S, c.p);
  tl::MorQ down =
      downo_chain_above(c, S, tl::MorQ::identity(static_cast<int>(c.v - 1)));
  return upo_chain_above(c, S, mult_jw_above(static_cast<int>(t - 1), down));
}

/// Standard loop upo_S jw(v[S]-1) downo_S, an endomorphism of v-1 strands
/// with through-degree v[S]-1.
inline tl::MorQ standard_loop(const Context& c, const DigitSet& S) {
  padic::check_admissible(c, S, Direction::down);
  return standard_loop_formal(c, S);
}

// -------------------------------------------------------- p-JW projectors --

namespace detail {
struct PqjwCache {
  std::mutex mu;
  std::map<std::pair<long long, long long>, tl::MorQ> q;
  std::map<std::pair<long long, long long>, tl::MorP> f;
};
inline PqjwCache& pqjw_cache() {
  static PqjwCache c;
  return c;
}
}  // namespace detail

/// Rational p-JW projector, closed form: sum over down-admissible S of
/// lambda_{v,S} times the standard loop along S. Memoized.
inline const tl::MorQ& pqjw(long long v, long long p) {
  auto& cache = detail::pqjw_cache();
  auto key = std::make_pair(v, p);
  {
    std::lock_guard<std::mutex> lk(cache.mu);
    auto it = cache.q.find(key);
    if (it != cache.q.end()) return it->second;
  }
  Context c = padic::expand(v, p);
  tl::MorQ acc(static_cast<int>(v - 1), static_cast<int>(v - 1), 0);
  for (const auto& S : padic::down_admissible_sets(c))
    acc += standard_loop(c, S).scaled(lambda_scalar(v, S, p));
  std::lock_guard<std::mutex> lk(cache.mu);
  return cache.q.emplace(key, std::move(acc)).first->second;
}

/// The mother recursion: for an eve, jw(v-1); otherwise a sum over the
/// down-admissible sets of the mother, each contributing the standard loop
/// along S plus the loop along S and the lowest digit, with the printed
/// ratio of reflected values. Kept as an independent cross-check of pqjw.
inline tl::MorQ pqjw_recursive(long long v, long long p) {
  Context c = padic::expand(v, p);
  if (padic::is_eve(c)) return jw(static_cast<int>(v - 1));
  int s = 0;
  while (c.digit(s) == 0) ++s;
  long long m = *padic::mother(c);
  Context mc = padic::expand(m, p);
  long long step = static_cast<long long>(c.digit(s)) * detail::pow_ll(p, s);
  tl::MorQ acc(static_cast<int>(v - 1), static_cast<int>(v - 1), 0);
  for (const auto& S : padic::down_admissible_sets(mc)) {
    Rational lam = lambda_scalar(m, S, p);
    acc += standard_loop_formal(c, S).scaled(lam);
    DigitSet Ss = S;
    Ss.insert(Ss.begin(), s);
    long long num = formal_negation(v, Ss, p);  // v[S][s]
    long long den = formal_negation(m, S, p);   // m[S]
    Rational ratio(num, den);
    if (step % 2 != 0) ratio = -ratio;
    acc += standard_loop_formal(c, Ss).scaled(lam * ratio);
  }
  return acc;
}

/// p-JW projector over F_p: reduction of the closed form. Its order is
/// guaranteed nonnegative; a violation would be a library bug.
inline const tl::MorP& pjw(long long v, long long p) {
  auto& cache = detail::pqjw_cache();
  auto key = std::make_pair(v, p);
  {
    std::lock_guard<std::mutex> lk(cache.mu);
    auto it = cache.f.find(key);
    if (it != cache.f.end()) return it->second;
  }
  const tl::MorQ& q = pqjw(v, p);
  if (!tl::ord_morphism(q, p).nonnegative())
    throw InternalInconsistency("pjw: rational projector has negative order at v=" +
                                std::to_string(v) + ", p=" + std::to_string(p));
  tl::MorP red = tl::specialize(q, p);
  std::lock_guard<std::mutex> lk(cache.mu);
  return cache.f.emplace(key, std::move(red)).first->second;
}

// -------------------------------------- fast products with rational p-JW --

/// pqjw(v,p) composed on top of F, expanded trapeze by trapeze so that the
/// projector never needs to be multiplied term-by-term against F.
inline tl::MorQ mult_pqjw_above(long long v, long long p, const tl::MorQ& F) {
  if (F.n != v - 1) throw CompositionError("mult_pqjw_above: boundary mismatch");
  Context c = padic::expand(v, p);
  tl::MorQ out(F.m, static_cast<int>(v - 1), 0);
  for (const auto& S : padic::down_admissible_sets(c)) {
    long long t = padic::reflect_down(c, S);
    tl::MorQ mid = mult_jw_above(static_cast<int>(t - 1), downo_chain_above(c, S, F));
    out += upo_chain_above(c, S, std::move(mid)).scaled(lambda_scalar(v, S, p));
  }
  return out;
}

/// F composed on top of pqjw(v,p).
inline tl::MorQ mult_pqjw_below(const tl::MorQ& F, long long v, long long p) {
  if (F.m != v - 1) throw CompositionError("mult_pqjw_below: boundary mismatch");
  Context c = padic::expand(v, p);
  tl::MorQ out(static_cast<int>(v - 1), F.n, 0);
  for (const auto& S : padic::down_admissible_sets(c)) {
    long long t = padic::reflect_down(c, S);
    tl::MorQ mid = mult_jw_below(upo_chain_below(F, c, S), static_cast<int>(t - 1));
    out += downo_chain_below(std::move(mid), c, S).scaled(lambda_scalar(v, S, p));
  }
  return out;
}

// -------------------------------------------------- traces along stretches --

/// Partial trace over the strand bundle of a digit stretch: closes
/// v - fancest(v, S') strands on the left. S' must be the smallest minimal
/// down-admissible stretch of v.
template <class R>
tl::Morphism<R> ptrace_stretch(const tl::Morphism<R>& F, long long v, const DigitSet& Sp,
                               long long p) {
  Context c = padic::expand(v, p);
  long long z = padic::fancest_set(c, Sp);
  return tl::partial_trace(F, static_cast<int>(v - z));
}

// ----------------------------------------------------------- p-morphisms --

/// Label of a p-morphism from v-1 to w-1: S down-admissible for w, S'
/// down-admissible for v, with matching through-object w[S] = v[S'].
struct PMorphismLabel {
  long long v = 0;
  long long w = 0;
  DigitSet S;   // at w
  DigitSet Sp;  // at v

  friend bool operator<(const PMorphismLabel& a, const PMorphismLabel& b) {
    return std::tie(a.v, a.w, a.S, a.Sp) < std::tie(b.v, b.w, b.S, b.Sp);
  }
  friend bool operator==(const PMorphismLabel& a, const PMorphismLabel& b) {
    return a.v == b.v && a.w == b.w && a.S == b.S && a.Sp == b.Sp;
  }
};

/// All labels (S, S') with w[S] = v[S'], i.e. one per element of
/// supp(v) /\ supp(w).
inline std::vector<PMorphismLabel> p_morphism_labels(long long v, long long w, long long p) {
  Context cv = padic::expand(v, p), cw = padic::expand(w, p);
  std::map<long long, DigitSet> down_v, down_w;
  for (const auto& S : padic::down_admissible_sets(cv)) down_v[padic::reflect_down(cv, S)] = S;
  for (const auto& S : padic::down_admissible_sets(cw)) down_w[padic::reflect_down(cw, S)] = S;
  std::vector<PMorphismLabel> out;
  for (const auto& [t, Sv] : down_v) {
    auto it = down_w.find(t);
    if (it == down_w.end()) continue;
    PMorphismLabel l;
    l.v = v;
    l.w = w;
    l.S = it->second;
    l.Sp = Sv;
    out.push_back(std::move(l));
  }
  return out;
}

/// Leading diagram of a label: u_S at w composed over d_S' at v.
inline tl::Matching standard_leading_diagram(const PMorphismLabel& l, long long p) {
  Context cv = padic::expand(l.v, p), cw = padic::expand(l.w, p);
  auto [z, loops] =
      tl::compose_single(cup_bundle_of_down(cw, l.S), cap_bundle_diagram(cv, l.Sp));
  if (loops != 0) throw InternalInconsistency("standard diagram: unexpected loop");
  return z;
}

/// The rational p-morphism pqjw(w) u_S d_S' pqjw(v).
inline tl::MorQ p_morphism_q(const PMorphismLabel& l, long long p) {
  Context cv = padic::expand(l.v, p), cw = padic::expand(l.w, p);
  tl::MorQ mid = tl::MorQ::from_diagram(standard_leading_diagram(l, p));
  return mult_pqjw_above(l.w, p, mult_pqjw_below(mid, l.v, p));
}

namespace detail {
struct PmCache {
  std::mutex mu;
  std::map<std::pair<PMorphismLabel, long long>, tl::MorP> f;
};
inline PmCache& pm_cache() {
  static PmCache c;
  return c;
}
}  // namespace detail

/// p-morphism over F_p (memoized).
inline const tl::MorP& p_morphism(const PMorphismLabel& l, long long p) {
  auto& cache = detail::pm_cache();
  auto key = std::make_pair(l, p);
  {
    std::lock_guard<std::mutex> lk(cache.mu);
    auto it = cache.f.find(key);
    if (it != cache.f.end()) return it->second;
  }
  tl::MorP red = tl::specialize(p_morphism_q(l, p), p);
  std::lock_guard<std::mutex> lk(cache.mu);
  return cache.f.emplace(key, std::move(red)).first->second;
}

// ------------------------------------------------------------- expansion --

/// Greedy unitriangular expansion of a sandwiched morphism in the
/// p-morphism basis: descending through the through-objects, read off the
/// coefficient of the standard leading diagram, subtract that multiple of
/// the p-morphism, and recurse. A nonzero residue after all labels are
/// exhausted means the input was not in the span - an internal error.
inline std::map<PMorphismLabel, Fp> expand_in_p_morphisms(const tl::MorP& F, long long v,
                                                          long long w, long long p,
                                                          bool assume_sandwiched = false) {
  tl::MorP R = F;
  if (!assume_sandwiched)
    R = tl::compose(tl::compose(pjw(w, p), F), pjw(v, p));
  auto labels = p_morphism_labels(v, w, p);
  std::map<long long, std::vector<PMorphismLabel>> by_t;
  for (const auto& l : labels) {
    Context cv = padic::expand(v, p);
    by_t[padic::reflect_down(cv, l.Sp)].push_back(l);
  }
  std::map<PMorphismLabel, Fp> out;
  for (auto it = by_t.rbegin(); it != by_t.rend(); ++it) {
    std::vector<std::pair<PMorphismLabel, Fp>> level;
    for (const auto& l : it->second) {
      Fp c = R.coeff(standard_leading_diagram(l, p));
      if (!c.is_zero()) level.emplace_back(l, c);
    }
    for (const auto& [l, c] : level) {
      out[l] = c;
      R -= p_morphism(l, p).scaled(c);
    }
  }
  if (!R.is_zero())
    throw InternalInconsistency("expand_in_p_morphisms: nonzero residue");
  return out;
}

/// Rational variant (used to check that every expansion coefficient of a
/// p-admissible morphism is itself p-admissible).
inline std::map<PMorphismLabel, Rational> expand_in_p_morphisms_q(const tl::MorQ& F, long long v,
                                                                  long long w, long long p,
                                                                  bool assume_sandwiched = false) {
  tl::MorQ R = F;
  if (!assume_sandwiched)
    R = mult_pqjw_above(w, p, mult_pqjw_below(F, v, p));
  auto labels = p_morphism_labels(v, w, p);
  std::map<long long, std::vector<PMorphismLabel>> by_t;
  for (const auto& l : labels) {
    Context cv = padic::expand(v, p);
    by_t[padic::reflect_down(cv, l.Sp)].push_back(l);
  }
  std::map<PMorphismLabel, Rational> out;
  for (auto it = by_t.rbegin(); it != by_t.rend(); ++it) {
    std::vector<std::pair<PMorphismLabel, Rational>> level;
    for (const auto& l : it->second) {
      Rational c = R.coeff(standard_leading_diagram(l, p));
      if (!c.is_zero()) level.emplace_back(l, c);
    }
    for (const auto& [l, c] : level) {
      out[l] = c;
      R -= p_morphism_q(l, p).scaled(c);
    }
  }
  if (!R.is_zero())
    throw InternalInconsistency("expand_in_p_morphisms_q: nonzero residue");
  return out;
}

// ----------------------------------------------------- ancestor centering --

/// True iff every bottom-to-bottom arc of the cap configuration has its
/// center at position (v - a) + 1/2 for some ancestor a of v. Necessary for
/// a cap configuration to survive against pjw(v).
inline bool is_ancestor_centered(const tl::Matching& d, long long v, long long p) {
  Context c = padic::expand(v, p);
  std::set<long long> centers;  // doubled center = a + b of the 1-based pair
  for (long long a : padic::ancestry(c).ancestors) centers.insert(2 * (v - a) + 1);
  for (int i = 0; i < d.m; ++i) {
    int j = d.pr[static_cast<size_t>(i)];
    if (j < d.m && j > i)
      if (!centers.count(static_cast<long long>(i + 1) + (j + 1))) return false;
  }
  return true;
}

}  // namespace tiltlab::proj
