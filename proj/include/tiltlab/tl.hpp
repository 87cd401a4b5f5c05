#pragma once

// The Temperley-Lieb category at circle value -2: crossingless matchings,
// exact linear combinations over Q or F_p, composition, tensor product,
// reflection, through-degree, partial trace, p-adic order and reduction.
//
// Boundary points of a diagram m -> n are numbered 0..m-1 along the bottom
// (left to right) and m..m+n-1 along the top (left to right). A matching is
// noncrossing with respect to the circular order: bottom left to right,
// then top right to left. Planar isotopy is quotiented away by storing
// matchings only, so the isotopy relations hold by construction.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tiltlab/rational.hpp"

namespace tiltlab::tl {

// Catalan growth makes large strand counts explode; refuse beyond this cap
// unless the caller raises it explicitly.
inline int& max_strands_ref() {
  static int cap = 16;
  return cap;
}
inline int max_strands() { return max_strands_ref(); }
inline void set_max_strands(int n) { max_strands_ref() = n; }
inline void check_strands(int n, const char* who) {
  if (n > max_strands())
    throw StrandLimitError(std::string(who) + ": strand count " + std::to_string(n) +
                           " exceeds cap " + std::to_string(max_strands()));
}

// -------------------------------------------------------------- Matching --

struct Matching {
  int16_t m = 0;
  int16_t n = 0;
  std::vector<int16_t> pr;  // pr[i] = partner of point i, size m+n

  int total() const { return m + n; }

  friend bool operator==(const Matching& a, const Matching& b) {
    return a.m == b.m && a.n == b.n && a.pr == b.pr;
  }

  /// Canonical 1-indexed pair list, sorted by smaller endpoint.
  std::vector<std::pair<int, int>> pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < total(); ++i)
      if (pr[static_cast<size_t>(i)] > i)
        out.emplace_back(i + 1, pr[static_cast<size_t>(i)] + 1);
    return out;
  }

  /// Number of strands connecting bottom to top.
  int through_degree() const {
    int t = 0;
    for (int i = 0; i < m; ++i)
      if (pr[static_cast<size_t>(i)] >= m) ++t;
    return t;
  }
  bool has_bottom_arc() const {
    for (int i = 0; i < m; ++i)
      if (pr[static_cast<size_t>(i)] < m) return true;
    return false;
  }
  bool has_top_arc() const {
    for (int i = m; i < total(); ++i)
      if (pr[static_cast<size_t>(i)] >= m) return true;
    return false;
  }
};

struct MatchingHash {
  size_t operator()(const Matching& x) const {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t b) {
      h ^= b;
      h *= 1099511628211ull;
    };
    mix(static_cast<uint64_t>(x.m));
    mix(static_cast<uint64_t>(x.n));
    for (int16_t v : x.pr) mix(static_cast<uint64_t>(v) + 7);
    return static_cast<size_t>(h);
  }
};

inline Matching identity_matching(int n) {
  Matching x;
  x.m = static_cast<int16_t>(n);
  x.n = static_cast<int16_t>(n);
  x.pr.resize(static_cast<size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    x.pr[static_cast<size_t>(i)] = static_cast<int16_t>(n + i);
    x.pr[static_cast<size_t>(n + i)] = static_cast<int16_t>(i);
  }
  return x;
}

/// Circular position of point i: bottom left-to-right then top right-to-left.
inline int circular_pos(const Matching& x, int i) {
  return i < x.m ? i : x.m + (x.total() - 1 - i);
}

/// Noncrossing test in the circular order (validator; the enumeration and
/// composition below produce only planar matchings).
inline bool is_noncrossing(const Matching& x) {
  auto pairs = x.pairs();
  std::vector<std::pair<int, int>> cpos;
  for (auto [a, b] : pairs) {
    int ca = circular_pos(x, a - 1), cb = circular_pos(x, b - 1);
    cpos.emplace_back(std::min(ca, cb), std::max(ca, cb));
  }
  for (size_t i = 0; i < cpos.size(); ++i)
    for (size_t j = i + 1; j < cpos.size(); ++j) {
      auto [a, b] = cpos[i];
      auto [c, d] = cpos[j];
      bool c_in = a < c && c < b, d_in = a < d && d < b;
      if (c_in != d_in) return false;
    }
  return true;
}

/// All crossingless matchings m -> n (empty list when m+n is odd).
inline std::vector<Matching> enumerate_matchings(int m, int n) {
  check_strands(std::max(m, n), "enumerate_matchings");
  std::vector<Matching> out;
  int tot = m + n;
  if (tot % 2 != 0) return out;
  if (tot == 0) {
    out.push_back(Matching{0, 0, {}});
    return out;
  }
  // linear sequence = circular order cut at the first bottom point
  std::vector<int> seq(static_cast<size_t>(tot));
  for (int s = 0; s < tot; ++s) seq[static_cast<size_t>(s)] = s < m ? s : 2 * m + n - 1 - s;
  std::vector<int16_t> pr(static_cast<size_t>(tot), -1);
  // match seq[lo] to seq[k] with both gaps even, recurse inside then outside
  std::function<void(int, int, std::function<void()>)> gen =
      [&](int lo, int hi, std::function<void()> done) {
        if (lo > hi) {
          done();
          return;
        }
        for (int k = lo + 1; k <= hi; k += 2) {
          pr[static_cast<size_t>(seq[static_cast<size_t>(lo)])] =
              static_cast<int16_t>(seq[static_cast<size_t>(k)]);
          pr[static_cast<size_t>(seq[static_cast<size_t>(k)])] =
              static_cast<int16_t>(seq[static_cast<size_t>(lo)]);
          gen(lo + 1, k - 1, [&, k]() { gen(k + 1, hi, done); });
        }
      };
  gen(0, tot - 1, [&]() {
    Matching x;
    x.m = static_cast<int16_t>(m);
    x.n = static_cast<int16_t>(n);
    x.pr = pr;
    out.push_back(x);
  });
  return out;
}

// ------------------------------------------------------------- Morphism --

template <class R>
struct RingTraits;

template <>
struct RingTraits<Rational> {
  static Rational zero(long long) { return Rational(0); }
  static Rational one(long long) { return Rational(1); }
  static Rational from_int(long long k, long long) { return Rational(k); }
  static constexpr long long char_of(long long) { return 0; }
  static std::string name(long long) { return "Q"; }
  static Rational parse(const std::string& s, long long) { return Rational::parse(s); }
};

template <>
struct RingTraits<Fp> {
  static Fp zero(long long p) { return Fp::zero(p); }
  static Fp one(long long p) { return Fp::one(p); }
  static Fp from_int(long long k, long long p) { return Fp(k, p); }
  static constexpr long long char_of(long long p) { return p; }
  static std::string name(long long p) { return "F" + std::to_string(p); }
  static Fp parse(const std::string& s, long long p) { return Fp(std::stoll(s), p); }
};

/// Finitely supported linear combination of matchings m -> n. `p` is the
/// ring tag: 0 for Q, the characteristic for F_p.
template <class R>
struct Morphism {
  int m = 0;
  int n = 0;
  long long p = 0;
  std::unordered_map<Matching, R, MatchingHash> terms;

  Morphism() = default;
  Morphism(int m_, int n_, long long p_ = 0) : m(m_), n(n_), p(p_) {}

  static Morphism zero(int m_, int n_, long long p_ = 0) { return Morphism(m_, n_, p_); }
  static Morphism from_diagram(const Matching& x, long long p_ = 0) {
    Morphism f(x.m, x.n, p_);
    f.terms.emplace(x, RingTraits<R>::one(p_));
    return f;
  }
  static Morphism identity(int k, long long p_ = 0) {
    return from_diagram(identity_matching(k), p_);
  }

  bool is_zero() const { return terms.empty(); }
  size_t size() const { return terms.size(); }

  void add_term(const Matching& x, const R& c) {
    if (c.is_zero()) return;
    auto it = terms.find(x);
    if (it == terms.end()) {
      terms.emplace(x, c);
    } else {
      it->second += c;
      if (it->second.is_zero()) terms.erase(it);
    }
  }

  R coeff(const Matching& x) const {
    auto it = terms.find(x);
    return it == terms.end() ? RingTraits<R>::zero(p) : it->second;
  }

  Morphism& operator+=(const Morphism& o) {
    if (m != o.m || n != o.n || p != o.p)
      throw CompositionError("Morphism +=: shape or ring mismatch");
    for (const auto& [x, c] : o.terms) add_term(x, c);
    return *this;
  }
  Morphism& operator-=(const Morphism& o) {
    if (m != o.m || n != o.n || p != o.p)
      throw CompositionError("Morphism -=: shape or ring mismatch");
    for (const auto& [x, c] : o.terms) add_term(x, -c);
    return *this;
  }
  friend Morphism operator+(Morphism a, const Morphism& b) { return a += b; }
  friend Morphism operator-(Morphism a, const Morphism& b) { return a -= b; }

  Morphism scaled(const R& c) const {
    Morphism out(m, n, p);
    if (c.is_zero()) return out;
    for (const auto& [x, k] : terms) out.add_term(x, k * c);
    return out;
  }

  friend bool operator==(const Morphism& a, const Morphism& b) {
    if (a.m != b.m || a.n != b.n || a.p != b.p || a.terms.size() != b.terms.size())
      return false;
    for (const auto& [x, c] : a.terms) {
      auto it = b.terms.find(x);
      if (it == b.terms.end() || !(it->second == c)) return false;
    }
    return true;
  }
  friend bool operator!=(const Morphism& a, const Morphism& b) { return !(a == b); }
};

using MorQ = Morphism<Rational>;
using MorP = Morphism<Fp>;

// ----------------------------------------------------------- composition --

/// Composes two single diagrams: X on top of Y (X after Y). Returns the
/// resulting matching and the number of closed loops that formed.
inline std::pair<Matching, int> compose_single(const Matching& X, const Matching& Y) {
  // Y: m -> n, X: n -> k
  if (Y.n != X.m) throw CompositionError("compose_single: inner boundary mismatch");
  int m = Y.m, n = Y.n, k = X.n;
  Matching Z;
  Z.m = static_cast<int16_t>(m);
  Z.n = static_cast<int16_t>(k);
  Z.pr.assign(static_cast<size_t>(m + k), -1);
  static thread_local std::vector<char> mid_seen;
  mid_seen.assign(static_cast<size_t>(std::max(n, 1)), 0);
  // external label: bottom of Y -> 0..m-1 ; top of X -> m..m+k-1
  auto walk_from_y = [&](int q) -> int {
    // q is a point of Y
    while (true) {
      if (q < m) return q;            // Y bottom, external
      int i = q - m;                  // mid strand index
      mid_seen[static_cast<size_t>(i)] = 1;
      int t = X.pr[static_cast<size_t>(i)];
      if (t >= n) return m + (t - n); // X top, external
      mid_seen[static_cast<size_t>(t)] = 1;
      q = Y.pr[static_cast<size_t>(m + t)];
    }
  };
  auto walk_from_x = [&](int t) -> int {
    // t is a point of X
    while (true) {
      if (t >= n) return m + (t - n);
      mid_seen[static_cast<size_t>(t)] = 1;
      int q = Y.pr[static_cast<size_t>(m + t)];
      if (q < m) return q;
      mid_seen[static_cast<size_t>(q - m)] = 1;
      t = X.pr[static_cast<size_t>(q - m)];
    }
  };
  for (int b = 0; b < m; ++b) {
    if (Z.pr[static_cast<size_t>(b)] >= 0) continue;
    int e = walk_from_y(Y.pr[static_cast<size_t>(b)]);
    Z.pr[static_cast<size_t>(b)] = static_cast<int16_t>(e);
    Z.pr[static_cast<size_t>(e)] = static_cast<int16_t>(b);
  }
  for (int t = 0; t < k; ++t) {
    int here = m + t;
    if (Z.pr[static_cast<size_t>(here)] >= 0) continue;
    int e = walk_from_x(X.pr[static_cast<size_t>(n + t)]);
    Z.pr[static_cast<size_t>(here)] = static_cast<int16_t>(e);
    Z.pr[static_cast<size_t>(e)] = static_cast<int16_t>(here);
  }
  // loops: mid-only cycles never touched by an external walk
  int loops = 0;
  for (int i = 0; i < n; ++i) {
    if (mid_seen[static_cast<size_t>(i)]) continue;
    ++loops;
    int cur = i;
    while (!mid_seen[static_cast<size_t>(cur)]) {
      mid_seen[static_cast<size_t>(cur)] = 1;
      int t = X.pr[static_cast<size_t>(cur)];  // stays a mid on a loop
      mid_seen[static_cast<size_t>(t)] = 1;
      cur = Y.pr[static_cast<size_t>(m + t)] - m;
    }
  }
  return {std::move(Z), loops};
}

template <class R>
R loop_factor(int loops, long long p) {
  R f = RingTraits<R>::one(p);
  R minus_two = RingTraits<R>::from_int(-2, p);
  for (int i = 0; i < loops; ++i) f *= minus_two;
  return f;
}

/// F after G (stack G below F); each closed loop contributes a factor -2.
template <class R>
Morphism<R> compose(const Morphism<R>& F, const Morphism<R>& G) {
  if (F.m != G.n) throw CompositionError("compose: inner boundary mismatch");
  if (F.p != G.p) throw CompositionError("compose: ring mismatch");
  Morphism<R> out(G.m, F.n, F.p);
  for (const auto& [X, cx] : F.terms)
    for (const auto& [Y, cy] : G.terms) {
      auto [Z, loops] = compose_single(X, Y);
      out.add_term(Z, cx * cy * loop_factor<R>(loops, F.p));
    }
  return out;
}

/// Horizontal juxtaposition, F on the left of G.
template <class R>
Morphism<R> tensor(const Morphism<R>& F, const Morphism<R>& G) {
  if (F.p != G.p) throw CompositionError("tensor: ring mismatch");
  Morphism<R> out(F.m + G.m, F.n + G.n, F.p);
  int m = F.m + G.m;
  for (const auto& [X, cx] : F.terms)
    for (const auto& [Y, cy] : G.terms) {
      Matching Z;
      Z.m = static_cast<int16_t>(m);
      Z.n = static_cast<int16_t>(F.n + G.n);
      Z.pr.assign(static_cast<size_t>(m + F.n + G.n), -1);
      auto xmap = [&](int i) { return i < F.m ? i : m + (i - F.m); };
      auto ymap = [&](int i) { return i < G.m ? F.m + i : m + F.n + (i - G.m); };
      for (int i = 0; i < X.total(); ++i)
        Z.pr[static_cast<size_t>(xmap(i))] =
            static_cast<int16_t>(xmap(X.pr[static_cast<size_t>(i)]));
      for (int i = 0; i < Y.total(); ++i)
        Z.pr[static_cast<size_t>(ymap(i))] =
            static_cast<int16_t>(ymap(Y.pr[static_cast<size_t>(i)]));
      out.add_term(Z, cx * cy);
    }
  return out;
}

inline Matching reflect_matching(const Matching& X) {
  Matching Z;
  Z.m = X.n;
  Z.n = X.m;
  Z.pr.assign(static_cast<size_t>(X.total()), -1);
  auto map = [&](int i) { return i < X.m ? X.n + i : i - X.m; };
  for (int i = 0; i < X.total(); ++i)
    Z.pr[static_cast<size_t>(map(i))] = static_cast<int16_t>(map(X.pr[static_cast<size_t>(i)]));
  return Z;
}

/// Reflection in a horizontal line: swaps source and target, fixes
/// coefficients. Contravariant involution.
template <class R>
Morphism<R> reflect(const Morphism<R>& F) {
  Morphism<R> out(F.n, F.m, F.p);
  for (const auto& [X, c] : F.terms) out.add_term(reflect_matching(X), c);
  return out;
}

/// Max through-degree over the support; undefined (throws) for zero.
template <class R>
int through_degree(const Morphism<R>& F) {
  if (F.is_zero()) throw std::invalid_argument("through_degree: zero morphism");
  int best = 0;
  for (const auto& [X, c] : F.terms) best = std::max(best, X.through_degree());
  return best;
}

/// Closes the k leftmost strands of an endomorphism (arcs around the left
/// side); each loop contributes -2.
template <class R>
Morphism<R> partial_trace(const Morphism<R>& F, int k) {
  if (F.m != F.n) throw CompositionError("partial_trace: endomorphism required");
  if (k < 0 || k > F.m) throw std::invalid_argument("partial_trace: bad strand count");
  int m = F.m;
  Morphism<R> out(m - k, m - k, F.p);
  for (const auto& [X, c] : F.terms) {
    Matching Z;
    Z.m = static_cast<int16_t>(m - k);
    Z.n = static_cast<int16_t>(m - k);
    Z.pr.assign(static_cast<size_t>(2 * (m - k)), -1);
    std::vector<char> seen(static_cast<size_t>(2 * m), 0);
    auto traced = [&](int i) { return (i < m && i < k) || (i >= m && i - m < k); };
    auto closure = [&](int i) { return i < m ? m + i : i - m; };  // bottom j <-> top j
    auto ext_label = [&](int i) { return i < m ? i - k : (m - k) + (i - m - k); };
    auto resolve = [&](int q) {
      while (traced(q)) {
        seen[static_cast<size_t>(q)] = 1;
        int c2 = closure(q);
        seen[static_cast<size_t>(c2)] = 1;
        q = X.pr[static_cast<size_t>(c2)];
      }
      return q;
    };
    int loops = 0;
    for (int i = 0; i < 2 * m; ++i) {
      if (traced(i) || seen[static_cast<size_t>(i)]) continue;
      seen[static_cast<size_t>(i)] = 1;
      int e = resolve(X.pr[static_cast<size_t>(i)]);
      seen[static_cast<size_t>(e)] = 1;
      Z.pr[static_cast<size_t>(ext_label(i))] = static_cast<int16_t>(ext_label(e));
      Z.pr[static_cast<size_t>(ext_label(e))] = static_cast<int16_t>(ext_label(i));
    }
    for (int i = 0; i < 2 * m; ++i) {
      if (!traced(i) || seen[static_cast<size_t>(i)]) continue;
      ++loops;
      int q = i;
      while (!seen[static_cast<size_t>(q)]) {
        seen[static_cast<size_t>(q)] = 1;
        int nxt = X.pr[static_cast<size_t>(q)];
        seen[static_cast<size_t>(nxt)] = 1;
        q = closure(nxt);
      }
    }
    out.add_term(Z, c * loop_factor<R>(loops, F.p));
  }
  return out;
}

// ----------------------------------------------------- order & reduction --

/// Minimum coefficient valuation; infinity for the zero morphism.
inline PValuation ord_morphism(const MorQ& F, long long p) {
  PValuation best = PValuation::inf();
  for (const auto& [X, c] : F.terms) {
    PValuation v = pval(c, p);
    if (v < best) best = v;
  }
  return best;
}

/// Coefficientwise reduction mod p; requires nonnegative order.
inline MorP specialize(const MorQ& F, long long p) {
  if (!ord_morphism(F, p).nonnegative())
    throw NotPAdmissible("specialize: morphism has negative order at p=" + std::to_string(p));
  MorP out(F.m, F.n, p);
  for (const auto& [X, c] : F.terms) out.add_term(X, reduce_mod_p(c, p));
  return out;
}

// ----------------------------------------------------------------- JSON --

template <class R>
nlohmann::json to_json(const Morphism<R>& F) {
  nlohmann::json j;
  j["m"] = F.m;
  j["n"] = F.n;
  j["ring"] = RingTraits<R>::name(F.p);
  std::vector<std::pair<std::vector<std::pair<int, int>>, std::string>> rows;
  for (const auto& [X, c] : F.terms) rows.emplace_back(X.pairs(), c.to_string());
  std::sort(rows.begin(), rows.end());
  nlohmann::json terms = nlohmann::json::array();
  for (auto& [pairs, coeff] : rows) {
    nlohmann::json t;
    t["pairs"] = pairs;
    t["coeff"] = coeff;
    terms.push_back(t);
  }
  j["terms"] = terms;
  return j;
}

template <class R>
Morphism<R> from_json(const nlohmann::json& j) {
  std::string ring = j.at("ring").get<std::string>();
  long long p = 0;
  if (ring != "Q") p = std::stoll(ring.substr(1));
  Morphism<R> F(j.at("m").get<int>(), j.at("n").get<int>(), p);
  for (const auto& t : j.at("terms")) {
    Matching x;
    x.m = static_cast<int16_t>(F.m);
    x.n = static_cast<int16_t>(F.n);
    x.pr.assign(static_cast<size_t>(F.m + F.n), -1);
    for (const auto& pr : t.at("pairs")) {
      int a = pr.at(0).get<int>() - 1, b = pr.at(1).get<int>() - 1;
      x.pr[static_cast<size_t>(a)] = static_cast<int16_t>(b);
      x.pr[static_cast<size_t>(b)] = static_cast<int16_t>(a);
    }
    F.add_term(x, RingTraits<R>::parse(t.at("coeff").get<std::string>(), p));
  }
  return F;
}

}  // namespace tiltlab::tl
