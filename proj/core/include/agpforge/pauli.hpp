#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agpforge {

struct PhasedString;

/// Tensor product of single-site Pauli operators, encoded as a pair of
/// bitmasks over sites: per site, (x,z) = (0,0) -> I, (1,0) -> X,
/// (1,1) -> Y, (0,1) -> Z.  With this encoding a string is the Hermitian
/// operator i^{|x&z|} X^x Z^z, so products and commutators reduce to
/// XOR-and-popcount passes over the mask words.
class PauliString {
 public:
  PauliString() = default;

  /// Identity on n_sites sites.
  explicit PauliString(int n_sites);

  /// Parse "XIZ" (site 1 is the leftmost character).
  static PauliString from_text(std::string_view text);

  /// Single non-identity factor at `site` (0-based), axis in {'X','Y','Z'}.
  static PauliString single(int n_sites, int site, char axis);

  int n_sites() const { return n_sites_; }
  bool is_identity() const;

  char pauli_at(int site) const;  // 'I','X','Y' or 'Z'
  void set_pauli(int site, char axis);
  bool x_bit(int site) const;
  bool z_bit(int site) const;

  /// Number of non-identity sites.
  int weight() const;
  /// Number of pure-X sites (x set, z clear).
  int x_count() const;

  std::string text() const;

  std::span<const std::uint64_t> x_words() const { return x_; }
  std::span<const std::uint64_t> z_words() const { return z_; }

  bool operator==(const PauliString&) const = default;
  /// Deterministic order: lexicographic on (z_mask, x_mask).
  std::strong_ordering operator<=>(const PauliString& other) const;

  std::size_t hash() const;

  friend bool commutes(const PauliString& a, const PauliString& b);
  friend PhasedString multiply(const PauliString& a, const PauliString& b);
  friend PauliString rotate_sites(const PauliString&, int shift);

 private:
  void check_site(int site) const;

  int n_sites_ = 0;
  std::vector<std::uint64_t> x_, z_;
};

/// A Pauli string together with a scalar i^phase_power, phase_power in {0,1,2,3}.
struct PhasedString {
  PauliString string;
  int phase_power = 0;
};

/// True when the strings commute (symplectic form is even).
bool commutes(const PauliString& a, const PauliString& b);

/// Product a*b.  Associative; multiply(a,a) is the identity with phase 1.
/// Throws std::invalid_argument on site-count mismatch.
PhasedString multiply(const PauliString& a, const PauliString& b);

/// [a,b].  Returns nullopt when a and b commute; otherwise the product a*b,
/// with the understanding that [a,b] = 2*(a*b) for anticommuting strings.
/// The returned phase_power is always odd.
std::optional<PhasedString> commutator(const PauliString& a, const PauliString& b);

/// (1/2^n) Tr(a b): 1 if a == b else 0.
double trace_inner(const PauliString& a, const PauliString& b);

/// Real-weighted sum of Pauli strings (a Hermitian operator by construction).
/// Coefficients with magnitude below kPruneRel * max|coeff| are dropped after
/// every arithmetic step; term iteration order is the deterministic string
/// order (z_mask, x_mask).
class PauliOperator {
 public:
  static constexpr double kPruneRel = 1e-14;

  PauliOperator() = default;
  explicit PauliOperator(int n_sites) : n_sites_(n_sites) {}

  static PauliOperator zero(int n_sites) { return PauliOperator(n_sites); }

  int n_sites() const { return n_sites_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  const std::map<PauliString, double>& terms() const { return terms_; }

  /// Accumulate coeff onto string (no pruning; call prune() when done).
  void add_term(const PauliString& s, double coeff);
  double coeff(const PauliString& s) const;

  PauliOperator& operator+=(const PauliOperator& rhs);
  PauliOperator& operator-=(const PauliOperator& rhs);
  PauliOperator& operator*=(double factor);

  friend PauliOperator operator+(PauliOperator a, const PauliOperator& b) { return a += b; }
  friend PauliOperator operator-(PauliOperator a, const PauliOperator& b) { return a -= b; }
  friend PauliOperator operator*(double f, PauliOperator a) { return a *= f; }
  friend PauliOperator operator*(PauliOperator a, double f) { return a *= f; }

  double max_abs_coeff() const;
  /// Drop terms with |coeff| < rel * max|coeff|.
  void prune(double rel = kPruneRel);

  std::string text() const;

 private:
  int n_sites_ = 0;
  std::map<PauliString, double> terms_;
};

/// -i[A,B].  Real-coefficient (Hermitian) by construction, bilinear and
/// antisymmetric.  Throws on site-count mismatch.  `prune_rel` = 0 keeps
/// every nonzero coefficient (nested-commutator basis generation needs the
/// full dynamic range); exact cancellations are always dropped.
PauliOperator op_commutator(const PauliOperator& a, const PauliOperator& b,
                            double prune_rel = PauliOperator::kPruneRel);

/// (1/2^n) Tr(A B) = sum over shared strings of coefficient products.
double normalized_trace_product(const PauliOperator& a, const PauliOperator& b);

/// sqrt((1/2^n) Tr(A^2)).
double hs_norm_per_dim(const PauliOperator& a);

/// JSON form: [{"string": "XIZ", "coeff": 0.5}, ...]
std::string serialize_json(const PauliOperator& op);
PauliOperator parse_operator_json(std::string_view json_text);

/// Cyclic shift: site i -> (i + shift) mod n.
PauliString rotate_sites(const PauliString& s, int shift);
/// Spatial inversion: site i -> n - 1 - i.
PauliString reflect_sites(const PauliString& s);
/// General site relabeling: site i -> perm[i].
PauliString permute_sites(const PauliString& s, std::span<const int> perm);

}  // namespace agpforge
