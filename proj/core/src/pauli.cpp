#include "agpforge/pauli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace agpforge {

namespace {

constexpr int kWordBits = 64;

int word_count(int n_sites) { return (n_sites + kWordBits - 1) / kWordBits; }

int popcount_and(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  int c = 0;
  for (std::size_t w = 0; w < a.size(); ++w) c += std::popcount(a[w] & b[w]);
  return c;
}

}  // namespace

PauliString::PauliString(int n_sites) : n_sites_(n_sites) {
  if (n_sites <= 0) throw std::invalid_argument("PauliString: n_sites must be positive");
  x_.assign(word_count(n_sites), 0);
  z_.assign(word_count(n_sites), 0);
}

PauliString PauliString::from_text(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("PauliString: empty text");
  PauliString s(static_cast<int>(text.size()));
  for (std::size_t i = 0; i < text.size(); ++i) s.set_pauli(static_cast<int>(i), text[i]);
  return s;
}

PauliString PauliString::single(int n_sites, int site, char axis) {
  PauliString s(n_sites);
  s.set_pauli(site, axis);
  return s;
}

void PauliString::check_site(int site) const {
  if (site < 0 || site >= n_sites_) throw std::out_of_range("PauliString: site out of range");
}

bool PauliString::is_identity() const {
  for (std::size_t w = 0; w < x_.size(); ++w)
    if (x_[w] | z_[w]) return false;
  return true;
}

bool PauliString::x_bit(int site) const {
  check_site(site);
  return (x_[site / kWordBits] >> (site % kWordBits)) & 1u;
}

bool PauliString::z_bit(int site) const {
  check_site(site);
  return (z_[site / kWordBits] >> (site % kWordBits)) & 1u;
}

char PauliString::pauli_at(int site) const {
  const bool x = x_bit(site), z = z_bit(site);
  if (x && z) return 'Y';
  if (x) return 'X';
  if (z) return 'Z';
  return 'I';
}

void PauliString::set_pauli(int site, char axis) {
  check_site(site);
  const std::uint64_t bit = std::uint64_t{1} << (site % kWordBits);
  const int w = site / kWordBits;
  x_[w] &= ~bit;
  z_[w] &= ~bit;
  switch (axis) {
    case 'I': break;
    case 'X': x_[w] |= bit; break;
    case 'Y': x_[w] |= bit; z_[w] |= bit; break;
    case 'Z': z_[w] |= bit; break;
    default: throw std::invalid_argument("PauliString: axis must be one of I,X,Y,Z");
  }
}

int PauliString::weight() const {
  int c = 0;
  for (std::size_t w = 0; w < x_.size(); ++w) c += std::popcount(x_[w] | z_[w]);
  return c;
}

int PauliString::x_count() const {
  int c = 0;
  for (std::size_t w = 0; w < x_.size(); ++w) c += std::popcount(x_[w] & ~z_[w]);
  return c;
}

std::string PauliString::text() const {
  std::string out(static_cast<std::size_t>(n_sites_), 'I');
  for (int i = 0; i < n_sites_; ++i) out[static_cast<std::size_t>(i)] = pauli_at(i);
  return out;
}

std::strong_ordering PauliString::operator<=>(const PauliString& other) const {
  if (auto c = n_sites_ <=> other.n_sites_; c != 0) return c;
  for (std::size_t w = z_.size(); w-- > 0;) {
    if (auto c = z_[w] <=> other.z_[w]; c != 0) return c;
  }
  for (std::size_t w = x_.size(); w-- > 0;) {
    if (auto c = x_[w] <=> other.x_[w]; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

std::size_t PauliString::hash() const {
  // FNV-1a over the mask words.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (auto w : z_) mix(w);
  for (auto w : x_) mix(w);
  mix(static_cast<std::uint64_t>(n_sites_));
  return static_cast<std::size_t>(h);
}

bool commutes(const PauliString& a, const PauliString& b) {
  if (a.n_sites_ != b.n_sites_) throw std::invalid_argument("commutes: site-count mismatch");
  const int form = popcount_and(a.x_, b.z_) + popcount_and(a.z_, b.x_);
  return (form & 1) == 0;
}

PhasedString multiply(const PauliString& a, const PauliString& b) {
  if (a.n_sites_ != b.n_sites_) throw std::invalid_argument("multiply: site-count mismatch");
  // i^{|ax&az|} X^ax Z^az * i^{|bx&bz|} X^bx Z^bz
  //   = i^{|ax&az| + |bx&bz| + 2|az&bx| - |cx&cz|} * (i^{|cx&cz|} X^cx Z^cz)
  PauliString c(a.n_sites_);
  int p = 0;
  for (std::size_t w = 0; w < a.x_.size(); ++w) {
    p += std::popcount(a.x_[w] & a.z_[w]) + std::popcount(b.x_[w] & b.z_[w]) +
         2 * std::popcount(a.z_[w] & b.x_[w]);
    c.x_[w] = a.x_[w] ^ b.x_[w];
    c.z_[w] = a.z_[w] ^ b.z_[w];
    p -= std::popcount(c.x_[w] & c.z_[w]);
  }
  PhasedString out;
  out.string = std::move(c);
  out.phase_power = ((p % 4) + 4) % 4;
  return out;
}

std::optional<PhasedString> commutator(const PauliString& a, const PauliString& b) {
  if (commutes(a, b)) return std::nullopt;
  return multiply(a, b);
}

double trace_inner(const PauliString& a, const PauliString& b) {
  if (a.n_sites() != b.n_sites()) throw std::invalid_argument("trace_inner: site-count mismatch");
  return a == b ? 1.0 : 0.0;
}

void PauliOperator::add_term(const PauliString& s, double coeff) {
  if (s.n_sites() != n_sites_) throw std::invalid_argument("PauliOperator: site-count mismatch");
  terms_[s] += coeff;
}

double PauliOperator::coeff(const PauliString& s) const {
  auto it = terms_.find(s);
  return it == terms_.end() ? 0.0 : it->second;
}

PauliOperator& PauliOperator::operator+=(const PauliOperator& rhs) {
  if (rhs.n_sites_ != n_sites_) throw std::invalid_argument("PauliOperator: site-count mismatch");
  for (const auto& [s, c] : rhs.terms_) terms_[s] += c;
  prune();
  return *this;
}

PauliOperator& PauliOperator::operator-=(const PauliOperator& rhs) {
  if (rhs.n_sites_ != n_sites_) throw std::invalid_argument("PauliOperator: site-count mismatch");
  for (const auto& [s, c] : rhs.terms_) terms_[s] -= c;
  prune();
  return *this;
}

PauliOperator& PauliOperator::operator*=(double factor) {
  // scaling keeps relative magnitudes; nothing to prune
  for (auto& [s, c] : terms_) c *= factor;
  return *this;
}

double PauliOperator::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [s, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

void PauliOperator::prune(double rel) {
  const double cutoff = rel * max_abs_coeff();
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) <= cutoff) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

std::string PauliOperator::text() const {
  if (terms_.empty()) return "0";
  std::string out;
  char buf[64];
  for (const auto& [s, c] : terms_) {
    std::snprintf(buf, sizeof(buf), "%+.6g ", c);
    out += buf;
    out += s.text();
    out += "  ";
  }
  return out;
}

PauliOperator op_commutator(const PauliOperator& a, const PauliOperator& b, double prune_rel) {
  if (a.n_sites() != b.n_sites()) throw std::invalid_argument("op_commutator: site-count mismatch");
  PauliOperator out(a.n_sites());
  for (const auto& [sa, ca] : a.terms()) {
    for (const auto& [sb, cb] : b.terms()) {
      if (commutes(sa, sb)) continue;
      PhasedString p = multiply(sa, sb);
      // [sa,sb] = 2 sa sb with sa sb = i^p * string; -i * 2 * i^p is +-2 for odd p.
      const double sign = (p.phase_power == 1) ? 2.0 : -2.0;
      out.add_term(p.string, sign * ca * cb);
    }
  }
  out.prune(prune_rel);
  return out;
}

double normalized_trace_product(const PauliOperator& a, const PauliOperator& b) {
  if (a.n_sites() != b.n_sites())
    throw std::invalid_argument("normalized_trace_product: site-count mismatch");
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  double sum = 0.0;
  for (const auto& [s, c] : small.terms()) {
    auto it = large.terms().find(s);
    if (it != large.terms().end()) sum += c * it->second;
  }
  return sum;
}

double hs_norm_per_dim(const PauliOperator& a) {
  double sum = 0.0;
  for (const auto& [s, c] : a.terms()) sum += c * c;
  return std::sqrt(sum);
}

std::string serialize_json(const PauliOperator& op) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [s, c] : op.terms()) {
    j.push_back({{"string", s.text()}, {"coeff", c}});
  }
  return j.dump();
}

PauliOperator parse_operator_json(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("operator JSON must be a non-empty array of terms");
  PauliOperator op;
  bool first = true;
  for (const auto& term : j) {
    const auto s = PauliString::from_text(term.at("string").get<std::string>());
    if (first) {
      op = PauliOperator(s.n_sites());
      first = false;
    }
    op.add_term(s, term.at("coeff").get<double>());
  }
  op.prune();
  return op;
}

namespace {

// Left-rotate an n-bit field by s (bit i -> bit (i+s) mod n).
void rotl_bits(std::span<const std::uint64_t> in, std::vector<std::uint64_t>& out, int n, int s) {
  const int nw = static_cast<int>(in.size());
  std::fill(out.begin(), out.end(), 0);
  auto set_range = [&](int dst0, std::uint64_t bits, int count) {
    // OR `count` low bits of `bits` into out starting at bit position dst0.
    while (count > 0) {
      const int w = dst0 / kWordBits, b = dst0 % kWordBits;
      out[static_cast<std::size_t>(w)] |= bits << b;
      const int used = std::min(count, kWordBits - b);
      bits >>= used == kWordBits ? 0 : used;
      if (used == kWordBits) bits = 0;
      dst0 += used;
      count -= used;
    }
  };
  for (int w = 0; w < nw; ++w) {
    const int base = w * kWordBits;
    const int take = std::min(kWordBits, n - base);
    if (take <= 0) break;
    std::uint64_t bits = in[static_cast<std::size_t>(w)];
    const int dst = (base + s) % n;
    const int first = std::min(take, n - dst);
    set_range(dst, bits & (first == 64 ? ~0ULL : ((1ULL << first) - 1)), first);
    if (first < take) set_range(0, bits >> first, take - first);
  }
}

}  // namespace

PauliString rotate_sites(const PauliString& s, int shift) {
  const int n = s.n_sites_;
  shift = ((shift % n) + n) % n;
  if (shift == 0) return s;
  PauliString out(n);
  rotl_bits(s.x_, out.x_, n, shift);
  rotl_bits(s.z_, out.z_, n, shift);
  return out;
}

PauliString reflect_sites(const PauliString& s) {
  const int n = s.n_sites();
  PauliString out(n);
  for (int i = 0; i < n; ++i) {
    const char p = s.pauli_at(i);
    if (p != 'I') out.set_pauli(n - 1 - i, p);
  }
  return out;
}

PauliString permute_sites(const PauliString& s, std::span<const int> perm) {
  const int n = s.n_sites();
  if (static_cast<int>(perm.size()) != n)
    throw std::invalid_argument("permute_sites: permutation size mismatch");
  PauliString out(n);
  for (int i = 0; i < n; ++i) {
    const char p = s.pauli_at(i);
    if (p != 'I') out.set_pauli(perm[static_cast<std::size_t>(i)], p);
  }
  return out;
}

}  // namespace agpforge
