#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/gmp.hpp>
#include <mpfr.h>

#include "error.hpp"
#include "json.hpp"

namespace vasiplab {

using BigInt = boost::multiprecision::mpz_int;

namespace detail {

class Mpfr {
 public:
  explicit Mpfr(mpfr_prec_t prec) { mpfr_init2(v_, prec); }
  ~Mpfr() { mpfr_clear(v_); }
  Mpfr(const Mpfr&) = delete;
  Mpfr& operator=(const Mpfr&) = delete;
  mpfr_ptr get() { return v_; }

 private:
  mpfr_t v_;
};

/// The shortest decimal that round-trips to x, as an exact rational.
inline boost::multiprecision::mpq_rational decimal_rational(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific);
  const std::string text(buf, res.ptr);
  const auto e_pos = text.find('e');
  std::string digits;
  int point = -1;
  for (std::size_t i = 0; i < e_pos; ++i) {
    if (text[i] == '.') point = static_cast<int>(digits.size());
    else if (text[i] != '-') digits += text[i];
  }
  const int frac = point < 0 ? 0 : static_cast<int>(digits.size()) - point;
  const int exp10 = std::stoi(text.substr(e_pos + 1)) - frac;
  BigInt num(digits);
  if (x < 0) num = -num;
  BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::abs(exp10)));
  return exp10 >= 0 ? boost::multiprecision::mpq_rational(num * scale) : boost::multiprecision::mpq_rational(num, scale);
}

/// floor(n^e) for a rational exponent e. Values within 1e-9 of an integer
/// snap to it.
inline BigInt floor_pow(std::int64_t n, const boost::multiprecision::mpq_rational& e_q) {
  const double bits = std::abs(e_q.convert_to<double>()) * std::log2(static_cast<double>(std::max<std::int64_t>(n, 2)));
  const auto prec = static_cast<mpfr_prec_t>(std::ceil(bits)) + 192;
  Mpfr e(prec), base(prec), v(prec), r(prec), diff(prec);
  mpfr_set_q(e.get(), e_q.backend().data(), MPFR_RNDN);
  mpfr_set_si(base.get(), static_cast<long>(n), MPFR_RNDN);
  mpfr_pow(v.get(), base.get(), e.get(), MPFR_RNDN);
  mpfr_round(r.get(), v.get());
  mpfr_sub(diff.get(), v.get(), r.get(), MPFR_RNDN);
  mpz_t z;
  mpz_init(z);
  if (std::abs(mpfr_get_d(diff.get(), MPFR_RNDN)) <= 1e-9)
    mpfr_get_z(z, r.get(), MPFR_RNDN);
  else
    mpfr_get_z(z, v.get(), MPFR_RNDD);
  BigInt out(z);
  mpz_clear(z);
  return out;
}

}  // namespace detail

struct Block {
  std::int64_t n = 0;
  BigInt start;      // first index of I_n
  BigInt len;        // floor(n^c)
  BigInt c_n;        // floor(n^(c(1-a))) full sub-blocks
  BigInt sub_len;    // floor(n^(ca))
  BigInt remainder;  // length of the trailing block I_{n, c_n + 1}

  BigInt end() const { return start + len - 1; }
};

struct BlockPlan {
  double c = 0.0;
  double a = 0.0;
  std::vector<Block> blocks;

  /// a_n: the last index of I_n.
  BigInt a_n(std::int64_t n) const { return blocks.at(static_cast<std::size_t>(n - 1)).end(); }
};

/// Consecutive blocks I_n of length floor(n^c) starting at 1, each cut into
/// c_n sub-blocks of length floor(n^(ca)) plus the remainder.
inline BlockPlan block_plan(double c, double a, std::int64_t horizon) {
  if (!(c > 1.0) || !std::isfinite(c)) throw ValidationError("block exponent c must exceed 1");
  if (!(a > 0.5 && a < 1.0)) throw ValidationError("sub-block fraction a must lie in (1/2, 1)");
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  BlockPlan p{c, a, {}};
  using Q = boost::multiprecision::mpq_rational;
  const Q cq = detail::decimal_rational(c);
  const Q aq = detail::decimal_rational(a);
  const Q e_sub = cq * aq;
  const Q e_count = cq - e_sub;
  BigInt next = 1;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    Block b;
    b.n = n;
    b.start = next;
    b.len = detail::floor_pow(n, cq);
    b.c_n = detail::floor_pow(n, e_count);
    b.sub_len = detail::floor_pow(n, e_sub);
    b.remainder = b.len - b.c_n * b.sub_len;
    next = b.start + b.len;
    p.blocks.push_back(std::move(b));
  }
  return p;
}

struct BlockPlanCheck {
  bool ok = true;
  std::vector<std::string> violations;
};

inline BlockPlanCheck check_block_plan(const BlockPlan& p) {
  BlockPlanCheck r;
  auto fail = [&](std::int64_t n, const std::string& what) {
    r.ok = false;
    r.violations.push_back("n=" + std::to_string(n) + ": " + what);
  };
  BigInt expected_start = 1, total = 0;
  for (const auto& b : p.blocks) {
    if (b.start != expected_start) fail(b.n, "gap or overlap before the block");
    if (b.len < 1) fail(b.n, "empty block");
    if (b.sub_len < 1) fail(b.n, "empty sub-block");
    if (b.remainder < 0) fail(b.n, "sub-blocks overflow the block");
    if (b.c_n * b.sub_len + b.remainder != b.len) fail(b.n, "sub-blocks do not tile the block");
    if (b.remainder > 2 * b.sub_len) fail(b.n, "remainder longer than twice the sub-block length");
    total += b.len;
    if (b.end() != total) fail(b.n, "a_n differs from the cumulative length");
    expected_start = b.end() + 1;
  }
  return r;
}

inline nlohmann::json to_json(const BlockPlan& p) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : p.blocks)
    blocks.push_back({{"n", b.n},
                      {"start", b.start.str()},
                      {"len", b.len.str()},
                      {"c_n", b.c_n.str()},
                      {"sub_len", b.sub_len.str()},
                      {"remainder", b.remainder.str()},
                      {"a_n", b.end().str()}});
  return {{"c", p.c}, {"a", p.a}, {"horizon", p.blocks.size()}, {"blocks", blocks}};
}

/// One row per sub-block: "n,start,len,subblock_index,sub_start,sub_len".
/// Throws when the plan has more than max_rows sub-blocks.
inline std::string block_plan_csv(const BlockPlan& p, std::uint64_t max_rows = 1000000) {
  BigInt rows = 0;
  for (const auto& b : p.blocks) rows += b.c_n + (b.remainder > 0 ? 1 : 0);
  if (rows > max_rows)
    throw ValidationError("block plan has " + rows.str() + " sub-blocks, above the row limit " +
                          std::to_string(max_rows));
  std::ostringstream os;
  os << "n,start,len,subblock_index,sub_start,sub_len\n";
  for (const auto& b : p.blocks) {
    const auto cn = b.c_n.convert_to<std::uint64_t>();
    BigInt sub_start = b.start;
    for (std::uint64_t i = 1; i <= cn; ++i) {
      os << b.n << ',' << b.start << ',' << b.len << ',' << i << ',' << sub_start << ',' << b.sub_len << '\n';
      sub_start += b.sub_len;
    }
    if (b.remainder > 0)
      os << b.n << ',' << b.start << ',' << b.len << ',' << cn + 1 << ',' << sub_start << ',' << b.remainder << '\n';
  }
  return os.str();
}

}  // namespace vasiplab
