#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbf/constrained_spaces.hpp"
#include "cbf/constraints.hpp"
#include "cbf/errors.hpp"
#include "cbf/lp.hpp"
#include "cbf/parameter_space.hpp"

namespace cbf {

/// Parsed hypotheses plus the automatically added complement.
struct HypothesisSystem {
  std::vector<ConstraintMatrices> hypotheses;  // user hypotheses, in input order
  std::vector<std::string> labels;             // H1..Hk (+ complement label)
  bool complement_included = false;
  std::vector<double> prior_weights;           // one per hypothesis incl. complement, sums to 1

  std::size_t size() const { return hypotheses.size() + (complement_included ? 1 : 0); }
  bool exploratory_only() const { return hypotheses.empty(); }
};

namespace detail {

enum class Tok { Name, Number, LParen, RParen, Comma, Eq, Lt, Gt, Plus, Minus, Star, Amp, Semi, End };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  std::size_t pos = 0;
};

inline const char* describe(Tok t) {
  switch (t) {
    case Tok::Name: return "parameter name";
    case Tok::Number: return "number";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Eq: return "'='";
    case Tok::Lt: return "'<'";
    case Tok::Gt: return "'>'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Amp: return "'&'";
    case Tok::Semi: return "';'";
    case Tok::End: return "end of input";
  }
  return "?";
}

inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto digit = [&](std::size_t k) { return k < s.size() && std::isdigit(static_cast<unsigned char>(s[k])); };
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c))) {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' || s[i] == '.')) ++i;
      out.push_back({Tok::Name, std::string(s.substr(start, i - start)), 0.0, start});
      continue;
    }
    if (digit(i) || (c == '.' && digit(i + 1))) {
      while (digit(i)) ++i;
      if (i < s.size() && s[i] == '.') {
        ++i;
        while (digit(i)) ++i;
      }
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t k = i + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (digit(k)) {
          i = k;
          while (digit(i)) ++i;
        }
      }
      const std::string text(s.substr(start, i - start));
      out.push_back({Tok::Number, text, std::stod(text), start});
      continue;
    }
    Tok kind;
    switch (c) {
      case '(': kind = Tok::LParen; break;
      case ')': kind = Tok::RParen; break;
      case ',': kind = Tok::Comma; break;
      case '=': kind = Tok::Eq; break;
      case '<': kind = Tok::Lt; break;
      case '>': kind = Tok::Gt; break;
      case '+': kind = Tok::Plus; break;
      case '-': kind = Tok::Minus; break;
      case '*': kind = Tok::Star; break;
      case '&': kind = Tok::Amp; break;
      case ';': kind = Tok::Semi; break;
      default: throw ParseError(fmt::format("unexpected character '{}' at position {}", c, start), start);
    }
    out.push_back({kind, std::string(1, c), 0.0, start});
    ++i;
  }
  out.push_back({Tok::End, "", 0.0, s.size()});
  return out;
}

struct LinearExpr {
  std::map<std::size_t, double> coef;
  double constant = 0.0;
};

struct RawRow {
  Vector coef;
  double rhs;
  bool equality;
  std::size_t pos;
};

/// Recursive-descent parser over the token stream; one instance per input string.
class Parser {
 public:
  Parser(std::string_view text, const ParameterSpace& space) : text_(text), toks_(tokenize(text)), space_(space) {}

  std::vector<ConstraintMatrices> system() {
    std::vector<ConstraintMatrices> out;
    out.push_back(hypothesis());
    while (peek().kind == Tok::Semi) {
      next();
      out.push_back(hypothesis());
    }
    expect(Tok::End);
    return out;
  }

 private:
  const Token& peek() const { return toks_[at_]; }
  const Token& next() { return toks_[at_++]; }

  [[noreturn]] void fail(const std::string& what, const Token& t) const {
    throw ParseError(fmt::format("{} at position {} (found {})", what, t.pos,
                                 t.kind == Tok::End ? std::string("end of input") : "'" + t.text + "'"),
                     t.pos);
  }

  const Token& expect(Tok k) {
    if (peek().kind != k) fail(fmt::format("expected {}", describe(k)), peek());
    return next();
  }

  ConstraintMatrices hypothesis() {
    const std::size_t start = peek().pos;
    std::vector<RawRow> rows;
    constraint(rows);
    while (peek().kind == Tok::Amp) {
      next();
      constraint(rows);
    }
    const std::size_t end = peek().pos;
    return finish(rows, std::string(trim(text_.substr(start, end - start))));
  }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  }

  void constraint(std::vector<RawRow>& rows) {
    std::vector<LinearExpr> lhs = side();
    bool any = false;
    while (peek().kind == Tok::Eq || peek().kind == Tok::Lt || peek().kind == Tok::Gt) {
      const Token cmp = next();
      std::vector<LinearExpr> rhs = side();
      for (const auto& l : lhs) {
        for (const auto& r : rhs) rows.push_back(make_row(l, r, cmp));
      }
      lhs = std::move(rhs);
      any = true;
    }
    if (!any) fail("expected '=', '<' or '>'", peek());
  }

  RawRow make_row(const LinearExpr& l, const LinearExpr& r, const Token& cmp) const {
    Vector c = Vector::Zero(static_cast<Eigen::Index>(space_.size()));
    for (auto [k, v] : l.coef) c(k) += v;
    for (auto [k, v] : r.coef) c(k) -= v;
    double rhs = r.constant - l.constant;
    if (cmp.kind == Tok::Lt) {
      c = -c;
      rhs = -rhs;
    }
    if ((c.array() == 0.0).all()) {
      throw ParseError(fmt::format("degenerate constraint: zero row at position {}", cmp.pos), cmp.pos);
    }
    return {c, rhs, cmp.kind == Tok::Eq, cmp.pos};
  }

  std::vector<LinearExpr> side() {
    if (peek().kind == Tok::LParen) {
      next();
      std::vector<LinearExpr> group{expr()};
      while (peek().kind == Tok::Comma) {
        next();
        group.push_back(expr());
      }
      expect(Tok::RParen);
      return group;
    }
    return {expr()};
  }

  LinearExpr expr() {
    LinearExpr e;
    double sign = 1.0;
    if (peek().kind == Tok::Plus || peek().kind == Tok::Minus) sign = next().kind == Tok::Minus ? -1.0 : 1.0;
    term(e, sign);
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      sign = next().kind == Tok::Minus ? -1.0 : 1.0;
      term(e, sign);
    }
    return e;
  }

  void term(LinearExpr& e, double sign) {
    // A sign directly after '+'/'-' is accepted as part of the numeric literal.
    if (peek().kind == Tok::Plus || peek().kind == Tok::Minus) sign *= next().kind == Tok::Minus ? -1.0 : 1.0;
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      next();
      const double value = sign * t.number;
      bool star = false;
      if (peek().kind == Tok::Star) {
        next();
        star = true;
      }
      if (peek().kind == Tok::Name) {
        add_name(e, next(), value);
      } else if (star) {
        fail("expected parameter name after '*'", peek());
      } else {
        e.constant += value;
      }
      return;
    }
    if (t.kind == Tok::Name) {
      add_name(e, next(), sign);
      return;
    }
    fail("expected parameter name or number", t);
  }

  void add_name(LinearExpr& e, const Token& t, double coef) const {
    auto idx = space_.find(t.text);
    if (!idx) throw ParseError(fmt::format("unknown parameter '{}' at position {}", t.text, t.pos), t.pos);
    e.coef[*idx] += coef;
  }

  ConstraintMatrices finish(const std::vector<RawRow>& rows, std::string text) const;

  std::string_view text_;
  std::vector<Token> toks_;
  std::size_t at_ = 0;
  const ParameterSpace& space_;
};

/// Scales a row so its coefficients and bound become coprime integers when they are
/// (close to) rational; otherwise so the largest |coefficient| is 1. Equality rows
/// additionally get a positive leading coefficient.
inline void normalize_row(Vector& coef, double& rhs, bool equality) {
  auto rational = [](double x, std::int64_t& num, std::int64_t& den) {
    // continued fractions, denominators up to 1e6
    const double tol = 1e-12 * std::max(1.0, std::abs(x));
    double v = x;
    std::int64_t h0 = 1, h1 = 0, k0 = 0, k1 = 1;
    for (int it = 0; it < 40; ++it) {
      const double a = std::floor(v);
      if (std::abs(a) > 1e15) return false;
      const auto ai = static_cast<std::int64_t>(a);
      const std::int64_t h2 = ai * h0 + h1, k2 = ai * k0 + k1;
      h1 = h0; h0 = h2; k1 = k0; k0 = k2;
      if (k0 > 1000000) return false;
      if (std::abs(static_cast<double>(h0) / static_cast<double>(k0) - x) <= tol) {
        num = h0;
        den = k0;
        return true;
      }
      const double frac = v - a;
      if (frac == 0.0) break;
      v = 1.0 / frac;
    }
    return false;
  };

  if (equality) {
    for (Eigen::Index i = 0; i < coef.size(); ++i) {
      if (coef(i) != 0.0) {
        if (coef(i) < 0) {
          coef = -coef;
          rhs = -rhs;
        }
        break;
      }
    }
  }
  const double maxc = coef.cwiseAbs().maxCoeff();
  coef /= maxc;
  rhs /= maxc;
  for (Eigen::Index i = 0; i < coef.size(); ++i)
    if (std::abs(coef(i)) < 1e-14) coef(i) = 0.0;

  std::int64_t lcm = 1;
  std::vector<std::pair<std::int64_t, std::int64_t>> fr;
  bool ok = true;
  for (Eigen::Index i = 0; i <= coef.size() && ok; ++i) {
    const double v = i < coef.size() ? coef(i) : rhs;
    std::int64_t n = 0, d = 1;
    ok = rational(v, n, d);
    if (ok) {
      lcm = std::lcm(lcm, d);
      ok = lcm <= 1000000;
      fr.emplace_back(n, d);
    }
  }
  if (!ok) return;
  std::int64_t g = 0;
  std::vector<std::int64_t> ints;
  for (auto [n, d] : fr) {
    const std::int64_t v = n * (lcm / d);
    ints.push_back(v);
    g = std::gcd(g, v < 0 ? -v : v);
  }
  if (g == 0) return;
  for (Eigen::Index i = 0; i < coef.size(); ++i) coef(i) = static_cast<double>(ints[i] / g);
  rhs = static_cast<double>(ints.back() / g);
}

inline ConstraintMatrices Parser::finish(const std::vector<RawRow>& rows, std::string text) const {
  const auto P = static_cast<Eigen::Index>(space_.size());
  std::vector<RawRow> eqs, ords;
  for (RawRow r : rows) {
    normalize_row(r.coef, r.rhs, r.equality);
    auto& bucket = r.equality ? eqs : ords;
    bool duplicate = false;
    for (const auto& o : bucket) {
      if (o.coef == r.coef) {
        if (r.equality && o.rhs != r.rhs) {
          throw ParseError(fmt::format("contradictory equality constraints at position {}", r.pos), r.pos);
        }
        if (o.rhs == r.rhs) duplicate = true;
      }
    }
    if (!duplicate) bucket.push_back(r);
  }
  ConstraintMatrices cm = ConstraintMatrices::empty(P);
  cm.RE.resize(static_cast<Eigen::Index>(eqs.size()), P);
  cm.rE.resize(static_cast<Eigen::Index>(eqs.size()));
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    cm.RE.row(static_cast<Eigen::Index>(i)) = eqs[i].coef.transpose();
    cm.rE(static_cast<Eigen::Index>(i)) = eqs[i].rhs;
  }
  cm.RO.resize(static_cast<Eigen::Index>(ords.size()), P);
  cm.rO.resize(static_cast<Eigen::Index>(ords.size()));
  for (std::size_t i = 0; i < ords.size(); ++i) {
    cm.RO.row(static_cast<Eigen::Index>(i)) = ords[i].coef.transpose();
    cm.rO(static_cast<Eigen::Index>(i)) = ords[i].rhs;
  }
  cm.text = std::move(text);
  validate_hypothesis(cm);
  return cm;
}

}  // namespace detail

/// Parses "h1; h2; ..." into one ConstraintMatrices per hypothesis. '<' rows are
/// stored negated so every order row reads R^O theta > r^O.
inline std::vector<ConstraintMatrices> parse(std::string_view text, const ParameterSpace& space) {
  bool blank = true;
  for (char c : text) blank = blank && std::isspace(static_cast<unsigned char>(c));
  if (blank) throw ParseError("empty hypothesis string", 0);
  return detail::Parser(text, space).system();
}

/// Canonical text of a parsed hypothesis; parsing it again yields the same matrices.
inline std::string to_string(const ConstraintMatrices& cm, const ParameterSpace& space) {
  auto row_text = [&](const Vector& c, double rhs, const char* op) {
    std::string s;
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      const double v = c(j);
      if (v == 0.0) continue;
      const double mag = std::abs(v);
      if (s.empty()) {
        if (v < 0) s += "-";
      } else {
        s += v < 0 ? " - " : " + ";
      }
      if (mag != 1.0) s += fmt::format("{}*", mag);
      s += space.name(static_cast<std::size_t>(j));
    }
    return s + fmt::format(" {} {}", op, rhs);
  };
  std::vector<std::string> parts;
  for (Eigen::Index i = 0; i < cm.RE.rows(); ++i) parts.push_back(row_text(cm.RE.row(i).transpose(), cm.rE(i), "="));
  for (Eigen::Index i = 0; i < cm.RO.rows(); ++i) parts.push_back(row_text(cm.RO.row(i).transpose(), cm.rO(i), ">"));
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? " & " : "") + parts[i];
  return out;
}

inline std::string to_string(const std::vector<ConstraintMatrices>& hyps, const ParameterSpace& space) {
  std::string out;
  for (std::size_t i = 0; i < hyps.size(); ++i) out += (i ? "; " : "") + to_string(hyps[i], space);
  return out;
}

namespace detail {
/// Two single-row order hypotheses with opposite half-spaces cover the space up to a
/// null set (this is the exploratory triad pattern, with or without the equality).
inline bool covers_space(const std::vector<ConstraintMatrices>& hyps) {
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto& a = hyps[i];
    if (!a.is_order_only() || a.RO.rows() != 1) continue;
    for (std::size_t j = i + 1; j < hyps.size(); ++j) {
      const auto& b = hyps[j];
      if (!b.is_order_only() || b.RO.rows() != 1) continue;
      const Vector ca = a.RO.row(0) / a.RO.row(0).norm();
      const Vector cb = b.RO.row(0) / b.RO.row(0).norm();
      const double ra = a.rO(0) / a.RO.row(0).norm(), rb = b.rO(0) / b.RO.row(0).norm();
      if ((ca + cb).cwiseAbs().maxCoeff() < 1e-12 && std::abs(ra + rb) < 1e-12) return true;
    }
  }
  return false;
}
}  // namespace detail

/// Labels the hypotheses H1..Hk, appends the complement unless the hypotheses already
/// cover the parameter space, and assigns equal prior weights.
inline HypothesisSystem add_complement(std::vector<ConstraintMatrices> hyps, const ParameterSpace& space) {
  (void)space;
  HypothesisSystem sys;
  sys.complement_included = !hyps.empty() && !detail::covers_space(hyps);
  sys.hypotheses = std::move(hyps);
  for (std::size_t i = 0; i < sys.size(); ++i) sys.labels.push_back(fmt::format("H{}", i + 1));
  sys.prior_weights.assign(sys.size(), sys.size() ? 1.0 / static_cast<double>(sys.size()) : 0.0);
  return sys;
}

/// Replaces the prior weights; they are rescaled to sum to one.
inline void set_prior_weights(HypothesisSystem& sys, std::vector<double> weights) {
  if (weights.size() != sys.size()) {
    throw DataError(fmt::format("expected {} prior weights (hypotheses{}), got {}", sys.size(),
                                sys.complement_included ? " + complement" : "", weights.size()));
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("prior weights must be finite and non-negative");
    total += w;
  }
  if (total <= 0.0) throw DataError("prior weights are all zero");
  for (double& w : weights) w /= total;
  sys.prior_weights = std::move(weights);
}

/// True when every point of the order region of `inner` (up to a null set) also lies in
/// the order region of `outer`.
inline bool order_region_nested(const ConstraintMatrices& inner, const ConstraintMatrices& outer) {
  for (Eigen::Index k = 0; k < outer.RO.rows(); ++k) {
    Matrix A(inner.RO.rows() + 1, inner.RO.cols());
    Vector b(inner.RO.rows() + 1);
    A << inner.RO, -outer.RO.row(k);
    b << inner.rO, -outer.rO(k);
    if (lp::strictly_feasible(inner.RE, inner.rE, A, b)) return false;
  }
  return true;
}

/// One warning per pair of order hypotheses where one region contains the other.
inline std::vector<std::string> warn_nested_orders(const std::vector<ConstraintMatrices>& hyps) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (!hyps[i].is_order_only()) continue;
    for (std::size_t j = i + 1; j < hyps.size(); ++j) {
      if (!hyps[j].is_order_only()) continue;
      if (order_region_nested(hyps[i], hyps[j])) {
        out.push_back(fmt::format("H{} is nested in H{}; the Bayes factor between them is bounded", i + 1, j + 1));
      } else if (order_region_nested(hyps[j], hyps[i])) {
        out.push_back(fmt::format("H{} is nested in H{}; the Bayes factor between them is bounded", j + 1, i + 1));
      }
    }
  }
  return out;
}

}  // namespace cbf
