#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crdl/terminology.hpp"

namespace crdl {

// ── Terminology file format (.crl) ───────────────────────────────────────────
// Line oriented, UTF-8, '#' starts a comment.  Statements:
//
//   P(Name) = 0.9                 concept or role prior
//   P(Name | Cond) = 0.45         conditional (role hierarchy when both roles)
//   P(Name | not Cond) = 0.0
//   P(Name | Cond) in [0.1, 0.2]  interval assessment
//   Name = Expr                   definition  (C == D)
//   Name < Expr                   inclusion   (C is subsumed by D)
//
// Expr:  not E | E and E | E or E | exists r.E | forall r.E
//        | atleast k r.E | atmost k r.E | exactly k r.E
//        | {individual} | top | bottom | Name | (E)
// Inverse roles are written with a trailing dash: r-.
//
// Names are identifiers [A-Za-z_][A-Za-z0-9_]*.  A name is treated as a role
// exactly when it occurs in role position somewhere (inside a restriction, or
// as the conditioning side of an assessment over a role).
//
// Restriction fillers must be concept names, top/bottom, or nominals; any
// other filler is normalized away by introducing a synthetic definition
// _auxN = <filler>.  Complex conditioning expressions are normalized the same
// way (they downgrade the terminology to the credal profile, see validate).

namespace detail {

struct Tok {
  enum Type {
    Ident, Number, LParen, RParen, LBrace, RBrace, LBracket, RBracket,
    Pipe, Comma, Eq, Lt, Dot, Dash, End
  } type;
  std::string text;
  double num = 0.0;
  int col = 0;
};

class LineLexer {
 public:
  LineLexer(const std::string& line, int line_no)
      : line_(line), line_no_(line_no) {
    tokenize();
  }

  const Tok& peek(int ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  Tok next() {
    const Tok& t = peek();
    if (t.type != Tok::End) ++pos_;
    return t;
  }
  Tok expect(Tok::Type ty, const char* what) {
    Tok t = next();
    if (t.type != ty) fail(std::string("expected ") + what, t.col);
    return t;
  }
  [[noreturn]] void fail(const std::string& msg, int col) const {
    throw ParseError(msg, line_no_, col);
  }
  bool at_end() const { return peek().type == Tok::End; }
  int line_no() const { return line_no_; }

 private:
  void tokenize() {
    size_t i = 0;
    auto push = [&](Tok::Type ty, size_t start, size_t len) {
      Tok t;
      t.type = ty;
      t.text = line_.substr(start, len);
      t.col = static_cast<int>(start) + 1;
      toks_.push_back(std::move(t));
    };
    while (i < line_.size()) {
      char c = line_[i];
      if (c == '#') break;
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t s = i;
        while (i < line_.size() &&
               (std::isalnum(static_cast<unsigned char>(line_[i])) ||
                line_[i] == '_'))
          ++i;
        push(Tok::Ident, s, i - s);
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        // "." only begins a number when followed by a digit; otherwise it is
        // the restriction dot.
        if (c == '.' && (i + 1 >= line_.size() ||
                         !std::isdigit(static_cast<unsigned char>(line_[i + 1])))) {
          push(Tok::Dot, i, 1);
          ++i;
          continue;
        }
        size_t s = i;
        while (i < line_.size() &&
               (std::isdigit(static_cast<unsigned char>(line_[i])) ||
                line_[i] == '.'))
          ++i;
        // ".." range separators never appear inside .crl files; numbers here
        // contain at most one dot.
        Tok t;
        t.type = Tok::Number;
        t.text = line_.substr(s, i - s);
        t.col = static_cast<int>(s) + 1;
        try {
          t.num = std::stod(t.text);
        } catch (const std::exception&) {
          throw ParseError("bad number '" + t.text + "'", line_no_, t.col);
        }
        toks_.push_back(std::move(t));
        continue;
      }
      switch (c) {
        case '(': push(Tok::LParen, i, 1); break;
        case ')': push(Tok::RParen, i, 1); break;
        case '{': push(Tok::LBrace, i, 1); break;
        case '}': push(Tok::RBrace, i, 1); break;
        case '[': push(Tok::LBracket, i, 1); break;
        case ']': push(Tok::RBracket, i, 1); break;
        case '|': push(Tok::Pipe, i, 1); break;
        case ',': push(Tok::Comma, i, 1); break;
        case '=': push(Tok::Eq, i, 1); break;
        case '<': push(Tok::Lt, i, 1); break;
        case '-': push(Tok::Dash, i, 1); break;
        default:
          throw ParseError(std::string("unexpected character '") + c + "'",
                           line_no_, static_cast<int>(i) + 1);
      }
      ++i;
    }
    Tok end;
    end.type = Tok::End;
    end.col = static_cast<int>(line_.size()) + 1;
    toks_.push_back(end);
  }

  std::string line_;
  int line_no_;
  std::vector<Tok> toks_;
  size_t pos_ = 0;
};

// Recursive descent over: or > and > unary > atom.
inline ExprPtr parse_expr(LineLexer& lx);
inline ExprPtr parse_unary(LineLexer& lx);

inline RoleRef parse_role(LineLexer& lx) {
  Tok t = lx.expect(Tok::Ident, "role name");
  RoleRef r{t.text, false};
  if (lx.peek().type == Tok::Dash) {
    lx.next();
    r.inverted = true;
  }
  return r;
}

inline ExprPtr parse_atom(LineLexer& lx) {
  const Tok& t = lx.peek();
  switch (t.type) {
    case Tok::LParen: {
      lx.next();
      ExprPtr e = parse_expr(lx);
      lx.expect(Tok::RParen, "')'");
      return e;
    }
    case Tok::LBrace: {
      lx.next();
      Tok ind = lx.expect(Tok::Ident, "individual name");
      lx.expect(Tok::RBrace, "'}'");
      return ConceptExpr::nominal(ind.text);
    }
    case Tok::Ident: {
      const std::string& w = t.text;
      auto restriction = [&](ExprKind kind, bool counted) {
        lx.next();
        unsigned k = 0;
        if (counted) {
          Tok kt = lx.expect(Tok::Number, "count");
          if (kt.num < 0 || kt.num != static_cast<unsigned>(kt.num))
            lx.fail("count must be a non-negative integer", kt.col);
          k = static_cast<unsigned>(kt.num);
          if (kind == ExprKind::AtLeast && k < 1)
            lx.fail("atleast requires k >= 1", kt.col);
        }
        RoleRef role = parse_role(lx);
        lx.expect(Tok::Dot, "'.'");
        // Filler binds as a unary operand; use parentheses for and/or.
        ExprPtr filler = parse_unary(lx);
        return ConceptExpr::restriction(kind, role, filler, k);
      };
      if (w == "top") { lx.next(); return ConceptExpr::top(); }
      if (w == "bottom") { lx.next(); return ConceptExpr::bottom(); }
      if (w == "exists") return restriction(ExprKind::Exists, false);
      if (w == "forall") return restriction(ExprKind::Forall, false);
      if (w == "atleast") return restriction(ExprKind::AtLeast, true);
      if (w == "atmost") return restriction(ExprKind::AtMost, true);
      if (w == "exactly") return restriction(ExprKind::Exactly, true);
      lx.next();
      return ConceptExpr::concept_name(w);
    }
    default:
      lx.fail("expected expression", t.col);
  }
}

inline ExprPtr parse_unary(LineLexer& lx) {
  if (lx.peek().type == Tok::Ident && lx.peek().text == "not") {
    lx.next();
    return ConceptExpr::negate(parse_unary(lx));
  }
  return parse_atom(lx);
}

inline ExprPtr parse_and(LineLexer& lx) {
  ExprPtr e = parse_unary(lx);
  while (lx.peek().type == Tok::Ident && lx.peek().text == "and") {
    lx.next();
    e = ConceptExpr::conj(e, parse_unary(lx));
  }
  return e;
}

inline ExprPtr parse_expr(LineLexer& lx) {
  ExprPtr e = parse_and(lx);
  while (lx.peek().type == Tok::Ident && lx.peek().text == "or") {
    lx.next();
    e = ConceptExpr::disj(e, parse_and(lx));
  }
  return e;
}

// Pre-classification statement forms.
struct RawAssessment {
  std::string subject;
  ExprPtr condition;   // null for priors
  Interval prob;
  int line = 0;
};

struct RawStatements {
  std::vector<RawAssessment> assessments;
  std::vector<std::pair<std::string, ExprPtr>> definitions;
  std::vector<Inclusion> inclusions;
  std::vector<int> definition_lines;
};

inline double parse_prob_literal(LineLexer& lx) {
  Tok t = lx.expect(Tok::Number, "probability");
  if (t.num < 0.0 || t.num > 1.0)
    lx.fail("probability out of range [0,1]: " + t.text, t.col);
  return t.num;
}

inline void parse_statement(LineLexer& lx, RawStatements& out) {
  Tok head = lx.expect(Tok::Ident, "statement");
  if (head.text == "P" && lx.peek().type == Tok::LParen) {
    lx.next();  // (
    RawAssessment a;
    a.line = lx.line_no();
    a.subject = lx.expect(Tok::Ident, "name").text;
    if (lx.peek().type == Tok::Pipe) {
      lx.next();
      a.condition = parse_expr(lx);
    }
    lx.expect(Tok::RParen, "')'");
    const Tok& t = lx.peek();
    if (t.type == Tok::Eq) {
      lx.next();
      double p = parse_prob_literal(lx);
      a.prob = Interval::point(p);
    } else if (t.type == Tok::Ident && t.text == "in") {
      lx.next();
      lx.expect(Tok::LBracket, "'['");
      double lo = parse_prob_literal(lx);
      lx.expect(Tok::Comma, "','");
      double hi = parse_prob_literal(lx);
      lx.expect(Tok::RBracket, "']'");
      if (lo > hi) lx.fail("interval with lo > hi", t.col);
      a.prob = Interval{lo, hi};
    } else {
      lx.fail("expected '=' or 'in'", t.col);
    }
    if (!lx.at_end()) lx.fail("trailing input", lx.peek().col);
    out.assessments.push_back(std::move(a));
    return;
  }
  // Definition or inclusion.
  Tok op = lx.next();
  if (op.type == Tok::Eq) {
    ExprPtr rhs = parse_expr(lx);
    if (!lx.at_end()) lx.fail("trailing input", lx.peek().col);
    out.definitions.emplace_back(head.text, rhs);
    out.definition_lines.push_back(lx.line_no());
  } else if (op.type == Tok::Lt) {
    ExprPtr rhs = parse_expr(lx);
    if (!lx.at_end()) lx.fail("trailing input", lx.peek().col);
    out.inclusions.push_back({head.text, rhs, lx.line_no()});
  } else {
    lx.fail("expected '=', '<' or 'P(...)'", op.col);
  }
}

inline void collect_role_names(const ExprPtr& e, std::set<std::string>& roles) {
  if (e->is_restriction()) roles.insert(e->role.name);
  for (const auto& c : e->kids) collect_role_names(c, roles);
}

}  // namespace detail

// ── parse_terminology ────────────────────────────────────────────────────────

inline Terminology parse_terminology(const std::string& text) {
  detail::RawStatements raw;
  {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      detail::LineLexer lx(line, line_no);
      if (lx.at_end()) continue;
      detail::parse_statement(lx, raw);
    }
  }

  Terminology t;

  // Role classification: role position usage, then hierarchy conditions of
  // already-known roles, to fixpoint.
  std::set<std::string> roles;
  for (const auto& [n, e] : raw.definitions) detail::collect_role_names(e, roles);
  for (const auto& inc : raw.inclusions) detail::collect_role_names(inc.rhs, roles);
  for (const auto& a : raw.assessments)
    if (a.condition) detail::collect_role_names(a.condition, roles);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& a : raw.assessments) {
      if (!roles.count(a.subject) || !a.condition) continue;
      const ConceptExpr* c = a.condition.get();
      if (c->kind == ExprKind::Not) c = c->kids[0].get();
      if (c->kind == ExprKind::Name && !roles.count(c->name)) {
        roles.insert(c->name);
        changed = true;
      }
    }
  }
  t.roles = roles;

  // Synthetic auxiliary definitions for composite fillers / conditions.
  std::set<std::string> used_names;
  for (const auto& [n, e] : raw.definitions) used_names.insert(n);
  for (const auto& inc : raw.inclusions) used_names.insert(inc.lhs);
  for (const auto& a : raw.assessments) used_names.insert(a.subject);
  int aux_counter = 0;
  std::vector<std::pair<std::string, ExprPtr>> aux_defs;
  auto fresh_aux = [&]() {
    std::string name;
    do {
      name = "_aux" + std::to_string(++aux_counter);
    } while (used_names.count(name));
    used_names.insert(name);
    return name;
  };

  // Normalizes fillers bottom-up; returns the rewritten expression.  `depth`
  // tracks whether a nominal is directly under a restriction.
  auto normalize = [&](const ExprPtr& e, auto&& self, bool under_restriction,
                       int line) -> ExprPtr {
    if (e->kind == ExprKind::Nominal) {
      if (!under_restriction)
        throw ParseError("nominal {" + e->name +
                             "} is only allowed directly inside a restriction",
                         line, 1);
      t.nominal_individuals.insert(e->name);
      return e;
    }
    if (e->is_restriction()) {
      ExprPtr filler = self(e->filler(), self, true, line);
      bool atomic = filler->kind == ExprKind::Name ||
                    filler->kind == ExprKind::Top ||
                    filler->kind == ExprKind::Bottom ||
                    filler->kind == ExprKind::Nominal;
      if (!atomic) {
        std::string aux = fresh_aux();
        aux_defs.emplace_back(aux, filler);
        t.synthetic.insert(aux);
        filler = ConceptExpr::concept_name(aux);
      }
      return ConceptExpr::restriction(e->kind, e->role, filler, e->k);
    }
    if (e->kids.empty()) return e;
    std::vector<ExprPtr> kids;
    kids.reserve(e->kids.size());
    for (const auto& c : e->kids) kids.push_back(self(c, self, false, line));
    auto copy = std::make_shared<ConceptExpr>(*e);
    copy->kids = std::move(kids);
    return copy;
  };

  for (size_t i = 0; i < raw.definitions.size(); ++i) {
    const auto& [name, e] = raw.definitions[i];
    int line = raw.definition_lines[i];
    if (t.roles.count(name))
      throw ParseError("role '" + name + "' cannot have a definition", line, 1);
    t.definitions.emplace_back(name, normalize(e, normalize, false, line));
  }
  for (const auto& inc : raw.inclusions) {
    if (t.roles.count(inc.lhs))
      throw ParseError("role '" + inc.lhs + "' cannot appear in an inclusion",
                       inc.line, 1);
    t.inclusions.push_back(
        {inc.lhs, normalize(inc.rhs, normalize, false, inc.line), inc.line});
  }

  for (const auto& a : raw.assessments) {
    Assessment out;
    out.subject = a.subject;
    out.prob = a.prob;
    out.line = a.line;
    bool subject_is_role = t.roles.count(a.subject) > 0;
    if (!a.condition) {
      out.kind = subject_is_role ? AssessKind::RolePrior : AssessKind::ConceptPrior;
    } else {
      const ConceptExpr* c = a.condition.get();
      bool negated = false;
      if (c->kind == ExprKind::Not && c->kids[0]->kind == ExprKind::Name) {
        negated = true;
        c = c->kids[0].get();
      }
      if (c->kind == ExprKind::Name) {
        out.condition = c->name;
        out.condition_negated = negated;
      } else {
        if (subject_is_role)
          throw ParseError("role assessment condition must be a role name",
                           a.line, 1);
        // Complex conditioning concept: normalize through an auxiliary
        // definition.  Uniqueness cannot hold for such assessments; validate
        // downgrades the profile.
        ExprPtr cond = normalize(a.condition, normalize, false, a.line);
        std::string aux = fresh_aux();
        aux_defs.emplace_back(aux, cond);
        t.synthetic.insert(aux);
        out.condition = aux;
        out.condition_negated = false;
      }
      out.kind = subject_is_role ? AssessKind::RoleHierarchy
                                 : AssessKind::ConceptConditional;
      if (out.kind == AssessKind::RoleHierarchy && !t.roles.count(out.condition))
        t.roles.insert(out.condition);
    }
    t.assessments.push_back(std::move(out));
  }

  for (auto& [name, e] : aux_defs) t.definitions.emplace_back(name, e);
  return t;
}

inline Terminology parse_terminology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open terminology file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_terminology(ss.str());
}

// ── Assertions, queries, domain specs ────────────────────────────────────────

inline Assertion parse_assertion(const std::string& text) {
  detail::LineLexer lx(text, 1);
  Assertion a;
  if (lx.peek().type == detail::Tok::Ident && lx.peek().text == "not") {
    lx.next();
    a.positive = false;
  }
  a.predicate = lx.expect(detail::Tok::Ident, "predicate name").text;
  lx.expect(detail::Tok::LParen, "'('");
  a.a = lx.expect(detail::Tok::Ident, "individual").text;
  if (lx.peek().type == detail::Tok::Comma) {
    lx.next();
    a.is_role = true;
    a.b = lx.expect(detail::Tok::Ident, "individual").text;
  }
  lx.expect(detail::Tok::RParen, "')'");
  if (!lx.at_end()) lx.fail("trailing input", lx.peek().col);
  return a;
}

inline Abox parse_abox(const std::string& text) {
  Abox out;
  std::string current;
  int depth = 0;
  auto flush = [&]() {
    std::string s = current;
    size_t b = s.find_first_not_of(" \t");
    size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return;
    out.push_back(parse_assertion(s.substr(b, e - b + 1)));
    current.clear();
  };
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      flush();
      continue;
    }
    current += c;
  }
  flush();
  return out;
}

inline DomainSpec parse_domain_spec(const std::string& text) {
  if (text == "inf") return DomainSpec::infinite();
  if (text.rfind("le:", 0) == 0) {
    std::uint64_t hi = std::stoull(text.substr(3));
    return DomainSpec::unconstrained(hi);
  }
  size_t dots = text.find("..");
  if (dots != std::string::npos) {
    std::uint64_t lo = std::stoull(text.substr(0, dots));
    std::uint64_t hi = std::stoull(text.substr(dots + 2));
    if (lo > hi) throw Error("domain range with lo > hi: " + text);
    return DomainSpec::range(lo, hi);
  }
  std::uint64_t n = std::stoull(text);
  if (n < 1) throw Error("domain size must be positive");
  return DomainSpec::exact(n);
}

// ── Serialization ────────────────────────────────────────────────────────────

namespace detail {
inline std::string prob_to_string(double p) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), p);
  (void)ec;
  return std::string(buf, ptr);
}
}  // namespace detail

// Emits a .crl document that reparses to a structurally equal terminology.
inline std::string serialize(const Terminology& t) {
  std::ostringstream out;
  for (const auto& a : t.assessments) {
    out << "P(" << a.subject;
    if (a.kind == AssessKind::ConceptConditional ||
        a.kind == AssessKind::RoleHierarchy) {
      out << " | ";
      if (a.condition_negated) out << "not ";
      out << a.condition;
    }
    out << ")";
    if (a.prob.is_point()) {
      out << " = " << detail::prob_to_string(a.prob.lo);
    } else {
      out << " in [" << detail::prob_to_string(a.prob.lo) << ", "
          << detail::prob_to_string(a.prob.hi) << "]";
    }
    out << "\n";
  }
  for (const auto& inc : t.inclusions)
    out << inc.lhs << " < " << expr_to_string(inc.rhs) << "\n";
  for (const auto& [name, e] : t.definitions)
    out << name << " = " << expr_to_string(e) << "\n";
  return out.str();
}

// Structural equality used by the round-trip property; ignores provenance
// (synthetic flags, line numbers).
inline bool terminology_equal(const Terminology& a, const Terminology& b) {
  if (a.definitions.size() != b.definitions.size() ||
      a.inclusions.size() != b.inclusions.size() ||
      a.assessments.size() != b.assessments.size() || a.roles != b.roles ||
      a.nominal_individuals != b.nominal_individuals)
    return false;
  for (size_t i = 0; i < a.definitions.size(); ++i) {
    if (a.definitions[i].first != b.definitions[i].first ||
        !expr_equal(a.definitions[i].second, b.definitions[i].second))
      return false;
  }
  for (size_t i = 0; i < a.inclusions.size(); ++i) {
    if (a.inclusions[i].lhs != b.inclusions[i].lhs ||
        !expr_equal(a.inclusions[i].rhs, b.inclusions[i].rhs))
      return false;
  }
  for (size_t i = 0; i < a.assessments.size(); ++i) {
    const auto& x = a.assessments[i];
    const auto& y = b.assessments[i];
    if (x.kind != y.kind || x.subject != y.subject ||
        x.condition != y.condition ||
        x.condition_negated != y.condition_negated || !(x.prob == y.prob))
      return false;
  }
  return true;
}

}  // namespace crdl
