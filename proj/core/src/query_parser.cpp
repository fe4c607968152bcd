#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "softq/error.hpp"
#include "softq/format.hpp"
#include "softq/query.hpp"

namespace softq {

namespace {

bool is_special(char c) {
  return c == ',' || c == '(' || c == ')' || c == '&' || c == '|' || c == '!' || c == '"' ||
         c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

std::optional<std::uint32_t> existential_number(std::string_view name) {
  if (name.size() < 2 || name[0] != 'x') return std::nullopt;
  std::uint32_t n = 0;
  auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), n);
  if (ec != std::errc() || ptr != name.data() + name.size()) return std::nullopt;
  return n;
}

struct Token {
  enum class Kind { kEnd, kLParen, kRParen, kComma, kAmp, kBar, kBang, kWord };
  Kind kind = Kind::kEnd;
  std::string text;
  bool quoted = false;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    Token t;
    t.pos = pos_;
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    auto single = [&](Token::Kind k) {
      ++pos_;
      t.kind = k;
      return t;
    };
    switch (c) {
      case '(':
        return single(Token::Kind::kLParen);
      case ')':
        return single(Token::Kind::kRParen);
      case ',':
        return single(Token::Kind::kComma);
      case '&':
        return single(Token::Kind::kAmp);
      case '|':
        return single(Token::Kind::kBar);
      case '!':
        return single(Token::Kind::kBang);
      case '"': {
        ++pos_;
        t.kind = Token::Kind::kWord;
        t.quoted = true;
        while (true) {
          if (pos_ >= src_.size()) throw SyntaxError("unterminated string", t.pos);
          const char d = src_[pos_++];
          if (d == '"') break;
          if (d == '\\') {
            if (pos_ >= src_.size()) throw SyntaxError("unterminated escape", pos_);
            t.text.push_back(src_[pos_++]);
          } else {
            t.text.push_back(d);
          }
        }
        return t;
      }
      default:
        break;
    }
    t.kind = Token::Kind::kWord;
    while (pos_ < src_.size() && !is_special(src_[pos_])) t.text.push_back(src_[pos_++]);
    return t;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  Parser(std::string_view src, const Vocabulary& entities, const Vocabulary& relations)
      : lexer_(src), entities_(entities), relations_(relations) {
    advance();
  }

  SoftQuery parse() {
    SoftQuery q;
    q.disjuncts.push_back(disjunct());
    while (cur_.kind == Token::Kind::kBar) {
      advance();
      q.disjuncts.push_back(disjunct());
    }
    if (cur_.kind != Token::Kind::kEnd) throw SyntaxError("unexpected trailing input", cur_.pos);
    return q;
  }

 private:
  void advance() { cur_ = lexer_.next(); }

  void expect(Token::Kind k, const char* what) {
    if (cur_.kind != k) throw SyntaxError(std::string("expected ") + what, cur_.pos);
    advance();
  }

  SoftConjunctiveQuery disjunct() {
    SoftConjunctiveQuery conj;
    declared_.clear();
    if (cur_.kind == Token::Kind::kWord && !cur_.quoted && cur_.text == "EXISTS") {
      advance();
      while (true) {
        if (cur_.kind != Token::Kind::kWord || cur_.quoted) {
          throw SyntaxError("expected existential variable", cur_.pos);
        }
        std::string name = cur_.text;
        bool dot = false;
        if (name.size() > 1 && name.back() == '.') {
          name.pop_back();
          dot = true;
        }
        auto n = existential_number(name);
        if (!n) throw SyntaxError("existential variables are named x<digits>", cur_.pos);
        if (std::find(conj.existentials.begin(), conj.existentials.end(), *n) !=
            conj.existentials.end()) {
          throw SyntaxError("variable " + name + " declared twice", cur_.pos);
        }
        conj.existentials.push_back(*n);
        advance();
        if (dot) break;
        if (cur_.kind == Token::Kind::kComma) {
          advance();
          continue;
        }
        if (cur_.kind == Token::Kind::kWord && !cur_.quoted && cur_.text == ".") {
          advance();
          break;
        }
        throw SyntaxError("expected ',' or '.' after existential variable", cur_.pos);
      }
    }
    declared_ = conj.existentials;
    conj.atoms.push_back(atom());
    while (cur_.kind == Token::Kind::kAmp) {
      advance();
      conj.atoms.push_back(atom());
    }
    return conj;
  }

  SoftAtom atom() {
    SoftAtom a;
    if (cur_.kind == Token::Kind::kBang) {
      a.negated = true;
      advance();
    }
    expect(Token::Kind::kLParen, "'('");
    a.head = term();
    expect(Token::Kind::kComma, "','");
    a.relation = relation();
    expect(Token::Kind::kComma, "','");
    a.tail = term();
    expect(Token::Kind::kComma, "','");
    const std::size_t alpha_pos = cur_.pos;
    a.alpha = number();
    if (!(a.alpha >= 0.0 && a.alpha <= 1.0)) throw SyntaxError("alpha outside [0,1]", alpha_pos);
    expect(Token::Kind::kComma, "','");
    const std::size_t beta_pos = cur_.pos;
    a.beta = number();
    if (!(a.beta > 0.0) || !std::isfinite(a.beta)) throw SyntaxError("beta must be > 0", beta_pos);
    expect(Token::Kind::kRParen, "')'");
    return a;
  }

  Term term() {
    if (cur_.kind != Token::Kind::kWord) throw SyntaxError("expected term", cur_.pos);
    Token t = cur_;
    advance();
    if (!t.quoted) {
      if (t.text == "y") return Term::free();
      if (auto n = existential_number(t.text)) {
        if (std::find(declared_.begin(), declared_.end(), *n) == declared_.end()) {
          throw SyntaxError("undeclared variable " + t.text, t.pos);
        }
        return Term::existential(*n);
      }
    }
    auto id = entities_.find(t.text);
    if (!id) throw SyntaxError("unknown entity '" + t.text + "'", t.pos);
    return Term::constant(*id);
  }

  RelationId relation() {
    if (cur_.kind != Token::Kind::kWord) throw SyntaxError("expected relation", cur_.pos);
    auto id = relations_.find(cur_.text);
    if (!id) throw SyntaxError("unknown relation '" + cur_.text + "'", cur_.pos);
    advance();
    return *id;
  }

  double number() {
    if (cur_.kind != Token::Kind::kWord || cur_.quoted) {
      throw SyntaxError("expected number", cur_.pos);
    }
    double v = 0.0;
    const char* first = cur_.text.data();
    const char* last = first + cur_.text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw SyntaxError("malformed number", cur_.pos);
    advance();
    return v;
  }

  Lexer lexer_;
  Token cur_;
  const Vocabulary& entities_;
  const Vocabulary& relations_;
  std::vector<std::uint32_t> declared_;
};

bool needs_quotes(std::string_view name) {
  if (name.empty() || name == "y" || name == "EXISTS" || name == "." ||
      existential_number(name) || name.back() == '.') {
    return true;
  }
  return std::any_of(name.begin(), name.end(), is_special);
}

std::string quote_if_needed(std::string_view name) {
  if (!needs_quotes(name)) return std::string(name);
  std::string out = "\"";
  for (char c : name) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Constants named like a variable are written as {"entity": name}.
Term json_term(const nlohmann::json& j, const std::vector<std::uint32_t>& declared,
               const Vocabulary& entities) {
  if (j.is_object()) return Term::constant(entities.at(j.at("entity").get<std::string>()));
  const auto name = j.get<std::string>();
  if (name == "y") return Term::free();
  if (auto n = existential_number(name)) {
    if (std::find(declared.begin(), declared.end(), *n) == declared.end()) {
      throw ValidationError("undeclared variable " + name);
    }
    return Term::existential(*n);
  }
  return Term::constant(entities.at(name));
}

}  // namespace

SoftQuery parse_query_dsl(std::string_view text, const Vocabulary& entities,
                          const Vocabulary& relations) {
  SoftQuery q = Parser(text, entities, relations).parse();
  validate_query(q, entities.size(), relations.size());
  return q;
}

SoftQuery query_from_json(const nlohmann::json& json, const Vocabulary& entities,
                          const Vocabulary& relations) {
  SoftQuery q;
  try {
    for (const auto& d : json.at("disjuncts")) {
      SoftConjunctiveQuery conj;
      if (d.contains("existentials")) {
        for (const auto& x : d.at("existentials")) {
          auto n = existential_number(x.get<std::string>());
          if (!n) throw ValidationError("existential variables are named x<digits>");
          conj.existentials.push_back(*n);
        }
      }
      for (const auto& a : d.at("atoms")) {
        SoftAtom atom;
        atom.head = json_term(a.at("h"), conj.existentials, entities);
        atom.relation = relations.at(a.at("r").get<std::string>());
        atom.tail = json_term(a.at("t"), conj.existentials, entities);
        atom.alpha = a.value("alpha", 0.0);
        atom.beta = a.value("beta", 1.0);
        atom.negated = a.value("neg", false);
        conj.atoms.push_back(atom);
      }
      q.disjuncts.push_back(std::move(conj));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed query JSON: ") + e.what());
  }
  validate_query(q, entities.size(), relations.size());
  return q;
}

SoftQuery parse_query(std::string_view text, const Vocabulary& entities,
                      const Vocabulary& relations) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw SyntaxError(std::string("invalid JSON: ") + e.what(), e.byte);
    }
    return query_from_json(j, entities, relations);
  }
  return parse_query_dsl(text, entities, relations);
}

std::string term_name(const Term& term, const Vocabulary& entities) {
  switch (term.kind) {
    case Term::Kind::kFree:
      return "y";
    case Term::Kind::kExistential:
      return "x" + std::to_string(term.id);
    case Term::Kind::kConstant:
      return entities.name(term.id);
  }
  return {};
}

std::string to_dsl(const SoftQuery& query, const Vocabulary& entities,
                   const Vocabulary& relations) {
  std::string out;
  for (std::size_t d = 0; d < query.disjuncts.size(); ++d) {
    const auto& conj = query.disjuncts[d];
    if (d) out += " | ";
    if (!conj.existentials.empty()) {
      out += "EXISTS ";
      for (std::size_t i = 0; i < conj.existentials.size(); ++i) {
        if (i) out += ", ";
        out += "x" + std::to_string(conj.existentials[i]);
      }
      out += " . ";
    }
    for (std::size_t i = 0; i < conj.atoms.size(); ++i) {
      const auto& a = conj.atoms[i];
      if (i) out += " & ";
      if (a.negated) out += "!";
      auto term = [&](const Term& t) {
        return t.is_constant() ? quote_if_needed(entities.name(t.id)) : term_name(t, entities);
      };
      out += "(" + term(a.head) + ", " + quote_if_needed(relations.name(a.relation)) + ", " +
             term(a.tail) + ", " + format_double(a.alpha) + ", " + format_double(a.beta) + ")";
    }
  }
  return out;
}

nlohmann::json to_json(const SoftQuery& query, const Vocabulary& entities,
                       const Vocabulary& relations) {
  nlohmann::json disjuncts = nlohmann::json::array();
  for (const auto& conj : query.disjuncts) {
    nlohmann::json xs = nlohmann::json::array();
    for (auto x : conj.existentials) xs.push_back("x" + std::to_string(x));
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : conj.atoms) {
      nlohmann::json atom;
      auto term = [&](const Term& t) -> nlohmann::json {
        const auto name = term_name(t, entities);
        if (t.is_constant() && (name == "y" || existential_number(name))) {
          return {{"entity", name}};
        }
        return name;
      };
      atom["h"] = term(a.head);
      atom["r"] = relations.name(a.relation);
      atom["t"] = term(a.tail);
      atom["alpha"] = a.alpha;
      atom["beta"] = a.beta;
      atom["neg"] = a.negated;
      atoms.push_back(std::move(atom));
    }
    disjuncts.push_back({{"existentials", std::move(xs)}, {"atoms", std::move(atoms)}});
  }
  return {{"disjuncts", std::move(disjuncts)}};
}

}  // namespace softq
