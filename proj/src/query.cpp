#include "partsel/query.hpp"

#include <cctype>
#include <fstream>

namespace partsel {

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::In: return "IN";
    case CompareOp::Like: return "LIKE";
  }
  return "=";
}

Predicate Predicate::leaf(Clause c) {
  Predicate p;
  p.kind = Kind::Leaf;
  p.clause = std::move(c);
  return p;
}

namespace {

Predicate combine(Predicate::Kind kind, std::vector<Predicate> parts) {
  std::vector<Predicate> flat;
  for (auto& part : parts) {
    if (part.kind == kind) {
      for (auto& c : part.children) flat.push_back(std::move(c));
    } else if (part.kind == Predicate::Kind::True) {
      if (kind == Predicate::Kind::Or) return Predicate::always();
    } else {
      flat.push_back(std::move(part));
    }
  }
  if (flat.empty()) return Predicate::always();
  if (flat.size() == 1) return std::move(flat.front());
  Predicate p;
  p.kind = kind;
  p.children = std::move(flat);
  return p;
}

}  // namespace

Predicate Predicate::all_of(std::vector<Predicate> parts) { return combine(Kind::And, std::move(parts)); }
Predicate Predicate::any_of(std::vector<Predicate> parts) { return combine(Kind::Or, std::move(parts)); }

Predicate Predicate::negate(Predicate p) {
  Predicate n;
  n.kind = Kind::Not;
  n.children.push_back(std::move(p));
  return n;
}

std::size_t Predicate::clause_count() const {
  if (kind == Kind::Leaf) return 1;
  std::size_t n = 0;
  for (const auto& c : children) n += c.clause_count();
  return n;
}

void Predicate::collect_columns(std::set<std::string>& out) const {
  if (kind == Kind::Leaf) out.insert(clause.column);
  for (const auto& c : children) c.collect_columns(out);
}

namespace {

std::string quote(std::string_view text) {
  std::string out = "'";
  for (char ch : text) {
    if (ch == '\'') out += '\'';
    out += ch;
  }
  out += '\'';
  return out;
}

std::string literal_sql(const Literal& v) {
  if (const auto* d = std::get_if<double>(&v)) return format_number(*d);
  return quote(std::get<std::string>(v));
}

}  // namespace

std::string to_sql(const Predicate& p) {
  switch (p.kind) {
    case Predicate::Kind::True: return "TRUE";
    case Predicate::Kind::Leaf: {
      const auto& c = p.clause;
      if (c.op == CompareOp::In) {
        std::string out = c.column + " IN (";
        for (std::size_t i = 0; i < c.values.size(); ++i) {
          if (i) out += ", ";
          out += literal_sql(c.values[i]);
        }
        return out + ")";
      }
      return c.column + " " + std::string(to_string(c.op)) + " " + literal_sql(c.values.at(0));
    }
    case Predicate::Kind::Not: return "NOT (" + to_sql(p.children.at(0)) + ")";
    case Predicate::Kind::And:
    case Predicate::Kind::Or: {
      const bool is_and = p.kind == Predicate::Kind::And;
      std::string out;
      for (std::size_t i = 0; i < p.children.size(); ++i) {
        if (i) out += is_and ? " AND " : " OR ";
        const auto& child = p.children[i];
        const bool wrap = child.kind == Predicate::Kind::And || child.kind == Predicate::Kind::Or;
        out += wrap ? "(" + to_sql(child) + ")" : to_sql(child);
      }
      return out;
    }
  }
  return {};
}

std::string Aggregate::to_sql() const {
  if (kind == Kind::CountStar) return "COUNT(*)";
  std::string out = kind == Kind::Sum ? "SUM(" : "AVG(";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += terms[i].negative ? " - " : " + ";
    else if (terms[i].negative) out += "-";
    out += terms[i].column;
  }
  return out + ")";
}

std::string Query::to_sql() const {
  std::string out = "SELECT ";
  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    if (i) out += ", ";
    out += aggregates[i].to_sql();
  }
  for (const auto& g : group_by) out += ", " + g;
  out += " FROM t";
  if (!predicate.is_true()) out += " WHERE " + partsel::to_sql(predicate);
  if (!group_by.empty()) {
    out += " GROUP BY ";
    for (std::size_t i = 0; i < group_by.size(); ++i) {
      if (i) out += ", ";
      out += group_by[i];
    }
  }
  return out;
}

std::set<std::string> Query::referenced_columns() const {
  std::set<std::string> out(group_by.begin(), group_by.end());
  for (const auto& a : aggregates) {
    for (const auto& t : a.terms) out.insert(t.column);
  }
  predicate.collect_columns(out);
  return out;
}

namespace {

struct Token {
  enum class Type { Ident, Number, String, Symbol, End };
  Type type = Type::End;
  std::string text;
  std::size_t pos = 0;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char ch = s[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.')) ++j;
      t.type = Token::Type::Ident;
      t.text = s.substr(i, j - i);
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(ch)) ||
               (ch == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          j = k;
          while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        }
      }
      t.type = Token::Type::Number;
      t.text = s.substr(i, j - i);
      i = j;
    } else if (ch == '\'') {
      std::string text;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < s.size()) {
        if (s[j] == '\'') {
          if (j + 1 < s.size() && s[j + 1] == '\'') {
            text += '\'';
            j += 2;
            continue;
          }
          closed = true;
          ++j;
          break;
        }
        text += s[j++];
      }
      if (!closed) throw ParseError("unterminated string literal at offset " + std::to_string(i));
      t.type = Token::Type::String;
      t.text = std::move(text);
      i = j;
    } else {
      static const char* const two[] = {"<=", ">=", "!=", "<>"};
      t.type = Token::Type::Symbol;
      t.text = std::string(1, ch);
      for (const char* op : two) {
        if (s.substr(i, 2) == op) t.text = op;
      }
      if (t.text.size() == 1 && std::string_view("(),*+-<>=;/").find(ch) == std::string_view::npos) {
        throw ParseError("unexpected character '" + t.text + "' at offset " + std::to_string(i));
      }
      i += t.text.size();
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.pos = s.size();
  out.push_back(end);
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

  Query parse() {
    Query q;
    expect_keyword("SELECT");
    std::vector<std::string> plain_columns;
    do {
      parse_select_item(q, plain_columns);
    } while (accept_symbol(","));
    expect_keyword("FROM");
    if (peek_symbol("(")) throw ScopeError("nested queries are not supported");
    expect_ident("table name");
    if (peek_symbol(",") || peek_keyword("JOIN") || peek_keyword("INNER") || peek_keyword("LEFT") ||
        peek_keyword("RIGHT") || peek_keyword("CROSS") || peek_keyword("FULL")) {
      throw ScopeError("joins are not supported; queries run over a single table");
    }
    if (accept_keyword("WHERE")) q.predicate = parse_or();
    if (accept_keyword("GROUP")) {
      expect_keyword("BY");
      do {
        q.group_by.push_back(expect_ident("group-by column"));
      } while (accept_symbol(","));
    }
    for (const char* kw : {"HAVING", "ORDER", "LIMIT", "UNION"}) {
      if (peek_keyword(kw)) throw ScopeError(std::string(kw) + " is not supported");
    }
    accept_symbol(";");
    if (cur().type != Token::Type::End) fail("unexpected '" + cur().text + "'");
    if (q.aggregates.empty()) throw ScopeError("query needs at least one SUM, COUNT(*) or AVG aggregate");
    for (const auto& col : plain_columns) {
      if (std::find(q.group_by.begin(), q.group_by.end(), col) == q.group_by.end()) {
        throw ScopeError("selected column '" + col + "' is not in GROUP BY");
      }
    }
    return q;
  }

 private:
  const Token& cur() const { return tokens_[pos_]; }
  const Token& next() const { return tokens_[std::min(pos_ + 1, tokens_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg + " at offset " + std::to_string(cur().pos));
  }

  bool peek_keyword(std::string_view kw) const {
    return cur().type == Token::Type::Ident && to_lower(cur().text) == to_lower(kw);
  }
  bool accept_keyword(std::string_view kw) {
    if (!peek_keyword(kw)) return false;
    ++pos_;
    return true;
  }
  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) fail("expected " + std::string(kw));
  }
  bool peek_symbol(std::string_view sym) const { return cur().type == Token::Type::Symbol && cur().text == sym; }
  bool accept_symbol(std::string_view sym) {
    if (!peek_symbol(sym)) return false;
    ++pos_;
    return true;
  }
  void expect_symbol(std::string_view sym) {
    if (!accept_symbol(sym)) fail("expected '" + std::string(sym) + "'");
  }
  std::string expect_ident(const std::string& what) {
    if (cur().type != Token::Type::Ident || is_reserved(cur().text)) fail("expected " + what);
    return tokens_[pos_++].text;
  }

  static bool is_reserved(std::string_view word) {
    static const std::set<std::string> kReserved = {"select", "from",  "where", "group", "by",   "and",
                                                     "or",     "not",   "in",    "like",  "having", "order",
                                                     "limit",  "join",  "between", "date", "union"};
    return kReserved.count(to_lower(word)) > 0;
  }

  void parse_select_item(Query& q, std::vector<std::string>& plain) {
    if (cur().type != Token::Type::Ident) fail("expected aggregate or column");
    if (next().type == Token::Type::Symbol && next().text == "(") {
      const std::string fn = to_lower(cur().text);
      pos_ += 2;
      if (peek_keyword("SELECT")) throw ScopeError("nested queries are not supported");
      Aggregate agg;
      if (fn == "count") {
        if (!accept_symbol("*")) throw ScopeError("only COUNT(*) is supported");
        agg.kind = Aggregate::Kind::CountStar;
      } else if (fn == "sum" || fn == "avg") {
        agg.kind = fn == "sum" ? Aggregate::Kind::Sum : Aggregate::Kind::Avg;
        agg.terms = parse_linear();
      } else {
        throw ScopeError("aggregate " + to_lower(fn) + " is not supported; only SUM, COUNT(*) and AVG");
      }
      expect_symbol(")");
      q.aggregates.push_back(std::move(agg));
      return;
    }
    plain.push_back(expect_ident("column"));
  }

  std::vector<AggregateTerm> parse_linear() {
    std::vector<AggregateTerm> terms;
    bool negative = accept_symbol("-");
    if (!negative) accept_symbol("+");
    while (true) {
      if (peek_symbol("(")) throw ScopeError("nested expressions are not supported in aggregates");
      if (cur().type == Token::Type::Number) throw ScopeError("aggregates take sums and differences of columns only");
      terms.push_back({expect_ident("column"), negative});
      if (peek_symbol("*") || peek_symbol("/")) throw ScopeError("multiplication and division are not supported");
      if (accept_symbol("+")) {
        negative = false;
      } else if (accept_symbol("-")) {
        negative = true;
      } else {
        break;
      }
    }
    return terms;
  }

  Predicate parse_or() {
    std::vector<Predicate> parts{parse_and()};
    while (accept_keyword("OR")) parts.push_back(parse_and());
    return parts.size() == 1 ? std::move(parts.front()) : Predicate::any_of(std::move(parts));
  }

  Predicate parse_and() {
    std::vector<Predicate> parts{parse_not()};
    while (accept_keyword("AND")) parts.push_back(parse_not());
    return parts.size() == 1 ? std::move(parts.front()) : Predicate::all_of(std::move(parts));
  }

  Predicate parse_not() {
    if (accept_keyword("NOT")) return Predicate::negate(parse_not());
    if (accept_symbol("(")) {
      if (peek_keyword("SELECT")) throw ScopeError("nested queries are not supported");
      Predicate p = parse_or();
      expect_symbol(")");
      return p;
    }
    if (accept_keyword("TRUE")) return Predicate::always();
    return parse_clause();
  }

  Literal parse_literal() {
    if (cur().type == Token::Type::String) return tokens_[pos_++].text;
    if (accept_keyword("DATE")) {
      if (cur().type != Token::Type::String) fail("expected date string");
      return tokens_[pos_++].text;
    }
    bool negative = false;
    if (accept_symbol("-")) negative = true;
    else accept_symbol("+");
    if (peek_symbol("(")) throw ScopeError("nested queries are not supported");
    if (cur().type != Token::Type::Number) fail("expected literal");
    auto v = parse_number(cur().text);
    if (!v) fail("bad number '" + cur().text + "'");
    ++pos_;
    return negative ? -*v : *v;
  }

  Predicate parse_clause() {
    const std::string column = expect_ident("column");
    if (accept_keyword("BETWEEN")) {
      Literal lo = parse_literal();
      expect_keyword("AND");
      Literal hi = parse_literal();
      return Predicate::all_of({Predicate::leaf({column, CompareOp::Ge, {lo}}),
                                Predicate::leaf({column, CompareOp::Le, {hi}})});
    }
    const bool negated = accept_keyword("NOT");
    if (accept_keyword("IN")) {
      expect_symbol("(");
      if (peek_keyword("SELECT")) throw ScopeError("nested queries are not supported");
      Clause c{column, CompareOp::In, {}};
      do {
        c.values.push_back(parse_literal());
      } while (accept_symbol(","));
      expect_symbol(")");
      Predicate p = Predicate::leaf(std::move(c));
      return negated ? Predicate::negate(std::move(p)) : p;
    }
    if (accept_keyword("LIKE")) {
      if (cur().type != Token::Type::String) fail("LIKE needs a string pattern");
      Predicate p = Predicate::leaf({column, CompareOp::Like, {tokens_[pos_++].text}});
      return negated ? Predicate::negate(std::move(p)) : p;
    }
    if (negated) fail("expected IN or LIKE after NOT");
    if (cur().type != Token::Type::Symbol) fail("expected comparison operator");
    const std::string sym = cur().text;
    CompareOp op;
    if (sym == "<") op = CompareOp::Lt;
    else if (sym == "<=") op = CompareOp::Le;
    else if (sym == ">") op = CompareOp::Gt;
    else if (sym == ">=") op = CompareOp::Ge;
    else if (sym == "=") op = CompareOp::Eq;
    else if (sym == "!=" || sym == "<>") op = CompareOp::Ne;
    else fail("expected comparison operator");
    ++pos_;
    if (cur().type == Token::Type::Ident && !is_reserved(cur().text)) {
      throw ScopeError("clauses compare a column with a constant; column-to-column comparison is not supported");
    }
    return Predicate::leaf({column, op, {parse_literal()}});
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

Query parse_query(std::string_view text) { return Parser(text).parse(); }

double numeric_literal(const Literal& value, ColumnKind kind) {
  if (const auto* d = std::get_if<double>(&value)) return *d;
  const auto& s = std::get<std::string>(value);
  if (kind == ColumnKind::Date) {
    if (auto days = parse_iso_date(s)) return static_cast<double>(*days);
  }
  throw ScopeError("'" + s + "' is not a valid " + std::string(to_string(kind)) + " constant");
}

std::string text_literal(const Literal& value) {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return format_number(std::get<double>(value));
}

namespace {

void check_predicate(const Predicate& p, const Schema& schema) {
  for (const auto& c : p.children) check_predicate(c, schema);
  if (p.kind != Predicate::Kind::Leaf) return;
  const auto& c = p.clause;
  const ColumnKind kind = schema[schema.index_of(c.column)].kind;
  if (c.values.empty()) throw ScopeError("clause on '" + c.column + "' has no constant");
  if (c.op != CompareOp::In && c.values.size() != 1) throw ScopeError("clause on '" + c.column + "' takes one constant");
  if (kind == ColumnKind::Categorical) {
    if (c.op != CompareOp::Eq && c.op != CompareOp::Ne && c.op != CompareOp::In && c.op != CompareOp::Like) {
      throw ScopeError("operator " + std::string(to_string(c.op)) + " does not apply to categorical column '" +
                       c.column + "'");
    }
    for (const auto& v : c.values) {
      if (!std::holds_alternative<std::string>(v)) {
        throw ScopeError("categorical column '" + c.column + "' is compared with a number");
      }
    }
  } else {
    if (c.op == CompareOp::Like) {
      throw ScopeError("LIKE does not apply to " + std::string(to_string(kind)) + " column '" + c.column + "'");
    }
    for (const auto& v : c.values) numeric_literal(v, kind);
  }
}

}  // namespace

void check_scope(const Query& query, const Schema& schema, const ScopeOptions& options) {
  if (query.aggregates.empty()) throw ScopeError("query needs at least one aggregate");
  for (const auto& a : query.aggregates) {
    if (a.kind == Aggregate::Kind::CountStar) {
      if (!a.terms.empty()) throw ScopeError("COUNT(*) takes no expression");
      continue;
    }
    if (a.terms.empty()) throw ScopeError("SUM and AVG need an expression");
    for (const auto& t : a.terms) {
      if (!is_numeric(schema[schema.index_of(t.column)].kind)) {
        throw ScopeError("aggregate over non-numeric column '" + t.column + "'");
      }
    }
  }
  check_predicate(query.predicate, schema);
  std::set<std::string> seen;
  for (const auto& g : query.group_by) {
    const std::size_t col = schema.index_of(g);
    if (!seen.insert(g).second) throw ScopeError("group-by column '" + g + "' repeated");
    if (!options.distinct_estimates.empty() &&
        options.distinct_estimates.at(col) > options.group_by_cardinality_limit) {
      throw ScopeError("group-by column '" + g + "' has about " +
                       std::to_string(static_cast<long long>(options.distinct_estimates[col])) +
                       " distinct values, above the limit of " +
                       std::to_string(static_cast<long long>(options.group_by_cardinality_limit)));
    }
  }
}

bool like_match(std::string_view text, std::string_view pattern) {
  // Iterative wildcard matching with backtracking to the last '%'.
  std::size_t t = 0, p = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '_' || pattern[p] == text[t])) {
      ++t;
      ++p;
    } else if (p < pattern.size() && pattern[p] == '%') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '%') ++p;
  return p == pattern.size();
}

std::vector<Query> read_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open workload '" + path.string() + "'");
  std::vector<Query> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      out.push_back(parse_query(t));
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_workload(const std::vector<Query>& queries, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write workload '" + path.string() + "'");
  for (const auto& q : queries) out << q.to_sql() << '\n';
}

}  // namespace partsel
