#include "chansel/sexpr.hpp"

#include <cctype>
#include <sstream>
#include <vector>

namespace chansel {

namespace {

void print_into(const TypePtr& t, std::ostream& os);

void print_ref(const TypeRef& r, std::ostream& os) {
  if (const auto* name = std::get_if<std::string>(&r)) {
    os << *name;
  } else {
    print_into(std::get<TypePtr>(r), os);
  }
}

void print_into(const TypePtr& t, std::ostream& os) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BaseT>) {
          switch (n.kind) {
            case BaseKind::Unit: os << "unit"; break;
            case BaseKind::Bool: os << "bool"; break;
            case BaseKind::String: os << "string"; break;
            case BaseKind::Int: os << "int"; break;
          }
        } else if constexpr (std::is_same_v<T, TopT>) {
          os << "top";
        } else if constexpr (std::is_same_v<T, BottomT>) {
          os << "bot";
        } else if constexpr (std::is_same_v<T, NilT>) {
          os << "nil";
        } else if constexpr (std::is_same_v<T, ChanT>) {
          os << "(chan " << to_string(n.cap) << " ";
          print_into(n.payload, os);
          os << ")";
        } else if constexpr (std::is_same_v<T, LabelledT>) {
          os << "(label " << n.label << " ";
          print_into(n.inner, os);
          os << ")";
        } else if constexpr (std::is_same_v<T, UnionT>) {
          os << "(union";
          for (const auto& m : n.members) { os << " "; print_into(m, os); }
          os << ")";
        } else if constexpr (std::is_same_v<T, TupleT>) {
          os << "(tuple";
          for (const auto& m : n.members) { os << " "; print_into(m, os); }
          os << ")";
        } else if constexpr (std::is_same_v<T, OutT>) {
          os << "(out ";
          print_ref(n.chan, os);
          os << " ";
          print_into(n.payload, os);
          os << " ";
          print_into(n.cont, os);
          os << ")";
        } else if constexpr (std::is_same_v<T, InT>) {
          os << "(in ";
          print_ref(n.chan, os);
          os << " ";
          print_into(n.payload, os);
          os << " " << n.var << " ";
          print_into(n.cont, os);
          os << ")";
        } else if constexpr (std::is_same_v<T, BranchT>) {
          os << "(branch (";
          for (std::size_t i = 0; i < n.chans.size(); ++i) {
            if (i) os << " ";
            print_ref(n.chans[i], os);
          }
          os << ")";
          for (const auto& c : n.cases) {
            os << " (case " << c.label << " ";
            print_into(c.arg, os);
            os << " ";
            print_into(c.cont, os);
            os << ")";
          }
          os << ")";
        } else if constexpr (std::is_same_v<T, TimeoutT>) {
          os << "(timeout ";
          print_into(n.inner, os);
          os << " ";
          print_into(n.handler, os);
          os << ")";
        } else if constexpr (std::is_same_v<T, ParT>) {
          os << "(par ";
          print_into(n.left, os);
          os << " ";
          print_into(n.right, os);
          os << ")";
        } else if constexpr (std::is_same_v<T, RecT>) {
          os << "(rec " << n.var << " ";
          print_into(n.body, os);
          os << ")";
        } else if constexpr (std::is_same_v<T, VarT>) {
          os << "(var " << n.var << ")";
        }
      },
      t->node);
}

// --- parsing ---------------------------------------------------------------

struct Tokens {
  std::vector<std::string> toks;
  std::size_t pos = 0;

  explicit Tokens(std::string_view text) {
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) { toks.push_back(cur); cur.clear(); }
    };
    for (char ch : text) {
      if (ch == '(' || ch == ')') {
        flush();
        toks.push_back(std::string(1, ch));
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        flush();
      } else {
        cur.push_back(ch);
      }
    }
    flush();
  }

  bool done() const { return pos >= toks.size(); }
  const std::string& peek() const {
    if (done()) throw ParseError("unexpected end of input");
    return toks[pos];
  }
  std::string next() {
    if (done()) throw ParseError("unexpected end of input");
    return toks[pos++];
  }
  void expect(const std::string& t) {
    if (next() != t) throw ParseError("expected '" + t + "'");
  }
};

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' &&
        c != '-')
      return false;
  return true;
}

std::string parse_name(Tokens& tk) {
  std::string n = tk.next();
  if (!valid_name(n)) throw ParseError("bad identifier: " + n);
  return n;
}

TypePtr parse_expr(Tokens& tk);

Capability parse_cap(Tokens& tk) {
  std::string c = tk.next();
  if (c == "i") return Capability::Input;
  if (c == "o") return Capability::Output;
  if (c == "io") return Capability::InputOutput;
  throw ParseError("bad capability: " + c);
}

TypeRef parse_ref(Tokens& tk) {
  if (tk.peek() == "(") return TypeRef{parse_expr(tk)};
  return TypeRef{parse_name(tk)};
}

TypePtr parse_expr(Tokens& tk) {
  std::string t = tk.next();
  if (t != "(") {
    if (t == "unit") return unit_t();
    if (t == "bool") return bool_t();
    if (t == "string") return string_t();
    if (t == "int") return int_t();
    if (t == "top") return top_t();
    if (t == "bot") return bottom_t();
    if (t == "nil") return nil_t();
    throw ParseError("unknown atom: " + t);
  }
  std::string head = tk.next();
  TypePtr result;
  if (head == "chan") {
    Capability cap = parse_cap(tk);
    result = chan_t(cap, parse_expr(tk));
  } else if (head == "label") {
    std::string name = parse_name(tk);
    result = labelled_t(name, parse_expr(tk));
  } else if (head == "union" || head == "tuple") {
    std::vector<TypePtr> ms;
    while (tk.peek() != ")") ms.push_back(parse_expr(tk));
    if (head == "union" && ms.empty()) throw ParseError("empty union");
    result = head == "union" ? union_t(std::move(ms)) : tuple_t(std::move(ms));
  } else if (head == "out") {
    TypeRef r = parse_ref(tk);
    TypePtr payload = parse_expr(tk);
    result = out_t(std::move(r), std::move(payload), parse_expr(tk));
  } else if (head == "in") {
    TypeRef r = parse_ref(tk);
    TypePtr payload = parse_expr(tk);
    std::string var = parse_name(tk);
    result = in_t(std::move(r), std::move(payload), std::move(var), parse_expr(tk));
  } else if (head == "branch") {
    tk.expect("(");
    std::vector<TypeRef> chans;
    while (tk.peek() != ")") chans.push_back(parse_ref(tk));
    tk.expect(")");
    std::vector<BranchCaseT> cases;
    while (tk.peek() != ")") {
      tk.expect("(");
      tk.expect("case");
      std::string label = parse_name(tk);
      TypePtr arg = parse_expr(tk);
      TypePtr cont = parse_expr(tk);
      tk.expect(")");
      cases.push_back({std::move(label), std::move(arg), std::move(cont)});
    }
    result = branch_t(std::move(chans), std::move(cases));
  } else if (head == "timeout") {
    TypePtr inner = parse_expr(tk);
    result = timeout_t(std::move(inner), parse_expr(tk));
  } else if (head == "par") {
    TypePtr l = parse_expr(tk);
    result = par_t(std::move(l), parse_expr(tk));
  } else if (head == "rec") {
    std::string var = parse_name(tk);
    result = rec_t(std::move(var), parse_expr(tk));
  } else if (head == "var") {
    result = var_t(parse_name(tk));
  } else {
    throw ParseError("unknown form: " + head);
  }
  tk.expect(")");
  return result;
}

}  // namespace

std::string print_type(const TypePtr& t) {
  std::ostringstream os;
  print_into(t, os);
  return os.str();
}

TypePtr parse_type(std::string_view text) {
  Tokens tk(text);
  TypePtr t = parse_expr(tk);
  if (!tk.done()) throw ParseError("trailing input after type");
  return t;
}

}  // namespace chansel
