#include "chansel/value.hpp"

#include <sstream>

namespace chansel {

Value v_unit() { return Value{UnitV{}}; }
Value v_bool(bool b) { return Value{b}; }
Value v_str(std::string s) { return Value{std::move(s)}; }
Value v_int(std::int64_t i) { return Value{i}; }
Value v_chan(ChannelId id, Capability cap) { return Value{ChanRefV{id, cap}}; }
Value v_labelled(Label label, Value payload) {
  return Value{LabelledV{std::move(label),
                         std::make_shared<const Value>(std::move(payload))}};
}
Value v_tuple(std::vector<Value> items) { return Value{TupleV{std::move(items)}}; }

std::optional<Label> top_label(const Value& v) {
  if (const auto* l = std::get_if<LabelledV>(&v.v)) return l->label;
  return std::nullopt;
}

const Value& unwrap_labelled(const Value& v) {
  if (const auto* l = std::get_if<LabelledV>(&v.v)) return *l->payload;
  return v;
}

std::string to_string(const Value& v) {
  std::ostringstream os;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, UnitV>) {
          os << "()";
        } else if constexpr (std::is_same_v<T, bool>) {
          os << (x ? "true" : "false");
        } else if constexpr (std::is_same_v<T, std::string>) {
          os << '"' << x << '"';
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          os << x;
        } else if constexpr (std::is_same_v<T, ChanRefV>) {
          os << "#chan" << x.id.value << ":" << chansel::to_string(x.cap);
        } else if constexpr (std::is_same_v<T, LabelledV>) {
          os << x.label << "(" << chansel::to_string(*x.payload) << ")";
        } else if constexpr (std::is_same_v<T, TupleV>) {
          os << "(";
          for (std::size_t i = 0; i < x.items.size(); ++i) {
            if (i) os << ", ";
            os << chansel::to_string(x.items[i]);
          }
          os << ")";
        }
      },
      v.v);
  return os.str();
}

bool value_conforms(const Value& v, const TypePtr& t) {
  if (std::holds_alternative<TopT>(t->node)) return true;
  if (std::holds_alternative<BottomT>(t->node)) return false;
  if (std::holds_alternative<RecT>(t->node))
    return value_conforms(v, unfold_rec(t));
  if (const auto* u = std::get_if<UnionT>(&t->node)) {
    for (const auto& m : u->members)
      if (value_conforms(v, m)) return true;
    return false;
  }
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, UnitV>) {
          const auto* b = std::get_if<BaseT>(&t->node);
          return b && b->kind == BaseKind::Unit;
        } else if constexpr (std::is_same_v<T, bool>) {
          const auto* b = std::get_if<BaseT>(&t->node);
          return b && b->kind == BaseKind::Bool;
        } else if constexpr (std::is_same_v<T, std::string>) {
          const auto* b = std::get_if<BaseT>(&t->node);
          return b && b->kind == BaseKind::String;
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          const auto* b = std::get_if<BaseT>(&t->node);
          return b && b->kind == BaseKind::Int;
        } else if constexpr (std::is_same_v<T, ChanRefV>) {
          const auto* c = std::get_if<ChanT>(&t->node);
          return c && capability_le(x.cap, c->cap);
        } else if constexpr (std::is_same_v<T, LabelledV>) {
          const auto* l = std::get_if<LabelledT>(&t->node);
          return l && l->label == x.label && value_conforms(*x.payload, l->inner);
        } else if constexpr (std::is_same_v<T, TupleV>) {
          const auto* tt = std::get_if<TupleT>(&t->node);
          if (!tt || tt->members.size() != x.items.size()) return false;
          for (std::size_t i = 0; i < x.items.size(); ++i)
            if (!value_conforms(x.items[i], tt->members[i])) return false;
          return true;
        }
      },
      v.v);
}

TypePtr type_of(const Value& v, const std::map<ChannelId, TypePtr>* chan_types) {
  return std::visit(
      [&](const auto& x) -> TypePtr {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, UnitV>) {
          return unit_t();
        } else if constexpr (std::is_same_v<T, bool>) {
          return bool_t();
        } else if constexpr (std::is_same_v<T, std::string>) {
          return string_t();
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return int_t();
        } else if constexpr (std::is_same_v<T, ChanRefV>) {
          if (chan_types) {
            auto it = chan_types->find(x.id);
            if (it != chan_types->end()) {
              if (const auto* c = std::get_if<ChanT>(&it->second->node))
                return chan_t(x.cap, c->payload);
            }
          }
          return chan_t(x.cap, top_t());
        } else if constexpr (std::is_same_v<T, LabelledV>) {
          return labelled_t(x.label, type_of(*x.payload, chan_types));
        } else if constexpr (std::is_same_v<T, TupleV>) {
          std::vector<TypePtr> ms;
          ms.reserve(x.items.size());
          for (const auto& item : x.items) ms.push_back(type_of(item, chan_types));
          return tuple_t(std::move(ms));
        }
      },
      v.v);
}

}  // namespace chansel
