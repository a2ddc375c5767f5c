#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "chansel/types.hpp"

namespace chansel {

struct ChannelId {
  std::uint64_t value = 0;
  auto operator<=>(const ChannelId&) const = default;
};

struct Value;

struct UnitV {};
struct ChanRefV {
  ChannelId id;
  Capability cap = Capability::InputOutput;
};
struct LabelledV {
  Label label;
  std::shared_ptr<const Value> payload;
};
struct TupleV { std::vector<Value> items; };

// Runtime messages: the unit value, booleans, strings, integers, channel
// references, labelled values and tuples.
struct Value {
  std::variant<UnitV, bool, std::string, std::int64_t, ChanRefV, LabelledV,
               TupleV>
      v;
};

Value v_unit();
Value v_bool(bool b);
Value v_str(std::string s);
Value v_int(std::int64_t i);
Value v_chan(ChannelId id, Capability cap = Capability::InputOutput);
Value v_labelled(Label label, Value payload);
Value v_tuple(std::vector<Value> items);

// Top-level label of a labelled value, nullopt otherwise.
std::optional<Label> top_label(const Value& v);

// Payload of a labelled value; the value itself otherwise.
const Value& unwrap_labelled(const Value& v);

std::string to_string(const Value& v);

// Runtime tag test: does v fit the (first-order) type t? Channel payloads
// are not introspectable at runtime and are accepted on capability alone.
bool value_conforms(const Value& v, const TypePtr& t);

// Static type of a value. chan_types, when given, supplies payload types
// for channel refs created through a typed allocator; unknown channels get
// a Top payload.
TypePtr type_of(const Value& v,
                const std::map<ChannelId, TypePtr>* chan_types = nullptr);

}  // namespace chansel
