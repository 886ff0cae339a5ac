#pragma once

// JSON forms of the structured configs. Readers accept partial objects (absent
// keys keep their defaults) and reject unknown keys.

#include "feasc/augment.hpp"
#include "feasc/frameworks.hpp"
#include "json.hpp"

namespace feasc {

using Json = nlohmann::ordered_json;

/// Throws ValidationError naming the first key of `j` not in `allowed`.
void require_known_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Json to_json(const EncoderSpec& s);
Json to_json(const HeadSpec& s);
Json to_json(const AugmentPolicy& p);
void from_json_strict(const Json& j, EncoderSpec& s);
void from_json_strict(const Json& j, HeadSpec& s);
void from_json_strict(const Json& j, AugmentPolicy& p);

/// Reads a field if present, converting type errors to ValidationError.
template <class T>
void read_field(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(where + "." + key + " has the wrong type");
  }
}

}  // namespace feasc
