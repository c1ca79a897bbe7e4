#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "json.hpp"

namespace hokme {

using ordered_json = nlohmann::ordered_json;

/// Fixed 17-significant-digit rendering; round-trips every double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace detail {
inline void dump_json(const ordered_json& j, std::string& out, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case ordered_json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += ordered_json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        dump_json(it.value(), out, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case ordered_json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& v : j) flat = flat && !v.is_structured();
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += flat && indent >= 0 ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        dump_json(v, out, indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case ordered_json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? format_double(x) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}
}  // namespace detail

/// Serializes with stable key order and 17-digit floats, so identical inputs give identical bytes.
inline std::string dump_json(const ordered_json& j, int indent = 2) {
  std::string out;
  detail::dump_json(j, out, indent, 0);
  return out;
}

}  // namespace hokme
