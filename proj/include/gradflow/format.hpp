#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace gradflow {

/// Shortest fixed-width textual form used for every serialized float:
/// 17 significant digits, so values round-trip exactly.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline void write_json_string(std::ostream& os, const std::string& s) {
  os << nlohmann::json(s).dump();
}

inline void write_json(std::ostream& os, const nlohmann::json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad;
        write_json_string(os, it.key());
        os << ": ";
        write_json(os, it.value(), indent, depth + 1);
      }
      os << "\n" << close_pad << "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool scalars = true;
      for (const auto& e : j) scalars = scalars && !e.is_structured();
      if (scalars) {
        os << "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) os << ", ";
          write_json(os, j[i], indent, depth + 1);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        write_json(os, j[i], indent, depth + 1);
      }
      os << "\n" << close_pad << "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double x = j.get<double>();
      // JSON has no inf/nan literals.
      if (std::isfinite(x))
        os << format_double(x);
      else
        write_json_string(os, format_double(x));
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Pretty-prints JSON with every float at 17 significant digits.
inline void write_json(std::ostream& os, const nlohmann::json& j, int indent = 2) {
  detail::write_json(os, j, indent, 0);
  os << "\n";
}

inline std::string to_json_string(const nlohmann::json& j) {
  std::ostringstream os;
  write_json(os, j);
  return os.str();
}

}  // namespace gradflow
