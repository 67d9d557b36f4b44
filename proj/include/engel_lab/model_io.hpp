#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "models.hpp"

namespace engel_lab {

namespace detail {

using nlohmann::json;

/// JSON-pointer path for error messages.
class JsonPath {
 public:
  JsonPath() = default;
  JsonPath operator/(const std::string& key) const {
    JsonPath p = *this;
    std::string esc;
    for (char ch : key) {
      if (ch == '~') esc += "~0";
      else if (ch == '/') esc += "~1";
      else esc += ch;
    }
    p.path_ += "/" + esc;
    return p;
  }
  JsonPath operator/(std::size_t i) const { return *this / std::to_string(i); }
  std::string str() const { return path_.empty() ? "/" : path_; }

 private:
  std::string path_;
};

[[noreturn]] inline void schema_error(const JsonPath& at, const std::string& msg) {
  throw ModelError("model file " + at.str() + ": " + msg);
}

inline void check_keys(const json& obj, const JsonPath& at, const std::set<std::string>& allowed) {
  if (!obj.is_object()) schema_error(at, "expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) schema_error(at / item.key(), "unknown key");
  }
}

inline double number(const json& v, const JsonPath& at) {
  if (!v.is_number()) schema_error(at, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(at, "number must be finite");
  return d;
}

inline std::string string(const json& v, const JsonPath& at) {
  if (!v.is_string()) schema_error(at, "expected a string");
  return v.get<std::string>();
}

inline const json& array(const json& v, const JsonPath& at, std::size_t n) {
  if (!v.is_array()) schema_error(at, "expected an array");
  if (n != 0 && v.size() != n) schema_error(at, "expected " + std::to_string(n) + " entries, found " + std::to_string(v.size()));
  return v;
}

inline std::vector<double> constants(const json& v, const JsonPath& at, int dim) {
  const auto n = static_cast<std::size_t>(dim);
  std::vector<double> c;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = array(array(v, at, n)[i], at / i, n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& b = array(a[j], at / i / j, n);
      for (std::size_t k = 0; k < n; ++k) c.push_back(number(b[k], at / i / j / k));
    }
  }
  return c;
}

/// Role value: basis index or basis name.
inline int role_index(const json& v, const JsonPath& at, const std::vector<std::string>& basis, int dim) {
  if (v.is_number_integer()) {
    const int i = v.get<int>();
    if (i < 0 || i >= dim) schema_error(at, "basis index out of range");
    return i;
  }
  const std::string s = string(v, at);
  for (std::size_t i = 0; i < basis.size(); ++i)
    if (basis[i] == s) return static_cast<int>(i);
  schema_error(at, "unknown basis name '" + s + "'");
}

inline Chart chart_from(const json& doc, const JsonPath& root) {
  Chart chart;
  chart.names = {"x", "y", "z", "w"};
  if (doc.contains("coordinates")) {
    const auto& c = array(doc["coordinates"], root / "coordinates", 4);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < 4; ++i) {
      chart.names[i] = string(c[i], root / "coordinates" / i);
      if (!seen.insert(chart.names[i]).second) schema_error(root / "coordinates" / i, "duplicate coordinate name");
    }
  }
  if (doc.contains("periods")) {
    const auto& p = array(doc["periods"], root / "periods", 4);
    for (std::size_t i = 0; i < 4; ++i) {
      chart.periods[i] = number(p[i], root / "periods" / i);
      if (chart.periods[i] < 0.0) schema_error(root / "periods" / i, "period must be >= 0");
    }
  }
  if (doc.contains("region")) {
    const auto at = root / "region";
    check_keys(doc["region"], at, {"lower", "upper"});
    for (const char* side : {"lower", "upper"}) {
      if (!doc["region"].contains(side)) continue;
      const auto& b = array(doc["region"][side], at / side, 4);
      for (std::size_t i = 0; i < 4; ++i) {
        const double v = b[i].is_null() ? (side[0] == 'l' ? -1.0 : 1.0) * std::numeric_limits<double>::infinity()
                                        : number(b[i], at / side / i);
        (side[0] == 'l' ? chart.lower : chart.upper)(static_cast<Eigen::Index>(i)) = v;
      }
    }
    for (int i = 0; i < 4; ++i)
      if (!(chart.lower(i) < chart.upper(i))) schema_error(at, "empty region on axis " + std::to_string(i));
  }
  return chart;
}

inline std::vector<std::pair<std::string, std::array<std::string, 4>>> field_defs(const json& v, const JsonPath& at) {
  if (!v.is_object() || v.empty()) schema_error(at, "expected a non-empty object of fields");
  std::vector<std::pair<std::string, std::array<std::string, 4>>> out;
  for (const auto& item : v.items()) {
    const auto& comps = array(item.value(), at / item.key(), 4);
    std::array<std::string, 4> src;
    for (std::size_t i = 0; i < 4; ++i) src[i] = string(comps[i], at / item.key() / i);
    out.emplace_back(item.key(), src);
  }
  return out;
}

inline std::shared_ptr<ManifoldModel> parsed_realization(const std::string& name, const Chart& chart,
                                                         const std::vector<std::pair<std::string, std::array<std::string, 4>>>& defs,
                                                         const JsonPath& at) {
  auto real = std::make_shared<ManifoldModel>();
  real->name = name;
  real->kind = ModelKind::chart;
  auto cp = std::make_shared<Chart>(chart);
  real->chart = cp;
  for (const auto& [n, src] : defs) {
    std::array<expr::Expression, 4> comps;
    for (std::size_t i = 0; i < 4; ++i) {
      try {
        comps[i] = expr::Expression::parse(src[i], cp->name_list());
      } catch (const ParseError& e) {
        schema_error(at / n / i, e.what());
      }
    }
    real->fields[n] = FieldHandle::symbolic(cp, std::move(comps), n);
    real->field_order.push_back(n);
  }
  return real;
}

/// Distribution entry: a field name or an object {field: coefficient, ...}.
inline FieldHandle distribution_field(const ManifoldModel& m, const json& v, const JsonPath& at) {
  if (v.is_string()) {
    const std::string n = v.get<std::string>();
    if (!m.fields.count(n)) schema_error(at, "unknown field '" + n + "'");
    return m.fields.at(n);
  }
  if (!v.is_object() || v.empty()) schema_error(at, "expected a field name or a non-empty coefficient object");
  std::vector<std::pair<double, FieldHandle>> terms;
  std::ostringstream label;
  for (const auto& item : v.items()) {
    if (!m.fields.count(item.key())) schema_error(at / item.key(), "unknown field '" + item.key() + "'");
    const double c = number(item.value(), at / item.key());
    terms.emplace_back(c, m.fields.at(item.key()));
    label << (terms.size() > 1 ? " + " : "") << c << "*" << item.key();
  }
  return linear_combination(terms, label.str());
}

inline void attach_distributions(ManifoldModel& m, const json& doc, const JsonPath& root) {
  if (!doc.contains("distributions")) return;
  const auto at = root / "distributions";
  const auto& d = doc["distributions"];
  if (!d.is_object()) schema_error(at, "expected an object");
  for (const auto& item : d.items()) {
    const auto& list = array(item.value(), at / item.key(), 0);
    if (list.empty() || list.size() > 3) schema_error(at / item.key(), "a distribution needs 1 to 3 fields");
    DistributionSpec spec{item.key(), {}};
    for (std::size_t i = 0; i < list.size(); ++i) spec.frame.push_back(distribution_field(m, list[i], at / item.key() / i));
    m.distributions[item.key()] = std::move(spec);
  }
  // The quotient frame is the part of E beyond the flow field.
  if (d.contains("E")) {
    std::vector<std::string> q;
    for (const auto& e : d["E"])
      if (e.is_string() && e.get<std::string>() != m.flow) q.push_back(e.get<std::string>());
    if (q.size() != 2) schema_error(at / "E", "E must list the flow field and two named fields");
    m.quotient_fields = {q[0], q[1]};
  }
}

}  // namespace detail

/// Validated model from a JSON document.
inline ManifoldModel model_from_json(const nlohmann::json& doc) {
  using detail::JsonPath;
  const JsonPath root;
  detail::check_keys(doc, root, {"type", "dimension", "name", "constants", "fields", "coordinates", "roles", "periods",
                                 "region", "distributions"});
  if (!doc.contains("type")) detail::schema_error(root / "type", "missing");
  if (!doc.contains("dimension")) detail::schema_error(root / "dimension", "missing");
  const std::string type = detail::string(doc["type"], root / "type");
  if (!doc["dimension"].is_number_integer() || doc["dimension"].get<int>() != 4) {
    detail::schema_error(root / "dimension", "only dimension 4 is supported");
  }
  const std::string name = doc.contains("name") ? detail::string(doc["name"], root / "name") : type;
  const nlohmann::json roles = doc.contains("roles") ? doc["roles"] : nlohmann::json::object();
  if (!roles.is_object()) detail::schema_error(root / "roles", "expected an object");
  const Chart chart = detail::chart_from(doc, root);

  ManifoldModel m;
  if (type == "lie" || type == "suspension") {
    if (!doc.contains("constants")) detail::schema_error(root / "constants", "missing");
    const int dim = type == "lie" ? 4 : 3;
    const auto c = detail::constants(doc["constants"], root / "constants", dim);
    std::vector<std::string> basis(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) basis[static_cast<std::size_t>(i)] = "e" + std::to_string(i);
    FrameRoles fr;
    for (const auto& item : roles.items()) {
      if (item.key() == "W" && type == "suspension") detail::schema_error(root / "roles" / "W", "the suspension flow is X + T");
      if (item.key() == "T" && type == "suspension") {
        detail::string(item.value(), root / "roles" / "T");
        continue;
      }
      fr[item.key()] = detail::role_index(item.value(), root / "roles" / item.key(), basis, dim);
    }
    std::set<int> used;
    for (const auto& [role, idx] : fr) {
      if (!used.insert(idx).second) detail::schema_error(root / "roles" / role, "basis index assigned twice");
      basis[static_cast<std::size_t>(idx)] = role;
    }
    if (type == "lie") {
      m = make_lie_model(c, fr, name);
    } else {
      if (!fr.count("X")) detail::schema_error(root / "roles" / "X", "suspension needs the Anosov role X");
      LieAlgebra base(3, c, basis);
      try {
        validate_algebra(base);
      } catch (const ModelError& e) {
        detail::schema_error(root / "constants", e.what());
      }
      const std::string tname = roles.contains("T") ? roles["T"].get<std::string>() : "T";
      auto algebra = std::make_shared<LieAlgebra>(base.with_central_extension(tname));
      m.name = name;
      m.kind = ModelKind::suspension;
      validate_algebra(*algebra, &m.jacobi_residual);
      m.algebra = algebra;
      m.base_algebra = base;
      for (int i = 0; i < 4; ++i) {
        const auto& n = algebra->basis_names()[static_cast<std::size_t>(i)];
        m.fields[n] = FieldHandle::invariant(algebra, Vec4::Unit(i), n);
        m.field_order.push_back(n);
      }
      Vec4 w = Vec4::Unit(3);
      w(fr.at("X")) = 1.0;
      m.fields["W"] = FieldHandle::invariant(algebra, w, "W");
      m.field_order.push_back("W");
      m.flow = "W";
      m.realization = detail::second_kind_realization(algebra);
    }
    if (doc.contains("fields")) {
      // Chart realization of the invariant frame; one field per basis name, plus optionally W.
      const auto defs = detail::field_defs(doc["fields"], root / "fields");
      auto real = detail::parsed_realization(name + " chart", chart, defs, root / "fields");
      for (const auto& b : m.algebra->basis_names()) {
        if (!real->fields.count(b)) detail::schema_error(root / "fields", "realization is missing basis field '" + b + "'");
      }
      for (const auto& [n, f] : real->fields) {
        if (!m.fields.count(n)) detail::schema_error(root / "fields" / n, "not a field of the algebra");
      }
      m.realization = real;
    } else {
      // Second-kind coordinates, carried over to the declared chart.
      auto real = std::make_shared<ManifoldModel>(*m.realization);
      real->chart = std::make_shared<Chart>(chart);
      for (auto& [n, f] : real->fields) {
        const auto ev = f;
        f = FieldHandle::numeric(real->chart, [ev](const Point& p) { return ev(p); }, kDefaultStep, n);
      }
      m.realization = real;
    }
    if (m.fields.count("W")) m.flow = "W";
  } else if (type == "chart") {
    if (doc.contains("constants")) detail::schema_error(root / "constants", "chart models take fields, not constants");
    if (!doc.contains("fields")) detail::schema_error(root / "fields", "missing");
    const auto defs = detail::field_defs(doc["fields"], root / "fields");
    auto real = detail::parsed_realization(name, chart, defs, root / "fields");
    m.name = name;
    m.kind = ModelKind::chart;
    m.chart = real->chart;
    m.fields = real->fields;
    m.field_order = real->field_order;
    m.flow = "W";
    for (const auto& item : roles.items()) {
      if (item.key() != "W") detail::schema_error(root / "roles" / item.key(), "chart models only designate W");
      m.flow = detail::string(item.value(), root / "roles" / "W");
    }
    if (!m.fields.count(m.flow)) detail::schema_error(root / "roles" / "W", "flow field '" + m.flow + "' is not defined");
  } else {
    detail::schema_error(root / "type", "expected \"lie\", \"chart\" or \"suspension\"");
  }
  detail::attach_distributions(m, doc, root);
  return m;
}

inline ManifoldModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open model file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError("model file is not valid JSON: " + std::string(e.what()));
  }
  return model_from_json(doc);
}

/// Built-in name or path to a model file.
inline ManifoldModel resolve_model(const std::string& source) {
  for (const auto& n : builtin_names())
    if (n == source) return builtin(n);
  if (source.find('/') != std::string::npos || source.find(".json") != std::string::npos) return load_model(source);
  throw UsageError("unknown model '" + source + "' (not a built-in and not a .json path)");
}

}  // namespace engel_lab
