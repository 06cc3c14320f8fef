#include "daam/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace daam::io {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::validation_error, field + ": " + what);
}

double number_at(const json& node, const std::string& field) {
  if (!node.is_number()) invalid(field, "expected a number");
  return node.get<double>();
}

long integer_at(const json& node, const std::string& field) {
  if (!node.is_number_integer() && !node.is_number_unsigned())
    invalid(field, "expected an integer");
  return node.get<long>();
}

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) invalid(where.empty() ? key : where + "." + key, "missing");
  return *it;
}

}  // namespace

Model parse_model(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset to 1-based line and column.
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < end; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string detail = e.what();
    if (const auto pos = detail.find(": "); pos != std::string::npos) detail = detail.substr(pos + 2);
    throw Error(ErrorCode::parse_error, source + ":" + std::to_string(line) + ":" +
                                            std::to_string(col) + ": " + detail);
  }
  if (!doc.is_object()) invalid("<root>", "expected an object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "name" && key != "n" && key != "m" && key != "alloc_matrix" && key != "rotors")
      invalid(key, "unknown field");
  }

  const long n = integer_at(require(doc, "n", ""), "n");
  const long m = integer_at(require(doc, "m", ""), "m");
  if (n < 1) invalid("n", "must be positive");
  if (m < 1) invalid("m", "must be positive");

  const json& rows = require(doc, "alloc_matrix", "");
  if (!rows.is_array()) invalid("alloc_matrix", "expected an array of rows");
  if (static_cast<long>(rows.size()) != m)
    invalid("alloc_matrix", "expected m=" + std::to_string(m) + " rows, got " +
                                std::to_string(rows.size()));
  Eigen::MatrixXd a(m, n);
  for (long r = 0; r < m; ++r) {
    const std::string row_field = "alloc_matrix[" + std::to_string(r) + "]";
    const json& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array()) invalid(row_field, "expected an array");
    if (static_cast<long>(row.size()) != n)
      invalid(row_field, "expected n=" + std::to_string(n) + " entries, got " +
                             std::to_string(row.size()));
    for (long c = 0; c < n; ++c)
      a(r, c) = number_at(row[static_cast<std::size_t>(c)],
                          row_field + "[" + std::to_string(c) + "]");
  }

  const json& list = require(doc, "rotors", "");
  if (!list.is_array()) invalid("rotors", "expected an array");
  if (static_cast<long>(list.size()) != n)
    invalid("rotors", "expected n=" + std::to_string(n) + " entries, got " +
                          std::to_string(list.size()));
  std::vector<Rotor> rotors;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "rotors[" + std::to_string(i) + "]";
    const json& r = list[i];
    if (!r.is_object()) invalid(where, "expected an object");
    for (const auto& [key, value] : r.items())
      if (key != "inertia" && key != "drag_coeff" && key != "torque_limit")
        invalid(where + "." + key, "unknown field");
    rotors.push_back({number_at(require(r, "inertia", where), where + ".inertia"),
                      number_at(require(r, "drag_coeff", where), where + ".drag_coeff"),
                      number_at(require(r, "torque_limit", where), where + ".torque_limit")});
  }

  std::string name;
  if (const auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) invalid("name", "expected a string");
    name = it->get<std::string>();
  }
  return Model(std::move(a), std::move(rotors), std::move(name));
}

Model load_model(const std::string& name_or_path) {
  if (auto p = preset(name_or_path)) return *p;
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::io_error,
                "cannot open model '" + name_or_path + "' (not a preset or readable file)");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str(), name_or_path);
}

std::string model_to_json(const Model& model) {
  json doc;
  doc["name"] = model.name();
  doc["n"] = model.num_rotors();
  doc["m"] = model.task_dim();
  json rows = json::array();
  for (Eigen::Index r = 0; r < model.task_dim(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < model.num_rotors(); ++c) row.push_back(model.alloc_matrix()(r, c));
    rows.push_back(row);
  }
  doc["alloc_matrix"] = rows;
  json rotors = json::array();
  for (const auto& r : model.rotors())
    rotors.push_back({{"inertia", r.inertia}, {"drag_coeff", r.drag_coeff},
                      {"torque_limit", r.torque_limit}});
  doc["rotors"] = rotors;
  return doc.dump(2) + "\n";
}

namespace {

Model two_rotor(const std::string& name, double a1, double a2, Rotor r1, Rotor r2) {
  Eigen::MatrixXd a(1, 2);
  a << a1, a2;
  return Model(a, {r1, r2}, name);
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"caseA_balanced", "caseA_small_a1", "caseA_small_a2", "caseA_tiny_m1",
          "caseA_tiny_tau1", "caseA_tiny_b1", "visual_2x1", "case3x1", "case3x2"};
}

std::optional<Model> preset(const std::string& name) {
  const Rotor base{0.05, 0.1, 1.0};
  if (name == "caseA_balanced") return two_rotor(name, 1.0, 1.0, base, base);
  if (name == "caseA_small_a1") return two_rotor(name, 0.7, 1.0, base, base);
  if (name == "caseA_small_a2") return two_rotor(name, 1.0, 0.7, base, base);
  if (name == "caseA_tiny_m1") return two_rotor(name, 1.0, 1.0, {0.005, 0.1, 1.0}, base);
  if (name == "caseA_tiny_tau1") return two_rotor(name, 1.0, 1.0, {0.05, 0.1, 0.1}, base);
  if (name == "caseA_tiny_b1") return two_rotor(name, 1.0, 1.0, {0.05, 0.01, 1.0}, base);
  if (name == "visual_2x1") return two_rotor(name, 1.0, 1.5, {1.0, 0.2, 10.0}, {1.0, 0.4, 15.0});
  if (name == "case3x1") {
    Eigen::MatrixXd a(1, 3);
    a << 1.0, 1.0, 1.0;
    return Model(a, {base, base, base}, name);
  }
  if (name == "case3x2") {
    // f1 = a1 u1 + a2 u2 + a3 u3, f2 = c1 u1 - c2 u2 with a = (1,1,1), c = (1,1).
    Eigen::MatrixXd a(2, 3);
    a << 1.0, 1.0, 1.0,
         1.0, -1.0, 0.0;
    return Model(a, {base, base, base}, name);
  }
  return std::nullopt;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Eigen::VectorXd parse_vector(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::usage_error, what + ": '" + item + "' is not a number");
    }
  }
  if (values.empty()) throw Error(ErrorCode::usage_error, what + ": empty vector");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "write failed for '" + path + "'");
}

}  // namespace daam::io
