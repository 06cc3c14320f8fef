#pragma once

// Model files, bundled presets and text formatting shared by the commands.
//
// A model file is a JSON object:
//   { "name": "...", "n": 2, "m": 1,
//     "alloc_matrix": [[1.0, 1.0]],
//     "rotors": [{"inertia": 0.05, "drag_coeff": 0.1, "torque_limit": 1.0}, ...] }

#include <optional>
#include <string>
#include <vector>

#include "daam/model.hpp"

namespace daam::io {

/// Parses model text. Syntax errors raise Error(parse_error) with the line and
/// column; schema and physical violations raise Error(validation_error) naming
/// the offending field.
Model parse_model(const std::string& text, const std::string& source = "<input>");

/// Preset name, or a path to a model file.
Model load_model(const std::string& name_or_path);

/// Model file text that parse_model reads back to an identical model.
std::string model_to_json(const Model& model);

std::vector<std::string> preset_names();
std::optional<Model> preset(const std::string& name);

/// 17 significant digits (reads back exactly); "inf", "-inf", "nan" for
/// non-finite values.
std::string format_double(double x);

/// Comma-separated reals, e.g. "0.5" or "1,-2".
Eigen::VectorXd parse_vector(const std::string& text, const std::string& what);

void write_text(const std::string& path, const std::string& text);

}  // namespace daam::io
