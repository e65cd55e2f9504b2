#pragma once

// JSON wire forms of edit commands and constraint sets.
//
// Edit: {"kind": "move", "target": 0, "dx": [0.1, 0]}; payload keys per
// kind: move dx, remove s (optional), resize ds, rotate dtheta, clone new_x
// and insert_at (optional), restyle psi and psi_bg (optional), restructure phi.
// Constraint: {"index": 0, "attribute": "phi", "value": [...]}.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blobgan/edit.hpp"

namespace blobgan::io {

// Throw FormatError whose section is the JSON path of the bad field.
EditCommand edit_from_json(const nlohmann::json& j, const std::string& path = "edit");
std::vector<EditCommand> edits_from_json(const nlohmann::json& j, const std::string& path = "edits");
nlohmann::json edit_to_json(const EditCommand& cmd);

Constraint constraint_from_json(const nlohmann::json& j, const std::string& path = "constraint");
ConstraintSet constraints_from_json(const nlohmann::json& j, const std::string& path = "constraints");
nlohmann::json constraint_to_json(const Constraint& c);

}  // namespace blobgan::io
