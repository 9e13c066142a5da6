#pragma once

#include <string>

#include "mgs/core/types.hpp"

namespace mgs::core {

// JSON config file mirroring MicrogridConfig field names. Missing fields fall
// back to the paper_default() values, so a file may override selectively.
MicrogridConfig load_config(const std::string& path);
void save_config(const MicrogridConfig& cfg, const std::string& path);

MicrogridConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const MicrogridConfig& cfg);

// Short hex digest of the canonical JSON form, embedded in reports.
std::string config_hash(const MicrogridConfig& cfg);

}  // namespace mgs::core
