#pragma once

#include <map>
#include <string>

namespace mnms {

// Flat key = value configuration with dotted section keys, e.g.
//   mnms.node_count = 8000
// '#' starts a comment; blank lines are ignored. Unknown keys are hard
// errors at application time, not at parse time.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

}  // namespace mnms
