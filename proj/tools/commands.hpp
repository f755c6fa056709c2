// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

// Subcommand implementations. Each command takes its fully resolved
// configuration as a JSON object, writes its outputs plus a
// run_manifest.json into config["out"], and returns a process exit code.
// `rerun` replays a manifest.

#pragma once

#include <ostream>
#include <string>

#include "json.hpp"

namespace thinner::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kManifestName = "run_manifest.json";

int cmd_stats(const nlohmann::json& config, std::ostream& out);
int cmd_build(const nlohmann::json& config, std::ostream& out);
int cmd_gen_data(const nlohmann::json& config, std::ostream& out);
int cmd_prune(const nlohmann::json& config, std::ostream& out);
int cmd_compare(const nlohmann::json& config, std::ostream& out);
int cmd_finetune(const nlohmann::json& config, std::ostream& out);
int cmd_eval(const nlohmann::json& config, std::ostream& out);

/// Dispatches on the manifest's "command" with its "config"; a non-empty
/// `out_override` redirects the outputs and a positive `threads` replaces
/// the recorded thread count.
int cmd_rerun(const std::string& manifest_path, const std::string& out_override, int threads,
              std::ostream& out);

int dispatch(const std::string& command, const nlohmann::json& config, std::ostream& out);

}  // namespace thinner::cli
