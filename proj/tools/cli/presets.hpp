#pragma once

#include "output.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rmdp::cli {

struct PresetContext {
    std::string name;
    Json params;  // defaults merged with overrides
    std::uint64_t seed = 0;
    int jobs = 1;
    fs::path out;
    Format format = Format::csv;
    bool timing = true;
};

const std::vector<std::string>& preset_names();

/// Default parameters; `full` switches to the original experiment sizes where they differ.
Json preset_defaults(const std::string& name, bool full);

/// Defaults with `overrides` merged in. Unknown keys and type changes are usage errors.
Json resolve_params(const std::string& name, bool full, const Json& overrides);

struct PresetOutcome {
    Json manifest;
    int failures = 0;
};

/// Executes every run of the preset on ctx.jobs threads, writes one trace file per run under
/// out/runs, the aggregate tables under out, and out/manifest.json last.
PresetOutcome run_preset(const PresetContext& ctx);

}  // namespace rmdp::cli
