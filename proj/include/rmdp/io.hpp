#pragma once

// JSON and CSV serialization: MDP instances, uncertainty sets, solver traces.

#include "rmdp/robust_eval.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>

namespace rmdp {

using Json = nlohmann::json;

struct MdpWithKernel {
    MdpInstance mdp;
    TransitionKernel kernel;
};

Json to_json(const MdpInstance& mdp, const TransitionKernel& kernel);
/// Rows off the simplex by at most 1e-9 are renormalized; larger violations are rejected.
MdpWithKernel mdp_from_json(const Json& j);
TransitionKernel kernel_from_json(const Json& nested, int num_states, int num_actions);
TransitionKernel kernel_from_json(const Json& nested);
Json kernel_to_json(const TransitionKernel& kernel);

Json to_json(const UncertaintySet& set);
/// {"kind": "sa_l2"|"s_l1"|"singleton", "kernel": ..., "radius": r} or
/// {"kind": "ellipsoid", "S", "A", "base", "jacobian": {"rows","cols","entries":[[i,j,v],...]},
///  "center", "H": [[...]] | {"diag": [...]}, "radius", "region": [...]}.
UncertaintySet set_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

inline constexpr const char* kTraceCsvHeader = "iter,value,gap,step,elapsed_ns";
void write_trace_csv(std::ostream& os, const RunTrace& trace);
Json trace_summary(const RunTrace& trace);

}  // namespace rmdp
