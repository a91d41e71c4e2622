#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hwopt/array.hpp"
#include "hwopt/joint_policy.hpp"

namespace hwopt {

// Self-describing text container: ordered named float64 arrays plus string
// metadata. Values are printed with %.17g so save -> load -> save is
// byte-identical.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Array>> arrays;

  const Array* find(const std::string& name) const;
  std::string meta_or(const std::string& key, const std::string& fallback) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint policy_checkpoint(const JointPolicy& policy,
                             const std::map<std::string, std::string>& extra_meta = {});
JointPolicy policy_from_checkpoint(const Checkpoint& ck);

}  // namespace hwopt
