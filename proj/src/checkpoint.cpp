#include "hwopt/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hwopt {

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

const Array* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, a] : arrays)
    if (n == name) return &a;
  return nullptr;
}

std::string Checkpoint::meta_or(const std::string& key, const std::string& fallback) const {
  auto it = meta.find(key);
  return it == meta.end() ? fallback : it->second;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << "hwopt-checkpoint v1\n";
  for (const auto& [k, v] : ck.meta) out << "meta " << k << ' ' << v << '\n';
  for (const auto& [name, arr] : ck.arrays) {
    out << "array " << name << ' ' << arr.shape.rank << ' ' << arr.shape.d0;
    if (arr.shape.rank == 2) out << ' ' << arr.shape.d1;
    out << '\n';
    for (size_t i = 0; i < arr.v.size(); ++i) {
      if (i) out << ' ';
      out << fmt_double(arr.v[i]);
    }
    out << '\n';
  }
  out << "end\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "hwopt-checkpoint v1")
    throw std::runtime_error("load_checkpoint: bad header in " + path);
  Checkpoint ck;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ck.meta[key] = value;
    } else if (kind == "array") {
      std::string name;
      int rank = 0, d0 = 0, d1 = 0;
      ls >> name >> rank >> d0;
      if (rank == 2) ls >> d1;
      Shape s = rank == 2 ? Shape::mat(d0, d1) : Shape::vec(d0);
      Array arr(s);
      std::string values;
      if (!std::getline(in, values))
        throw std::runtime_error("load_checkpoint: truncated array " + name);
      std::istringstream vs(values);
      for (auto& x : arr.v)
        if (!(vs >> x)) throw std::runtime_error("load_checkpoint: short array " + name);
      ck.arrays.emplace_back(name, std::move(arr));
    } else {
      throw std::runtime_error("load_checkpoint: unexpected line '" + line + "'");
    }
  }
  return ck;
}

Checkpoint policy_checkpoint(const JointPolicy& policy,
                             const std::map<std::string, std::string>& extra_meta) {
  Checkpoint ck;
  ck.meta["problem"] = problem_name(policy.problem);
  ck.meta["mode"] = policy.mode == PolicyMode::kHwasp      ? "hwasp"
                    : policy.mode == PolicyMode::kMinimal  ? "minimal"
                                                           : "comp-only";
  std::string hidden;
  for (size_t i = 1; i + 1 < policy.comp.widths.size(); ++i) {
    if (!hidden.empty()) hidden += ',';
    hidden += std::to_string(policy.comp.widths[i]);
  }
  ck.meta["hidden"] = hidden;
  ck.meta["n_hw"] = std::to_string(policy.n_hw_params());
  for (const auto& [k, v] : extra_meta) ck.meta[k] = v;

  auto& mutable_policy = const_cast<JointPolicy&>(policy);
  for (ParamSlot& slot : mutable_policy.param_slots()) ck.arrays.emplace_back(slot.name, *slot.arr);
  return ck;
}

JointPolicy policy_from_checkpoint(const Checkpoint& ck) {
  PolicySetup setup;
  setup.hidden.clear();
  std::istringstream hs(ck.meta_or("hidden", ""));
  std::string tok;
  while (std::getline(hs, tok, ',')) {
    if (!tok.empty()) setup.hidden.push_back(std::stoi(tok));
  }
  setup.n_hw_params = std::stoi(ck.meta_or("n_hw", "0"));
  if (setup.n_hw_params <= 0) setup.n_hw_params = 1;
  setup.search_range = ck.meta_or("search_range", "large");
  setup.init_total_stiffness = 1.0;  // placeholder; arrays are overwritten below

  const Problem problem = problem_from_name(ck.meta_or("problem", "toy-stiffness"));
  const std::string mode_s = ck.meta_or("mode", "hwasp");
  const PolicyMode mode = mode_s == "hwasp"     ? PolicyMode::kHwasp
                          : mode_s == "minimal" ? PolicyMode::kMinimal
                                                : PolicyMode::kCompOnly;
  Rng rng(0);
  JointPolicy policy = make_policy(problem, mode, setup, rng);
  for (ParamSlot& slot : policy.param_slots()) {
    const Array* stored = ck.find(slot.name);
    if (!stored)
      throw std::runtime_error("policy_from_checkpoint: missing array " + slot.name);
    if (!(stored->shape == slot.arr->shape))
      throw std::runtime_error("policy_from_checkpoint: shape mismatch for " + slot.name +
                               " (" + stored->shape.str() + " vs " + slot.arr->shape.str() + ")");
    *slot.arr = *stored;
  }
  return policy;
}

}  // namespace hwopt
