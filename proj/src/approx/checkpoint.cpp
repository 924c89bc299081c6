#include "rcppo/approx.hpp"

#include "json.hpp"

#include <cstdio>

#include <fstream>

namespace rcppo::approx {

using nlohmann::json;

void Checkpoint::save(const std::string& path) const {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = kind;
  j["config_hash"] = config_hash;
  j["meta"] = meta;
  j["arrays"] = json::array();
  for (const auto& a : arrays)
    j["arrays"].push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}, {"data", a.data}});
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  os << j.dump() << '\n';
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ContractError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kFormatVersion)
    throw ContractError("checkpoint " + path + " has an unsupported format version");
  Checkpoint c;
  c.kind = j.at("kind").get<std::string>();
  c.config_hash = j.at("config_hash").get<std::string>();
  c.meta = j.value("meta", std::map<std::string, std::string>{});
  for (const auto& a : j.at("arrays")) {
    NamedArray na{a.at("name").get<std::string>(), a.at("rows").get<int>(), a.at("cols").get<int>(),
                  a.at("data").get<std::vector<double>>()};
    if (static_cast<long>(na.data.size()) != static_cast<long>(na.rows) * na.cols)
      throw ContractError("checkpoint array " + na.name + " has inconsistent size");
    c.arrays.push_back(std::move(na));
  }
  return c;
}

namespace {

void append_arrays(const Mlp& mlp, const Vec& params, const std::string& prefix, std::vector<NamedArray>& out) {
  for (int l = 0; l < mlp.num_layers(); ++l) {
    const int r = mlp.out_dim(l), c = mlp.in_dim(l);
    const double* w = params.data() + mlp.weight_offset(l);
    const double* b = params.data() + mlp.bias_offset(l);
    out.push_back({prefix + "layer" + std::to_string(l) + ".weight", r, c, std::vector<double>(w, w + r * c)});
    out.push_back({prefix + "layer" + std::to_string(l) + ".bias", r, 1, std::vector<double>(b, b + r)});
  }
}

const NamedArray& find(const Checkpoint& ckpt, const std::string& name, int rows, int cols) {
  for (const auto& a : ckpt.arrays) {
    if (a.name != name) continue;
    if (a.rows != rows || a.cols != cols)
      throw ContractError("checkpoint array " + name + " has shape " + std::to_string(a.rows) + "x" +
                          std::to_string(a.cols) + ", model expects " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    return a;
  }
  throw ContractError("checkpoint is missing array " + name);
}

void load_mlp(const Checkpoint& ckpt, const Mlp& mlp, const std::string& prefix, Vec& params) {
  int expected = 0;
  for (const auto& a : ckpt.arrays)
    if (a.name.rfind(prefix, 0) == 0) ++expected;
  if (expected != 2 * mlp.num_layers())
    throw ContractError("checkpoint has " + std::to_string(expected / 2) + " layers under '" + prefix +
                        "', model expects " + std::to_string(mlp.num_layers()));
  for (int l = 0; l < mlp.num_layers(); ++l) {
    const int r = mlp.out_dim(l), c = mlp.in_dim(l);
    const auto& w = find(ckpt, prefix + "layer" + std::to_string(l) + ".weight", r, c);
    const auto& b = find(ckpt, prefix + "layer" + std::to_string(l) + ".bias", r, 1);
    std::copy(w.data.begin(), w.data.end(), params.data() + mlp.weight_offset(l));
    std::copy(b.data.begin(), b.data.end(), params.data() + mlp.bias_offset(l));
  }
}

}  // namespace

Checkpoint to_checkpoint(const GaussianPolicy& policy, const std::string& config_hash) {
  Checkpoint c;
  c.kind = "policy";
  c.config_hash = config_hash;
  append_arrays(policy.trunk(), policy.params(), "trunk.", c.arrays);
  const Vec ls = policy.log_std();
  c.arrays.push_back({"log_std", static_cast<int>(ls.size()), 1, std::vector<double>(ls.data(), ls.data() + ls.size())});
  c.meta["action_dim"] = std::to_string(policy.action_dim());
  return c;
}

Checkpoint to_checkpoint(const ValueModel& value, const std::string& kind, const std::string& config_hash) {
  Checkpoint c;
  c.kind = kind;
  c.config_hash = config_hash;
  append_arrays(value.net(), value.params(), "net.", c.arrays);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value.scale());
  c.meta["scale"] = buf;
  return c;
}

void load_into(const Checkpoint& ckpt, GaussianPolicy& policy) {
  if (ckpt.kind != "policy") throw ContractError("checkpoint kind '" + ckpt.kind + "' is not a policy");
  Vec p = policy.params();
  load_mlp(ckpt, policy.trunk(), "trunk.", p);
  const auto& ls = find(ckpt, "log_std", policy.action_dim(), 1);
  std::copy(ls.data.begin(), ls.data.end(), p.data() + policy.trunk().num_params());
  policy.params() = p;
}

void load_into(const Checkpoint& ckpt, ValueModel& value) {
  Vec p = value.params();
  load_mlp(ckpt, value.net(), "net.", p);
  value.params() = p;
}

}  // namespace rcppo::approx
